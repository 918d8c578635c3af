"""Aging statistics and their closed-form limits.

The two-time "no jump" correlation of level j,

    Pi_j(t, t_w) = P(no jump of Z_j during [t_w, t_w + t]),

converges in the aging regimes to a function of theta = t/t_w alone:

    f_j(theta) = P(B_1 * ... * B_j > theta / (1 + theta)),

with independent B_i ~ Beta(1 - alpha_i, alpha_i).  This module provides
Monte Carlo estimators of Pi_j and related aging functions over any
trajectory sampler, the closed-form limits by quadrature and by Monte
Carlo, the one-level renewal law of the rescaled age and overshoot of a
stable subordinator's range, and the Laplace-exponent diagnostic of the
heavy-tailed sum rescaling (limit Gamma(1 - alpha) * theta**alpha under
this toolkit's subordinator normalisation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import betainc as _betainc

from .streams import StableSpec

__all__ = ["AgingEstimate", "DLSample", "DLResult", "estimate_pi", "estimate_r",
           "estimate_novelty", "pi_from_z_samples", "f_limit", "dl_no_jump_prob",
           "dl_empirical", "laplace_exponent", "incomplete_beta", "ks_distance",
           "ks_two_sample", "beta_cdf"]


@dataclass(frozen=True)
class AgingEstimate:
    """Monte Carlo estimate with its standard error."""

    value: float
    stderr: float
    replicas: int
    estimator_kind: str

    def agrees_with(self, target: float, sigmas: float = 3.0,
                    extra_tol: float = 0.0) -> bool:
        return abs(self.value - target) <= sigmas * self.stderr + extra_tol


def _mc_estimate(samples: np.ndarray, kind: str) -> AgingEstimate:
    n = samples.size
    value = float(samples.mean())
    stderr = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return AgingEstimate(value, stderr, n, kind)


def pi_from_z_samples(z: np.ndarray, t: float) -> AgingEstimate:
    """No-jump probability from Z_j(t_w) marginal samples.

    Uses the memorylessness identity: given Z_j(t_w) = z, the residual time
    until a level-<=j jump is exponential with mean z for the full-time
    dynamics, so Pi_j(t, t_w) = E exp(-t / Z_j(t_w)).
    """
    return _mc_estimate(np.exp(-t / np.asarray(z, dtype=float)), "exponential_functional")


def estimate_pi(runner, level: int, t_w: float, t: float, replicas: int,
                kind: str = "exponential_functional") -> AgingEstimate:
    """Estimate Pi_level(t, t_w) over ``runner``.

    ``runner(i)`` returns the trajectory of replica i;
    kind "indicator" evaluates the no-jump event on [t_w, t_w + t] (needs
    horizon >= t_w + t), kind "exponential_functional" averages
    exp(-t / Z_level(t_w)) (needs horizon > t_w); the two agree for
    full-time dynamics.
    """
    if t <= 0.0 or t_w < 0.0 or replicas < 1:
        raise ValueError("need t > 0, t_w >= 0, replicas >= 1")
    vals = np.empty(replicas)
    if kind == "indicator":
        for i in range(replicas):
            traj = runner(i)
            vals[i] = 1.0 if traj.no_jump(level, t_w, t) else 0.0
    elif kind == "exponential_functional":
        for i in range(replicas):
            vals[i] = math.exp(-t / runner(i).z_at(t_w, level))
    else:
        raise ValueError(f"unknown estimator kind {kind!r}")
    return _mc_estimate(vals, kind)


def estimate_r(runner, level: int, t_w: float, t: float, replicas: int) -> AgingEstimate:
    """P(state of level ``level`` is the same at t_w and t_w + t), by
    label-prefix equality at the two times.  No jump implies equal labels,
    so this dominates the indicator estimate of Pi replica-wise."""
    if t <= 0.0 or t_w < 0.0 or replicas < 1:
        raise ValueError("need t > 0, t_w >= 0, replicas >= 1")
    vals = np.empty(replicas)
    c = level - 1
    for i in range(replicas):
        traj = runner(i)
        i0 = traj.index_at(t_w, allow_end=True)
        i1 = traj.index_at(t_w + t, allow_end=True)
        vals[i] = 1.0 if traj.labels[i1, c] == traj.labels[i0, c] else 0.0
    return _mc_estimate(vals, "indicator")


def estimate_novelty(runner, level: int, t_w: float, t: float,
                     replicas: int) -> AgingEstimate:
    """P(max of Z_level over [0, t_w] < max over [t_w, t_w + t])."""
    if t <= 0.0 or t_w <= 0.0 or replicas < 1:
        raise ValueError("need t > 0, t_w > 0, replicas >= 1")
    vals = np.empty(replicas)
    for i in range(replicas):
        traj = runner(i)
        past = traj.window_max(level, 0.0, t_w)
        future = traj.window_max(level, t_w, t_w + t)
        vals[i] = 1.0 if past < future else 0.0
    return _mc_estimate(vals, "indicator")


# ---------------------------------------------------------------------------
# special functions and goodness-of-fit statistics
# ---------------------------------------------------------------------------

def incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta I_x(a, b), exact to ~1e-14."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("shape parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    return float(_betainc(a, b, x))


def beta_cdf(a: float, b: float):
    """CDF of Beta(a, b) as a vectorised callable."""
    def cdf(x):
        return _betainc(a, b, np.clip(x, 0.0, 1.0))
    return cdf


def ks_distance(samples, cdf) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("need at least one sample")
    f = np.asarray(cdf(x), dtype=float)
    grid = np.arange(1, n + 1) / n
    return float(np.maximum(grid - f, f - (grid - 1.0 / n)).max())


def ks_two_sample(a, b) -> float:
    """Two-sample sup distance between empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("need nonempty samples")
    allv = np.concatenate([a, b])
    fa = np.searchsorted(a, allv, side="right") / a.size
    fb = np.searchsorted(b, allv, side="right") / b.size
    return float(np.abs(fa - fb).max())


# ---------------------------------------------------------------------------
# closed-form limits
# ---------------------------------------------------------------------------

def _f_quadrature(alphas: tuple[float, ...], theta: float, tol: float) -> float:
    """P(prod B_i > theta/(1+theta)) by the nested one-variable recursion.

    Conditioning on the first level's rescaled age y gives

        f_{1..j}(theta) = (sin(pi a1)/pi) * Int_0^1 f_{2..j}(theta / y)
                          * (theta + y)^(-a1) * (1 - y)^(a1 - 1) dy,

    with the level count dropping by one inside the integral.  The endpoint
    substitution y = 1 - v^(1/a1) removes the (1 - y)^(a1 - 1) singularity.
    """
    a1 = alphas[0]
    if len(alphas) == 1:
        return 1.0 - incomplete_beta(1.0 - a1, a1, theta / (1.0 + theta))
    rest = alphas[1:]

    def integrand(v):
        y = 1.0 - v ** (1.0 / a1)
        if y <= 0.0:
            return 0.0
        inner = _f_quadrature(rest, theta / y, tol * 0.1)
        return inner * (theta + y) ** (-a1)

    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
    return math.sin(math.pi * a1) / math.pi / a1 * val


def f_limit(alphas, level: int, theta: float, method: str = "quadrature",
            tol: float = 1e-8, stream: np.random.Generator | None = None,
            mc_samples: int = 10 ** 6) -> float:
    """Limiting no-jump probability f_level(theta) for tail indices ``alphas``.

    theta is the time ratio t / t_w.  Quadrature uses the incomplete-beta
    closed form at one level and the nested recursion deeper; Monte Carlo
    draws products of Beta(1 - alpha_i, alpha_i) variates.
    """
    alphas = tuple(float(a) for a in alphas)
    if not 1 <= level <= len(alphas):
        raise ValueError("level out of range")
    if theta < 0.0:
        raise ValueError("theta must be nonnegative")
    if theta == 0.0:
        return 1.0
    use = alphas[:level]
    if method == "quadrature":
        return min(1.0, max(0.0, _f_quadrature(use, theta, tol)))
    if method == "monte_carlo":
        if stream is None:
            raise ValueError("monte_carlo needs a stream")
        thr = theta / (1.0 + theta)
        hits = 0
        done = 0
        chunk = min(mc_samples, 10 ** 6)
        while done < mc_samples:
            m = min(chunk, mc_samples - done)
            prod = np.ones(m)
            for a in use:
                prod *= stream.beta(1.0 - a, a, m)
            hits += int((prod > thr).sum())
            done += m
        return hits / mc_samples
    raise ValueError(f"unknown method {method!r}")


def dl_no_jump_prob(alpha: float, theta: float) -> float:
    """One-level no-jump limit by direct quadrature of the renewal law:
    (sin(pi a)/pi) * Int_0^1 (theta + u)^(-a) (1 - u)^(a-1) du.

    Identically equal to f_limit(alpha, 1, theta); kept as an independent
    evaluation route (no incomplete beta involved).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if theta < 0.0:
        raise ValueError("theta must be nonnegative")

    def integrand(v):
        u = 1.0 - v ** (1.0 / alpha)
        return (theta + u) ** (-alpha)

    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=200)
    return math.sin(math.pi * alpha) / math.pi / alpha * val


# ---------------------------------------------------------------------------
# Dynkin-Lamperti renewal statistics of a subordinator range
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DLSample:
    """Rescaled age y = (t - last range point <= t)/t and overshoot
    z = (first range point > t - t)/t of one replica."""

    y: float
    z: float


@dataclass(frozen=True)
class DLResult:
    y: np.ndarray
    z: np.ndarray
    alpha: float
    eps: float
    t: float
    ks_age: float
    theta_grid: tuple[float, ...]
    overshoot_freq: tuple[float, ...]
    overshoot_target: tuple[float, ...]
    resolution: float

    def samples(self):
        return [DLSample(float(y), float(z)) for y, z in zip(self.y, self.z)]


def _band_rate(alpha: float, lo: float, hi: float) -> float:
    """Jump intensity per unit length for sizes in (lo, hi]."""
    top = 0.0 if math.isinf(hi) else hi ** -alpha
    return (lo ** -alpha - top) / math.gamma(1.0 - alpha)


def _band_sizes(alpha: float, lo: float, hi: float,
                stream: np.random.Generator, m: int) -> np.ndarray:
    """Iid jump sizes conditioned to (lo, hi] (hi may be inf)."""
    top = 0.0 if math.isinf(hi) else hi ** -alpha
    u = stream.random(m)
    return (lo ** -alpha - u * (lo ** -alpha - top)) ** (-1.0 / alpha)


def _dropped_rate(alpha: float, eps: float) -> float:
    return alpha * eps ** (1.0 - alpha) / ((1.0 - alpha) * math.gamma(1.0 - alpha))


def _dl_one_replica(alpha: float, scales: list[float], t: float,
                    stream: np.random.Generator) -> tuple[float, float]:
    """(g, d) = (last range point <= t, first range point > t) of one
    truncated-and-refined subordinator ladder.

    The coarse ladder keeps jumps above scales[0] and carries the dropped
    mass as a linear drift.  Whenever a crossing of t is located, the gap
    that straddles it is re-simulated with the next band of smaller jumps
    (plus the correspondingly smaller drift), recursively down the scale
    list, so the statistics near t are resolved at scales[-1] rather than
    scales[0].  If a refined gap turns out not to cross t after all (the
    drift over-estimated the small-jump sum), the scan resumes after the
    gap.  At the deepest scale a crossing inside a drift stretch reports
    g = d = t.
    """
    eps0 = scales[0]
    rate0 = _band_rate(alpha, eps0, math.inf)
    c0 = _dropped_rate(alpha, eps0)
    block = 64
    r, v = 0.0, 0.0
    while True:
        # coarse forward scan
        gaps = stream.standard_exponential(block) / rate0
        sizes = _band_sizes(alpha, eps0, math.inf, stream, block)
        rs = r + np.cumsum(gaps)
        posts = v + c0 * (rs - r) + np.cumsum(sizes)
        over = np.flatnonzero(posts > t)
        if over.size == 0:
            r, v = float(rs[-1]), float(posts[-1])
            continue
        j = int(over[0])
        pre_cross = float(posts[j] - sizes[j])
        post_cross = float(posts[j])
        gap = (float(rs[j - 1]) if j else r, float(posts[j - 1]) if j else v,
               float(rs[j]), float(sizes[j]))
        resumed = False
        for level in range(1, len(scales)):
            lo, hi = scales[level], scales[level - 1]
            lam = _band_rate(alpha, lo, hi)
            c = _dropped_rate(alpha, lo)
            r0, v0, r1, G = gap
            m = int(stream.poisson(lam * (r1 - r0)))
            locs = np.empty(m + 1)
            locs[:m] = r0 + (r1 - r0) * np.sort(stream.random(m))
            locs[m] = r1
            szs = np.empty(m + 1)
            szs[:m] = _band_sizes(alpha, lo, hi, stream, m)
            szs[m] = G
            posts = v0 + c * (locs - r0) + np.cumsum(szs)
            over = np.flatnonzero(posts > t)
            if over.size == 0:
                # the refined gap does not cross after all; resume the scan
                r, v = float(r1), float(posts[-1])
                resumed = True
                break
            j = int(over[0])
            pre_cross = float(posts[j] - szs[j])
            post_cross = float(posts[j])
            gap = (float(locs[j - 1]) if j else r0,
                   float(posts[j - 1]) if j else v0,
                   float(locs[j]), float(szs[j]))
        if resumed:
            continue
        if pre_cross > t:
            return t, t  # crossed inside a drift stretch at the finest scale
        return pre_cross, post_cross


def dl_empirical(alpha: float, eps: float, t: float, replicas: int,
                 stream: np.random.Generator,
                 theta_grid=(0.5, 1.0, 2.0), refine_ratio: float = 10 ** -1.5,
                 refine_depth: int = 3) -> DLResult:
    """Empirical age/overshoot law of a truncated stable subordinator range.

    Simulates the value ladder (cumulative sums of truncated jumps, dropped
    mass carried as drift, multiscale refinement near the readout point;
    see :func:`_dl_one_replica`) to the first passage of ``t`` and records
    the rescaled age y = (t - last point <= t) / t and overshoot
    z = (first point > t, minus t) / t.  The age is tested against
    Beta(1 - alpha, alpha) and the overshoot tail P(z > theta) against
    :func:`dl_no_jump_prob`.

    Requires t >= 100 * eps so the coarse ladder resolves the passage; the
    ``resolution`` field reports the relative bias scale
    (eps_finest / t)^(1 - alpha) of the refined statistics.
    """
    if replicas < 1:
        raise ValueError("need replicas >= 1")
    if t < 100.0 * eps:
        raise ValueError(f"t={t} is below the resolution floor 100*eps={100 * eps}")
    StableSpec(alpha, eps)  # parameter validation
    scales = [eps * refine_ratio ** i for i in range(refine_depth + 1)]

    ys = np.empty(replicas)
    zs = np.empty(replicas)
    for i in range(replicas):
        g, d = _dl_one_replica(alpha, scales, t, stream)
        ys[i] = (t - g) / t
        zs[i] = (d - t) / t

    ks_age = ks_distance(ys, beta_cdf(1.0 - alpha, alpha))
    freq = tuple(float((zs > th).mean()) for th in theta_grid)
    target = tuple(dl_no_jump_prob(alpha, th) for th in theta_grid)
    return DLResult(ys, zs, alpha, eps, t, ks_age, tuple(theta_grid),
                    freq, target, resolution=(scales[-1] / t) ** (1.0 - alpha))


# ---------------------------------------------------------------------------
# Laplace-exponent diagnostic
# ---------------------------------------------------------------------------

def laplace_exponent(tau_sample, n: int, nu: float, theta: float,
                     alpha: float) -> float:
    """phi(theta) = n^-(1-nu) * sum_{i<=n} (1 - exp(-theta tau_i / n^(nu/alpha))),
    evaluated exactly on the first n entries of ``tau_sample``.

    For depths with tail index alpha this converges (for almost every
    sample) to Gamma(1 - alpha) * theta**alpha under the exact-Pareto law
    used here; ``alpha`` enters only through the rescaling exponent.
    """
    if not 0.0 < nu < 1.0:
        raise ValueError("nu must lie in (0, 1)")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if theta < 0.0:
        raise ValueError("theta must be nonnegative")
    tau = np.asarray(tau_sample, dtype=float)
    if tau.size < n:
        raise ValueError(f"need at least n={n} depths, got {tau.size}")
    scale = float(n) ** (nu / alpha)
    return float(n ** (-(1.0 - nu)) * (1.0 - np.exp(-theta * tau[:n] / scale)).sum())
