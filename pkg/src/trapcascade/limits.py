"""Limiting dynamics and rescaling regimes.

Two limit processes arise, both cascading evolutions over families of
truncated stable-subordinator jumps:

* the revisiting ("K") form: the level-j function under a parent is a
  superposition of unit-rate Poisson point processes, one per atom of an
  alpha_j-subordinator restricted to [0, 1], each point carrying its atom's
  size, so states are revisited;
* the aging form: the level-j function is the subordinator path itself on
  [0, inf), so every jump is a fresh state.

Three rescalings of the finite-volume tree model are supported, each with a
space-time factor c so that the rescaled process is t -> Z(c t) / c:

* ergodic: fine-tuned volumes M_1 = n, M_j = ceil(n^(alpha_j/alpha_1)),
  factor n^(1/alpha_1);
* polynomial aging: same volumes, factor n^beta with 0 < beta < 1/alpha_1;
* order-1 aging: volumes fixed and taken large first, factor m.

Argument rescalings of the jump functions never change trajectories, so
providers are built unscaled and only the factor is handed to consumers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bdtm import BdtmProvider, Environment, VolumeSpec, bdtm_provider
from .jumps import JumpFunction
from .streams import PathKey, StableSpec, TailLaw, pareto_array, path_stream, \
    stable_jump_set

__all__ = ["RegimeSpec", "KProcessProvider", "AgingProcessProvider",
           "IidDepthProvider", "k_process_provider", "aging_process_provider",
           "iid_depth_provider", "rescaled_bdtm", "fine_tuned_volumes",
           "fine_tuning_deviation", "z1_first_passage_pool",
           "z1_first_passage_fresh", "z1_bdtm_rescaled", "z1_k_process",
           "z1_aging_process"]

_TAG_ATOMS = 11
_TAG_POINTS = 12
_TAG_SUBORDINATOR = 13
_TAG_IID_TAU = 14
_TAG_POOL = 15
_TAG_DYNAMICS = 16


# ---------------------------------------------------------------------------
# regimes
# ---------------------------------------------------------------------------

def fine_tuned_volumes(alphas, n: int) -> tuple[int, ...]:
    """M_1 = n and M_j = ceil(n^(alpha_j/alpha_1)), making M_j^(1/alpha_j)
    constant in j up to integer rounding."""
    a1 = alphas[0]
    return tuple(int(math.ceil(n ** (a / a1) - 1e-9)) for a in alphas)


def fine_tuning_deviation(alphas, n: int) -> tuple[float, float]:
    """(worst relative deviation of M_j^(1/alpha_j) from n^(1/alpha_1),
    exact ceiling bound max_j (1 + n^(-alpha_j/alpha_1))^(1/alpha_j) - 1)."""
    vols = fine_tuned_volumes(alphas, n)
    target = n ** (1.0 / alphas[0])
    dev = max(abs(m ** (1.0 / a) - target) / target for m, a in zip(vols, alphas))
    bound = max((1.0 + n ** (-a / alphas[0])) ** (1.0 / a) - 1.0 for a in alphas)
    return dev, bound


@dataclass(frozen=True)
class RegimeSpec:
    """One of the three rescaling regimes.

    kind "ergodic": parameter n, factor n^(1/alpha_1), fine-tuned volumes.
    kind "poly_aging": parameters n and beta in (0, 1/alpha_1), factor
    n^beta, fine-tuned volumes, level-j argument compression n^chi_j with
    chi_j = alpha_j (1/alpha_1 - beta) (trajectory-neutral).
    kind "order1": parameter m and explicit volumes, factor m.
    """

    kind: str
    n: int | None = None
    beta: float | None = None
    m: int | None = None
    volumes: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("ergodic", "poly_aging", "order1"):
            raise ValueError(f"unknown regime kind {self.kind!r}")
        if self.kind in ("ergodic", "poly_aging"):
            if self.n is None or self.n < 1:
                raise ValueError("ergodic/poly_aging regimes need n >= 1")
        if self.kind == "poly_aging" and self.beta is None:
            raise ValueError("poly_aging regime needs beta")
        if self.kind == "order1":
            if self.m is None or self.m <= 0 or not self.volumes:
                raise ValueError("order1 regime needs m > 0 and explicit volumes")
            object.__setattr__(self, "volumes", tuple(int(v) for v in self.volumes))

    @classmethod
    def ergodic(cls, n: int) -> "RegimeSpec":
        return cls("ergodic", n=n)

    @classmethod
    def poly_aging(cls, n: int, beta: float) -> "RegimeSpec":
        return cls("poly_aging", n=n, beta=beta)

    @classmethod
    def order1(cls, m: float, volumes) -> "RegimeSpec":
        return cls("order1", m=m, volumes=tuple(volumes))

    def volumes_for(self, alphas) -> tuple[int, ...]:
        if self.kind == "order1":
            if len(self.volumes) != len(alphas):
                raise ValueError("order1 volumes must match the number of levels")
            return self.volumes
        return fine_tuned_volumes(alphas, self.n)

    def factor(self, alphas) -> float:
        if self.kind == "ergodic":
            return float(self.n) ** (1.0 / alphas[0])
        if self.kind == "poly_aging":
            if not 0.0 < self.beta < 1.0 / alphas[0]:
                raise ValueError(f"beta must lie in (0, 1/alpha_1), got {self.beta}")
            return float(self.n) ** self.beta
        return float(self.m)

    def chi(self, alphas) -> tuple[float, ...]:
        """Level-j argument exponents of the poly_aging regime."""
        if self.kind != "poly_aging":
            raise ValueError("chi is defined for the poly_aging regime only")
        if not 0.0 < self.beta < 1.0 / alphas[0]:
            raise ValueError(f"beta must lie in (0, 1/alpha_1), got {self.beta}")
        return tuple(a * (1.0 / alphas[0] - self.beta) for a in alphas)


def rescaled_bdtm(alphas, regime: RegimeSpec, seed: int,
                  dynamics_seed: int | None = None):
    """Finite-volume provider for a regime plus its space-time factor.

    Consumers read the rescaled process as Z~_j(t) = Z_j(factor * t) / factor.
    Environment depths are keyed by ``seed``; the dynamics randomness by
    ``dynamics_seed`` (defaults to ``seed``; vary it across replicas to keep
    the environment quenched).
    """
    alphas = tuple(float(a) for a in alphas)
    vols = regime.volumes_for(alphas)
    env = Environment(VolumeSpec(vols, alphas), seed)
    provider = bdtm_provider(env, seed if dynamics_seed is None else dynamics_seed)
    return provider, regime.factor(alphas)


# ---------------------------------------------------------------------------
# limit-process providers
# ---------------------------------------------------------------------------

class AgingProcessProvider:
    """Cascading family whose level-j functions are truncated
    alpha_j-subordinator paths on [0, inf), one independent path per parent
    jump, extended lazily on demand."""

    def __init__(self, alphas, eps: float, seed: int, initial_window: float = 1.0):
        self.alphas = tuple(float(a) for a in alphas)
        self.eps = float(eps)
        self.seed = int(seed)
        self.levels = len(self.alphas)
        self.initial_window = float(initial_window)
        self._functions: dict[tuple[int, tuple[int, ...]], JumpFunction] = {}

    def get(self, level: int, parent: tuple[int, ...]) -> JumpFunction:
        parent = tuple(int(i) for i in parent)
        if not 1 <= level <= self.levels or len(parent) != level - 1:
            raise ValueError("parent path length must equal level - 1")
        key = (level, parent)
        fn = self._functions.get(key)
        if fn is None:
            stream = path_stream(self.seed, PathKey((level, *parent), _TAG_SUBORDINATOR))
            spec = StableSpec(self.alphas[level - 1], self.eps)
            fn = stable_jump_set(spec, (0.0, self.initial_window), stream)
            self._functions[key] = fn
        return fn


class KProcessProvider:
    """Cascading family whose level-j function under a parent superposes
    unit-rate Poisson revisits of the atoms of an alpha_j-subordinator
    restricted to [0, 1] (atom sizes above eps)."""

    def __init__(self, alphas, eps: float, seed: int, initial_window: float = 1.0):
        self.alphas = tuple(float(a) for a in alphas)
        self.eps = float(eps)
        self.seed = int(seed)
        self.levels = len(self.alphas)
        self.initial_window = float(initial_window)
        self._functions: dict[tuple[int, tuple[int, ...]], JumpFunction] = {}
        self._atoms: dict[tuple[int, tuple[int, ...]], np.ndarray] = {}

    def atom_sizes(self, level: int, parent: tuple[int, ...]) -> np.ndarray:
        key = (level, tuple(parent))
        atoms = self._atoms.get(key)
        if atoms is None:
            stream = path_stream(self.seed, PathKey((level, *key[1]), _TAG_ATOMS))
            spec = StableSpec(self.alphas[level - 1], self.eps)
            atoms = stable_jump_set(spec, (0.0, 1.0), stream).sizes.copy()
            self._atoms[key] = atoms
        return atoms

    def get(self, level: int, parent: tuple[int, ...]) -> JumpFunction:
        parent = tuple(int(i) for i in parent)
        if not 1 <= level <= self.levels or len(parent) != level - 1:
            raise ValueError("parent path length must equal level - 1")
        key = (level, parent)
        fn = self._functions.get(key)
        if fn is None:
            atoms = self.atom_sizes(level, parent)
            if atoms.size == 0:
                # degenerate realisation: no atoms above eps, nothing ever jumps
                fn = JumpFunction([], [], generated_up_to=math.inf)
            else:
                stream = path_stream(self.seed, PathKey((level, *parent), _TAG_POINTS))
                rate = float(atoms.size)
                window = self.initial_window

                def _generate(length: float):
                    m = stream.poisson(rate * length)
                    offs = np.sort(length * stream.random(m))
                    while m > 1 and np.any(np.diff(offs) == 0.0):
                        offs = np.sort(length * stream.random(m))
                    sizes = atoms[stream.integers(0, atoms.size, m)]
                    return offs, sizes

                locs, sizes = _generate(window)

                def _extend(jf: JumpFunction, target: float) -> None:
                    lo = jf.generated_up_to
                    hi = lo + max(window, target - lo)
                    offs, sz = _generate(hi - lo)
                    jf._append(lo + offs, sz, hi)

                fn = JumpFunction(locs, sizes, generated_up_to=window, extend=_extend)
            self._functions[key] = fn
        return fn


class IidDepthProvider:
    """Unit-spaced functions whose sizes are fresh iid Pareto depths.

    This is the infinite-volume limit of the unit-spaced finite form: with
    volumes going to infinity, uniform label collisions vanish and the
    label-value sequence becomes iid.
    """

    def __init__(self, alphas, seed: int, initial_block: int = 64):
        self.alphas = tuple(float(a) for a in alphas)
        self.seed = int(seed)
        self.levels = len(self.alphas)
        self.initial_block = int(initial_block)
        self._functions: dict[tuple[int, tuple[int, ...]], JumpFunction] = {}

    def get(self, level: int, parent: tuple[int, ...]) -> JumpFunction:
        parent = tuple(int(i) for i in parent)
        if not 1 <= level <= self.levels or len(parent) != level - 1:
            raise ValueError("parent path length must equal level - 1")
        key = (level, parent)
        fn = self._functions.get(key)
        if fn is None:
            stream = path_stream(self.seed, PathKey((level, *parent), _TAG_IID_TAU))
            law = TailLaw(self.alphas[level - 1])
            first = pareto_array(law, stream, self.initial_block)

            def _extend(jf: JumpFunction, target: float) -> None:
                have = jf.jump_count
                need = max(int(math.ceil(target)) - have, have)
                locs = np.arange(have + 1, have + need + 1, dtype=float)
                jf._append(locs, pareto_array(law, stream, need), float(have + need))

            fn = JumpFunction(np.arange(1, first.size + 1, dtype=float), first,
                              generated_up_to=float(first.size), extend=_extend)
            self._functions[key] = fn
        return fn


def k_process_provider(alphas, eps: float, seed: int) -> KProcessProvider:
    return KProcessProvider(alphas, eps, seed)


def aging_process_provider(alphas, eps: float, seed: int) -> AgingProcessProvider:
    return AgingProcessProvider(alphas, eps, seed)


def iid_depth_provider(alphas, seed: int) -> IidDepthProvider:
    return IidDepthProvider(alphas, seed)


# ---------------------------------------------------------------------------
# vectorised level-1 marginal samplers
# ---------------------------------------------------------------------------
# The one-level full-time dynamics visits states in a fixed order, staying
# an exponential time of mean gamma at a state of depth gamma; Z_1(T) is the
# depth of the state occupied at the first passage of T.  These samplers
# draw that marginal directly, vectorised across replicas; they are tested
# against the general trajectory engine for equality in law.

def _first_passage(draw_block, T: float, n: int, chunk: int):
    """Generic first-passage scan.  ``draw_block(rows, c)`` returns the next
    (len(rows), c) block of visit depths for the given active replica rows."""
    out = np.empty(n)
    t_acc = np.zeros(n)
    active = np.arange(n)
    guard = 0
    while active.size:
        sizes, e = draw_block(active, chunk)
        dt = sizes * e
        cum = dt.cumsum(axis=1) + t_acc[active, None]
        passed = cum > T
        hit = passed.any(axis=1)
        rows = np.flatnonzero(hit)
        if rows.size:
            first = passed[rows].argmax(axis=1)
            out[active[rows]] = sizes[rows, first]
        cold = np.flatnonzero(~hit)
        t_acc[active[cold]] += dt[cold].sum(axis=1)
        active = active[cold]
        guard += 1
        if guard > 100_000:
            raise RuntimeError("first-passage scan failed to terminate")
    return out


def z1_first_passage_pool(pool: np.ndarray, T: float, stream: np.random.Generator,
                          n: int, chunk: int = 64) -> np.ndarray:
    """Z_1(T) samples when visit depths are drawn uniformly from ``pool``
    (finite-volume and revisiting dynamics).  One shared pool, n replicas."""
    pool = np.asarray(pool, dtype=float)
    if pool.size == 0:
        raise ValueError("pool must be nonempty")

    def draw(rows, c):
        u = stream.integers(0, pool.size, (rows.size, c))
        return pool[u], stream.standard_exponential((rows.size, c))

    return _first_passage(draw, T, n, chunk)


def z1_first_passage_fresh(size_sampler, T: float, stream: np.random.Generator,
                           n: int, chunk: int = 64) -> np.ndarray:
    """Z_1(T) samples when every visit is a fresh depth from ``size_sampler``
    (non-revisiting dynamics); ``size_sampler(stream, shape)`` -> depths."""

    def draw(rows, c):
        return (size_sampler(stream, (rows.size, c)),
                stream.standard_exponential((rows.size, c)))

    return _first_passage(draw, T, n, chunk)


def z1_bdtm_rescaled(alpha: float, regime: RegimeSpec, t: float, seed: int,
                     replicas: int, fresh_environment: bool,
                     env_block: int = 256) -> np.ndarray:
    """Samples of the rescaled one-level finite model Z~_1(t).

    With ``fresh_environment`` each replica draws its own depth pool (the
    law integrated over environments); otherwise one quenched pool is shared.
    """
    regime_vols = regime.volumes_for((alpha,))
    pool_size = regime_vols[0]
    factor = regime.factor((alpha,))
    law = TailLaw(alpha)
    if not fresh_environment:
        pool = pareto_array(law, path_stream(seed, PathKey((), _TAG_POOL)), pool_size)
        pool = pool / factor
        stream = path_stream(seed, PathKey((), _TAG_DYNAMICS))
        return z1_first_passage_pool(pool, t, stream, replicas)

    out = np.empty(replicas)
    done = 0
    block_id = 0
    while done < replicas:
        b = min(env_block, replicas - done)
        stream = path_stream(seed, PathKey((block_id,), _TAG_DYNAMICS))
        pools = pareto_array(law, stream, (b, pool_size)) / factor

        def draw(rows, c):
            u = stream.integers(0, pool_size, (rows.size, c))
            return (pools[rows[:, None], u],
                    stream.standard_exponential((rows.size, c)))

        out[done:done + b] = _first_passage(draw, t, b, chunk=64)
        done += b
        block_id += 1
    return out


def z1_k_process(alpha: float, eps: float, t: float, seed: int,
                 replicas: int, env_block: int = 256) -> np.ndarray:
    """Z_1(t) samples of the one-level revisiting limit process (fresh atom
    sets per replica)."""
    spec = StableSpec(alpha, eps)
    out = np.empty(replicas)
    done = 0
    block_id = 0
    while done < replicas:
        b = min(env_block, replicas - done)
        stream = path_stream(seed, PathKey((block_id,), _TAG_ATOMS))
        counts = stream.poisson(spec.jump_rate, b)
        if np.any(counts == 0):
            raise RuntimeError("a replica drew zero atoms; decrease eps")
        width = counts.max()
        pools = spec.sample_sizes(stream, (b, width))

        def draw(rows, c):
            u = (stream.random((rows.size, c)) * counts[rows, None]).astype(np.int64)
            return (pools[rows[:, None], u],
                    stream.standard_exponential((rows.size, c)))

        out[done:done + b] = _first_passage(draw, t, b, chunk=64)
        done += b
        block_id += 1
    return out


def z1_aging_process(alpha: float, eps: float, t: float, seed: int,
                     replicas: int) -> np.ndarray:
    """Z_1(t) samples of the one-level non-revisiting limit process."""
    spec = StableSpec(alpha, eps)
    stream = path_stream(seed, PathKey((), _TAG_SUBORDINATOR))
    return z1_first_passage_fresh(lambda s, shape: spec.sample_sizes(s, shape),
                                  t, stream, replicas)
