"""Reproducible randomness keyed by tree paths.

Every random object in the toolkit (trap depths, Poisson point sets, Beta
variates, truncated stable-subordinator jump sets) is drawn from a stream
derived deterministically from a 64-bit master seed and a :class:`PathKey`.
Distinct keys give statistically independent streams, which lets a lazily
generated infinite tree environment be sampled on demand without storing it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

__all__ = [
    "PathKey",
    "TailLaw",
    "StableSpec",
    "path_stream",
    "pareto_sample",
    "pareto_array",
    "beta_sample",
    "stable_jump_set",
]


@dataclass(frozen=True)
class PathKey:
    """Identifies a node of the level tree plus a small context tag.

    ``level_indices`` is the sequence of branch choices from the root (empty
    for the root itself); ``context_tag`` distinguishes independent random
    families living at the same node (e.g. trap depths vs. jump labels).
    """

    level_indices: tuple[int, ...] = ()
    context_tag: int = 0

    def __init__(self, level_indices: Sequence[int] = (), context_tag: int = 0):
        idx = tuple(int(i) for i in level_indices)
        if any(i < 0 for i in idx):
            raise ValueError("level indices must be nonnegative")
        object.__setattr__(self, "level_indices", idx)
        object.__setattr__(self, "context_tag", int(context_tag))

    def child(self, index: int, context_tag: int | None = None) -> "PathKey":
        tag = self.context_tag if context_tag is None else context_tag
        return PathKey(self.level_indices + (index,), tag)


def path_stream(master_seed: int, key: PathKey | Sequence[int]) -> np.random.Generator:
    """Deterministic counter-based stream for (master seed, path key).

    The (seed, key) pair is hashed through ``SeedSequence`` into a Philox
    state.  Identical inputs always give identical streams; distinct keys
    give independent ones.  Streams are value-like: callers own them and may
    pass them between threads freely.
    """
    if not isinstance(key, PathKey):
        key = PathKey(tuple(key))
    # The length prefix keeps the encoding injective across path depths.
    spawn_key = (key.context_tag, len(key.level_indices), *key.level_indices)
    ss = np.random.SeedSequence(int(master_seed) & (2**64 - 1), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class TailLaw:
    """Exact Pareto trap-depth law: P(tau > t) = t**(-alpha) for t >= 1."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")


def pareto_sample(law: TailLaw, u: float) -> float:
    """Inverse-CDF draw of a trap depth: tau = u**(-1/alpha) >= 1."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"u must lie in open (0, 1), got {u}")
    return u ** (-1.0 / law.alpha)


def pareto_array(law: TailLaw, stream: np.random.Generator, size) -> np.ndarray:
    """Array of iid trap depths with the law of ``pareto_sample``."""
    u = 1.0 - stream.random(size)  # in (0, 1]
    return u ** (-1.0 / law.alpha)


def beta_sample(a: float, b: float, stream: np.random.Generator, size=None):
    """Beta(a, b) variate(s) in (0, 1)."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"Beta parameters must be positive, got ({a}, {b})")
    return stream.beta(a, b, size=size)


@dataclass(frozen=True)
class StableSpec:
    """Truncated stable-subordinator jump measure.

    The untruncated Levy density is (alpha / Gamma(1-alpha)) * s**(-1-alpha),
    normalised so the Laplace exponent is exactly theta**alpha.  Jumps below
    ``epsilon`` are dropped (no compensation); the dropped mass is known in
    closed form and reported so callers can size epsilon.
    """

    alpha: float
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def jump_rate(self) -> float:
        """Expected jump count per unit domain length: eps^(-a)/Gamma(1-a)."""
        return self.epsilon ** (-self.alpha) / gamma_fn(1.0 - self.alpha)

    @property
    def dropped_mass_rate(self) -> float:
        """Expected truncated mass per unit length: a*eps^(1-a)/((1-a)*Gamma(1-a))."""
        a = self.alpha
        return a * self.epsilon ** (1.0 - a) / ((1.0 - a) * gamma_fn(1.0 - a))

    def sample_sizes(self, stream: np.random.Generator, size) -> np.ndarray:
        """Iid jump sizes above epsilon: s = eps * U**(-1/alpha)."""
        u = 1.0 - stream.random(size)
        return self.epsilon * u ** (-1.0 / self.alpha)


def stable_jump_set(spec: StableSpec, domain: tuple[float, float],
                    stream: np.random.Generator):
    """Truncated stable-subordinator jumps on ``domain`` as a JumpFunction.

    Realised as a Poisson random measure on [a, b) x (eps, inf): the jump
    count is Poisson with mean (b-a)*jump_rate, locations are uniform, and
    sizes are eps * U**(-1/alpha).  The returned function extends lazily past
    b using the same stream; extension never perturbs earlier jumps.
    """
    from .jumps import JumpFunction  # local import: jumps depends on nothing here

    a, b = float(domain[0]), float(domain[1])
    if not a < b:
        raise ValueError(f"domain must satisfy a < b, got [{a}, {b})")
    window = b - a

    def _generate(lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
        n = stream.poisson(spec.jump_rate * (hi - lo))
        locs = np.sort(lo + (hi - lo) * stream.random(n))
        # location ties are a measure-zero event; re-draw if they occur
        while n > 1 and np.any(np.diff(locs) == 0.0):
            locs = np.sort(lo + (hi - lo) * stream.random(n))
        sizes = spec.sample_sizes(stream, n)
        return locs, sizes

    locs, sizes = _generate(a, b)

    def _extend(jf: JumpFunction, target: float) -> None:
        lo = jf.generated_up_to
        hi = lo + max(window, target - lo)
        new_locs, new_sizes = _generate(lo, hi)
        jf._append(new_locs, new_sizes, hi)

    return JumpFunction(locs, sizes, generated_up_to=b, extend=_extend)
