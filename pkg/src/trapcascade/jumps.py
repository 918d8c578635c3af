"""Jump functions: nondecreasing pure-jump maps and their calculus.

A jump function S is given by strictly increasing jump locations with
positive sizes, S(r) = sum of sizes at locations <= r.  Instances are either
fully specified (finite jump list, total mass known) or lazily generated:
an ``extend`` callback appends further jumps past the generated domain, so
S(s) -> infinity can be realised without materialising the whole function.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = ["DomainExhausted", "JumpFunction", "ClockPart", "clock_part"]

# growth factor for mass-driven lazy extension windows
_EXTEND_GROWTH = 2.0
_MAX_EXTEND_ROUNDS = 200


class DomainExhausted(Exception):
    """A query needs jumps beyond what a non-extendable function provides."""


class JumpFunction:
    """Right-continuous nondecreasing pure-jump function on [0, inf)."""

    __slots__ = ("locations", "sizes", "_cum", "generated_up_to", "_extend")

    def __init__(self, locations, sizes, generated_up_to: float | None = None,
                 extend: Optional[Callable[["JumpFunction", float], None]] = None):
        locations = np.asarray(locations, dtype=float)
        sizes = np.asarray(sizes, dtype=float)
        if locations.shape != sizes.shape or locations.ndim != 1:
            raise ValueError("locations and sizes must be 1-d arrays of equal length")
        if locations.size:
            if np.any(sizes <= 0.0):
                raise ValueError("all jump sizes must be positive")
            if np.any(locations < 0.0):
                raise ValueError("jump locations must be nonnegative")
            if np.any(np.diff(locations) <= 0.0):
                raise ValueError("jump locations must be strictly increasing")
        self.locations = locations
        self.sizes = sizes
        self._cum = np.cumsum(sizes)
        if generated_up_to is None:
            generated_up_to = float("inf") if extend is None else float(
                locations[-1]) if locations.size else 0.0
        self.generated_up_to = float(generated_up_to)
        self._extend = extend

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_pairs(cls, pairs) -> "JumpFunction":
        pairs = sorted(pairs)
        locs = [p[0] for p in pairs]
        sizes = [p[1] for p in pairs]
        return cls(locs, sizes)

    def _append(self, locations: np.ndarray, sizes: np.ndarray, new_up_to: float) -> None:
        """Extension hook: add jumps on [generated_up_to, new_up_to)."""
        locations = np.asarray(locations, dtype=float)
        sizes = np.asarray(sizes, dtype=float)
        if locations.size:
            if locations[0] < self.generated_up_to:
                raise ValueError("extension may only append past the generated domain")
            base = self._cum[-1] if self._cum.size else 0.0
            self.locations = np.concatenate([self.locations, locations])
            self.sizes = np.concatenate([self.sizes, sizes])
            self._cum = np.concatenate([self._cum, base + np.cumsum(sizes)])
        self.generated_up_to = float(new_up_to)

    # -- basic queries ---------------------------------------------------------

    @property
    def extendable(self) -> bool:
        return self._extend is not None

    @property
    def jump_count(self) -> int:
        return int(self.locations.size)

    @property
    def total_mass(self) -> float:
        """Mass of the generated prefix (the whole function if complete)."""
        return float(self._cum[-1]) if self._cum.size else 0.0

    def ensure_domain(self, r: float) -> None:
        """Extend the generated domain to cover locations up to r."""
        if r <= self.generated_up_to:
            return
        if self._extend is None:
            raise DomainExhausted(
                f"query at r={r} exceeds generated domain {self.generated_up_to} "
                "and the function is not extendable")
        rounds = 0
        while self.generated_up_to < r:
            self._extend(self, r)
            rounds += 1
            if rounds > _MAX_EXTEND_ROUNDS:
                raise DomainExhausted("extension failed to reach requested domain")

    def ensure_mass(self, t: float) -> None:
        """Extend until the cumulative mass strictly exceeds t."""
        if self.total_mass > t:
            return
        if self._extend is None:
            raise DomainExhausted(
                f"target mass {t} is not exceeded by total mass {self.total_mass} "
                "of a non-extendable function")
        step = max(self.generated_up_to, 1.0)
        rounds = 0
        while self.total_mass <= t:
            self._extend(self, self.generated_up_to + step)
            step *= _EXTEND_GROWTH
            rounds += 1
            if rounds > _MAX_EXTEND_ROUNDS:
                raise DomainExhausted(
                    f"mass target {t} unreachable after {rounds} extension rounds")

    def ensure_count(self, n: int) -> None:
        """Extend until at least n jumps exist."""
        if self.jump_count >= n:
            return
        if self._extend is None:
            raise DomainExhausted(f"only {self.jump_count} jumps exist, {n} requested")
        step = max(self.generated_up_to, 1.0)
        rounds = 0
        while self.jump_count < n:
            self._extend(self, self.generated_up_to + step)
            step *= _EXTEND_GROWTH
            rounds += 1
            if rounds > _MAX_EXTEND_ROUNDS:
                raise DomainExhausted(f"could not generate {n} jumps")

    # -- the jump-function calculus ---------------------------------------------

    def evaluate(self, r: float) -> float:
        """S(r): sum of sizes with location <= r (right-continuous)."""
        if r < 0.0:
            raise ValueError("r must be nonnegative")
        self.ensure_domain(r)
        i = np.searchsorted(self.locations, r, side="right")
        return float(self._cum[i - 1]) if i else 0.0

    def right_inverse(self, t: float) -> float:
        """Smallest jump location r with S(r) > t; always a jump location."""
        if t < 0.0:
            raise ValueError("t must be nonnegative")
        self.ensure_mass(t)
        i = int(np.searchsorted(self._cum, t, side="right"))
        return float(self.locations[i])

    def next_jump(self, r: float) -> tuple[float, float]:
        """First jump strictly after r, as (location, size)."""
        if r < 0.0:
            raise ValueError("r must be nonnegative")
        i = int(np.searchsorted(self.locations, r, side="right"))
        rounds = 0
        while i >= self.jump_count:
            if self._extend is None:
                raise DomainExhausted(f"no jump beyond r={r}")
            self._extend(self, max(self.generated_up_to, r) + max(self.generated_up_to, 1.0))
            i = int(np.searchsorted(self.locations, r, side="right"))
            rounds += 1
            if rounds > _MAX_EXTEND_ROUNDS:
                raise DomainExhausted(f"no jump found beyond r={r} after extension")
        return float(self.locations[i]), float(self.sizes[i])

    # -- serialization -----------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({"jumps": [[float(l), float(s)]
                                     for l, s in zip(self.locations, self.sizes)]})

    @classmethod
    def from_json(cls, text: str) -> "JumpFunction":
        data = json.loads(text)
        jumps = data["jumps"]
        return cls([j[0] for j in jumps], [j[1] for j in jumps])

    def __repr__(self):
        dom = "inf" if self.generated_up_to == float("inf") else f"{self.generated_up_to:g}"
        return (f"JumpFunction({self.jump_count} jumps, mass={self.total_mass:g}, "
                f"generated_up_to={dom}, extendable={self.extendable})")


@dataclass(frozen=True)
class ClockPart:
    """Exponential marking of a jump function.

    K has the same jump locations as ``base``; each jump size is
    gamma(s) * E(s) with E(s) the stored standard-exponential mark.  Built on
    the generated prefix of ``base`` (the whole function when complete).
    """

    base: JumpFunction
    marks: np.ndarray

    @property
    def function(self) -> JumpFunction:
        return JumpFunction(self.base.locations, self.base.sizes * self.marks)

    def evaluate(self, r: float) -> float:
        return self.function.evaluate(r)


def clock_part(S: JumpFunction, stream: Optional[np.random.Generator],
               unit_marks: bool = False) -> ClockPart:
    """Mark each generated jump of S with an independent standard exponential.

    With ``unit_marks`` (test mode) the marks are identically 1, so K == S.
    """
    n = S.jump_count
    if unit_marks:
        marks = np.ones(n)
    else:
        if stream is None:
            raise ValueError("a stream is required unless unit_marks is set")
        marks = stream.standard_exponential(n)
    return ClockPart(S, marks)
