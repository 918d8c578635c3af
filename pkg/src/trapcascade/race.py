"""The exponential race over a jump function.

An ambient exponential clock of rate ``ambient`` competes with per-jump
sojourns: the dynamics visits the jumps of S in increasing order, staying an
exponential time at each, and the race ends at the jump R where the ambient
clock rings.  The stopping law is

    P(R > r) = prod_{s <= r} lambda(s) / (ambient + lambda(s)),

with lambda(s) = 1/gamma(s); sojourns at visited jumps are independent
exponentials of rate ambient + lambda(s), the time already spent at R when
the race ends (undershoot) has that same law at s = R, and the remaining
time that would have been spent at R (overshoot) is an independent
exponential of rate lambda(R).

Two samplers are provided: :func:`run_race` draws directly from these
conclusions and touches only the jumps actually visited (so it works on
lazily generated, effectively infinite functions), while
:func:`run_race_bruteforce` follows the first-passage definition on a finite
function and serves as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jumps import DomainExhausted, JumpFunction

__all__ = ["RaceOutcome", "run_race", "run_races_batch", "run_race_bruteforce",
           "stop_tail"]

# jumps examined per chunk when scanning for the stopping jump
_CHUNK = 32


@dataclass(frozen=True)
class RaceOutcome:
    """Result of one exponential race.

    ``sojourns[i]`` is the time spent at ``visited_locations[i]``; the last
    entry is the undershoot (partial sojourn at the stopping jump R).
    ``total_time`` reconstructs the ambient clock L, so it is exponential
    with rate ``ambient``.
    """

    visited_locations: np.ndarray
    visited_sizes: np.ndarray
    visited_rates: np.ndarray
    sojourns: np.ndarray
    stop_index: int
    stop_location: float
    undershoot: float
    overshoot: float
    total_time: float

    @property
    def visit_count(self) -> int:
        return int(self.visited_locations.size)


def run_race(S: JumpFunction, ambient: float, stream: np.random.Generator) -> RaceOutcome:
    """Sample a race over S with ambient rate ``ambient`` > 0.

    Stream order, per chunk of examined jumps: sojourn exponentials for the
    chunk, then stopping uniforms for the chunk; one final exponential for
    the overshoot.  Draws for jumps past R are discarded (they are
    independent of everything used).
    """
    if ambient <= 0.0:
        raise ValueError("ambient rate must be positive")
    S.ensure_count(1)

    start = 0
    sojourn_parts = []
    while True:
        if start >= S.jump_count:
            S.ensure_count(start + _CHUNK)  # raises DomainExhausted if impossible
        stop_at = min(S.jump_count, start + _CHUNK)
        sizes = S.sizes[start:stop_at]
        rates = 1.0 / sizes
        total = ambient + rates
        sojourns = stream.standard_exponential(sizes.size) / total
        stops = stream.random(sizes.size) < (ambient / total)
        hit = np.flatnonzero(stops)
        if hit.size:
            j = int(hit[0])
            sojourn_parts.append(sojourns[: j + 1])
            stop_index = start + j
            break
        sojourn_parts.append(sojourns)
        start = stop_at

    all_sojourns = np.concatenate(sojourn_parts) if len(sojourn_parts) > 1 else sojourn_parts[0]
    n = stop_index + 1
    locations = S.locations[:n].copy()
    sizes = S.sizes[:n].copy()
    rates = 1.0 / sizes
    overshoot = stream.standard_exponential() * sizes[-1]
    return RaceOutcome(
        visited_locations=locations,
        visited_sizes=sizes,
        visited_rates=rates,
        sojourns=all_sojourns,
        stop_index=stop_index,
        stop_location=float(locations[-1]),
        undershoot=float(all_sojourns[-1]),
        overshoot=float(overshoot),
        total_time=float(all_sojourns.sum()),
    )


def run_races_batch(S: JumpFunction, ambient: float, stream: np.random.Generator,
                    n: int, tail_prob: float = 1e-12):
    """Vectorised sampler: n independent races over a common S.

    Materialises enough jumps that the probability of not stopping within
    them is below ``tail_prob`` (extendable S), or uses all jumps of a
    complete S.  Returns arrays ``(stop_index, total_time, undershoot,
    overshoot, sojourns_matrix)``; races that run past a complete S's last
    jump get ``stop_index = -1`` and NaN statistics.

    Drawn jump-by-jump this has exactly the law of ``run_race``; the stream
    order differs (one exponential matrix, then one uniform matrix, then the
    overshoot vector), so individual outcomes are not draw-identical.
    """
    if ambient <= 0.0:
        raise ValueError("ambient rate must be positive")
    S.ensure_count(1)
    if S.extendable:
        # grow until the no-stop probability within the prefix is negligible
        log_tail = 0.0
        m = 0
        while True:
            rates = 1.0 / S.sizes
            log_tail = np.log(rates / (ambient + rates)).sum()
            if log_tail < np.log(tail_prob):
                m = S.jump_count
                break
            S.ensure_count(S.jump_count + _CHUNK)
    else:
        m = S.jump_count

    sizes = S.sizes[:m]
    rates = 1.0 / sizes
    p_stop = ambient / (ambient + rates)

    sojourns = stream.standard_exponential((n, m)) / (ambient + rates)
    stops = stream.random((n, m)) < p_stop
    overshoot_raw = stream.standard_exponential(n)

    any_stop = stops.any(axis=1)
    stop_index = np.where(any_stop, stops.argmax(axis=1), -1)

    keep = np.arange(m) <= stop_index[:, None]
    total_time = np.where(any_stop, (sojourns * keep).sum(axis=1), np.nan)
    undershoot = np.where(any_stop, sojourns[np.arange(n), stop_index], np.nan)
    overshoot = np.where(any_stop, overshoot_raw * sizes[np.clip(stop_index, 0, m - 1)],
                         np.nan)
    return stop_index, total_time, undershoot, overshoot, sojourns


def run_race_bruteforce(S: JumpFunction, ambient: float,
                        stream: np.random.Generator) -> RaceOutcome:
    """First-passage oracle on a complete S: draw the ambient clock L, mark
    every jump, and stop where the marked cumulative sum first reaches L.

    Equal in law to :func:`run_race`; used for equivalence tests.
    Stream order: L first, then the full mark vector.
    """
    if ambient <= 0.0:
        raise ValueError("ambient rate must be positive")
    if S.extendable:
        raise ValueError("brute-force race requires a complete (finite) function")
    L = stream.standard_exponential() / ambient
    marks = stream.standard_exponential(S.jump_count)
    sojourn_full = S.sizes * marks
    cum = np.cumsum(sojourn_full)
    if not cum.size or cum[-1] < L:
        raise DomainExhausted("ambient clock outlasted every jump of the function")
    stop_index = int(np.searchsorted(cum, L, side="left"))
    before = cum[stop_index - 1] if stop_index else 0.0
    undershoot = L - before
    overshoot = cum[stop_index] - L
    sojourns = np.concatenate([sojourn_full[:stop_index], [undershoot]])
    n = stop_index + 1
    return RaceOutcome(
        visited_locations=S.locations[:n].copy(),
        visited_sizes=S.sizes[:n].copy(),
        visited_rates=1.0 / S.sizes[:n],
        sojourns=sojourns,
        stop_index=stop_index,
        stop_location=float(S.locations[stop_index]),
        undershoot=float(undershoot),
        overshoot=float(overshoot),
        total_time=float(L),
    )


def stop_tail(S: JumpFunction, ambient: float, r: float) -> float:
    """Exact stopping tail P(R > r) = prod over jumps at locations <= r."""
    if ambient <= 0.0:
        raise ValueError("ambient rate must be positive")
    S.ensure_domain(r)
    i = int(np.searchsorted(S.locations, r, side="right"))
    if i == 0:
        return 1.0
    rates = 1.0 / S.sizes[:i]
    return float(np.prod(rates / (ambient + rates)))
