"""Cascading jump evolutions.

Given a cascading family of jump functions (one function per level per
parent jump path), the evolution visits level-1 jumps in order; within the
constancy interval of each level-1 jump an independent level-2 dynamics
runs over that jump's own function, and so on down to level k.  The state
is summarised by the vector Z = (Z_1, ..., Z_k) with
Z_j = 1 / sum_{i<=j} 1/gamma_i: the mean remaining time until a jump at
level <= j.

Two horizons are supported: an exponential horizon of rate ``ambient`` > 0
(the whole trajectory is a single race cascade) and a fixed horizon T (the
full-time dynamics truncated at T).  Construction is top-down for the
visited jump sets (one exponential race per node) and bottom-up for the
interval lengths: a parent interval is exactly tiled by its children, so
the tiling identity holds by construction, not approximately.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .jumps import JumpFunction
from .race import run_race

__all__ = ["CfjfProvider", "ZVector", "Trajectory", "simulate_cje",
           "simulate_cje_horizon", "check_trajectory"]


@runtime_checkable
class CfjfProvider(Protocol):
    """A cascading family of jump functions.

    ``get(level, parent)`` returns the jump function of ``level`` (1-based)
    under the parent jump-index path ``parent`` (a tuple of length
    ``level - 1``).  Repeated calls with identical arguments must return the
    identical function, and distinct (level, parent) pairs must be backed by
    disjoint random streams.
    """

    levels: int

    def get(self, level: int, parent: tuple[int, ...]) -> JumpFunction: ...


@dataclass(frozen=True)
class ZVector:
    """State of one constancy segment.

    ``label`` holds per-level entry counters: coordinate j counts how many
    level-j nodes have been entered so far, so a jump at level J increments
    exactly the coordinates J..k (label changes are suffixes) and two times
    share a level-j prefix iff no level-<=j jump separates them.  ``nodes``
    identifies the underlying state (jump index within its parent function,
    or leaf coordinates for the direct tree dynamics).
    """

    gammas: tuple[float, ...]
    lambdas_cum: tuple[float, ...]
    z: tuple[float, ...]
    label: tuple[int, ...]
    nodes: tuple[int, ...]

    @property
    def levels(self) -> int:
        return len(self.z)


class Trajectory:
    """Ordered leaf-level constancy segments of a cascading evolution.

    Stored flat: segment i occupies [bounds[i], bounds[i+1]).  Level-j
    constancy intervals are recovered as maximal runs of constant label
    prefix.  Immutable once built.
    """

    __slots__ = ("bounds", "z", "gammas", "labels", "nodes", "ambient", "k")

    def __init__(self, bounds, z, gammas, labels, nodes, ambient):
        self.bounds = np.asarray(bounds, dtype=float)
        self.z = np.asarray(z, dtype=float)
        self.gammas = np.asarray(gammas, dtype=float)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.nodes = np.asarray(nodes, dtype=np.int64)
        self.ambient = float(ambient)
        self.k = int(self.z.shape[1])

    @property
    def horizon(self) -> float:
        return float(self.bounds[-1])

    @property
    def n_segments(self) -> int:
        return int(self.z.shape[0])

    def index_at(self, t: float, allow_end: bool = False) -> int:
        """Index of the segment whose half-open interval contains t."""
        if t < 0.0:
            raise ValueError("t must be nonnegative")
        if t >= self.horizon:
            if allow_end and t == self.horizon:
                return self.n_segments - 1
            raise ValueError(f"t={t} is outside the horizon [0, {self.horizon})")
        return int(np.searchsorted(self.bounds, t, side="right")) - 1

    def value_at(self, t: float) -> ZVector:
        """Right-continuous state at time t, 0 <= t < horizon."""
        i = self.index_at(t)
        lam = np.cumsum(1.0 / self.gammas[i])
        return ZVector(
            gammas=tuple(self.gammas[i]),
            lambdas_cum=tuple(lam),
            z=tuple(self.z[i]),
            label=tuple(self.labels[i]),
            nodes=tuple(self.nodes[i]),
        )

    def z_at(self, t: float, level: int) -> float:
        """Z_level(t) without building a ZVector."""
        return float(self.z[self.index_at(t), level - 1])

    def no_jump(self, level: int, t_w: float, t: float) -> bool:
        """True iff no jump of Z_level occurs during [t_w, t_w + t].

        Defined by label-prefix constancy: jumps at the two endpoint times
        follow the right-continuous convention (a boundary exactly at t_w is
        not counted, one exactly at t_w + t is).
        """
        if t_w < 0.0 or t < 0.0:
            raise ValueError("t_w and t must be nonnegative")
        if t_w + t > self.horizon:
            raise ValueError("interval exceeds the trajectory horizon")
        if not 1 <= level <= self.k:
            raise ValueError(f"level must be in 1..{self.k}")
        i0 = self.index_at(t_w, allow_end=True)
        i1 = self.index_at(t_w + t, allow_end=True)
        c = level - 1
        return bool(self.labels[i1, c] == self.labels[i0, c])

    def window_max(self, level: int, lo: float, hi: float) -> float:
        """max of Z_level over the closed window [lo, hi]."""
        i0 = self.index_at(lo, allow_end=True)
        i1 = self.index_at(hi, allow_end=True)
        return float(self.z[i0:i1 + 1, level - 1].max())

    def to_csv(self, path_or_buf) -> None:
        """One row per leaf segment: t_start,t_end,z_1..z_k,label_1..label_k."""
        close = False
        if isinstance(path_or_buf, (str, bytes)):
            buf = open(path_or_buf, "w")
            close = True
        else:
            buf = path_or_buf
        try:
            k = self.k
            header = (["t_start", "t_end"]
                      + [f"z_{j}" for j in range(1, k + 1)]
                      + [f"label_{j}" for j in range(1, k + 1)])
            buf.write(",".join(header) + "\n")
            for i in range(self.n_segments):
                row = [repr(float(self.bounds[i])), repr(float(self.bounds[i + 1]))]
                row += [repr(float(v)) for v in self.z[i]]
                row += [str(int(v)) for v in self.labels[i]]
                buf.write(",".join(row) + "\n")
        finally:
            if close:
                buf.close()

    def __repr__(self):
        return (f"Trajectory(k={self.k}, segments={self.n_segments}, "
                f"horizon={self.horizon:g}, ambient={self.ambient:g})")


class _HorizonReached(Exception):
    pass


class _Builder:
    """Accumulates leaf segments in time order; labels derived afterwards."""

    def __init__(self, k: int, cutoff: float | None):
        self.k = k
        self.cutoff = cutoff
        self.t_acc = 0.0
        self.lengths: list[np.ndarray] = []
        self.gam_rows: list[np.ndarray] = []
        self.z_rows: list[np.ndarray] = []
        self.node_rows: list[np.ndarray] = []
        self.changes: list[np.ndarray] = []

    def emit(self, lengths, gam_rows, z_rows, node_rows, changes) -> None:
        self.lengths.append(lengths)
        self.gam_rows.append(gam_rows)
        self.z_rows.append(z_rows)
        self.node_rows.append(node_rows)
        self.changes.append(changes)
        self.t_acc += float(lengths.sum())
        if self.cutoff is not None and self.t_acc >= self.cutoff:
            raise _HorizonReached

    def finish(self, ambient: float) -> Trajectory:
        lengths = np.concatenate(self.lengths)
        gammas = np.vstack(self.gam_rows)
        z = np.vstack(self.z_rows)
        nodes = np.vstack(self.node_rows)
        changes = np.concatenate(self.changes)
        if self.cutoff is not None:
            # drop segments past the cutoff and truncate the straddling one
            cum = np.cumsum(lengths)
            n = int(np.searchsorted(cum, self.cutoff, side="left")) + 1
            lengths = lengths[:n].copy()
            prev = cum[n - 2] if n > 1 else 0.0
            lengths[-1] = self.cutoff - prev
            gammas, z, nodes, changes = gammas[:n], z[:n], nodes[:n], changes[:n]
        bounds = np.concatenate([[0.0], np.cumsum(lengths)])
        if self.cutoff is not None:
            bounds[-1] = self.cutoff
        labels = np.empty((changes.size, self.k), dtype=np.int64)
        for j in range(1, self.k + 1):
            labels[:, j - 1] = np.cumsum(changes <= j)
        return Trajectory(bounds, z, gammas, labels, nodes, ambient)


def _expand(builder: _Builder, provider: CfjfProvider, stream, ambient: float,
            level: int, parent: tuple[int, ...], lam_cum: float,
            gam_prefix: tuple[float, ...], z_prefix: tuple[float, ...],
            node_prefix: tuple[int, ...], entry_change: int) -> None:
    """Emit every leaf segment inside the current level-(level-1) interval.

    Runs the race of ``level`` with ambient rate ``ambient + lam_cum``; at
    intermediate levels only the visited set matters (the interval lengths
    are the sums of their leaf descendants), at the leaf level the race
    sojourns are the segment lengths.
    """
    S = provider.get(level, parent)
    outcome = run_race(S, ambient + lam_cum, stream)
    k = builder.k
    sizes = outcome.visited_sizes
    if level == k:
        m = sizes.size
        gam_rows = np.empty((m, k))
        z_rows = np.empty((m, k))
        node_rows = np.empty((m, k), dtype=np.int64)
        if k > 1:
            gam_rows[:, :-1] = gam_prefix
            z_rows[:, :-1] = z_prefix
            node_rows[:, :-1] = node_prefix
        gam_rows[:, -1] = sizes
        # z_1 is exactly gamma_1 (no reciprocal round trip); deeper levels
        # accumulate rates left to right so all simulators agree bitwise
        z_rows[:, -1] = sizes if k == 1 else 1.0 / (lam_cum + 1.0 / sizes)
        node_rows[:, -1] = np.arange(m)
        changes = np.full(m, level, dtype=np.int64)
        changes[0] = entry_change
        builder.emit(outcome.sojourns, gam_rows, z_rows, node_rows, changes)
        return
    for t in range(sizes.size):
        gamma = float(sizes[t])
        lam = lam_cum + 1.0 / gamma
        z_val = gamma if level == 1 else 1.0 / lam
        _expand(builder, provider, stream, ambient,
                level + 1, parent + (t,), lam,
                gam_prefix + (gamma,), z_prefix + (z_val,),
                node_prefix + (t,),
                entry_change if t == 0 else level)


def simulate_cje(provider: CfjfProvider, ambient: float,
                 stream: np.random.Generator) -> Trajectory:
    """Cascading evolution over an exponential horizon of rate ``ambient``.

    The horizon equals the sum of all leaf sojourns and is exponential with
    rate ``ambient``; every parent constancy interval is tiled exactly by
    its children.
    """
    if ambient <= 0.0:
        raise ValueError("ambient rate must be positive")
    builder = _Builder(provider.levels, cutoff=None)
    _expand(builder, provider, stream, ambient, 1, (), 0.0, (), (), (), 1)
    return builder.finish(ambient)


def simulate_cje_horizon(provider: CfjfProvider, horizon: float,
                         stream: np.random.Generator) -> Trajectory:
    """Full-time cascading evolution truncated at the fixed ``horizon``.

    Level 1 visits its jumps in order with sojourns of rate lambda_1(s) (no
    ambient clock); deeper levels race against the cumulative rate of their
    ancestors, exactly as in :func:`simulate_cje` with ambient 0.
    """
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    k = provider.levels
    builder = _Builder(k, cutoff=float(horizon))
    S1 = provider.get(1, ())
    idx = 0
    try:
        while True:
            S1.ensure_count(idx + 1)
            gamma = float(S1.sizes[idx])
            lam = 1.0 / gamma
            if k == 1:
                sojourn = gamma * stream.standard_exponential()
                builder.emit(np.array([sojourn]),
                             np.array([[gamma]]), np.array([[gamma]]),
                             np.array([[idx]], dtype=np.int64),
                             np.array([1], dtype=np.int64))
            else:
                _expand(builder, provider, stream, 0.0,
                        2, (idx,), lam, (gamma,), (gamma,), (idx,), 1)
            idx += 1
    except _HorizonReached:
        pass
    return builder.finish(ambient=0.0)


def check_trajectory(traj: Trajectory, rel_tol: float = 1e-9) -> None:
    """Assert the structural invariants; raises AssertionError on violation.

    Checks: contiguous strictly increasing segment bounds; z_1 > ... > z_k
    on every segment; label changes at each boundary form a suffix of the
    levels with unit increments; labels consistent with z/node changes; and
    parent-child interval tiling (each level-j constancy run's length equals
    the sum of its leaf segments, within ``rel_tol`` relative).
    """
    b = traj.bounds
    assert b[0] == 0.0
    assert np.all(np.diff(b) > 0.0), "segment bounds must strictly increase"
    if traj.k > 1:
        assert np.all(np.diff(traj.z, axis=1) < 0.0), "z must decrease in the level"
    assert np.all(traj.z > 0.0)
    lab = traj.labels
    d = np.diff(lab, axis=0)
    assert np.all((d == 0) | (d == 1)), "label counters must increment by one"
    if d.size:
        assert np.all(np.diff(d, axis=1) >= 0), "label changes must be suffixes"
        assert np.all(d[:, -1] == 1), "every boundary is a leaf-level jump"
    # tiling: level-j runs are contiguous and exactly exhaust [0, horizon)
    for j in range(1, traj.k + 1):
        runs = np.flatnonzero(np.concatenate([[1], d[:, j - 1]]))
        starts = b[runs]
        ends = b[np.concatenate([runs[1:], [traj.n_segments]])]
        lengths = ends - starts
        seg_sums = np.add.reduceat(np.diff(b), runs)
        assert np.allclose(lengths, seg_sums, rtol=rel_tol, atol=0.0)
        assert starts[0] == 0.0 and ends[-1] == traj.horizon
