"""Finite-volume k-level trap model on a tree.

Each node of a k-level tree (M_j descendants per node of generation j-1)
carries a trap depth tau with exact Pareto tail of index alpha_j.  The
dynamics lives on the leaves: at the current leaf it waits for the first
mark among the Poisson lines of the leaf and its ancestors (total rate
Lambda_k = sum of 1/tau over the path) and, if the mark belongs to the
level-J ancestor, resamples coordinates J..k uniformly (possibly landing on
the same leaf).

Two equivalent-in-law simulators are provided: the direct Markov jump
process and the cascading-jump-evolution form built on the unit-spaced
representation (level-j jumps at integer locations with iid uniform labels).
Equilibrium weights (levels 1 and 2) and a brute-force stationary solver
serve as oracles.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .cascade import Trajectory, _Builder, _HorizonReached
from .jumps import JumpFunction
from .streams import PathKey, TailLaw, pareto_array, path_stream

__all__ = ["VolumeSpec", "Environment", "StateSpaceTooLarge", "UnsupportedLevels",
           "direct_step", "simulate_direct", "bdtm_provider", "BdtmProvider",
           "equilibrium_weights", "stationary_oracle", "occupation_direct"]

# context tags for independent per-node random families
_TAG_TAU = 1
_TAG_LABELS = 2


class StateSpaceTooLarge(ValueError):
    """The dense stationary solve is capped at 10^4 leaves."""


class UnsupportedLevels(ValueError):
    """Closed-form equilibrium weights exist only for k <= 2."""


@dataclass(frozen=True)
class VolumeSpec:
    """Tree volumes M_1..M_k and tail indices alpha_1..alpha_k."""

    M: tuple[int, ...]
    alphas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "M", tuple(int(m) for m in self.M))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if len(self.M) != len(self.alphas) or not self.M:
            raise ValueError("M and alphas must be nonempty and of equal length")
        if any(m < 1 for m in self.M):
            raise ValueError("all volumes must be >= 1")
        if any(not 0.0 < a < 1.0 for a in self.alphas):
            raise ValueError("all tail indices must lie in (0, 1)")

    @property
    def k(self) -> int:
        return len(self.M)

    @property
    def n_leaves(self) -> int:
        return math.prod(self.M)


class Environment:
    """Lazily sampled trap depths, deterministic per (master_seed, node path).

    Depths are drawn row-wise: the M_j values below a fixed level-(j-1)
    prefix come from one path-keyed stream, so whole rows materialise in one
    call and the prefix tree is explored lazily.  An explicit table (from
    JSON) overrides sampling.
    """

    def __init__(self, spec: VolumeSpec, master_seed: int,
                 explicit: dict[tuple[int, tuple[int, ...]], np.ndarray] | None = None):
        self.spec = spec
        self.master_seed = int(master_seed)
        self._rows: dict[tuple[int, tuple[int, ...]], np.ndarray] = {}
        if explicit:
            for key, row in explicit.items():
                self._rows[key] = np.asarray(row, dtype=float)

    @property
    def k(self) -> int:
        return self.spec.k

    def tau_row(self, level: int, prefix: tuple[int, ...]) -> np.ndarray:
        """Depths tau at (prefix, x) for x = 1..M_level (1-based coordinates)."""
        if not 1 <= level <= self.k or len(prefix) != level - 1:
            raise ValueError("prefix length must equal level - 1")
        key = (level, tuple(int(c) for c in prefix))
        row = self._rows.get(key)
        if row is None:
            stream = path_stream(self.master_seed, PathKey((level, *key[1]), _TAG_TAU))
            row = pareto_array(TailLaw(self.spec.alphas[level - 1]), stream,
                               self.spec.M[level - 1])
            self._rows[key] = row
        return row

    def tau(self, path: tuple[int, ...]) -> float:
        """Depth of the node at ``path`` (1-based coordinates, len = level)."""
        level = len(path)
        x = int(path[-1])
        if not 1 <= x <= self.spec.M[level - 1]:
            raise ValueError(f"coordinate {x} out of range at level {level}")
        return float(self.tau_row(level, tuple(path[:-1]))[x - 1])

    def lam(self, path: tuple[int, ...]) -> float:
        return 1.0 / self.tau(path)

    def leaf_rates(self, leaf: tuple[int, ...]) -> np.ndarray:
        """Per-level jump rates lambda^j along the path to ``leaf``."""
        if len(leaf) != self.k:
            raise ValueError("leaf must have one coordinate per level")
        return np.array([self.lam(leaf[:j]) for j in range(1, self.k + 1)])

    # -- persistence -----------------------------------------------------------

    def dump_json(self, include_table: bool = False) -> str:
        doc = {"seed": self.master_seed, "M": list(self.spec.M),
               "alphas": list(self.spec.alphas)}
        if include_table:
            if self.spec.n_leaves > 10_000:
                raise StateSpaceTooLarge("explicit table capped at 10^4 leaves")
            table: dict[str, dict[str, list[float]]] = {}
            for level in range(1, self.k + 1):
                rows = {}
                for prefix in itertools.product(*[range(1, m + 1)
                                                  for m in self.spec.M[:level - 1]]):
                    rows[",".join(map(str, prefix))] = [float(v)
                                                        for v in self.tau_row(level, prefix)]
                table[str(level)] = rows
            doc["tau"] = table
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Environment":
        doc = json.loads(text)
        spec = VolumeSpec(tuple(doc["M"]), tuple(doc["alphas"]))
        explicit = None
        if "tau" in doc and doc["tau"] is not None:
            explicit = {}
            for level_str, rows in doc["tau"].items():
                level = int(level_str)
                for prefix_str, row in rows.items():
                    prefix = tuple(int(c) for c in prefix_str.split(",")) if prefix_str else ()
                    explicit[(level, prefix)] = np.asarray(row, dtype=float)
        return cls(spec, doc["seed"], explicit=explicit)


# ---------------------------------------------------------------------------
# direct Markov jump simulator
# ---------------------------------------------------------------------------

def direct_step(env: Environment, leaf: tuple[int, ...],
                stream: np.random.Generator):
    """One jump of the direct dynamics from ``leaf``.

    Returns (holding, J, next_leaf): the holding time is exponential with
    the leaf's total rate, J is the triggering level (probability
    proportional to lambda^J), and coordinates J..k are resampled uniformly.
    Draw order: holding, level, then one uniform coordinate per resampled
    level.
    """
    rates = env.leaf_rates(leaf)
    total = rates.sum()
    holding = stream.standard_exponential() / total
    u = stream.random() * total
    J = int(np.searchsorted(np.cumsum(rates), u, side="left")) + 1
    J = min(J, env.k)
    nxt = list(leaf[:J - 1])
    for j in range(J, env.k + 1):
        nxt.append(int(stream.integers(1, env.spec.M[j - 1] + 1)))
    return holding, J, tuple(nxt)


def uniform_leaf(env: Environment, stream: np.random.Generator) -> tuple[int, ...]:
    return tuple(int(stream.integers(1, m + 1)) for m in env.spec.M)


def simulate_direct(env: Environment, horizon: float, stream: np.random.Generator,
                    start: tuple[int, ...] | None = None) -> Trajectory:
    """Direct dynamics as a Trajectory on [0, horizon).

    The start leaf is uniform unless given.  Labels carry per-level entry
    counters (a jump with triggering level J changes exactly the label
    coordinates J..k, even when the resampled coordinates land on the same
    leaf), and ``nodes`` holds the raw leaf coordinates.
    """
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    k = env.k
    if start is None:
        start = uniform_leaf(env, stream)
    builder = _Builder(k, cutoff=float(horizon))
    leaf = tuple(start)
    change = 1
    try:
        while True:
            gammas = np.array([env.tau_row(j + 1, leaf[:j])[leaf[j] - 1]
                               for j in range(k)])
            z = 1.0 / np.cumsum(1.0 / gammas)
            z[0] = gammas[0]  # exactly gamma_1, matching the cascade engine
            holding, J, nxt = direct_step(env, leaf, stream)
            builder.emit(np.array([holding]), gammas.reshape(1, k),
                         z.reshape(1, k),
                         np.array([leaf], dtype=np.int64),
                         np.array([change], dtype=np.int64))
            leaf = nxt
            change = J
    except _HorizonReached:
        pass
    return builder.finish(ambient=0.0)


# ---------------------------------------------------------------------------
# cascading-jump-evolution form
# ---------------------------------------------------------------------------

class BdtmProvider:
    """Unit-spaced CFJF form of the finite model.

    The level-j function under a parent jump path has jumps at 1, 2, 3, ...
    whose sizes are the depths tau^j at iid uniform coordinates below the
    parent's resolved coordinate prefix.  Equal in law to the Poisson-marked
    time-line form because visit labels there are iid uniform and trajectory
    laws are invariant under argument rescalings of the jump functions.
    """

    def __init__(self, env: Environment, dynamics_seed: int, initial_block: int = 64):
        self.env = env
        self.dynamics_seed = int(dynamics_seed)
        self.levels = env.k
        self.initial_block = int(initial_block)
        self._functions: dict[tuple[int, tuple[int, ...]], JumpFunction] = {}
        self._labels: dict[tuple[int, tuple[int, ...]], list] = {}

    def labels_for(self, level: int, parent: tuple[int, ...]) -> np.ndarray:
        """Uniform coordinates drawn so far for (level, parent)."""
        entry = self._labels.get((level, tuple(parent)))
        if entry is None:
            return np.empty(0, dtype=np.int64)
        return entry[1][: entry[2]]

    def _coords(self, parent: tuple[int, ...]) -> tuple[int, ...]:
        """Resolve a jump-index path to tree coordinates via drawn labels."""
        coords: tuple[int, ...] = ()
        for depth, idx in enumerate(parent, start=1):
            self.get(depth, parent[:depth - 1])  # make sure labels exist
            stream_key = (depth, tuple(parent[:depth - 1]))
            _, labels, count = self._labels[stream_key]
            if idx >= count:
                fn = self._functions[stream_key]
                fn.ensure_count(idx + 1)
                _, labels, count = self._labels[stream_key]
            coords = coords + (int(labels[idx]),)
        return coords

    def get(self, level: int, parent: tuple[int, ...]) -> JumpFunction:
        parent = tuple(int(i) for i in parent)
        if not 1 <= level <= self.levels or len(parent) != level - 1:
            raise ValueError("parent path length must equal level - 1")
        key = (level, parent)
        fn = self._functions.get(key)
        if fn is not None:
            return fn

        env = self.env
        M = env.spec.M[level - 1]
        coords_prefix = self._coords(parent)
        tau_row = env.tau_row(level, coords_prefix)
        stream = path_stream(self.dynamics_seed, PathKey((level, *parent), _TAG_LABELS))
        state = [stream, np.empty(0, dtype=np.int64), 0]
        self._labels[key] = state

        def _draw(n_new: int) -> np.ndarray:
            new = state[0].integers(1, M + 1, n_new)
            state[1] = np.concatenate([state[1], new])
            state[2] += n_new
            return new

        first = _draw(self.initial_block)

        def _extend(jf: JumpFunction, target: float) -> None:
            have = state[2]
            need = max(int(math.ceil(target)) - have, have)  # at least double
            new = _draw(need)
            locs = np.arange(have + 1, have + need + 1, dtype=float)
            jf._append(locs, tau_row[new - 1], float(have + need))

        fn = JumpFunction(np.arange(1, first.size + 1, dtype=float),
                          tau_row[first - 1],
                          generated_up_to=float(first.size), extend=_extend)
        self._functions[key] = fn
        return fn


def bdtm_provider(env: Environment, dynamics_seed: int = 0) -> BdtmProvider:
    """CFJF form of ``env`` with dynamics randomness keyed by ``dynamics_seed``."""
    return BdtmProvider(env, dynamics_seed)


# ---------------------------------------------------------------------------
# equilibrium
# ---------------------------------------------------------------------------

def _all_leaves(spec: VolumeSpec):
    return itertools.product(*[range(1, m + 1) for m in spec.M])


def equilibrium_weights(env: Environment) -> dict[tuple[int, ...], float]:
    """Closed-form equilibrium weights, levels k in {1, 2} only.

    k = 1: tau_x / sum tau_y.  k = 2: the two-factor form
    (tau^1 weight) * (normalised tau^2/(tau^1 + tau^2) weight below x_1).
    """
    k = env.k
    if k == 1:
        row = env.tau_row(1, ())
        w = row / row.sum()
        return {(x + 1,): float(w[x]) for x in range(row.size)}
    if k == 2:
        t1 = env.tau_row(1, ())
        z1 = t1.sum()
        out: dict[tuple[int, ...], float] = {}
        for x1 in range(1, t1.size + 1):
            t2 = env.tau_row(2, (x1,))
            frac = t2 / (t1[x1 - 1] + t2)
            d = frac.sum()
            for x2 in range(1, t2.size + 1):
                out[(x1, x2)] = float(t1[x1 - 1] / z1 * frac[x2 - 1] / d)
        return out
    raise UnsupportedLevels(f"closed-form weights are only available for k <= 2, got k={k}")


def stationary_oracle(env: Environment) -> dict[tuple[int, ...], float]:
    """Brute-force stationary law: dense generator solve over all leaves.

    Makes no reversibility assumption; the result is checked to satisfy
    ||pi Q||_inf <= 1e-12 ||Q||_inf.
    """
    spec = env.spec
    n = spec.n_leaves
    if n > 10_000:
        raise StateSpaceTooLarge(f"{n} leaves exceed the dense-solve cap of 10^4")
    leaves = list(_all_leaves(spec))
    index = {leaf: i for i, leaf in enumerate(leaves)}
    k = spec.k
    block = [math.prod(spec.M[j:]) for j in range(k)]  # resample-block sizes per level

    Q = np.zeros((n, n))
    for a, leaf in enumerate(leaves):
        rates = env.leaf_rates(leaf)
        for J in range(1, k + 1):
            per_target = rates[J - 1] / block[J - 1]
            base = (a // block[J - 1]) * block[J - 1]
            Q[a, base:base + block[J - 1]] += per_target
        Q[a, a] -= rates.sum()

    A = np.vstack([Q.T, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    residual = np.abs(pi @ Q).max()
    bound = 1e-12 * np.abs(Q).max()
    if residual > bound:
        raise RuntimeError(f"stationary solve residual {residual:g} exceeds {bound:g}")
    return {leaf: float(pi[index[leaf]]) for leaf in leaves}


# ---------------------------------------------------------------------------
# long-run occupation (vectorised embedded chain)
# ---------------------------------------------------------------------------

def occupation_direct(env: Environment, steps: int, stream: np.random.Generator,
                      n_batches: int = 100, chunk: int = 1 << 15):
    """Leaf occupation fractions over a long direct run.

    Simulates the embedded jump chain with exponential holding times and
    returns (fractions, stderr) as arrays over the lexicographic leaf order,
    with batch-means standard errors over ``n_batches`` contiguous batches.
    """
    spec = env.spec
    n = spec.n_leaves
    if n > 10_000:
        raise StateSpaceTooLarge(f"{n} leaves exceed the dense cap of 10^4")
    k = spec.k
    leaves = list(_all_leaves(spec))
    lam = np.array([env.leaf_rates(leaf) for leaf in leaves])     # (n, k)
    total = lam.sum(axis=1)
    level_cdf = np.cumsum(lam, axis=1) / total[:, None]           # (n, k)
    block = np.array([math.prod(spec.M[j:]) for j in range(k)])   # (k,)
    inv_total = 1.0 / total

    state = int(stream.integers(0, n))
    batch_len = steps // n_batches
    occ = np.zeros((n_batches, n))
    batch_time = np.zeros(n_batches)

    done = 0
    level_cdf_rows = [tuple(row) for row in level_cdf]
    while done < steps:
        m = min(chunk, steps - done)
        e_hold = stream.standard_exponential(m)
        u_level = stream.random(m)
        u_coord = np.empty((k, m), dtype=np.int64)
        for j in range(k):
            u_coord[j] = stream.integers(0, block[j], m)
        for i in range(m):
            b = min((done + i) // batch_len, n_batches - 1)
            hold = e_hold[i] * inv_total[state]
            occ[b, state] += hold
            batch_time[b] += hold
            u = u_level[i]
            row = level_cdf_rows[state]
            J = 0
            while row[J] < u:
                J += 1
            bl = block[J]
            state = (state // bl) * bl + u_coord[J, i]
        done += m

    frac = occ / batch_time[:, None]
    mean = frac.mean(axis=0)
    stderr = frac.std(axis=0, ddof=1) / math.sqrt(n_batches)
    return mean, stderr, leaves
