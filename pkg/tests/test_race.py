import math

import numpy as np
import pytest

from trapcascade import (DomainExhausted, JumpFunction, PathKey, ks_distance,
                         ks_two_sample, path_stream, run_race, run_race_bruteforce,
                         run_races_batch, stop_tail)

from conftest import binom_stderr, mean_stderr


def unit_jumps(n=200):
    return JumpFunction(np.arange(1.0, n + 1.0), np.ones(n))


def five_pattern(tiles=1):
    """The fixed discrete test function: sizes (2, 1, 0.5, 1, 2), tiled."""
    sizes = np.tile([2.0, 1.0, 0.5, 1.0, 2.0], tiles)
    return JumpFunction(np.arange(1.0, sizes.size + 1.0), sizes)


def test_stop_tail_empty():
    assert stop_tail(five_pattern(), 1.0, 0.5) == 1.0


def test_stop_tail_three_unit_jumps():
    S = JumpFunction([1.0, 2.0, 3.0], [1.0, 1.0, 1.0])
    assert stop_tail(S, 1.0, 3.0) == 0.125


def test_stop_probability_second_unit_jump(rng):
    # survive once (1/2) then stop (1/2)
    S = unit_jumps()
    assert stop_tail(S, 1.0, 1.5) - stop_tail(S, 1.0, 2.5) == pytest.approx(0.25)
    stop_idx, *_ = run_races_batch(S, 1.0, rng, 40_000)
    p_hat = float((stop_idx == 1).mean())
    assert abs(p_hat - 0.25) <= 3.0 * binom_stderr(0.25, 40_000)


def test_total_time_is_exponential_ambient(rng):
    S = five_pattern(12)
    _, total, _, _, _ = run_races_batch(S, 1.0, rng, 10 ** 5)
    assert not np.isnan(total).any()
    assert ks_distance(total, lambda x: 1.0 - np.exp(-x)) < 0.01


def test_sojourn_rate_at_first_jump(rng):
    # first jump gamma=2 always visited; sojourn ~ Exp(1 + 0.5), mean 2/3
    S = five_pattern(12)
    _, _, _, _, sojourns = run_races_batch(S, 1.0, rng, 10 ** 5)
    m, se = mean_stderr(sojourns[:, 0])
    assert abs(m - 2.0 / 3.0) <= 3.0 * se


def test_empirical_stop_law_matches_stop_tail(rng):
    # truncated 5-jump function; races past the last jump count as R > all
    S = five_pattern(1)
    n = 10 ** 5
    stop_idx, *_ = run_races_batch(S, 1.0, rng, n)
    for i in range(5):
        p = stop_tail(S, 1.0, i + 0.5) - stop_tail(S, 1.0, i + 1.5)
        p_hat = float((stop_idx == i).mean())
        assert abs(p_hat - p) <= 3.0 * binom_stderr(p, n)
    p_beyond = stop_tail(S, 1.0, 5.5)
    assert abs((stop_idx == -1).mean() - p_beyond) <= 3.0 * binom_stderr(p_beyond, n)


def test_run_race_exhausts_on_truncated_function(rng):
    S = JumpFunction([1.0], [0.01])  # stop probability 1/101 per pass
    with pytest.raises(DomainExhausted):
        for _ in range(2000):
            run_race(S, 1.0, rng)


def test_race_rejects_bad_ambient(rng):
    with pytest.raises(ValueError):
        run_race(five_pattern(), 0.0, rng)


def test_undershoot_overshoot_conditional_laws(rng):
    S = five_pattern(12)
    n = 10 ** 5
    stop_idx, _, under, over, _ = run_races_batch(S, 1.0, rng, n)
    for i, gamma in [(0, 2.0), (2, 0.5)]:
        sel = stop_idx == i
        lam = 1.0 / gamma
        assert ks_distance(under[sel], lambda x: 1.0 - np.exp(-(1.0 + lam) * x)) < 0.02
        assert ks_distance(over[sel], lambda x: 1.0 - np.exp(-lam * x)) < 0.02


def test_independence_correlations(rng):
    S = five_pattern(12)
    n = 10 ** 5
    stop_idx, _, under, over, sojourns = run_races_batch(S, 1.0, rng, n)
    # sojourn at the first jump vs the event {R = third jump}
    sel = (stop_idx >= 1)  # first sojourn complete
    x = sojourns[sel, 0]
    y = (stop_idx[sel] == 2).astype(float)
    r = np.corrcoef(x, y)[0, 1]
    assert abs(r) <= 3.0 / math.sqrt(sel.sum())
    # undershoot vs overshoot, conditionally on the stopping jump
    sel = stop_idx == 0
    r2 = np.corrcoef(under[sel], over[sel])[0, 1]
    assert abs(r2) <= 3.0 / math.sqrt(sel.sum())


def test_bruteforce_equivalence(rng):
    # definition-driven vs conclusion-driven samplers agree in law
    S = five_pattern(1)
    n = 30_000
    idx_a = np.empty(n)
    tot_a = np.empty(n)
    for i in range(n):
        try:
            out = run_race_bruteforce(S, 1.0, rng)
            idx_a[i], tot_a[i] = out.stop_index, out.total_time
        except DomainExhausted:
            idx_a[i], tot_a[i] = -1, np.nan
    idx_b, tot_b, _, _, _ = run_races_batch(S, 1.0, rng, n)
    for i in [-1, 0, 1, 2, 3, 4]:
        pa, pb = (idx_a == i).mean(), (idx_b == i).mean()
        assert abs(pa - pb) <= 4.0 * binom_stderr((pa + pb) / 2, n)
    assert ks_two_sample(tot_a[idx_a >= 0], tot_b[idx_b >= 0]) < 0.02


def test_scalar_vs_batch_equivalence(rng):
    S = five_pattern(12)
    n = 20_000
    idx_a = np.empty(n)
    tot_a = np.empty(n)
    for i in range(n):
        out = run_race(S, 1.0, rng)
        idx_a[i], tot_a[i] = out.stop_index, out.total_time
    idx_b, tot_b, _, _, _ = run_races_batch(S, 1.0, rng, n)
    assert ks_two_sample(idx_a, idx_b) < 0.02
    assert ks_two_sample(tot_a, tot_b) < 0.02


def test_race_outcome_structure(rng):
    S = five_pattern(12)
    out = run_race(S, 1.0, rng)
    assert out.stop_location == out.visited_locations[-1]
    assert out.stop_location in S.locations
    assert out.total_time == pytest.approx(out.sojourns.sum(), rel=1e-15)
    assert out.undershoot == out.sojourns[-1]
    assert np.all(out.sojourns > 0.0)
    assert out.visit_count == out.stop_index + 1


def test_race_on_lazy_function_consumes_only_what_it_needs(rng):
    calls = {"n": 0}

    def extend(jf, target):
        calls["n"] += 1
        new = np.arange(jf.generated_up_to + 1.0, target + 2.0)
        jf._append(new, np.full(new.size, 2.0), float(new[-1]))

    S = JumpFunction([1.0], [2.0], generated_up_to=1.0, extend=extend)
    out = run_race(S, 1.0, rng)
    assert out.stop_location in S.locations
    assert np.isfinite(out.total_time)
