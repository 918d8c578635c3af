import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trapcascade import (DomainExhausted, JumpFunction, PathKey, clock_part,
                         ks_distance, path_stream)


@pytest.fixture
def simple():
    return JumpFunction([1.0, 2.5], [2.0, 0.5])


def test_evaluate_before_first_jump(simple):
    assert simple.evaluate(0.5) == 0.0


def test_evaluate_right_continuous_at_jump(simple):
    assert simple.evaluate(1.0) == 2.0


def test_evaluate_total(simple):
    assert simple.evaluate(3.0) == 2.5


def test_right_inverse(simple):
    assert simple.right_inverse(1.5) == 1.0
    assert simple.right_inverse(2.0) == 2.5
    with pytest.raises(DomainExhausted):
        simple.right_inverse(2.5)


def test_next_jump(simple):
    assert simple.next_jump(1.0) == (2.5, 0.5)
    assert simple.next_jump(0.0) == (1.0, 2.0)
    with pytest.raises(DomainExhausted):
        simple.next_jump(2.5)


def test_validation():
    with pytest.raises(ValueError):
        JumpFunction([1.0, 1.0], [1.0, 1.0])   # tied locations
    with pytest.raises(ValueError):
        JumpFunction([1.0, 2.0], [1.0, 0.0])   # zero size
    with pytest.raises(ValueError):
        JumpFunction([-1.0], [1.0])


jump_sets = st.lists(
    st.tuples(st.floats(0.0, 100.0), st.floats(0.001, 50.0)),
    min_size=1, max_size=30,
).filter(lambda ps: len({round(p[0], 9) for p in ps}) == len(ps))


@settings(max_examples=200, deadline=None)
@given(pairs=jump_sets, queries=st.lists(st.floats(0.0, 120.0), min_size=1, max_size=20))
def test_evaluate_monotone_right_continuous(pairs, queries):
    S = JumpFunction.from_pairs(pairs)
    qs = sorted(queries)
    vals = [S.evaluate(q) for q in qs]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    # right continuity: value just after r equals value at r
    for loc in S.locations:
        assert S.evaluate(float(loc)) == pytest.approx(
            S.evaluate(float(loc) * (1 + 1e-12) + 1e-12), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(pairs=jump_sets)
def test_right_inverse_galois(pairs):
    S = JumpFunction.from_pairs(pairs)
    for r in S.locations:
        v = S.evaluate(float(r))
        if v >= S.total_mass:
            continue
        r_back = S.right_inverse(v)
        assert r_back >= r
        assert r_back in S.locations


@settings(max_examples=100, deadline=None)
@given(pairs=jump_sets, t=st.floats(0.0, 200.0))
def test_right_inverse_returns_jump_location(pairs, t):
    S = JumpFunction.from_pairs(pairs)
    if t >= S.total_mass:
        with pytest.raises(DomainExhausted):
            S.right_inverse(t)
    else:
        r = S.right_inverse(t)
        assert r in S.locations
        assert S.evaluate(r) > t


def test_clock_part_unit_marks(simple):
    K = clock_part(simple, None, unit_marks=True)
    for r in (0.5, 1.0, 2.0, 3.0):
        assert K.evaluate(r) == simple.evaluate(r)


def test_clock_part_jump_sets_coincide(simple, rng):
    K = clock_part(simple, rng)
    assert np.array_equal(K.function.locations, simple.locations)
    assert np.all(K.function.sizes > 0.0)


def test_clock_part_sizes_are_scaled_exponentials(rng):
    # iid jumps of size gamma marked independently: sizes ~ Exp(mean gamma)
    gamma = 2.0
    S = JumpFunction(np.arange(1.0, 100001.0), np.full(100000, gamma))
    K = clock_part(S, rng)
    assert ks_distance(K.function.sizes, lambda x: 1.0 - np.exp(-x / gamma)) < 0.01


def test_clock_part_partial_sums_match_marks(simple, rng):
    K = clock_part(simple, rng)
    manual = np.cumsum(simple.sizes * K.marks)
    for m in range(1, simple.jump_count + 1):
        assert K.function.evaluate(float(simple.locations[m - 1])) == pytest.approx(
            manual[m - 1], rel=1e-15)


def test_json_round_trip(simple):
    text = simple.to_json()
    back = JumpFunction.from_json(text)
    assert np.array_equal(back.locations, simple.locations)
    assert np.array_equal(back.sizes, simple.sizes)
    assert '"jumps"' in text


def test_lazy_extension_contract():
    state = {"n": 0}

    def extend(jf, target):
        new = np.arange(jf.generated_up_to + 1.0, max(target, jf.generated_up_to + 1.0) + 1.0)
        jf._append(new, np.ones_like(new), float(new[-1]))
        state["n"] += 1

    S = JumpFunction([1.0], [1.0], generated_up_to=1.0, extend=extend)
    assert S.evaluate(10.0) == 10.0
    assert state["n"] >= 1
    assert S.right_inverse(25.0) == 26.0
    loc, size = S.next_jump(40.0)
    assert loc == 41.0 and size == 1.0
