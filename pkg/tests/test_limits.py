import math

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from trapcascade import (PathKey, RegimeSpec, StableSpec, aging_process_provider,
                         check_trajectory, fine_tuned_volumes, fine_tuning_deviation,
                         iid_depth_provider, k_process_provider, ks_two_sample,
                         path_stream, rescaled_bdtm, simulate_cje_horizon,
                         stable_jump_set, z1_aging_process, z1_first_passage_pool,
                         z1_k_process)

from conftest import mean_stderr


def test_regime_spec_examples():
    vols = fine_tuned_volumes((0.5, 0.25), 16)
    assert vols == (16, 4)
    assert RegimeSpec.ergodic(16).factor((0.5, 0.25)) == pytest.approx(256.0)
    assert RegimeSpec.poly_aging(16, 1.0).chi((0.5, 0.25)) == pytest.approx((0.5, 0.25))
    r1 = RegimeSpec.order1(10.0, (7, 9))
    assert r1.factor((0.5, 0.25)) == 10.0
    assert r1.volumes_for((0.5, 0.25)) == (7, 9)


def test_regime_spec_validation():
    with pytest.raises(ValueError):
        RegimeSpec.poly_aging(10, 3.0).factor((0.5,))  # beta >= 1/alpha_1
    with pytest.raises(ValueError):
        RegimeSpec("order1", m=5.0)
    with pytest.raises(ValueError):
        RegimeSpec("bogus")
    with pytest.raises(ValueError):
        RegimeSpec.ergodic(0)


def test_fine_tuning_deviation_bound():
    for n in (16, 100, 1000, 12345):
        for alphas in ((0.5, 0.25), (0.5, 0.3), (0.4, 0.7, 0.2)):
            dev, bound = fine_tuning_deviation(alphas, n)
            assert dev <= bound
    # powers: rounding-free, deviation exactly zero
    dev, _ = fine_tuning_deviation((0.5, 0.25), 16)
    assert dev == 0.0


def test_rescaled_bdtm_wires_volumes_and_factor():
    prov, factor = rescaled_bdtm((0.5, 0.25), RegimeSpec.ergodic(16), seed=3)
    assert prov.env.spec.M == (16, 4)
    assert factor == pytest.approx(256.0)
    prov2, factor2 = rescaled_bdtm((0.5,), RegimeSpec.order1(1000.0, (2000,)), seed=3)
    assert prov2.env.spec.M == (2000,)
    assert factor2 == 1000.0


def test_k_process_provider_structure(rng):
    prov = k_process_provider((0.5,), 0.01, seed=11)
    atoms = prov.atom_sizes(1, ())
    assert atoms.min() > 0.01
    S = prov.get(1, ())
    assert prov.get(1, ()) is S
    # every jump size is an atom size
    S.ensure_domain(20.0)
    assert set(np.unique(S.sizes)).issubset(set(atoms))
    # unit-rate revisits: expected points per atom per unit length is 1
    length = 200.0
    S.ensure_domain(length)
    count = np.searchsorted(S.locations, length)
    m, se = count / (atoms.size * length), math.sqrt(count) / (atoms.size * length)
    assert abs(m - 1.0) <= 4.0 * se


def test_k_process_atom_frequencies_uniform(rng):
    prov = k_process_provider((0.5,), 0.05, seed=13)
    atoms = prov.atom_sizes(1, ())
    S = prov.get(1, ())
    S.ensure_domain(400.0)
    n = np.searchsorted(S.locations, 400.0)
    sizes = S.sizes[:n]
    counts = np.array([(sizes == a).sum() for a in atoms])
    expect = n / atoms.size
    # equal Poisson rates across atoms regardless of atom size
    assert np.all(np.abs(counts - expect) <= 5.0 * math.sqrt(expect))


def test_k_process_atoms_match_stable_jump_set():
    prov = k_process_provider((0.5, 0.3), 0.01, seed=17)
    from trapcascade.limits import _TAG_ATOMS
    ref = stable_jump_set(StableSpec(0.3, 0.01), (0.0, 1.0),
                          path_stream(17, PathKey((2, 0), _TAG_ATOMS)))
    assert np.array_equal(prov.atom_sizes(2, (0,)), ref.sizes)


def test_aging_provider_is_lazy_subordinator():
    prov = aging_process_provider((0.5,), 0.01, seed=19)
    S = prov.get(1, ())
    from trapcascade.limits import _TAG_SUBORDINATOR
    ref = stable_jump_set(StableSpec(0.5, 0.01), (0.0, 1.0),
                          path_stream(19, PathKey((1,), _TAG_SUBORDINATOR)))
    assert np.array_equal(S.locations[:ref.jump_count], ref.locations)
    S.ensure_domain(5.0)
    assert S.generated_up_to >= 5.0
    assert prov.get(1, ()) is S


def test_aging_provider_increment_rate(rng):
    spec = StableSpec(0.5, 0.01)
    prov = aging_process_provider((0.5,), 0.01, seed=23)
    S = prov.get(1, ())
    S.ensure_domain(300.0)
    n = np.searchsorted(S.locations, 300.0)
    assert abs(n / 300.0 - spec.jump_rate) <= 4.0 * math.sqrt(n) / 300.0


def test_iid_depth_provider_marginal_matches_finite_volume():
    # label-value vectors of the finite-volume form converge to iid depths
    from trapcascade import Environment, VolumeSpec, bdtm_provider
    ell = 4
    n_rep = 4000
    finite = np.empty((n_rep, ell))
    iid = np.empty((n_rep, ell))
    env = Environment(VolumeSpec((4000,), (0.5,)), 31)
    for i in range(n_rep):
        fp = bdtm_provider(env, dynamics_seed=i)
        Sf = fp.get(1, ())
        finite[i] = Sf.sizes[:ell]
        ip = iid_depth_provider((0.5,), seed=(1 << 30) + i)
        Si = ip.get(1, ())
        iid[i] = Si.sizes[:ell]
    for c in range(ell):
        assert ks_two_sample(finite[:, c], iid[:, c]) < 0.05


def test_fast_sampler_matches_engine_pool():
    from trapcascade import Environment, VolumeSpec, bdtm_provider
    env = Environment(VolumeSpec((50,), (0.5,)), 9)
    pool = env.tau_row(1, ())
    T = 30.0
    z_gen = np.empty(4000)
    for i in range(4000):
        prov = bdtm_provider(env, dynamics_seed=i)
        traj = simulate_cje_horizon(prov, T * 1.000001, path_stream(2, PathKey((i,))))
        z_gen[i] = traj.z_at(T, 1)
    z_fast = z1_first_passage_pool(pool, T, path_stream(3, PathKey()), 4000)
    assert ks_two_sample(z_gen, z_fast) < 0.045  # 99.9% two-sample bound


def test_fast_sampler_matches_engine_aging():
    z_gen = np.empty(3000)
    for i in range(3000):
        prov = aging_process_provider((0.5,), 1e-3, seed=(7 << 20) + i)
        traj = simulate_cje_horizon(prov, 1.0000001, path_stream(4, PathKey((i,))))
        z_gen[i] = traj.z_at(1.0, 1)
    z_fast = z1_aging_process(0.5, 1e-3, 1.0, 8, 3000)
    assert ks_two_sample(z_gen, z_fast) < 0.052


def test_fast_sampler_matches_engine_k_process():
    z_gen = np.empty(3000)
    for i in range(3000):
        prov = k_process_provider((0.5,), 1e-3, seed=(9 << 20) + i)
        traj = simulate_cje_horizon(prov, 1.0000001, path_stream(6, PathKey((i,))))
        z_gen[i] = traj.z_at(1.0, 1)
    z_fast = z1_k_process(0.5, 1e-3, 1.0, 10, 3000)
    assert ks_two_sample(z_gen, z_fast) < 0.052


def test_two_level_limit_trajectories_are_structurally_sound():
    for i in range(10):
        prov = aging_process_provider((0.5, 0.3), 1e-3, seed=700 + i)
        traj = simulate_cje_horizon(prov, 0.5, path_stream(41, PathKey((i,))))
        check_trajectory(traj)
        kp = k_process_provider((0.5, 0.3), 1e-4, seed=800 + i)
        traj2 = simulate_cje_horizon(kp, 0.5, path_stream(42, PathKey((i,))))
        check_trajectory(traj2)


def test_k_process_zero_atom_realisation_exhausts():
    # with a huge truncation the atom set can be empty; races must then fail
    from trapcascade import DomainExhausted, run_race
    found = False
    for seed in range(40):
        prov = k_process_provider((0.5,), 10.0, seed=seed)
        if prov.atom_sizes(1, ()).size == 0:
            found = True
            with pytest.raises(DomainExhausted):
                run_race(prov.get(1, ()), 1.0, path_stream(43, PathKey((seed,))))
            break
    assert found
