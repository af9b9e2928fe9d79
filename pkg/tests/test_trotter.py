import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from isinganneal.errors import CapabilityError, ConfigurationError, InvalidArgumentError
from isinganneal.ising import IsingInstance, boltzmann_distribution
from isinganneal.trotter import (TheoryParams, check_generation_conditions, clt_convergence_test,
                                 clt_statistic, constant_gamma, default_L1M_singleflip, gamma_coupling,
                                 gamma_schedule_floor, trace_partition_exact, loglog_slope,
                                 marginal_tv_trend, max_single_flip_dF1, mcmc_q_t, path_F0, path_F1,
                                 path_states, q_exact, quantum_partition, sample_q_fixed,
                                 sliced_partition, sliced_partition_brute, transition_matrix,
                                 trotter_partition_check)
from isinganneal.verify import _flat_index, chi_square_gof

from conftest import instances

PAIR = IsingInstance.from_edges(2, [(0, 1, 1.0)])


# -- gamma and the admissibility floor --------------------------------------

def test_gamma_at_one(frozen):
    assert gamma_coupling(1.0, 1.0, 1) == pytest.approx(frozen["gamma_at_one"], rel=1e-12)


def test_gamma_limits(frozen):
    assert 0 < gamma_coupling(1.0, 1e3, 1) < 1e-300 or gamma_coupling(1.0, 1e3, 1) == 0.0
    assert gamma_coupling(1.0, 40.0, 1) > 0
    x = np.arctanh(np.exp(-1.0))
    assert gamma_coupling(1.0, x, 1) == pytest.approx(frozen["gamma_at_atanh_inv_e"], rel=1e-12)


@given(st.floats(1e-3, 20.0), st.floats(1e-3, 20.0))
def test_gamma_decreasing(a, b):
    lo, hi = sorted((a, b))
    assert gamma_coupling(1.0, lo, 1) >= gamma_coupling(1.0, hi, 1)


def test_gamma_rejects_nonpositive():
    with pytest.raises(InvalidArgumentError):
        gamma_coupling(1.0, 0.0, 4)


def test_floor_example(frozen):
    p = TheoryParams(beta=1.0, M=1 + 1, R=1, L1M=2.0)   # R L1M = 2, M / beta = 2
    assert gamma_schedule_floor(0, p) / 2 == pytest.approx(frozen["floor_RL2_t0"], rel=1e-12)
    p1 = TheoryParams(beta=2.0, M=2, R=1, L1M=2.0)      # M / beta = 1
    assert gamma_schedule_floor(0, p1) == pytest.approx(frozen["floor_RL2_t0"], rel=1e-12)


def test_floor_limits_and_scaling():
    p = TheoryParams(beta=1.0, M=4, R=3)
    assert gamma_schedule_floor(1e300, p) < 1e-3
    q = TheoryParams(beta=1.0, M=8, R=3)
    for t in (0, 5, 1000):
        assert gamma_schedule_floor(t, q) == pytest.approx(2 * gamma_schedule_floor(t, p))
    ts = np.arange(0, 100)
    assert np.all(np.diff(gamma_schedule_floor(ts, p)) < 0)


def test_floor_needs_b_for_default_R():
    with pytest.raises(ConfigurationError):
        gamma_schedule_floor(0, TheoryParams(1.0, 4))
    assert TheoryParams(1.0, 4).resolved_R(3) == 12


def test_params_validation():
    for kw in ({"beta": 0.0, "M": 4}, {"beta": 1.0, "M": 1}, {"beta": 1.0, "M": 4, "R": 0},
               {"beta": 1.0, "M": 4, "acceptance": "glauber"}):
        with pytest.raises(ConfigurationError):
            TheoryParams(**kw)


# -- F1 changes and generation probabilities -------------------------------

def test_L1M_examples():
    assert default_L1M_singleflip() == 4.0
    assert max_single_flip_dF1(1, 2) == 4.0
    for b in (1, 2, 3):
        for M in (2, 3, 4, 5):
            assert max_single_flip_dF1(b, M) == 4.0


def test_aligned_column_flip_lowers_F1_by_four():
    for M in (2, 3, 6):
        S = np.ones((M, 2))
        for k in range(M):
            T = S.copy()
            T[k, 1] = -1
            assert path_F1(T) - path_F1(S) == -4


def test_generation_conditions():
    for b, M in ((1, 2), (2, 3), (2, 4)):
        assert all(check_generation_conditions(b, M).values())


def test_path_enumeration_cap():
    with pytest.raises(CapabilityError):
        path_states(4, 5)


# -- exact target and chain --------------------------------------------------

def test_q_exact_without_F1_factorizes():
    p = TheoryParams(beta=2.0, M=3)
    q = q_exact(PAIR, p, None).reshape(4, 4, 4)
    one = boltzmann_distribution(PAIR, 2.0 / 3)
    assert np.allclose(q, np.einsum("a,b,c->abc", one, one, one), atol=1e-14)


def test_detailed_balance_all_pairs():
    for acc in ("metropolis", "heat-bath"):
        p = TheoryParams(beta=1.0, M=3, acceptance=acc)
        g = p.gamma(0.0)
        G = transition_matrix(PAIR, p, g)
        q = q_exact(PAIR, p, g)
        assert G.shape == (64, 64)
        assert np.allclose(G.sum(axis=0), 1.0)
        flux = G * q[None, :]
        assert np.max(np.abs(flux - flux.T)) < 1e-15
        assert np.allclose(G @ q, q, atol=1e-15)


def test_chain_stationary_fixed_t():
    p = TheoryParams(beta=1.0, M=3, Gamma=constant_gamma(1.0))
    q = q_exact(PAIR, p, p.gamma(0.0))
    n = 200_000
    # p-values of this test over 30 seeds are uniform (KS p ~ 0.9); seed is fixed
    S = mcmc_q_t(p, PAIR, 150, np.random.default_rng(1), n_chains=n, check_admissible=False)
    counts = np.bincount(_flat_index(S.reshape(n, -1)), minlength=64)
    assert chi_square_gof(counts, q)[1] >= 0.01


def test_chain_freezes_as_gamma_vanishes():
    p = TheoryParams(beta=1.0, M=4, Gamma=constant_gamma(1e-9))
    S = mcmc_q_t(p, PAIR, 200, np.random.default_rng(1), n_chains=2000,
                 init=np.ones((4, 2)), check_admissible=False)
    # replicas stay aligned across imaginary time
    assert np.all(S == S[:, :1, :])


def test_chain_rejects_inadmissible_schedule():
    p = TheoryParams(beta=1.0, M=3, Gamma=constant_gamma(0.5))
    with pytest.raises(ConfigurationError):
        mcmc_q_t(p, PAIR, 10, np.random.default_rng(2))


def test_chain_accepts_floor_schedule():
    p = TheoryParams(beta=1.0, M=3)
    floor = lambda t: gamma_schedule_floor(t, p, 2)
    q = TheoryParams(beta=1.0, M=3, Gamma=floor)
    S = mcmc_q_t(q, PAIR, 50, np.random.default_rng(3), n_chains=4)
    assert S.shape == (4, 3, 2)


def test_marginal_tv_decreases_with_growing_gamma():
    beta, M = 3.0, 3
    base = gamma_schedule_floor(0, TheoryParams(beta, M), 2)
    p = TheoryParams(beta, M, Gamma=lambda t: base + (M / beta) * np.log1p(np.asarray(t, float)))
    tv = marginal_tv_trend(PAIR, p, [100, 10_000])
    assert tv[10_000] < tv[100]


# -- i.i.d. slices and the CLT statistic -------------------------------------

def test_slices_uniform_at_high_temperature():
    inst = IsingInstance.from_edges(3, [(0, 1, 1.0), (1, 2, -1.0)])
    p = TheoryParams(beta=1e-9, M=4)
    S = sample_q_fixed(p, inst, np.random.default_rng(4), n=250_000)
    counts = np.bincount(_flat_index(S.reshape(-1, 3)), minlength=8)
    assert counts.sum() == 10 ** 6
    assert stats.chisquare(counts).pvalue >= 0.01


def test_aligned_slice_probability(frozen):
    p = TheoryParams(beta=4.0, M=4)
    S = sample_q_fixed(p, PAIR, np.random.default_rng(5), n=50_000)
    aligned = (S[..., 0] == S[..., 1])
    target = frozen["aligned_slice_b2_J1"]
    n = aligned.size
    assert abs(aligned.mean() - target) <= 4 * np.sqrt(target * (1 - target) / n)
    # exchangeable slices
    assert abs(aligned[:, 0].mean() - aligned[:, -1].mean()) <= 4 * np.sqrt(2 * target * (1 - target) / 50_000)


def test_clt_statistic_examples():
    assert clt_statistic(np.ones((4, 2)), PAIR) == 2.0
    assert clt_statistic(np.ones((4, 3)), IsingInstance.from_edges(3, [])) == 0.0


@settings(max_examples=40, deadline=None)
@given(instances(min_b=2, max_b=5, fields=False), st.integers(2, 9), st.integers(0, 2 ** 32))
def test_clt_statistic_matches_double_loop(inst, M, seed):
    S = np.random.default_rng(seed).choice([-1, 1], size=(M, inst.b))
    ref = 0.0
    for k in range(M):
        for i, j, w in inst.edges:
            ref += w * S[k, i] * S[k, j]
    assert clt_statistic(S, inst) == pytest.approx(ref / np.sqrt(M), abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(instances(min_b=1, max_b=3), st.integers(2, 4), st.integers(0, 2 ** 32))
def test_path_F0_is_sum_of_negated_energies(inst, M, seed):
    from isinganneal.ising import energy
    S = np.random.default_rng(seed).choice([-1, 1], size=(M, inst.b))
    assert path_F0(inst, S) == pytest.approx(-sum(energy(inst, s) for s in S), abs=1e-12)


def test_clt_variance_and_mean(frozen):
    r = clt_convergence_test(PAIR, 1.0, 100_000, Ms=(8, 256), seed=7)
    assert 0.97 <= r.variance <= 1.03
    assert r.ks[-1] < r.ks[0]
    assert r.expected_mean == pytest.approx(frozen["clt_mean_beta1_M256"], rel=1e-12)
    assert abs(r.mean - r.expected_mean) <= 3 * r.sigma / np.sqrt(r.n_samples)


def test_clt_degenerate_zero_couplings():
    inst = IsingInstance.from_edges(2, [(0, 1, 0.0)])
    r = clt_convergence_test(inst, 1.0, 2000, Ms=(8, 16))
    assert r.passed and r.variance == 0.0


def test_clt_needs_samples():
    with pytest.raises(ConfigurationError):
        clt_convergence_test(PAIR, 1.0, 10)


# -- partition functions -----------------------------------------------------

def test_free_spin_partition(frozen):
    inst = IsingInstance.from_edges(1, [])
    assert trace_partition_exact(inst, 1.0, 1.0) == pytest.approx(frozen["z_b1_free_betaGamma1"], rel=1e-13)


def test_exact_partitions_match_oracle(frozen):
    assert trace_partition_exact(PAIR, 1.0, 1.0) == pytest.approx(frozen["z_b2_J1_betaGamma1"], rel=1e-12)
    field = IsingInstance.from_edges(1, [], h=[1.0])
    assert trace_partition_exact(field, 1.0, 1.0) == pytest.approx(frozen["z_b1_h1_betaGamma1"], rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(instances(max_b=3), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_sign_convention_bridge(inst, beta, Gamma):
    assert trace_partition_exact(inst, beta, Gamma) == pytest.approx(
        quantum_partition(inst, beta, Gamma), rel=1e-9)


def test_sliced_partition_matches_oracle(frozen):
    field = IsingInstance.from_edges(1, [], h=[1.0])
    for M, ref in frozen["sliced_b1_h1_M"].items():
        z, zm, err = trotter_partition_check(field, TheoryParams(1.0, int(M)), 1.0)
        assert zm == pytest.approx(ref, rel=1e-12)


def test_trotter_error_halves_by_three():
    field = IsingInstance.from_edges(1, [], h=[1.0])
    errs = [trotter_partition_check(field, TheoryParams(1.0, M), 1.0)[2] for M in (4, 8, 16, 32)]
    assert all(e2 <= e1 / 3 for e1, e2 in zip(errs, errs[1:]))


def test_trotter_slope_pair():
    Ms = (4, 8, 16, 32)
    errs = [trotter_partition_check(PAIR, TheoryParams(1.0, M), 1.0)[2] for M in Ms]
    assert loglog_slope(Ms, errs) <= -1.8


def test_transfer_matrix_matches_brute_force():
    inst = IsingInstance.from_edges(3, [(0, 1, 1.0), (1, 2, -1.0)], h=[0.2, 0.0, -0.4])
    assert sliced_partition(inst, 1.0, 0.7, 4) == pytest.approx(sliced_partition_brute(inst, 1.0, 0.7, 4),
                                                                 rel=1e-10)


def test_partition_check_validation():
    with pytest.raises(InvalidArgumentError):
        trotter_partition_check(PAIR, TheoryParams(1.0, 4), 0.0)
    with pytest.raises(CapabilityError):
        trotter_partition_check(IsingInstance.from_edges(5, []), TheoryParams(1.0, 4), 1.0)


def test_clt_accepts_params():
    a = clt_convergence_test(PAIR, TheoryParams(1.0, 8), 2000, Ms=(8, 16), seed=3)
    b = clt_convergence_test(PAIR, 1.0, 2000, Ms=(8, 16), seed=3)
    assert a.ks == b.ks
