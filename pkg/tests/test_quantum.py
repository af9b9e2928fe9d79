from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isinganneal.errors import CapabilityError, InvalidArgumentError
from isinganneal.ising import IsingInstance, all_energies, boltzmann_distribution, brute_force_ground
from isinganneal.quantum import (BoundReport, annealing_hamiltonian, build_quantum_ising,
                                 build_transverse, evolve, evolve_trajectory, gibbs_diagonal,
                                 spectrum_equivalence_check, success_probability, theorem2_bound,
                                 uniform_state)
from isinganneal.sqa import constant_schedule, default_dw_schedule

from conftest import ferro_chain, instances, triangle

SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.diag([1.0, -1.0])


def kron_site(op, j, b):
    return reduce(np.kron, [op if k == j else np.eye(2) for k in range(b)])


def kron_hx(b):
    return -sum(kron_site(SX, j, b) for j in range(b))


def kron_hi(inst):
    b = inst.b
    H = np.zeros((2 ** b, 2 ** b))
    for i, j, w in inst.edges:
        H -= w * kron_site(SZ, i, b) @ kron_site(SZ, j, b)
    for j in range(b):
        H -= inst.h[j] * kron_site(SZ, j, b)
    return H


# -- construction ------------------------------------------------------------

def test_quantum_ising_examples():
    assert np.allclose(np.diag(build_quantum_ising(IsingInstance.from_edges(2, [(0, 1, 1.0)])).matrix),
                       [-1, 1, 1, -1])
    assert np.allclose(build_quantum_ising(IsingInstance.from_edges(1, [], h=[1.0])).matrix,
                       np.diag([-1, 1]))


@settings(max_examples=40, deadline=None)
@given(instances(max_b=7))
def test_quantum_ising_matches_kron_oracle(inst):
    H = build_quantum_ising(inst).matrix
    assert np.allclose(H, kron_hi(inst), atol=1e-12)
    assert np.allclose(np.diag(H), all_energies(inst), atol=1e-12)


@pytest.mark.parametrize("b", range(1, 7))
def test_transverse_matches_kron_oracle(b):
    assert np.array_equal(build_transverse(b).matrix, kron_hx(b))


def test_transverse_examples():
    H1 = build_transverse(1)
    assert np.array_equal(H1.matrix, [[0, -1], [-1, 0]])
    lam, V = H1.eigh()
    assert lam[0] == pytest.approx(-1)
    assert np.allclose(np.abs(V[:, 0]), [1 / np.sqrt(2)] * 2)
    lam2, V2 = build_transverse(2).eigh()
    assert lam2[0] == pytest.approx(-2) and np.allclose(np.abs(V2[:, 0]), 0.5)
    v = uniform_state(3)
    assert np.vdot(v, build_transverse(3).matrix @ v).real == pytest.approx(-3)


def test_caps():
    with pytest.raises(CapabilityError):
        build_transverse(13)
    with pytest.raises(CapabilityError):
        evolve(IsingInstance.from_edges(11, []), None, 1.0, 1)
    with pytest.raises(CapabilityError):
        theorem2_bound(IsingInstance.from_edges(9, [(0, 1, 1.0)]))


def test_annealing_hamiltonian_endpoints():
    inst = IsingInstance.from_edges(2, [(0, 1, -1.0)], h=[0.2, 0.0])
    assert np.allclose(annealing_hamiltonian(inst, None, 0.0).matrix, 2.88 * kron_hx(2))
    assert np.allclose(annealing_hamiltonian(inst, None, 1.0).matrix, 5.4 * kron_hi(inst))


def test_annealing_hamiltonian_hermitian():
    inst = triangle(-1.0)
    for u in np.random.default_rng(0).random(20):
        assert annealing_hamiltonian(inst, None, u).is_hermitian()


# -- evolution ---------------------------------------------------------------

@pytest.mark.parametrize("t_f", [0.5, 10.0, 200.0])
def test_stationary_eigenstate(t_f):
    inst = IsingInstance.from_edges(1, [])
    psi = evolve(inst, constant_schedule(1.0, 0.0), t_f, 50)
    assert abs(np.vdot(uniform_state(1), psi)) == pytest.approx(1.0, abs=1e-8)


def test_single_spin_adiabatic_matches_reference(frozen):
    inst = IsingInstance.from_edges(1, [], h=[1.0])
    psi = evolve(inst, None, 100.0, 4000)
    p = abs(psi[0]) ** 2
    assert p >= 0.99
    assert p == pytest.approx(frozen["qa_b1_h1_tf100_overlap"], abs=1e-6)


def test_self_convergence():
    inst = IsingInstance.from_edges(2, [(0, 1, 1.0)], h=[0.3, 0.0])
    a = evolve(inst, None, 10.0, 4000)
    b = evolve(inst, None, 10.0, 8000)
    assert np.max(np.abs(a - b)) < 1e-6


@settings(max_examples=15, deadline=None)
@given(instances(max_b=4), st.floats(0.1, 30.0))
def test_evolution_is_unitary(inst, t_f):
    traj = evolve_trajectory(inst, None, t_f, 8, 4)
    assert np.allclose(np.linalg.norm(traj, axis=1), 1.0, atol=1e-10)


def test_evolve_validation():
    inst = ferro_chain(2)
    with pytest.raises(InvalidArgumentError):
        evolve(inst, None, 0.0, 10)
    with pytest.raises(InvalidArgumentError):
        evolve(inst, None, 1.0, 0)
    with pytest.raises(InvalidArgumentError):
        evolve(inst, None, 1.0, 10, psi0=np.ones(4))


# -- measurement -------------------------------------------------------------

def test_success_probability_examples():
    inst = IsingInstance.from_edges(1, [], h=[1.0])
    assert success_probability(inst, np.array([1.0, 0.0])) == 1.0
    assert success_probability(ferro_chain(2), uniform_state(2)) == pytest.approx(0.5)
    assert success_probability(triangle(-1.0), uniform_state(3)) == pytest.approx(0.75)
    with pytest.raises(InvalidArgumentError):
        success_probability(inst, uniform_state(2))


# -- bound -------------------------------------------------------------------

def test_bound_constant_hamiltonian_is_one():
    inst = IsingInstance.from_edges(1, [], h=[1.0])
    r = theorem2_bound(inst, constant_schedule(1.0, 1.0), t_f=5.0, u_grid=32)
    assert r.zeta == 1 and r.Pi == 0.0 and r.lower_bound == 1.0


def test_bound_single_spin_holds():
    inst = IsingInstance.from_edges(1, [], h=[1.0])
    r = theorem2_bound(inst, None, t_f=100.0, u_grid=256)
    assert isinstance(r, BoundReport)
    assert r.true_success >= r.lower_bound
    assert r.zeta == 1 and 0.0 <= r.p0 <= 1.0 and r.Pi > 0


def test_bound_formula_assembled_from_parts():
    inst = IsingInstance.from_edges(2, [(0, 1, 1.0)], h=[0.5, 0.0])
    r = theorem2_bound(inst, None, t_f=10.0, u_grid=64)
    expect = np.exp(-r.xi) - 2 ** 2 * r.zeta * r.Pi * np.exp(2 * r.xi) * (1 - r.p0)
    assert r.lower_bound == pytest.approx(expect)
    d = r.to_dict()
    assert set(d) >= {"zeta", "p0", "Pi", "xi", "lower_bound", "true_success"}


def test_bound_degenerate_ground_band():
    r = theorem2_bound(ferro_chain(2), None, t_f=10.0, u_grid=64)
    assert r.zeta == 2 and r.xi >= 0.0
    assert r.lower_bound <= r.true_success or r.lower_bound <= 0


# -- spectrum equivalence ----------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(instances(min_b=3, max_b=3))
def test_spectrum_equivalence_random_b3(inst):
    assert spectrum_equivalence_check(inst)


def test_spectrum_equivalence_antiferro_pair():
    inst = IsingInstance.from_edges(2, [(0, 1, -1.0)])
    assert spectrum_equivalence_check(inst)
    assert np.linalg.eigvalsh(build_quantum_ising(inst).matrix)[0] == pytest.approx(-1)
    assert len(brute_force_ground(inst)[1]) == 2


def test_spectrum_equivalence_with_field():
    assert spectrum_equivalence_check(IsingInstance.from_edges(2, [], h=[0.5, 0.0]))


def test_gibbs_diagonal_equals_boltzmann():
    inst = IsingInstance.from_edges(3, [(0, 1, 1.0), (1, 2, -1.0)], h=[0.1, -0.4, 0.0])
    assert np.allclose(gibbs_diagonal(build_quantum_ising(inst), 2.0),
                       boltzmann_distribution(inst, 2.0), atol=1e-12)
