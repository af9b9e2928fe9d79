"""Simulated quantum annealing by path-integral Monte Carlo.

The transverse-field model is replaced by ``tau`` coupled replicas (Trotter
slices) of the classical spins with periodic imaginary time.  At annealing
fraction ``t`` the replica Hamiltonian is::

    H(s) = - sum_l [ B(t) sum_<ij> J_ij s_il s_jl + J(t) sum_j s_jl s_j,l+1 ]
    J(t) = -(tau T / 2) ln tanh(A(t) / (tau T))

sampled at temperature ``tau * T``.  Field terms are not part of the
replica Hamiltonian, so instances with nonzero ``h`` are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .errors import ConfigurationError, InvalidArgumentError
from .ising import IsingInstance, energy
from .sa import SaRunResult
from .seeding import make_rng

EPS_A = 1e-12


def log_coth(x):
    """``ln coth(x)`` for ``x > 0``, accurate for large ``x``."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore"):
        return np.log1p(2.0 / np.expm1(2.0 * x))


def dw_A(t):
    t = np.asarray(t, dtype=np.float64)
    return np.where(t <= 0.6, 8.0 * t ** 2 - 9.6 * t + 2.88, 0.0)


def dw_B(t):
    t = np.asarray(t, dtype=np.float64)
    return 5.2 * t ** 2 + 0.2 * t


def dw_dA(t):
    t = np.asarray(t, dtype=np.float64)
    return np.where(t <= 0.6, 16.0 * t - 9.6, 0.0)


def dw_dB(t):
    t = np.asarray(t, dtype=np.float64)
    return 10.4 * t + 0.2


@dataclass(frozen=True)
class SqaSchedule:
    """Annealing controls on the normalised time ``t in [0, 1]``.

    ``A`` multiplies the transverse driver and ``B`` the Ising term.  The
    derivatives ``dA``/``dB`` are only needed by the exact-bound code; when
    absent they are taken by central differences.
    """

    A: Callable
    B: Callable
    T: float = 0.1
    eps_A: float = EPS_A
    dA: Callable | None = None
    dB: Callable | None = None
    name: str = "custom"

    def __post_init__(self):
        if not self.T > 0:
            raise ConfigurationError("temperature must be positive")
        if not self.eps_A > 0:
            raise ConfigurationError("eps_A must be positive")

    def A_clamped(self, t):
        return np.maximum(self.A(t), self.eps_A)

    def derivative_A(self, t):
        return _deriv(self.A, self.dA, t)

    def derivative_B(self, t):
        return _deriv(self.B, self.dB, t)


def _deriv(f, df, t):
    if df is not None:
        return df(t)
    step = 1e-6
    t = np.asarray(t, dtype=np.float64)
    lo, hi = np.clip(t - step, 0, 1), np.clip(t + step, 0, 1)
    return (f(hi) - f(lo)) / (hi - lo)


def default_dw_schedule(T: float = 0.1) -> SqaSchedule:
    """``A(t) = 8t^2 - 9.6t + 2.88`` up to ``t = 0.6`` then 0; ``B(t) = 5.2t^2 + 0.2t``."""
    return SqaSchedule(dw_A, dw_B, T, EPS_A, dw_dA, dw_dB, "dw")


def constant_schedule(a: float, b: float, T: float = 0.1) -> SqaSchedule:
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))  # noqa: E731
    return SqaSchedule(lambda t: np.full_like(np.asarray(t, dtype=float), a),
                       lambda t: np.full_like(np.asarray(t, dtype=float), b),
                       T, EPS_A, zero, zero, f"const({a},{b})")


def imaginary_time_coupling(A_t, tau: int, T: float, eps_A: float = EPS_A):
    """Replica coupling ``-(tau T/2) ln tanh(max(A_t, eps_A) / (tau T))``."""
    if tau < 2:
        raise InvalidArgumentError("tau must be >= 2")
    if not T > 0:
        raise InvalidArgumentError("temperature must be positive")
    tT = tau * T
    out = 0.5 * tT * log_coth(np.maximum(A_t, eps_A) / tT)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class PathIntegralState:
    """``tau x b`` replica spins; slice ``tau - 1`` neighbours slice 0."""

    slices: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.slices)
        if s.ndim != 2 or s.shape[0] < 2:
            raise InvalidArgumentError("need a (tau, b) array with tau >= 2")
        if not np.all(np.abs(s) == 1):
            raise InvalidArgumentError("spins must be +1 or -1")
        s = s.astype(np.int8)
        s.setflags(write=False)
        object.__setattr__(self, "slices", s)

    @property
    def tau(self) -> int:
        return self.slices.shape[0]

    @property
    def b(self) -> int:
        return self.slices.shape[1]

    @classmethod
    def random(cls, tau: int, b: int, rng: np.random.Generator) -> "PathIntegralState":
        return cls(2 * rng.integers(0, 2, size=(tau, b)) - 1)


def _require_no_field(inst: IsingInstance):
    if inst.has_field:
        raise ConfigurationError("SQA replica Hamiltonian has no field term; instance has h != 0")


def _check_dims(inst: IsingInstance, state: PathIntegralState):
    if state.b != inst.b:
        raise InvalidArgumentError(f"state has b={state.b}, instance has b={inst.b}")


def _controls(sched: SqaSchedule, t, tau: int):
    return float(sched.B(t)), imaginary_time_coupling(sched.A(t), tau, sched.T, sched.eps_A)


def replica_energy(inst: IsingInstance, state: PathIntegralState, B_t: float, J_t: float) -> float:
    """Direct evaluation of the replica Hamiltonian (no incremental updates)."""
    s = state.slices.astype(np.float64)
    ising = -np.sum((s[:, inst.rows] * s[:, inst.cols]) @ inst.couplings)
    replica = -np.sum(s * np.roll(s, -1, axis=0))
    return float(B_t * ising + J_t * replica)


def local_delta(inst: IsingInstance, state: PathIntegralState, l: int, i: int,
                B_t: float, J_t: float) -> float:
    s = state.slices
    tau = state.tau
    indptr, indices, weights = inst.csr
    lo, hi = indptr[i], indptr[i + 1]
    f = float(np.dot(weights[lo:hi], s[l, indices[lo:hi]]))
    return float(2.0 * s[l, i] * (B_t * f + J_t * (s[(l + 1) % tau, i] + s[(l - 1) % tau, i])))


def global_delta(inst: IsingInstance, state: PathIntegralState, i: int, B_t: float) -> float:
    s = state.slices
    indptr, indices, weights = inst.csr
    lo, hi = indptr[i], indptr[i + 1]
    f = s[:, indices[lo:hi]].astype(np.float64) @ weights[lo:hi]
    return float(2.0 * B_t * np.dot(s[:, i], f))


def local_sweep(inst: IsingInstance, state: PathIntegralState, sched: SqaSchedule, t_k: float,
                rng: np.random.Generator) -> PathIntegralState:
    """Single-entry flips over every slice ``l`` then site ``i`` in order."""
    _require_no_field(inst)
    _check_dims(inst, state)
    B_t, J_t = _controls(sched, t_k, state.tau)
    spins = state.slices.astype(np.float64)
    indptr, indices, weights = inst.csr
    _kernels.sqa_local(spins, indptr, indices, weights, B_t, J_t, state.tau * sched.T, rng)
    return PathIntegralState(spins)


def global_sweep(inst: IsingInstance, state: PathIntegralState, sched: SqaSchedule, t_k: float,
                 rng: np.random.Generator) -> PathIntegralState:
    """Whole-column flips, site by site; each column is one accept/reject unit."""
    _require_no_field(inst)
    _check_dims(inst, state)
    B_t = float(sched.B(t_k))
    spins = state.slices.astype(np.float64)
    indptr, indices, weights = inst.csr
    _kernels.sqa_global(spins, indptr, indices, weights, B_t, state.tau * sched.T, rng)
    return PathIntegralState(spins)


def frozen_chains(inst: IsingInstance, sched: SqaSchedule, t: float, tau: int, n_chains: int,
                  sweeps: int, rng: np.random.Generator) -> np.ndarray:
    """Final replica states of independent chains run at a fixed ``t``."""
    _require_no_field(inst)
    B_t, J_t = _controls(sched, t, tau)
    spins = (2.0 * rng.integers(0, 2, size=(n_chains, tau, inst.b)) - 1.0)
    indptr, indices, weights = inst.csr
    _kernels.sqa_local_batch(spins, indptr, indices, weights, B_t, J_t, tau * sched.T, sweeps, rng)
    return spins.astype(np.int8)


def sqa_run(inst: IsingInstance, sched: SqaSchedule | None = None, tau: int = 30,
            sweeps: int = 1000, seed: int = 0, local_first: bool = True) -> SaRunResult:
    """Anneal with ``t_k = k / sweeps`` for ``k = 1 .. sweeps``.

    Each sweep is one local sweep and one global sweep (order set by
    ``local_first``).  The reported energy is the classical energy of the
    first slice of the final state.
    """
    _require_no_field(inst)
    if sweeps < 1:
        raise InvalidArgumentError("sweeps must be >= 1")
    if tau < 2:
        raise InvalidArgumentError("tau must be >= 2")
    sched = default_dw_schedule() if sched is None else sched
    rng = make_rng(seed)
    spins = 2.0 * rng.integers(0, 2, size=(tau, inst.b)) - 1.0
    t = np.arange(1, sweeps + 1, dtype=np.float64) / sweeps
    Bs = np.asarray(sched.B(t), dtype=np.float64)
    Jts = np.asarray(imaginary_time_coupling(sched.A(t), tau, sched.T, sched.eps_A), dtype=np.float64)
    indptr, indices, weights = inst.csr
    best = _kernels.sqa_anneal(spins, indptr, indices, weights, Bs, Jts, tau * sched.T,
                               local_first, rng)
    config = spins[0].astype(np.int8)
    final = energy(inst, config)
    return SaRunResult(config, final, min(float(best), final), sweeps, int(seed))
