"""Path-integral theory at small sizes: the sliced target distribution, its
inhomogeneous Metropolis chain, marginal convergence, the slice-sum CLT, and
the Trotter approximation of the transverse-field partition function.

A path state is an ``(M, b)`` array ``s[k, i]`` with slice ``M - 1`` bonded to
slice 0.  With ``E0(s) = sum_<ij> J_ij s_i s_j + sum_i h_i s_i`` (minus the
classical energy) the sliced weight at step ``t`` is::

    exp( (beta / M) sum_k E0(s_k) + gamma(t) F1(s) ),   F1 = sum_k sum_i s_ik s_i,k+1
    gamma(t) = 1/2 log coth(beta Gamma(t) / M)

For the spin-glass instances used here ``h = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats
from scipy.linalg import expm

from . import _kernels
from .errors import CapabilityError, ConfigurationError, InvalidArgumentError
from .ising import IsingInstance, all_energies, boltzmann_distribution, configs_at
from .quantum import _ising_diagonal, _transverse
from .seeding import make_rng
from .sqa import log_coth

SAMPLE_CAP = 4
PATH_ENUM_CAP = 16


def gamma_coupling(beta: float, Gamma_t, M: int):
    """``1/2 log coth(beta Gamma / M)``; positive and decreasing in ``beta Gamma / M``."""
    g = np.asarray(Gamma_t, dtype=np.float64)
    if np.any(~(g > 0)):
        raise InvalidArgumentError("Gamma must be positive (coth is singular at 0)")
    out = 0.5 * log_coth(beta * g / M)
    return float(out) if np.ndim(out) == 0 else out


def default_L1M_singleflip() -> float:
    """Largest change of ``F1`` under one spin flip: two bonds, each by 2."""
    return 4.0


def constant_gamma(value: float) -> Callable:
    return lambda t: np.full_like(np.asarray(t, dtype=np.float64), value)


@dataclass(frozen=True)
class TheoryParams:
    """``R`` defaults to ``b * M`` (the single-flip transition diameter bound)."""

    beta: float
    M: int
    Gamma: Callable = field(default_factory=lambda: constant_gamma(1.0))
    R: int | None = None
    L1M: float = 4.0
    acceptance: str = "metropolis"

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigurationError("beta must be positive")
        if self.M < 2:
            raise ConfigurationError("M must be >= 2")
        if self.R is not None and self.R < 1:
            raise ConfigurationError("R must be >= 1")
        if not self.L1M > 0:
            raise ConfigurationError("L1M must be positive")
        if self.acceptance not in ("metropolis", "heat-bath"):
            raise ConfigurationError("acceptance must be 'metropolis' or 'heat-bath'")

    def resolved_R(self, b: int) -> int:
        return b * self.M if self.R is None else self.R

    def gamma(self, t):
        return gamma_coupling(self.beta, self.Gamma(t), self.M)


def gamma_schedule_floor(t, params: TheoryParams, b: int | None = None):
    """Smallest admissible ``Gamma(t)``: ``(M/beta) atanh((t+2)^(-2/(R L1M)))``."""
    if params.R is None and b is None:
        raise ConfigurationError("need b to resolve the default R = b M")
    R = params.resolved_R(b if b is not None else 0)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise InvalidArgumentError("t must be >= 0")
    out = (params.M / params.beta) * np.arctanh((t + 2.0) ** (-2.0 / (R * params.L1M)))
    return float(out) if out.ndim == 0 else out


def floor_gamma(params_beta: float, M: int, R: int, L1M: float = 4.0) -> Callable:
    """The schedule sitting exactly on the admissibility floor."""
    return lambda t: (M / params_beta) * np.arctanh(
        (np.asarray(t, dtype=np.float64) + 2.0) ** (-2.0 / (R * L1M)))


# -- exact path-space quantities ---------------------------------------------

def _slice_E0(inst: IsingInstance) -> np.ndarray:
    return -all_energies(inst)


def path_F0(inst: IsingInstance, S) -> np.ndarray:
    """``sum_k E0(s_k)`` over the trailing ``(M, b)`` axes (no 1/M)."""
    S = np.asarray(S, dtype=np.float64)
    e = (S[..., inst.rows] * S[..., inst.cols]) @ inst.couplings + S @ inst.h
    return e.sum(axis=-1)


def path_F1(S) -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    return np.sum(S * np.roll(S, -1, axis=-2), axis=(-2, -1))


def path_states(b: int, M: int) -> np.ndarray:
    n = b * M
    if n > PATH_ENUM_CAP:
        raise CapabilityError(f"path enumeration limited to b*M <= {PATH_ENUM_CAP}")
    return configs_at(n, np.arange(1 << n)).reshape(-1, M, b)


def q_exact(inst: IsingInstance, params: TheoryParams, gamma: float | None) -> np.ndarray:
    """Exact sliced distribution over all path states (``gamma=None`` drops F1)."""
    S = path_states(inst.b, params.M)
    logw = (params.beta / params.M) * path_F0(inst, S)
    if gamma is not None:
        logw = logw + gamma * path_F1(S)
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def _flip_table(inst: IsingInstance, M: int):
    """For every path state and flat site ``r = k*b + i``: target index, dF0, dF1."""
    S = path_states(inst.b, M)
    n = inst.b * M
    N = S.shape[0]
    flat = np.arange(N)
    tgt = np.empty((N, n), dtype=np.int64)
    dF0 = np.empty((N, n))
    dF1 = np.empty((N, n))
    F0, F1 = path_F0(inst, S), path_F1(S)
    for r in range(n):
        tgt[:, r] = flat ^ (1 << (n - 1 - r))
        dF0[:, r] = F0[tgt[:, r]] - F0
        dF1[:, r] = F1[tgt[:, r]] - F1
    return tgt, dF0, dF1


def _accept(logr, kind):
    if kind == "metropolis":
        return np.minimum(1.0, np.exp(np.minimum(logr, 0.0)))
    return 1.0 / (1.0 + np.exp(-logr))


def transition_matrix(inst: IsingInstance, params: TheoryParams, gamma: float) -> np.ndarray:
    """Column-stochastic ``G[y, x]`` of the single-flip chain at coupling ``gamma``."""
    tgt, dF0, dF1 = _flip_table(inst, params.M)
    N, n = tgt.shape
    A = _accept((params.beta / params.M) * dF0 + gamma * dF1, params.acceptance)
    G = np.zeros((N, N))
    cols = np.repeat(np.arange(N), n)
    np.add.at(G, (tgt.ravel(), cols), (A / n).ravel())
    G[np.arange(N), np.arange(N)] += 1.0 - A.sum(axis=1) / n
    return G


def generation_matrix(b: int, M: int) -> np.ndarray:
    """``P[y, x] = 1/(bM)`` when ``y`` differs from ``x`` in exactly one entry."""
    n = b * M
    if n > PATH_ENUM_CAP:
        raise CapabilityError(f"path enumeration limited to b*M <= {PATH_ENUM_CAP}")
    N = 1 << n
    P = np.zeros((N, N))
    x = np.arange(N)
    for r in range(n):
        P[x ^ (1 << r), x] = 1.0 / n
    return P


def check_generation_conditions(b: int, M: int) -> dict[str, bool]:
    P = generation_matrix(b, M)
    N = P.shape[0]
    reach = np.zeros(N, dtype=bool)
    reach[0] = True
    frontier = reach.copy()
    adj = P > 0
    while frontier.any():
        nxt = adj[:, frontier].any(axis=1) & ~reach
        reach |= nxt
        frontier = nxt
    return {
        "symmetric": bool(np.array_equal(P, P.T) and np.all(P >= 0)),
        "normalized": bool(np.allclose(P.sum(axis=0), 1.0)),
        "no_self_move": bool(np.all(np.diag(P) == 0)),
        "irreducible": bool(reach.all()),
    }


def max_single_flip_dF1(b: int, M: int) -> float:
    _, _, dF1 = _flip_table(IsingInstance.from_edges(b, []), M)
    return float(np.max(np.abs(dF1)))


def marginal_tv_trend(inst: IsingInstance, params: TheoryParams, checkpoints, init=None) -> dict[int, float]:
    """Exact evolution of the inhomogeneous chain's law; TV distance of the
    slice-0 marginal to the single-slice Boltzmann law at ``beta / M``.

    ``init`` is a distribution over path states (default: point mass on
    the all-up path).
    """
    tgt, dF0, dF1 = _flip_table(inst, params.M)
    N, n = tgt.shape
    p = np.zeros(N)
    if init is None:
        p[0] = 1.0
    else:
        p[:] = init
    target = boltzmann_distribution(inst, params.beta / params.M)
    slice0 = np.arange(N) >> (inst.b * (params.M - 1))
    checkpoints = sorted(int(c) for c in checkpoints)
    out = {}
    base = (params.beta / params.M) * dF0
    for t in range(checkpoints[-1] + 1):
        if t in checkpoints:
            marg = np.bincount(slice0, weights=p, minlength=1 << inst.b)
            out[t] = 0.5 * float(np.abs(marg - target).sum())
        if t == checkpoints[-1]:
            break
        A = _accept(base + params.gamma(t) * dF1, params.acceptance) / n
        moved = A * p[:, None]
        p = p * (1.0 - A.sum(axis=1)) + np.bincount(tgt.ravel(), weights=moved.ravel(), minlength=N)
    return out


# -- sampling ---------------------------------------------------------------

def sample_q_fixed(params: TheoryParams, inst: IsingInstance, rng, n: int | None = None):
    """I.i.d. slices from the single-slice Boltzmann law at ``beta / M``.

    Returns an ``(M, b)`` array, or ``(n, M, b)`` when ``n`` is given.
    """
    idx = sample_slice_indices(params, inst, rng, 1 if n is None else n)
    S = configs_at(inst.b, idx.ravel()).reshape(idx.shape + (inst.b,))
    return S[0] if n is None else S


def sample_slice_indices(params: TheoryParams, inst: IsingInstance, rng, n: int) -> np.ndarray:
    if inst.b > SAMPLE_CAP:
        raise CapabilityError(f"exact slice sampling is limited to b <= {SAMPLE_CAP}")
    rng = make_rng(rng)
    p = boltzmann_distribution(inst, params.beta / params.M)
    return rng.choice(p.size, size=(n, params.M), p=p)


def clt_statistic(state, inst: IsingInstance):
    """``(1/sqrt(M)) sum_k sum_<ij> J_ij s_ik s_jk`` over the trailing ``(M, b)`` axes."""
    S = np.asarray(state, dtype=np.float64)
    if S.ndim < 2 or S.shape[-1] != inst.b:
        raise InvalidArgumentError(f"state must have shape (..., M, {inst.b})")
    M = S.shape[-2]
    x = ((S[..., inst.rows] * S[..., inst.cols]) @ inst.couplings).sum(axis=-1) / np.sqrt(M)
    return float(x) if np.ndim(x) == 0 else x


def mcmc_q_t(params: TheoryParams, inst: IsingInstance, steps: int, rng, n_chains: int = 1,
             init=None, t0: int = 0, check_admissible: bool = True) -> np.ndarray:
    """Inhomogeneous single-flip chain targeting the sliced weight at step ``t``.

    Each step picks one of the ``b M`` entries uniformly and accepts the flip
    with ``g(exp((beta/M) dF0 + gamma(t) dF1))``; step ``t`` uses
    ``Gamma(t0 + t)``.  Returns final states of shape ``(n_chains, M, b)``.
    """
    if steps < 0 or n_chains < 1:
        raise InvalidArgumentError("steps must be >= 0 and n_chains >= 1")
    ts = np.arange(t0, t0 + steps, dtype=np.float64)
    G = np.asarray(params.Gamma(ts), dtype=np.float64) * np.ones_like(ts)
    if np.any(~(G > 0)):
        raise ConfigurationError("Gamma schedule must stay positive")
    if check_admissible and steps:
        floor = gamma_schedule_floor(ts, params, inst.b)
        if np.any(G < floor * (1 - 1e-12)):
            k = int(np.argmax(G < floor))
            raise ConfigurationError(f"Gamma({ts[k]:g}) = {G[k]:.6g} is below the admissible floor "
                                     f"{floor[k]:.6g}")
    gammas = gamma_coupling(params.beta, G, params.M) if steps else np.zeros(0)
    rng = make_rng(rng)
    if init is None:
        spins = 2.0 * rng.integers(0, 2, size=(n_chains, params.M, inst.b)) - 1.0
    else:
        spins = np.broadcast_to(np.asarray(init, dtype=np.float64),
                                (n_chains, params.M, inst.b)).copy()
    indptr, indices, weights = inst.csr
    _kernels.theory_chain(spins, indptr, indices, weights, inst.h, params.beta / params.M,
                          np.ascontiguousarray(gammas, dtype=np.float64),
                          params.acceptance == "heat-bath", rng)
    return spins.astype(np.int8)


# -- Trotter partition function ---------------------------------------------

def trace_partition_exact(inst: IsingInstance, beta: float, Gamma: float) -> float:
    """``tr exp(beta sum J sz sz + beta sum h sz + beta Gamma sum sx)`` by dense ``expm``.

    The exponent carries ``+J``; it equals ``-beta (H_I + Gamma H_X)`` with the
    minus-sign Ising Hamiltonian, see :func:`quantum_partition`.
    """
    if inst.b > SAMPLE_CAP:
        raise CapabilityError(f"partition check limited to b <= {SAMPLE_CAP}")
    X = np.diag(-_ising_diagonal(inst)) - _transverse(inst.b) * Gamma
    return float(np.trace(expm(beta * X)).real)


def quantum_partition(inst: IsingInstance, beta: float, Gamma: float) -> float:
    """``tr exp(-beta (H_I + Gamma H_X))`` from the spectrum."""
    H = np.diag(_ising_diagonal(inst)) + Gamma * _transverse(inst.b)
    return float(np.sum(np.exp(-beta * np.linalg.eigvalsh(H))))


def transfer_matrix(inst: IsingInstance, beta: float, Gamma: float, M: int) -> np.ndarray:
    """Symmetric ``T[s, s'] = exp(beta/(2M) (E0(s)+E0(s')) + gamma s.s')``; ``tr T^M = Z_M``."""
    g = gamma_coupling(beta, Gamma, M)
    S = configs_at(inst.b, np.arange(1 << inst.b)).astype(np.float64)
    e0 = _slice_E0(inst)
    half = np.exp(0.5 * (beta / M) * e0)
    return half[:, None] * np.exp(g * (S @ S.T)) * half[None, :]


def sliced_partition(inst: IsingInstance, beta: float, Gamma: float, M: int) -> float:
    mu = np.linalg.eigvalsh(transfer_matrix(inst, beta, Gamma, M))
    return float(np.sum(mu ** M))


def sliced_partition_brute(inst: IsingInstance, beta: float, Gamma: float, M: int) -> float:
    """Direct sum over all ``2^(bM)`` path states."""
    S = path_states(inst.b, M)
    g = gamma_coupling(beta, Gamma, M)
    return float(np.sum(np.exp((beta / M) * path_F0(inst, S) + g * path_F1(S))))


def trotter_prefactor(b: int, beta: float, Gamma: float, M: int) -> float:
    return (0.5 * np.sinh(2.0 * beta * Gamma / M)) ** (b * M / 2.0)


def trotter_partition_check(inst: IsingInstance, params: TheoryParams, Gamma_t: float):
    """``(Z exact, prefactored sliced Z, absolute error)`` at ``M = params.M``."""
    if inst.b > SAMPLE_CAP:
        raise CapabilityError(f"partition check limited to b <= {SAMPLE_CAP}")
    if not Gamma_t > 0:
        raise InvalidArgumentError("Gamma must be positive")
    z = trace_partition_exact(inst, params.beta, Gamma_t)
    zm = trotter_prefactor(inst.b, params.beta, Gamma_t, params.M) * \
        sliced_partition(inst, params.beta, Gamma_t, params.M)
    return z, zm, abs(zm - z)


def loglog_slope(Ms, errors) -> float:
    return float(np.polyfit(np.log(np.asarray(Ms, float)), np.log(np.asarray(errors, float)), 1)[0])


# -- CLT --------------------------------------------------------------------

@dataclass
class CltReport:
    Ms: list[int]
    ks: list[float]
    pvalues: list[float]
    critical: float
    variance: float
    mean: float
    expected_mean: float
    sigma: float
    decreasing: bool
    ks_pass: bool
    variance_ok: bool
    n_samples: int

    @property
    def passed(self) -> bool:
        return self.decreasing and self.ks_pass and self.variance_ok


def clt_convergence_test(inst: IsingInstance, beta: float | TheoryParams, n_samples: int,
                         Ms=(8, 16, 32, 64, 128, 256), seed=0, alpha: float = 0.01,
                         var_band=(0.97, 1.03)) -> CltReport:
    """KS distance of ``X_M`` (i.i.d. slices at ``beta/M``) to ``N(0, sum J^2)`` per ``M``.

    ``beta`` may be given as a :class:`TheoryParams`, whose ``M`` is then
    ignored in favour of ``Ms``.  Passes when the statistic at the largest
    ``M`` is below the one at the smallest, the largest-``M`` KS test is not
    rejected at ``alpha``, and the largest-``M`` sample variance divided by
    ``sum J^2`` lies in ``var_band``.
    """
    if isinstance(beta, TheoryParams):
        beta = beta.beta
    if n_samples < 1000:
        raise ConfigurationError("need at least 1000 samples")
    Ms = [int(m) for m in Ms]
    var = float(np.sum(inst.couplings ** 2))
    sigma = np.sqrt(var)
    rng = make_rng(seed)
    # F0 table over one slice (couplings only)
    slice_S = configs_at(inst.b, np.arange(1 << inst.b)).astype(np.float64)
    table = (slice_S[:, inst.rows] * slice_S[:, inst.cols]) @ inst.couplings
    crit = float(stats.kstwo.ppf(1 - alpha, n_samples))
    ks, pv = [], []
    X = None
    for M in Ms:
        idx = sample_slice_indices(TheoryParams(beta, M), inst, rng, n_samples)
        X = table[idx].sum(axis=1) / np.sqrt(M)
        if var == 0:
            ks.append(0.0 if np.all(X == 0) else 1.0)
            pv.append(1.0)
            continue
        r = stats.kstest(X, stats.norm(0.0, sigma).cdf)
        ks.append(float(r.statistic))
        pv.append(float(r.pvalue))
    M = Ms[-1]
    p1 = boltzmann_distribution(inst, beta / M)
    expected_mean = float(np.sqrt(M) * np.dot(p1, table))
    sample_var = float(np.var(X, ddof=1))
    ratio = sample_var / var if var > 0 else 1.0
    return CltReport(Ms, ks, pv, crit, sample_var, float(np.mean(X)), expected_mean, float(sigma),
                     decreasing=bool(ks[-1] <= ks[0]) if var > 0 else True,
                     ks_pass=bool(ks[-1] <= crit),
                     variance_ok=bool(var_band[0] <= ratio <= var_band[1]),
                     n_samples=n_samples)
