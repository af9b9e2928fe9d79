"""Exact small-b quantum annealing: dense Hamiltonians, Schrodinger
propagation, measurement, and the finite-time success-probability bound.

Basis state ``x`` corresponds to the classical configuration
``configs_at(b, x)``: spin ``j`` is bit ``b - 1 - j`` of ``x``, with a zero bit
meaning ``+1`` (so ``|++...+>`` is index 0).  The annealing schedule is
written on normalised time ``u = t / t_f``: ``H(u) = A(u) H_X + B(u) H_I``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.optimize import linear_sum_assignment

from .errors import CapabilityError, ConvergenceError, InvalidArgumentError, ResolutionError
from .ising import IsingInstance, all_energies, brute_force_ground, ground_mask
from .sqa import SqaSchedule, default_dw_schedule

BUILD_CAP = 12
EVOLVE_CAP = 10
BOUND_CAP = 8
NORM_TOL = 1e-9
OVERLAP_MIN = 0.5


def _cap(b: int, cap: int, what: str):
    if b > cap:
        raise CapabilityError(f"{what} is limited to b <= {cap} (got b={b})")


@dataclass(frozen=True, eq=False)
class DenseHamiltonian:
    """Real symmetric (hence Hermitian) matrix on ``b`` qubits."""

    b: int
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        m = self.matrix
        return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)

    def eigh(self):
        return np.linalg.eigh(self.matrix)


def _ising_diagonal(inst: IsingInstance) -> np.ndarray:
    """Diagonal of ``-sum J sz_i sz_j - sum h sz_j`` built from Kronecker products."""
    b = inst.b
    z = np.array([1.0, -1.0])

    def embed(j):
        return np.kron(np.kron(np.ones(2 ** j), z), np.ones(2 ** (b - 1 - j)))

    zs = [embed(j) for j in range(b)]
    d = np.zeros(2 ** b)
    for i, j, w in inst.edges:
        d -= w * zs[i] * zs[j]
    for j in range(b):
        if inst.h[j] != 0.0:
            d -= inst.h[j] * zs[j]
    return d


@lru_cache(maxsize=16)
def _transverse(b: int) -> np.ndarray:
    dim = 2 ** b
    m = np.zeros((dim, dim))
    x = np.arange(dim)
    for j in range(b):
        m[x, x ^ (1 << (b - 1 - j))] -= 1.0
    m.setflags(write=False)
    return m


def build_quantum_ising(inst: IsingInstance) -> DenseHamiltonian:
    _cap(inst.b, BUILD_CAP, "dense Hamiltonian construction")
    return DenseHamiltonian(inst.b, np.diag(_ising_diagonal(inst)))


def build_transverse(b: int) -> DenseHamiltonian:
    """``H_X = -sum_j sx_j``; ground state is the uniform superposition."""
    if b < 1:
        raise InvalidArgumentError("b must be >= 1")
    _cap(b, BUILD_CAP, "dense Hamiltonian construction")
    return DenseHamiltonian(b, _transverse(b).copy())


def _h_of_u(hx, hz, sched, u):
    a, bb = float(sched.A(u)), float(sched.B(u))
    return a * hx + np.diag(bb * hz) if a != 0.0 else np.diag(bb * hz)


def annealing_hamiltonian(inst: IsingInstance, sched: SqaSchedule | None, u: float) -> DenseHamiltonian:
    """``A(u) H_X + B(u) H_I`` with the unclamped ``A``."""
    _cap(inst.b, BUILD_CAP, "dense Hamiltonian construction")
    sched = default_dw_schedule() if sched is None else sched
    return DenseHamiltonian(inst.b, _h_of_u(_transverse(inst.b), _ising_diagonal(inst), sched, u))


def uniform_state(b: int) -> np.ndarray:
    dim = 2 ** b
    return np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128)


def _propagate(hx, hz, sched, t_f, u_edges, psi):
    """Advance ``psi`` across consecutive cells of ``u_edges`` with midpoint exponentials."""
    n = len(u_edges) - 1
    chunk = max(1, 2 ** 22 // hx.size)
    for c0 in range(0, n, chunk):
        lo, hi = u_edges[c0:c0 + chunk + 1][:-1], u_edges[c0 + 1:c0 + chunk + 1]
        mid = 0.5 * (lo + hi)
        dt = t_f * (hi - lo)
        a = np.asarray(sched.A(mid), dtype=np.float64) * np.ones_like(mid)
        bb = np.asarray(sched.B(mid), dtype=np.float64) * np.ones_like(mid)
        dense = a != 0.0
        if np.any(dense):
            H = a[dense, None, None] * hx[None] + (bb[dense, None] * hz[None])[:, :, None] * np.eye(len(hz))
            lam, V = np.linalg.eigh(H)
        k = 0
        for s in range(len(mid)):
            if dense[s]:
                v = V[k]
                psi = v @ (np.exp(-1j * dt[s] * lam[k]) * (v.T @ psi))
                k += 1
            else:
                psi = np.exp(-1j * dt[s] * bb[s] * hz) * psi
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > NORM_TOL:
            raise ConvergenceError(f"norm drift {abs(norm - 1.0):.3e} exceeds {NORM_TOL}")
        psi = psi / norm
    return psi


def evolve(inst: IsingInstance, sched: SqaSchedule | None, t_f: float, steps: int,
           psi0=None) -> np.ndarray:
    """Integrate ``i d psi/dt = H(t/t_f) psi`` over ``[0, t_f]`` from ``|v_+>``.

    Each of the ``steps`` equal cells applies the exact exponential of the
    Hamiltonian at the cell midpoint.  Cells where ``A = 0`` use the diagonal
    Ising phase directly.
    """
    traj = evolve_trajectory(inst, sched, t_f, steps, 1, psi0)
    return traj[-1]


def evolve_trajectory(inst: IsingInstance, sched: SqaSchedule | None, t_f: float, cells: int,
                      substeps: int, psi0=None) -> np.ndarray:
    """States at ``u = k / cells`` for ``k = 0 .. cells``, ``substeps`` midpoint steps per cell."""
    _cap(inst.b, EVOLVE_CAP, "state-vector evolution")
    if cells < 1 or substeps < 1:
        raise InvalidArgumentError("steps must be >= 1")
    if not t_f > 0:
        raise InvalidArgumentError("t_f must be positive")
    sched = default_dw_schedule() if sched is None else sched
    hx, hz = _transverse(inst.b), _ising_diagonal(inst)
    psi = uniform_state(inst.b) if psi0 is None else np.asarray(psi0, dtype=np.complex128).copy()
    if psi.shape != (2 ** inst.b,):
        raise InvalidArgumentError("initial state has the wrong dimension")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise InvalidArgumentError("initial state must have unit norm")
    out = np.empty((cells + 1, psi.size), dtype=np.complex128)
    out[0] = psi
    for k in range(cells):
        edges = np.linspace(k / cells, (k + 1) / cells, substeps + 1)
        psi = _propagate(hx, hz, sched, t_f, edges, psi)
        out[k + 1] = psi
    return out


def success_probability(inst: IsingInstance, psi) -> float:
    """Probability that measuring ``psi`` in the computational basis yields a ground configuration."""
    psi = np.asarray(psi)
    if psi.shape != (2 ** inst.b,):
        raise InvalidArgumentError(f"state has length {psi.size}, expected {2 ** inst.b}")
    return float(np.sum(np.abs(psi[ground_mask(inst)]) ** 2))


def degeneracy_tolerance(lam0: float) -> float:
    return 1e-8 * max(1.0, abs(lam0))


@dataclass(frozen=True)
class BoundReport:
    zeta: int
    p0: float
    Pi: float
    xi: float
    lower_bound: float
    true_success: float
    u_grid: int
    t_f: float
    Pi_at: float
    min_gap: float

    def to_dict(self) -> dict:
        return asdict(self)


def _eigen_clusters(lam, start, tol):
    """Index ranges ``[i, j)`` of (near-)equal eigenvalues from ``start`` on."""
    out = []
    i = start
    while i < len(lam):
        j = i + 1
        while j < len(lam) and lam[j] - lam[i] <= tol:
            j += 1
        out.append((i, j))
        i = j
    return out


def _track_band(prev, V, lam, zeta, tol):
    """The ``zeta`` lowest eigenvectors of ``V``, aligned with ``prev``.

    If the band edge cuts through a degenerate level, the band is the
    ``zeta``-dimensional subspace of the extended eigenspace closest to
    ``prev``.  Exactly degenerate bands are rotated onto the frame closest to
    ``prev`` (polar decomposition).  Otherwise vectors are matched by maximal
    overlap and their phases fixed so ``<prev_l|cur_l>`` is real and positive.
    """
    hi = zeta
    while hi < len(lam) and lam[hi] - lam[zeta - 1] <= tol:
        hi += 1
    if hi > zeta:
        C = V[:, :hi]
        U, _, Wh = np.linalg.svd(C @ (C.conj().T @ prev), full_matrices=False)
        cur = U @ Wh
    elif zeta > 1 and lam[zeta - 1] - lam[0] <= tol:
        cur = V[:, :zeta]
        U, _, Wh = np.linalg.svd(prev.conj().T @ cur)
        cur = cur @ (U @ Wh).conj().T
    else:
        cur = V[:, :zeta]
        _, order = linear_sum_assignment(-np.abs(prev.conj().T @ cur))
        cur = cur[:, order]
        ov = np.sum(prev.conj() * cur, axis=0)
        cur = cur * (np.conj(ov) / np.maximum(np.abs(ov), 1e-300))
    ov = np.abs(np.sum(prev.conj() * cur, axis=0))
    if np.min(ov) < OVERLAP_MIN:
        raise ResolutionError(f"adjacent ground-band overlap {np.min(ov):.3f} < {OVERLAP_MIN}; "
                              "refine the u grid")
    return cur


def _trapezoid(y, x) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def theorem2_bound(inst: IsingInstance, sched: SqaSchedule | None = None, t_f: float = 10.0,
                   u_grid: int = 256, substeps: int | None = None) -> BoundReport:
    """Evaluate ``exp(-xi) - 2^b zeta Pi exp(2 xi) (1 - p0)`` on a uniform ``u`` grid.

    * ``zeta``: number of classical ground states.  The ground band at each
      ``u`` is the ``zeta`` lowest eigenvectors of ``H(u)``, tracked from
      ``u = 1`` (where it is the classical ground space) back to ``u = 0``.
    * ``Pi``: max over the grid and excited levels ``j`` of
      ``|<0_l| dH/du |j>|^2 / (lam_j - lam_0)^2``, maximised over unit vectors
      of the ground band and of each (possibly degenerate) excited
      eigenspace, so it does not depend on the eigenvector basis.
    * ``p0``: min over the grid of the evolved state's ground-band weight.
    * ``xi``: from the off-diagonal band connection ``A(u)`` (zero when
      ``zeta = 1``), integrated by the trapezoid rule; infinite once the
      integral reaches pi.
    """
    b = inst.b
    _cap(b, BOUND_CAP, "the success-probability bound")
    if u_grid < 16:
        raise InvalidArgumentError("u_grid must be >= 16")
    sched = default_dw_schedule() if sched is None else sched
    if substeps is None:
        substeps = max(8, int(np.ceil(4.0 * t_f)))
    _, ground = brute_force_ground(inst)
    zeta = len(ground)
    hx, hz = _transverse(b), _ising_diagonal(inst)
    us = np.linspace(0.0, 1.0, u_grid + 1)
    traj = evolve_trajectory(inst, sched, t_f, u_grid, substeps)

    Pi, Pi_at, p0, min_gap = 0.0, 0.0, 1.0, np.inf
    bands = [None] * len(us)
    band = None
    for k in range(len(us) - 1, -1, -1):
        u = us[k]
        lam, V = np.linalg.eigh(_h_of_u(hx, hz, sched, u))
        V = V.astype(np.complex128)
        tol = degeneracy_tolerance(lam[0])
        band = V[:, :zeta] if band is None else _track_band(band, V, lam, zeta, tol)
        bands[k] = band
        p0 = min(p0, float(np.sum(np.abs(band.conj().T @ traj[k]) ** 2)))
        dH = float(sched.derivative_A(u)) * hx + np.diag(float(sched.derivative_B(u)) * hz)
        w = dH @ band
        w_out = w - band @ (band.conj().T @ w)
        for lo, hi in _eigen_clusters(lam, 0, tol):
            gap = lam[lo] - lam[0]
            if hi <= zeta or gap <= tol:
                continue
            min_gap = min(min_gap, gap)
            C = V[:, lo:hi]
            proj = C.conj().T @ w_out
            val = float(np.linalg.norm(proj, 2)) ** 2 / gap ** 2
            if val > Pi:
                Pi, Pi_at = val, float(u)

    if zeta == 1:
        xi = 0.0
    else:
        norms = np.empty(len(us))
        du = us[1] - us[0]
        for k in range(len(us)):
            lo, hi = max(k - 1, 0), min(k + 1, len(us) - 1)
            D = bands[k].conj().T @ (bands[hi] - bands[lo]) / ((hi - lo) * du)
            Amat = -1j * D
            Amat = 0.5 * (Amat + Amat.conj().T)
            np.fill_diagonal(Amat, 0.0)
            norms[k] = np.linalg.norm(Amat, 2)
        integral = _trapezoid(norms, us)
        xi = integral / (1.0 - integral / np.pi) if integral < np.pi else np.inf

    if np.isinf(xi):
        lower = -np.inf
    else:
        lower = float(np.exp(-xi) - 2 ** b * zeta * Pi * np.exp(2 * xi) * (1.0 - p0))
    true_success = success_probability(inst, traj[-1])
    return BoundReport(zeta, float(p0), float(Pi), float(xi), lower, true_success, u_grid,
                       float(t_f), Pi_at, float(min_gap))


def gibbs_diagonal(H: DenseHamiltonian, beta: float) -> np.ndarray:
    """Diagonal of ``exp(-beta H) / tr exp(-beta H)`` by dense matrix exponentiation."""
    m = H.matrix
    shift = float(np.min(np.diag(m)))
    rho = expm(-beta * (m - shift * np.eye(H.dim)))
    d = np.real(np.diag(rho))
    return d / np.trace(rho).real


def spectrum_equivalence_check(inst: IsingInstance, beta: float = 1.0, tol: float = 1e-10) -> bool:
    """Quantum spectrum equals the classical energy multiset, and the Gibbs
    diagonal equals the classical Boltzmann distribution."""
    _cap(inst.b, EVOLVE_CAP, "the spectrum equivalence check")
    H = build_quantum_ising(inst)
    classical = all_energies(inst)
    eig = np.linalg.eigvalsh(H.matrix)
    if not np.allclose(np.sort(eig), np.sort(classical), rtol=0.0, atol=tol):
        return False
    w = np.exp(-beta * (classical - classical.min()))
    return bool(np.allclose(gibbs_diagonal(H, beta), w / w.sum(), rtol=0.0, atol=tol))
