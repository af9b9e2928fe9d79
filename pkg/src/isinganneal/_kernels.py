"""Compiled Metropolis kernels.

All kernels take a ``numpy.random.Generator`` and draw exactly one uniform
per proposal (two for the random-site theory chain: site, then accept), even
when the proposal is downhill and the draw is not consulted.  The number of
draws per sweep is therefore fixed, and a run replays bit-exactly from its
seed regardless of the acceptance history.

Spins are float64 arrays of +/-1 and are updated in place.
"""

import numpy as np
from numba import njit


@njit(nogil=True, cache=True)
def _local_field(spins, indptr, indices, weights, i):
    f = 0.0
    for p in range(indptr[i], indptr[i + 1]):
        f += weights[p] * spins[indices[p]]
    return f


@njit(nogil=True, cache=True)
def _coupling_energy(spins, indptr, indices, weights):
    # -sum_{i<j} J_ij s_i s_j ; every edge appears twice in the CSR
    e = 0.0
    for i in range(spins.shape[0]):
        e -= spins[i] * _local_field(spins, indptr, indices, weights, i)
    return 0.5 * e


@njit(nogil=True, cache=True)
def sa_anneal(spins, indptr, indices, weights, h, temps, rng, energy):
    """Sequential single-flip Metropolis sweeps at temperatures ``temps``.

    Returns the incrementally tracked energy after the last sweep and the
    minimum post-sweep energy.
    """
    b = spins.shape[0]
    best = np.inf
    for k in range(temps.shape[0]):
        T = temps[k]
        for i in range(b):
            dE = 2.0 * spins[i] * (h[i] + _local_field(spins, indptr, indices, weights, i))
            u = rng.random()
            if dE <= 0.0 or u < np.exp(-dE / T):
                spins[i] = -spins[i]
                energy += dE
        if energy < best:
            best = energy
    return energy, best


@njit(nogil=True, cache=True)
def sa_anneal_batch(spins2d, indptr, indices, weights, h, temps, rng):
    """Independent chains, one after another, sharing ``rng``."""
    for c in range(spins2d.shape[0]):
        sa_anneal(spins2d[c], indptr, indices, weights, h, temps, rng, 0.0)


@njit(nogil=True, cache=True)
def sqa_local(spins, indptr, indices, weights, B, Jt, tauT, rng):
    tau, b = spins.shape
    for l in range(tau):
        lp = (l + 1) % tau
        lm = (l - 1 + tau) % tau
        row = spins[l]
        for i in range(b):
            f = _local_field(row, indptr, indices, weights, i)
            dE = 2.0 * row[i] * (B * f + Jt * (spins[lp, i] + spins[lm, i]))
            u = rng.random()
            if dE <= 0.0 or u < np.exp(-dE / tauT):
                row[i] = -row[i]


@njit(nogil=True, cache=True)
def sqa_global(spins, indptr, indices, weights, B, tauT, rng):
    tau, b = spins.shape
    for i in range(b):
        dE = 0.0
        for l in range(tau):
            dE += spins[l, i] * _local_field(spins[l], indptr, indices, weights, i)
        dE *= 2.0 * B
        u = rng.random()
        if dE <= 0.0 or u < np.exp(-dE / tauT):
            for l in range(tau):
                spins[l, i] = -spins[l, i]


@njit(nogil=True, cache=True)
def sqa_anneal(spins, indptr, indices, weights, Bs, Jts, tauT, local_first, rng):
    """Full SQA schedule; returns the minimum first-slice energy seen after a sweep."""
    best = np.inf
    for k in range(Bs.shape[0]):
        if local_first:
            sqa_local(spins, indptr, indices, weights, Bs[k], Jts[k], tauT, rng)
            sqa_global(spins, indptr, indices, weights, Bs[k], tauT, rng)
        else:
            sqa_global(spins, indptr, indices, weights, Bs[k], tauT, rng)
            sqa_local(spins, indptr, indices, weights, Bs[k], Jts[k], tauT, rng)
        e = _coupling_energy(spins[0], indptr, indices, weights)
        if e < best:
            best = e
    return best


@njit(nogil=True, cache=True)
def sqa_local_batch(spins3d, indptr, indices, weights, B, Jt, tauT, sweeps, rng):
    for c in range(spins3d.shape[0]):
        for _ in range(sweeps):
            sqa_local(spins3d[c], indptr, indices, weights, B, Jt, tauT, rng)
            sqa_global(spins3d[c], indptr, indices, weights, B, tauT, rng)


@njit(nogil=True, cache=True)
def theory_chain(spins3d, indptr, indices, weights, h, slice_beta, gammas, heat_bath, rng):
    """Random-site single-flip chain on path states ``(chains, M, b)``.

    Target weight ``exp(slice_beta * sum_k E0(s_k) + gamma * F1)`` where
    ``E0(s) = sum_<ij> J s_i s_j + sum_i h_i s_i``,
    with ``gammas[t]`` used at step ``t``.  Returns accepted-move counts per chain.
    """
    C, M, b = spins3d.shape
    n = M * b
    accepted = np.zeros(C, dtype=np.int64)
    for c in range(C):
        s = spins3d[c]
        for t in range(gammas.shape[0]):
            r = int(rng.random() * n)
            if r >= n:
                r = n - 1
            k = r // b
            i = r - k * b
            u = rng.random()
            sk = s[k, i]
            f0 = -2.0 * sk * (h[i] + _local_field(s[k], indptr, indices, weights, i))
            f1 = -2.0 * sk * (s[(k + 1) % M, i] + s[(k - 1 + M) % M, i])
            logr = slice_beta * f0 + gammas[t] * f1
            if heat_bath:
                ok = u < 1.0 / (1.0 + np.exp(-logr))
            else:
                ok = logr >= 0.0 or u < np.exp(logr)
            if ok:
                s[k, i] = -sk
                accepted[c] += 1
    return accepted
