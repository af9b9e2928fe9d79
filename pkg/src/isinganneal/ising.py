"""Ising instances, energies, Boltzmann weights and the brute-force oracle.

Energy convention::

    E(s) = - sum_{(i,j)} J_ij s_i s_j - sum_j h_j s_j,     s_j in {+1, -1}

Configurations are enumerated in a fixed order shared with the dense
quantum code: index ``x`` in ``[0, 2**b)`` maps spin ``j`` to bit
``b - 1 - j`` of ``x``, a 0 bit meaning +1.  Index 0 is the all-up state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import CapabilityError, InvalidArgumentError

ENUM_CAP = 24
_CHUNK = 1 << 18


@dataclass(frozen=True, eq=False)
class IsingInstance:
    """Couplings on a simple graph plus local fields.

    Use :meth:`from_edges` to build one; the constructor expects the
    canonical (sorted, ``i < j``) arrays and validates them.
    """

    b: int
    rows: np.ndarray
    cols: np.ndarray
    couplings: np.ndarray
    h: np.ndarray
    id: str = ""
    labels: tuple[str, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        b = int(self.b)
        if b < 1:
            raise InvalidArgumentError(f"b must be >= 1, got {b}")
        rows = np.asarray(self.rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(self.cols, dtype=np.int64).reshape(-1)
        J = np.asarray(self.couplings, dtype=np.float64).reshape(-1)
        h = np.zeros(b) if self.h is None else np.asarray(self.h, dtype=np.float64).reshape(-1)
        if not (rows.shape == cols.shape == J.shape):
            raise InvalidArgumentError("edge arrays differ in length")
        if h.shape != (b,):
            raise InvalidArgumentError(f"h has length {h.shape[0]}, expected {b}")
        if rows.size:
            if rows.min() < 0 or cols.max() >= b:
                raise InvalidArgumentError("vertex index out of range")
            if np.any(rows >= cols):
                raise InvalidArgumentError("edges must satisfy i < j (no self-loops)")
            key = rows * b + cols
            if np.any(np.diff(key) <= 0):
                raise InvalidArgumentError("edges must be sorted by (i, j) without duplicates")
        if not (np.all(np.isfinite(J)) and np.all(np.isfinite(h))):
            raise InvalidArgumentError("couplings and fields must be finite")
        for name, arr in (("rows", rows), ("cols", cols), ("couplings", J), ("h", h)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_edges(cls, b: int, edges: Iterable[Sequence[float]], h=None, id: str = "",
                   labels=None) -> "IsingInstance":
        """Build from ``(i, j, J)`` records in any order; ``i > j`` is swapped."""
        recs = {}
        for rec in edges:
            i, j, w = int(rec[0]), int(rec[1]), float(rec[2])
            if i == j:
                raise InvalidArgumentError(f"self-loop on vertex {i}")
            if i > j:
                i, j = j, i
            if (i, j) in recs:
                raise InvalidArgumentError(f"duplicate edge ({i}, {j})")
            recs[(i, j)] = w
        keys = sorted(recs)
        rows = np.array([k[0] for k in keys], dtype=np.int64)
        cols = np.array([k[1] for k in keys], dtype=np.int64)
        J = np.array([recs[k] for k in keys], dtype=np.float64)
        if h is None:
            h = np.zeros(b)
        return cls(b, rows, cols, J, np.asarray(h, dtype=np.float64), id,
                   tuple(labels) if labels is not None else None)

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(w)) for i, j, w in zip(self.rows, self.cols, self.couplings)]

    @property
    def n_edges(self) -> int:
        return int(self.rows.size)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric adjacency as ``(indptr, indices, weights)``."""
        src = np.concatenate([self.rows, self.cols])
        dst = np.concatenate([self.cols, self.rows])
        w = np.concatenate([self.couplings, self.couplings])
        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        indptr = np.zeros(self.b + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        return np.cumsum(indptr), dst.copy(), w.copy()

    @cached_property
    def is_integral(self) -> bool:
        """True when every coupling and field is an integer, so energies are exact."""
        return bool(np.all(self.couplings == np.round(self.couplings))
                    and np.all(self.h == np.round(self.h)))

    @property
    def has_field(self) -> bool:
        return bool(np.any(self.h != 0.0))

    def degree(self) -> np.ndarray:
        return np.diff(self.csr[0])

    def __eq__(self, other):
        if not isinstance(other, IsingInstance):
            return NotImplemented
        return (self.b == other.b and self.id == other.id
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols)
                and np.array_equal(self.couplings, other.couplings)
                and np.array_equal(self.h, other.h))

    __hash__ = None


def as_spins(inst: IsingInstance, s) -> np.ndarray:
    arr = np.asarray(s)
    if arr.shape[-1:] != (inst.b,):
        raise InvalidArgumentError(f"configuration has length {arr.shape[-1:]}, instance has b={inst.b}")
    if not np.all(np.abs(arr) == 1):
        raise InvalidArgumentError("spins must be +1 or -1")
    return arr


def energy(inst: IsingInstance, s) -> float:
    s = as_spins(inst, s).astype(np.float64)
    if s.ndim != 1:
        raise InvalidArgumentError("energy() takes one configuration; use energies() for batches")
    return float(-np.dot(inst.couplings, s[inst.rows] * s[inst.cols]) - np.dot(inst.h, s))


def energies(inst: IsingInstance, S) -> np.ndarray:
    """Vectorised energy over the last axis of ``S``."""
    S = as_spins(inst, S).astype(np.float64)
    return -(S[..., inst.rows] * S[..., inst.cols]) @ inst.couplings - S @ inst.h


def delta_energy_flip(inst: IsingInstance, s, i: int) -> float:
    """Energy change of flipping spin ``i``; O(degree(i)).

    From the sequential-update form with ``s_i' - s_i = -2 s_i``:
    ``dE = 2 s_i (h_i + sum_j J_ij s_j)``.
    """
    s = as_spins(inst, s)
    if not 0 <= int(i) < inst.b:
        raise InvalidArgumentError(f"vertex {i} out of range [0, {inst.b})")
    indptr, indices, weights = inst.csr
    lo, hi = indptr[i], indptr[i + 1]
    local = inst.h[i] + float(np.dot(weights[lo:hi], s[indices[lo:hi]]))
    return float(2.0 * s[i] * local)


def flip(s, i: int) -> np.ndarray:
    out = np.array(s, copy=True)
    out[i] = -out[i]
    return out


def configurations(b: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Spin rows for enumeration indices ``start..stop`` (int8, shape (n, b))."""
    stop = (1 << b) if stop is None else stop
    return configs_at(b, np.arange(start, stop, dtype=np.int64))


def configs_at(b: int, idx) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    shifts = np.arange(b - 1, -1, -1, dtype=np.int64)
    bits = (idx[:, None] >> shifts) & 1
    return (1 - 2 * bits).astype(np.int8)


def config_index(s) -> int:
    s = np.asarray(s)
    x = 0
    for v in s:
        x = (x << 1) | (1 if v < 0 else 0)
    return x


def _check_enum(b: int, cap: int):
    if b > cap:
        raise CapabilityError(f"exhaustive enumeration over 2^{b} states exceeds the cap b <= {cap}")


def all_energies(inst: IsingInstance, cap: int = ENUM_CAP) -> np.ndarray:
    """Energies of every configuration in enumeration order."""
    _check_enum(inst.b, cap)
    n = 1 << inst.b
    out = np.empty(n)
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        out[start:stop] = energies(inst, configurations(inst.b, start, stop))
    return out


def boltzmann_distribution(inst: IsingInstance, beta: float, cap: int = ENUM_CAP) -> np.ndarray:
    if not beta > 0:
        raise InvalidArgumentError("beta must be positive")
    logw = -beta * all_energies(inst, cap)
    return np.exp(logw - logsumexp(logw))


def boltzmann_probability(inst: IsingInstance, s, beta: float, cap: int = ENUM_CAP) -> float:
    """exp(-beta E(s)) / Z with Z summed exactly over all 2^b states."""
    s = as_spins(inst, s)
    if not beta > 0:
        raise InvalidArgumentError("beta must be positive")
    logz = logsumexp(-beta * all_energies(inst, cap))
    return float(np.exp(-beta * energy(inst, s) - logz))


def ground_tolerance(inst: IsingInstance, e0: float) -> float:
    return 0.0 if inst.is_integral else 1e-9 * max(1.0, abs(e0))


def brute_force_ground(inst: IsingInstance, cap: int = ENUM_CAP) -> tuple[float, list[np.ndarray]]:
    """Minimum energy and every minimiser, by enumeration of all 2^b states."""
    e = all_energies(inst, cap)
    e0 = float(e.min())
    tol = ground_tolerance(inst, e0)
    idx = np.flatnonzero(e <= e0 + tol)
    return e0, list(configs_at(inst.b, idx))


def ground_mask(inst: IsingInstance, cap: int = ENUM_CAP) -> np.ndarray:
    """Boolean mask over enumeration order marking ground configurations."""
    e = all_energies(inst, cap)
    e0 = float(e.min())
    return e <= e0 + ground_tolerance(inst, e0)


# -- file formats -----------------------------------------------------------

_HEADER = "# isinganneal instance v1"


def _fmt(x: float) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 2 ** 53 and not (x == 0 and np.signbit(x)):
        return str(int(x))
    return repr(x)


def dumps_instance(inst: IsingInstance) -> str:
    """Canonical text serialisation; ``loads_instance`` inverts it bit-exactly."""
    lines = [_HEADER, f"id {inst.id}" if inst.id else "id", f"b {inst.b}"]
    if inst.has_field:
        lines.append("h " + " ".join(_fmt(v) for v in inst.h))
    lines.extend(f"{i} {j} {_fmt(w)}" for i, j, w in inst.edges)
    return "\n".join(lines) + "\n"


def loads_instance(text: str) -> IsingInstance:
    """Parse the text format.

    Recognised lines: ``id <name>``, ``b <count>``, optional
    ``labels <l0> <l1> ...`` (vertex names, remapped to 0..b-1 in the given
    order), optional ``h <h0> ... <h_{b-1}>``, and edge records
    ``<i> <j> <J>``.  ``#`` starts a comment.
    """
    ident, b, labels, h, raw = "", None, None, None, []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0]
        if key == "id":
            ident = " ".join(parts[1:])
        elif key == "b":
            b = int(parts[1])
        elif key == "labels":
            labels = parts[1:]
        elif key == "h":
            h = [float(v) for v in parts[1:]]
        elif len(parts) == 3:
            raw.append((parts[0], parts[1], float(parts[2]), lineno))
        else:
            raise InvalidArgumentError(f"line {lineno}: cannot parse {line!r}")
    if labels is not None:
        if b is None:
            b = len(labels)
        if len(labels) != b or len(set(labels)) != b:
            raise InvalidArgumentError("labels must list b distinct names")
        lookup = {name: k for k, name in enumerate(labels)}
    if b is None:
        raise InvalidArgumentError("missing 'b <count>' header")
    edges = []
    for a, c, w, lineno in raw:
        try:
            i, j = (lookup[a], lookup[c]) if labels is not None else (int(a), int(c))
        except (KeyError, ValueError):
            raise InvalidArgumentError(f"line {lineno}: unknown vertex label") from None
        edges.append((i, j, w))
    return IsingInstance.from_edges(b, edges, h=h, id=ident, labels=labels)


def instance_to_dict(inst: IsingInstance) -> dict:
    return {"id": inst.id, "b": inst.b, "edges": [[i, j, w] for i, j, w in inst.edges],
            "h": [float(v) for v in inst.h]}


def instance_from_dict(d: dict) -> IsingInstance:
    return IsingInstance.from_edges(int(d["b"]), d.get("edges", []), h=d.get("h"),
                                    id=str(d.get("id", "")))


def save_instance(inst: IsingInstance, path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(instance_to_dict(inst)) + "\n")
    else:
        path.write_text(dumps_instance(inst))


def load_instance(path) -> IsingInstance:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return instance_from_dict(json.loads(text))
    return loads_instance(text)
