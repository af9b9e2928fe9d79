"""Chimera graphs and random +/-1 spin-glass instances on them.

Vertex numbering before masking follows the usual linear Chimera index::

    v = ((row * n + col) * 2 + side) * k + offset

with ``side`` 0 for the vertical half of a cell and 1 for the horizontal
half.  Vertical halves couple to the same offset in the cell below,
horizontal halves to the same offset in the cell to the right.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .ising import IsingInstance
from .seeding import derive_seed, make_rng


@dataclass(frozen=True)
class ChimeraSpec:
    m: int
    n: int
    k: int = 4
    mask: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if min(self.m, self.n, self.k) < 1:
            raise InvalidArgumentError("m, n and k must all be >= 1")
        mask = frozenset(int(v) for v in self.mask)
        if any(v < 0 or v >= self.full_size for v in mask):
            raise InvalidArgumentError(f"mask entries must lie in [0, {self.full_size})")
        object.__setattr__(self, "mask", mask)

    @property
    def full_size(self) -> int:
        return 2 * self.m * self.n * self.k

    @property
    def num_vertices(self) -> int:
        return self.full_size - len(self.mask)

    def label(self) -> str:
        return f"C{self.m}x{self.n}k{self.k}" + (f"-{len(self.mask)}" if self.mask else "")


def _full_edges(m: int, n: int, k: int) -> list[tuple[int, int]]:
    def v(r, c, side, off):
        return ((r * n + c) * 2 + side) * k + off

    edges = []
    for r in range(m):
        for c in range(n):
            for a in range(k):
                for b in range(k):
                    edges.append((v(r, c, 0, a), v(r, c, 1, b)))
            for a in range(k):
                if r + 1 < m:
                    edges.append((v(r, c, 0, a), v(r + 1, c, 0, a)))
                if c + 1 < n:
                    edges.append((v(r, c, 1, a), v(r, c + 1, 1, a)))
    return sorted((min(e), max(e)) for e in edges)


def chimera_graph(spec: ChimeraSpec) -> list[tuple[int, int]]:
    """Edge list of the masked Chimera graph with indices compacted to [0, b)."""
    keep = np.ones(spec.full_size, dtype=bool)
    keep[list(spec.mask)] = False
    new_index = np.cumsum(keep) - 1
    return [(int(new_index[i]), int(new_index[j]))
            for i, j in _full_edges(spec.m, spec.n, spec.k) if keep[i] and keep[j]]


def random_instance(edges, seed: int, b: int | None = None, id: str = "") -> IsingInstance:
    """Independent fair +/-1 coupling on every edge, zero field."""
    edges = list(edges)
    if not edges:
        raise InvalidArgumentError("edge list is empty")
    if b is None:
        b = 1 + max(max(i, j) for i, j in edges)
    rng = make_rng(seed)
    J = rng.choice(np.array([-1.0, 1.0]), size=len(edges))
    return IsingInstance.from_edges(b, [(i, j, w) for (i, j), w in zip(edges, J)], id=id)


def chimera_instance(spec: ChimeraSpec, seed: int, id: str = "") -> IsingInstance:
    return random_instance(chimera_graph(spec), seed, b=spec.num_vertices, id=id)


def instance_batch(spec: ChimeraSpec, count: int, master_seed: int,
                   prefix: str | None = None) -> list[IsingInstance]:
    """``count`` instances; instance ``i`` uses ``derive_seed(master_seed, i)``."""
    prefix = spec.label() if prefix is None else prefix
    edges = chimera_graph(spec)
    return [random_instance(edges, derive_seed(master_seed, i), b=spec.num_vertices,
                            id=f"{prefix}-{i:04d}") for i in range(count)]


def random_mask(spec: ChimeraSpec, target_b: int, seed: int = 0) -> frozenset[int]:
    """Uniformly chosen inactive vertices leaving exactly ``target_b`` active."""
    drop = spec.full_size - target_b
    if drop < 0:
        raise InvalidArgumentError(f"target {target_b} exceeds {spec.full_size} vertices")
    rng = make_rng(seed)
    return frozenset(int(v) for v in np.sort(rng.choice(spec.full_size, size=drop, replace=False)))


def load_mask(path) -> frozenset[int]:
    text = path.read_text() if hasattr(path, "read_text") else Path(path).read_text()
    return frozenset(int(tok) for tok in text.split())


def save_mask(mask, path) -> None:
    Path(path).write_text("".join(f"{v}\n" for v in sorted(mask)))


# Shipped masks reproduce the active-qubit counts of the hardware and
# simulation runs (485 on C8, 945 and 1094 on C12).  Which qubits were
# inactive is unpublished, so these are random but fixed.
SHIPPED_MASKS = {485: (8, 8), 945: (12, 12), 1094: (12, 12)}


def shipped_spec(b: int) -> ChimeraSpec:
    if b not in SHIPPED_MASKS:
        raise InvalidArgumentError(f"no shipped mask for b={b}; choose from {sorted(SHIPPED_MASKS)}")
    m, n = SHIPPED_MASKS[b]
    ref = resources.files("isinganneal") / "data" / f"mask_{b}.txt"
    return ChimeraSpec(m, n, 4, load_mask(ref))
