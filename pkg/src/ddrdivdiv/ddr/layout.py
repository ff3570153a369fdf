"""DOF layouts of the three local discrete spaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..polyspace.spaces import dim_p, space_dim

SPACES = ("devgrad", "symcurl", "divdiv")
ENTITY_ORDER = ("cell", "face", "edge", "vertex")


def _blocks(space, k):
    """(entity kind, name, space label, size) for every block of a space."""
    p1, p2, p3 = (lambda m: dim_p(m, 1)), (lambda m: dim_p(m, 2)), (lambda m: dim_p(m, 3))
    if space == "devgrad":
        return [
            ("cell", "v_T", f"P{k - 1}(T;R3)", 3 * p3(k - 1)),
            ("face", "v_nF", f"P{k}(F)", p2(k)),
            ("face", "v_tF", f"P{k - 1}(F;R2)", 2 * p2(k - 1)),
            ("face", "G_F", f"P{k - 1}(F)", p2(k - 1)),
            ("edge", "v_tE", f"P{k - 1}(E)", p1(k - 1)),
            ("edge", "v_nE", f"P{k}(E;R2)", 2 * p1(k)),
            ("edge", "G_E", f"P{k}(E;R2x2)", 4 * p1(k)),
            ("vertex", "v_V", "R3", 3),
            ("vertex", "G_V", "R3x3", 9),
        ]
    if space == "symcurl":
        return [
            ("cell", "tau_T", f"SRtrim{k}(T)", space_dim("SRtrim", k)),
            ("face", "tau_RT", f"RT{k + 1}(F)", space_dim("RT", k + 1)),
            ("face", "tau_CG", f"CGtrim{k}(F)", space_dim("CGtrim", k)),
            ("edge", "tau_E", f"P{k}(E;R2x2)", 4 * p1(k)),
            ("edge", "tau_tE", f"P{k + 1}(E;R2)", 2 * p1(k + 1)),
            ("edge", "C_E", f"P{k + 1}(E;R2x2)", 4 * p1(k + 1)),
            ("vertex", "tau_V", "T", 8),
        ]
    if space == "divdiv":
        return [
            ("cell", "ups_H", f"Htrim{k}(T)", space_dim("Htrim", k)),
            ("face", "ups_F", f"P{k + 1}(F)", p2(k + 1)),
            ("face", "D_F", f"P{k + 1}(F)", p2(k + 1)),
            ("edge", "ups_E", f"P{k + 1}(E;S2)", 3 * p1(k + 1)),
        ]
    raise ValueError(f"unknown space {space!r}")


@dataclass(frozen=True)
class Block:
    entity: str
    local: int
    gid: int
    name: str
    space: str
    offset: int
    size: int

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.size)


class DofLayout:
    """Ordered DOF blocks: cell, then each face, edge and vertex in turn."""

    def __init__(self, space: str, k: int, entities: dict):
        if k < 0:
            raise ValueError("k must be non-negative")
        self.space, self.k = space, k
        spec = _blocks(space, k)
        self.blocks = []
        offset = 0
        for kind in ENTITY_ORDER:
            for local, gid in enumerate(entities.get(kind, ())):
                for ekind, name, label, size in spec:
                    if ekind == kind:
                        self.blocks.append(Block(kind, local, int(gid), name, label, offset, size))
                        offset += size
        self.total = offset
        self._index = {(b.name, b.local): b for b in self.blocks}

    def __getitem__(self, key) -> slice:
        name, local = key if isinstance(key, tuple) else (key, 0)
        return self._index[(name, local)].slice

    def block(self, name, local=0) -> Block:
        return self._index[(name, local)]

    def __len__(self):
        return self.total

    def __repr__(self):
        return f"DofLayout({self.space}, k={self.k}, total={self.total})"

    def sizes_by_entity(self) -> dict:
        out = {}
        for b in self.blocks:
            out[b.entity] = out.get(b.entity, 0) + b.size
        return out


@dataclass
class DofVector:
    layout: DofLayout
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.layout.total,):
            raise ValueError("DofVector length does not match its layout")

    def __getitem__(self, key):
        return self.values[self.layout[key]]


def closed_form_dim(space: str, k: int, nv: int, ne: int, nf: int, corrected: bool = True) -> int:
    """Dimension count of a local space on a cell with trivial topology.

    For ``divdiv`` at ``k = 0`` the cell term of the raw formula is -3 while the
    trimmed space Htrim^0 is trivial; ``corrected`` swaps in the true value 0.
    """
    if space == "devgrad":
        return 12 * nv + (7 * k + 6) * ne + (2 * k * k + 3 * k + 1) * nf + (k**3 + 3 * k * k + 2 * k) // 2
    if space == "symcurl":
        return (8 * nv + (10 * k + 16) * ne + (3 * k * k + 8 * k + 3) * nf
                + (8 * k**3 + 33 * k * k + 25 * k) // 6)
    if space == "divdiv":
        cell = k**3 + 5 * k * k + 5 * k - 3
        if corrected:
            cell = max(cell, 0)
        return (3 * k + 6) * ne + (k * k + 5 * k + 6) * nf + cell
    if space == "P":
        return dim_p(k, 3)
    raise ValueError(f"unknown space {space!r}")
