"""Per-cell context: local numbering, orientation, frames and bases."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..polyspace.traces import BasisCache
from .layout import DofLayout


@dataclass(frozen=True)
class FaceEdge:
    """Geometry of one edge seen from one face, in every frame needed."""

    gid: int
    local: int
    sign: int          # omega_FE
    n_fe: np.ndarray   # n_F x t_E in R3
    n_fe_face: np.ndarray  # n_FE in the face frame
    t_face: np.ndarray     # t_E in the face frame
    n_fe_edge: np.ndarray  # n_FE in the edge normal frame
    n_f_edge: np.ndarray   # n_F in the edge normal frame


class LocalCell:
    """Everything needed to assemble local operators on cell ``t``.

    ``cache`` may be shared between cells so that face and edge bases are
    built once and are identical from both sides.
    """

    def __init__(self, mesh, t: int, k: int, cache: BasisCache | None = None):
        if k < 0:
            raise ValueError("k must be non-negative")
        self.mesh, self.t, self.k = mesh, int(t), int(k)
        self.cache = cache if cache is not None else BasisCache(mesh, 2 * k + 6)
        self.faces = mesh.cells[t]
        self.face_sign = mesh.cell_face_sign[t]
        self.edges = mesh.cell_edges[t]
        self.vertices = mesh.cell_vertices[t]
        self.edge_local = {int(e): i for i, e in enumerate(self.edges)}
        self.vertex_local = {int(v): i for i, v in enumerate(self.vertices)}
        self.h = float(mesh.cell_diameter[t])
        self._layouts = {}

    def layout(self, space: str) -> DofLayout:
        if space not in self._layouts:
            self._layouts[space] = DofLayout(space, self.k, {
                "cell": [self.t], "face": self.faces, "edge": self.edges, "vertex": self.vertices,
            })
        return self._layouts[space]

    # bases and rules
    def cell_basis(self, degree, codomain="scalar"):
        return self.cache.full("cell", self.t, degree, codomain)

    def face_basis(self, f, degree, codomain="scalar"):
        return self.cache.full("face", int(f), degree, codomain)

    def edge_basis(self, e, degree, codomain="scalar"):
        return self.cache.full("edge", int(e), degree, codomain)

    def cell_space(self, kind, ell):
        return self.cache.space("cell", self.t, kind, ell)

    def face_space(self, f, kind, ell):
        return self.cache.space("face", int(f), kind, ell)

    def rule(self, kind, index=None, degree=None):
        index = self.t if kind == "cell" else int(index)
        return self.cache.rule(kind, index, degree)

    # geometry
    def edge_vertices(self, e):
        """Local vertex indices and coordinates of ``(V1, V2)``."""
        v1, v2 = self.mesh.edges[e]
        return (self.vertex_local[int(v1)], self.vertex_local[int(v2)],
                self.mesh.vertices[v1], self.mesh.vertices[v2])

    @cached_property
    def _face_edges(self):
        m = self.mesh
        out = {}
        for f in self.faces:
            items = []
            n = m.face_normal[f]
            tf = m.face_tangents[f]
            for e, s in zip(m.face_edges[f], m.face_edge_sign[f]):
                t = m.edge_tangent[e]
                ne = m.edge_normals[e]
                nfe = np.cross(n, t)
                items.append(FaceEdge(int(e), self.edge_local[int(e)], int(s), nfe,
                                      tf @ nfe, tf @ t, ne @ nfe, ne @ n))
            out[int(f)] = items
        return out

    def face_edges(self, f):
        return self._face_edges[int(f)]
