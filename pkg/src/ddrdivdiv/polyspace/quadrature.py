"""Quadrature on edges, polygonal faces and polyhedral cells.

Simplex rules are collapsed Gauss-Jacobi products; faces are fanned from
``x_F`` and cells coned from ``x_T`` over the face fans.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int
    entity: tuple = ()

    def __len__(self):
        return len(self.weights)

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Integrate values whose axis 0 runs over the points."""
        return np.tensordot(self.weights, values, axes=([0], [0]))


@lru_cache(maxsize=None)
def _jacobi01(npts, alpha):
    # nodes/weights on [0, 1] for the weight (1 - u)^alpha
    x, w = roots_jacobi(npts, alpha, 0.0)
    return (1.0 + x) / 2.0, w / 2.0 ** (alpha + 1)


def _npts(degree):
    return max(1, (degree + 2) // 2)


@lru_cache(maxsize=None)
def reference_segment(degree):
    u, w = _jacobi01(_npts(degree), 0.0)
    return u, w


@lru_cache(maxsize=None)
def reference_triangle(degree):
    """Rule on the unit triangle with barycentric-free coordinates (s, t)."""
    n = _npts(degree + 1)
    u, wu = _jacobi01(n, 1.0)
    v, wv = _jacobi01(n, 0.0)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    pts = np.stack([uu.ravel(), (vv * (1 - uu)).ravel()], axis=1)
    return pts, np.outer(wu, wv).ravel()


@lru_cache(maxsize=None)
def reference_tetrahedron(degree):
    n = _npts(degree + 2)
    u, wu = _jacobi01(n, 2.0)
    v, wv = _jacobi01(n, 1.0)
    s, ws = _jacobi01(n, 0.0)
    uu, vv, ss = np.meshgrid(u, v, s, indexing="ij")
    pts = np.stack(
        [uu.ravel(), (vv * (1 - uu)).ravel(), (ss * (1 - uu) * (1 - vv)).ravel()], axis=1
    )
    return pts, np.einsum("i,j,k->ijk", wu, wv, ws).ravel()


def segment_rule(a, b, degree, entity=()):
    a, b = np.asarray(a, float), np.asarray(b, float)
    u, w = reference_segment(degree)
    length = np.linalg.norm(b - a)
    if length <= 0:
        raise ValueError("degenerate edge")
    return QuadratureRule(a + u[:, None] * (b - a), w * length, degree, entity)


def simplex_rule(vertices, degree, entity=()):
    """Rule on a batch of triangles ``(n, 3, 3)`` or tetrahedra ``(n, 4, 3)``."""
    vertices = np.asarray(vertices, float)
    base = vertices[:, 0]
    jac = vertices[:, 1:] - base[:, None]  # (n, d, 3)
    d = jac.shape[1]
    if d == 2:
        ref, w = reference_triangle(degree)
        meas = 0.5 * np.linalg.norm(np.cross(jac[:, 0], jac[:, 1]), axis=1) * 2.0
    else:
        ref, w = reference_tetrahedron(degree)
        meas = np.abs(np.linalg.det(jac))
    if np.any(meas <= 0):
        raise ValueError("degenerate simplex in quadrature")
    pts = base[:, None, :] + np.einsum("qd,ndx->nqx", ref, jac)
    weights = meas[:, None] * w[None, :]
    return QuadratureRule(pts.reshape(-1, 3), weights.ravel(), degree, entity)


def face_triangles(mesh, f):
    loop = mesh.vertices[mesh.faces[f]]
    nxt = np.roll(loop, -1, axis=0)
    center = np.broadcast_to(mesh.face_center[f], loop.shape)
    return np.stack([center, loop, nxt], axis=1)


def edge_rule(mesh, e, degree):
    v1, v2 = mesh.edges[e]
    return segment_rule(mesh.vertices[v1], mesh.vertices[v2], degree, ("edge", int(e)))


def face_rule(mesh, f, degree):
    return simplex_rule(face_triangles(mesh, f), degree, ("face", int(f)))


def cell_rule(mesh, t, degree):
    tris = np.concatenate([face_triangles(mesh, f) for f in mesh.cells[t]])
    apex = np.broadcast_to(mesh.cell_center[t], (len(tris), 1, 3))
    return simplex_rule(np.concatenate([apex, tris], axis=1), degree, ("cell", int(t)))


def quadrature_rule(mesh, kind: str, index: int, degree: int) -> QuadratureRule:
    """Rule exact to ``degree`` on mesh entity ``(kind, index)``."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    builders = {"edge": edge_rule, "face": face_rule, "cell": cell_rule}
    if kind not in builders:
        raise ValueError(f"unknown entity kind {kind!r}")
    return builders[kind](mesh, index, degree)
