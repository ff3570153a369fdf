"""Entity frames, cached bases, projections, traces and the edge derivative."""

from __future__ import annotations

import threading

import numpy as np

from .poly import Frame, PolyBasis
from .quadrature import quadrature_rule
from .spaces import component_basis, decomposition_basis, full_basis


def cell_frame(mesh, t) -> Frame:
    return Frame.cell(mesh.cell_center[t], mesh.cell_diameter[t])


def face_frame(mesh, f) -> Frame:
    return Frame(mesh.face_center[f], mesh.face_tangents[f], float(mesh.face_diameter[f]))


def edge_frame(mesh, e) -> Frame:
    return Frame(mesh.edge_midpoint[e], mesh.edge_tangent[e][None], float(mesh.edge_length[e]) / 2)


_FRAMES = {"cell": cell_frame, "face": face_frame, "edge": edge_frame}


class BasisCache:
    """Orthonormal bases and quadrature rules keyed by entity and space.

    Reads are lock-free; insertions take a lock so one writer wins.
    """

    def __init__(self, mesh, qdeg: int):
        self.mesh = mesh
        self.qdeg = int(qdeg)
        self._store = {}
        self._lock = threading.Lock()

    def _get(self, key, build):
        try:
            return self._store[key]
        except KeyError:
            value = build()
            with self._lock:
                return self._store.setdefault(key, value)

    def frame(self, kind, index) -> Frame:
        return self._get(("frame", kind, index), lambda: _FRAMES[kind](self.mesh, index))

    def rule(self, kind, index, degree=None):
        degree = self.qdeg if degree is None else degree
        return self._get(("rule", kind, index, degree),
                         lambda: quadrature_rule(self.mesh, kind, index, degree))

    def full(self, kind, index, degree, codomain="scalar") -> PolyBasis:
        def build():
            frame = self.frame(kind, index)
            if degree < 0:
                shape = component_basis(codomain).shape[1:]
                return PolyBasis.empty(frame, shape)
            return full_basis(frame, degree, self.rule(kind, index), codomain)

        return self._get(("full", kind, index, degree, codomain), build)

    def space(self, kind, index, space, ell) -> PolyBasis:
        return self._get(
            ("space", kind, index, space, ell),
            lambda: decomposition_basis(space, self.frame(kind, index), ell, self.rule(kind, index)),
        )


# projections ------------------------------------------------------------------------
def inner(a: np.ndarray, b: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``(na, nb)`` matrix of weighted inner products of sampled families.

    ``a`` and ``b`` have shape ``(n, npts, *vshape)`` with matching value shapes.
    """
    nc = int(np.prod(a.shape[2:], dtype=int))
    a2 = a.reshape(a.shape[0], a.shape[1], nc) * weights[None, :, None]
    b2 = b.reshape(b.shape[0], b.shape[1], nc)
    return np.einsum("iqc,jqc->ij", a2, b2)


def l2_project(samples: np.ndarray, target: PolyBasis, rule) -> np.ndarray:
    """Projection coefficients of sampled functions onto ``target``.

    ``samples`` has shape ``(nfun, npts, *vshape)`` on ``rule.points``;
    the result has shape ``(len(target), nfun)``.
    """
    phi = target.eval(rule.points)
    rhs = inner(phi, samples, rule.weights)
    mass = inner(phi, phi, rule.weights)
    if not len(target):
        return rhs
    return np.linalg.solve(mass, rhs)


# frame contractions -------------------------------------------------------------
def face_block(values: np.ndarray, mesh, f, block: str) -> np.ndarray:
    """Contract trailing 3x3 (or 3) values with the frame of face ``f``."""
    n = mesh.face_normal[f]
    t = mesh.face_tangents[f]
    if block == "n":
        return values @ n
    if block == "t":
        return values @ t.T
    if block == "nn":
        return np.einsum("...ij,i,j->...", values, n, n)
    if block == "nt":
        return np.einsum("...ij,i,bj->...b", values, n, t)
    if block == "tt":
        return np.einsum("...ij,ai,bj->...ab", values, t, t)
    if block == "full":
        return values
    raise ValueError(f"unknown face block {block!r}")


def edge_block(values: np.ndarray, mesh, e, block: str) -> np.ndarray:
    """Contract trailing 3x3 (or 3) values with the frame of edge ``e``."""
    nrm = mesh.edge_normals[e]
    t = mesh.edge_tangent[e]
    if block == "t":
        return values @ t
    if block == "n":
        return values @ nrm.T
    if block == "nn":
        return np.einsum("...ij,ai,bj->...ab", values, nrm, nrm)
    if block == "nt":
        return np.einsum("...ij,ai,j->...a", values, nrm, t)
    raise ValueError(f"unknown edge block {block!r}")


def trace_to_face(src: PolyBasis, mesh, f, block: str, target: PolyBasis, rule=None):
    """Coefficients of the ``block`` trace of each ``src`` function in ``target``.

    Returns ``(coeffs, residual)`` where ``residual`` is the relative L2 misfit of
    the projected trace, which vanishes when the trace lies in the target span.
    """
    if not 0 <= f < mesh.n_faces:
        raise ValueError(f"{f} is not a face of the mesh")
    rule = rule or quadrature_rule(mesh, "face", f, 2 * max(src.degree, target.degree) + 2)
    samples = face_block(src.eval(rule.points), mesh, f, block)
    coeffs = l2_project(samples, target, rule)
    return coeffs, _residual(samples, coeffs, target, rule)


def trace_to_edge(src: PolyBasis, mesh, e, block: str, target: PolyBasis, rule=None):
    rule = rule or quadrature_rule(mesh, "edge", e, 2 * max(src.degree, target.degree) + 2)
    samples = edge_block(src.eval(rule.points), mesh, e, block)
    coeffs = l2_project(samples, target, rule)
    return coeffs, _residual(samples, coeffs, target, rule)


def _residual(samples, coeffs, target, rule):
    approx = np.tensordot(coeffs.T, target.eval(rule.points), axes=([1], [0]))
    err = np.diag(inner(samples - approx, samples - approx, rule.weights))
    ref = np.diag(inner(samples, samples, rule.weights))
    scale = max(float(ref.max()), 1e-300) if ref.size else 1.0
    return float(np.sqrt(err.max() / scale)) if err.size else 0.0


# edge derivative --------------------------------------------------------------------
def edge_derivative_matrices(target: PolyBasis, source: PolyBasis, rule, x1, x2):
    """Pieces of the edge derivative in the given bases.

    With ``r_i`` the target basis, the result ``D`` satisfies
    ``D_i = vol[i] @ v_E + at2[i] * v_V2 - at1[i] * v_V1``.
    """
    dr = target.deriv(0).eval(rule.points)
    phi = source.eval(rule.points)
    vol = -inner(dr, phi, rule.weights) if len(source) else np.zeros((len(target), 0))
    at1 = target.eval(np.atleast_2d(x1))[:, 0]
    at2 = target.eval(np.atleast_2d(x2))[:, 0]
    return vol, at1, at2


def edge_derivative(mesh, e, ell: int, v1, v2, v_e, cache: BasisCache = None) -> np.ndarray:
    """Edge derivative ``D_E^ell`` of vertex values and an edge polynomial.

    ``v_e`` holds coefficients in the orthonormal basis of ``P^{ell-1}(E)`` with
    trailing component axes matching ``v1``/``v2``.  Returns coefficients in the
    orthonormal basis of ``P^ell(E)``.
    """
    if ell < 0:
        raise ValueError("ell must be non-negative")
    cache = cache or BasisCache(mesh, 2 * ell + 2)
    target = cache.full("edge", e, ell)
    source = cache.full("edge", e, ell - 1)
    vol, at1, at2 = edge_derivative_matrices(
        target, source, cache.rule("edge", e), *mesh.vertices[mesh.edges[e]])
    v1, v2 = np.asarray(v1, float), np.asarray(v2, float)
    v_e = np.asarray(v_e, float).reshape((len(source),) + v1.shape)
    return (np.tensordot(vol, v_e, axes=([1], [0])) + np.multiply.outer(at2, v2)
            - np.multiply.outer(at1, v1))
