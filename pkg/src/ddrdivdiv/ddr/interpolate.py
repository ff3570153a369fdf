"""Interpolators onto the three discrete spaces.

Inputs follow a small field protocol: ``values(x)`` returns an array of shape
``(nfun, npts, *shape)`` and ``gradients(x)`` appends a trailing axis of length
3 with the partial derivatives.  A cell-frame :class:`PolyBasis` satisfies it,
which lets a whole basis be interpolated in one call.
"""

from __future__ import annotations

import numpy as np

from ..polyspace.spaces import dev_basis
from ..polyspace.traces import inner
from .cell import LocalCell
from .layout import DofVector

DEV = dev_basis()


class Field:
    """Wrap callables ``fn(x) -> (npts, *shape)`` and ``grad_fn(x) -> (npts, *shape, 3)``."""

    def __init__(self, fn, grad_fn=None, degree=None):
        self.fn, self.grad_fn, self.degree = fn, grad_fn, degree

    def values(self, x):
        return np.asarray(self.fn(x), float)[None]

    def gradients(self, x):
        if self.grad_fn is None:
            raise ValueError("this field has no gradient")
        return np.asarray(self.grad_fn(x), float)[None]


def _rules(cell, field, qdeg):
    if qdeg is None:
        qdeg = max(cell.cache.qdeg, (getattr(field, "degree", None) or 0) + cell.k + 2)
    return lambda kind, idx=None: cell.rule(kind, idx, qdeg)


def _project(basis, samples, rule):
    # orthonormal target: the projection is just the moment vector
    return inner(basis.eval(rule.points), samples, rule.weights)


def _wrap(cell, space, out, as_vector):
    if as_vector and out.shape[1] == 1:
        return DofVector(cell.layout(space), out[:, 0])
    return out


def interpolate_devgrad(cell: LocalCell, field, qdeg=None, as_vector=False):
    k, m = cell.k, cell.mesh
    lay = cell.layout("devgrad")
    rule = _rules(cell, field, qdeg)
    crule = rule("cell")
    nfun = field.values(crule.points[:1]).shape[0]
    out = np.zeros((lay.total, nfun))
    out[lay["v_T"]] = _project(cell.cell_basis(k - 1, "vec3"), field.values(crule.points), crule)
    for fi, f in enumerate(cell.faces):
        r = rule("face", f)
        vals, grads = field.values(r.points), field.gradients(r.points)
        out[lay["v_nF", fi]] = _project(cell.face_basis(f, k), vals @ m.face_normal[f], r)
        out[lay["v_tF", fi]] = _project(cell.face_basis(f, k - 1, "vec2"),
                                        vals @ m.face_tangents[f].T, r)
        out[lay["G_F", fi]] = _project(cell.face_basis(f, k - 1),
                                       np.trace(grads, axis1=-2, axis2=-1), r)
    for ie, e in enumerate(cell.edges):
        r = rule("edge", e)
        vals, grads = field.values(r.points), field.gradients(r.points)
        nrm = m.edge_normals[e]
        out[lay["v_tE", ie]] = _project(cell.edge_basis(e, k - 1), vals @ m.edge_tangent[e], r)
        out[lay["v_nE", ie]] = _project(cell.edge_basis(e, k, "vec2"), vals @ nrm.T, r)
        out[lay["G_E", ie]] = _project(cell.edge_basis(e, k, "mat2"),
                                       np.einsum("fqij,ai,bj->fqab", grads, nrm, nrm), r)
    xv = m.vertices[cell.vertices]
    vals, grads = field.values(xv), field.gradients(xv)
    for iv in range(len(cell.vertices)):
        out[lay["v_V", iv]] = vals[:, iv].T
        out[lay["G_V", iv]] = grads[:, iv].reshape(nfun, 9).T
    return _wrap(cell, "devgrad", out, as_vector)


def _check(vals, kind):
    scale = max(np.abs(vals).max(), 1e-300)
    if kind == "traceless":
        bad = np.abs(np.trace(vals, axis1=-2, axis2=-1)).max() > 1e-10 * scale
    else:
        bad = np.abs(vals - np.swapaxes(vals, -1, -2)).max() > 1e-10 * scale
    if bad:
        raise ValueError(f"input field is not {kind}")


def interpolate_symcurl(cell: LocalCell, field, qdeg=None, as_vector=False):
    k, m = cell.k, cell.mesh
    lay = cell.layout("symcurl")
    rule = _rules(cell, field, qdeg)
    crule = rule("cell")
    cvals = field.values(crule.points)
    _check(cvals, "traceless")
    out = np.zeros((lay.total, cvals.shape[0]))
    out[lay["tau_T"]] = _project(cell.cell_space("SRtrim", k), cvals, crule)
    for fi, f in enumerate(cell.faces):
        r = rule("face", f)
        vals = field.values(r.points)
        n, tf = m.face_normal[f], m.face_tangents[f]
        out[lay["tau_RT", fi]] = _project(cell.face_space(f, "RT", k + 1),
                                          np.einsum("fqij,i,bj->fqb", vals, n, tf), r)
        out[lay["tau_CG", fi]] = _project(cell.face_space(f, "CGtrim", k),
                                          np.einsum("fqij,ai,bj->fqab", vals, tf, tf), r)
    for ie, e in enumerate(cell.edges):
        r = rule("edge", e)
        vals, grads = field.values(r.points), field.gradients(r.points)
        nrm, t = m.edge_normals[e], m.edge_tangent[e]
        out[lay["tau_E", ie]] = _project(cell.edge_basis(e, k, "mat2"),
                                         np.einsum("fqij,ai,bj->fqab", vals, nrm, nrm), r)
        out[lay["tau_tE", ie]] = _project(cell.edge_basis(e, k + 1, "vec2"),
                                          np.einsum("fqij,ai,j->fqa", vals, nrm, t), r)
        # gradient of the vector field tau t_E, then its nn block
        g = np.einsum("fqiml,m->fqil", grads, t)
        out[lay["C_E", ie]] = _project(cell.edge_basis(e, k + 1, "mat2"),
                                       np.einsum("fqil,ai,bl->fqab", g, nrm, nrm), r)
    vals = field.values(m.vertices[cell.vertices])
    for iv in range(len(cell.vertices)):
        out[lay["tau_V", iv]] = np.einsum("cij,fij->cf", DEV, vals[:, iv])
    return _wrap(cell, "symcurl", out, as_vector)


def interpolate_divdiv(cell: LocalCell, field, qdeg=None, as_vector=False):
    k, m = cell.k, cell.mesh
    lay = cell.layout("divdiv")
    rule = _rules(cell, field, qdeg)
    crule = rule("cell")
    cvals = field.values(crule.points)
    _check(cvals, "symmetric")
    out = np.zeros((lay.total, cvals.shape[0]))
    out[lay["ups_H"]] = _project(cell.cell_space("Htrim", k), cvals, crule)
    for fi, f in enumerate(cell.faces):
        r = rule("face", f)
        vals, grads = field.values(r.points), field.gradients(r.points)
        n, tf = m.face_normal[f], m.face_tangents[f]
        basis = cell.face_basis(f, k + 1)
        out[lay["ups_F", fi]] = _project(basis, np.einsum("fqij,i,j->fq", vals, n, n), r)
        div_f = np.einsum("fqijl,ai,j,al->fq", grads, tf, n, tf)
        dn_nn = np.einsum("fqijl,i,j,l->fq", grads, n, n, n)
        out[lay["D_F", fi]] = _project(basis, 2 * div_f + dn_nn, r)
    for ie, e in enumerate(cell.edges):
        r = rule("edge", e)
        nrm = m.edge_normals[e]
        vals = field.values(r.points)
        out[lay["ups_E", ie]] = _project(cell.edge_basis(e, k + 1, "sym2"),
                                         np.einsum("fqij,ai,bj->fqab", vals, nrm, nrm), r)
    return _wrap(cell, "divdiv", out, as_vector)
