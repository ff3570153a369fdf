"""Face trace reconstruction, symmetric matrix potential, products and stabilization."""

from __future__ import annotations

import numpy as np

from ..polyspace.poly import concat, grad, hess, trace
from ..polyspace.traces import inner
from .cell import LocalCell
from .interpolate import interpolate_divdiv
from .operators import SYM2, LocalOperator, _scaled, op_DD


def _nn_weights(fe):
    # n_F^T ups_E n_F as a combination of the S2 coordinates
    return np.einsum("cab,a,b->c", SYM2, fe.n_f_edge, fe.n_f_edge)


def gamma_nn_F(cell: LocalCell, fi: int) -> LocalOperator:
    """Normal-normal trace of degree k on the ``fi``-th face of the cell.

    Solves the face Neumann problem with edge data as boundary values, closed by
    matching the boundary average of the edge data.
    """
    k, f = cell.k, cell.faces[fi]
    lay = cell.layout("divdiv")
    q = cell.face_basis(f, k)
    nq = len(q)
    rule = cell.rule("face", f)
    pts, w = rule.points, rule.weights
    gq = grad(q)

    lhs = np.zeros((nq + 1, nq + 1))
    rhs = np.zeros((nq + 1, lay.total))
    lhs[:nq, :nq] = inner(gq.eval(pts), gq.eval(pts), w)
    rhs[:nq, lay["ups_F", fi]] = -inner(trace(hess(q)).eval(pts),
                                        cell.face_basis(f, k + 1).eval(pts), w)
    for fe in cell.face_edges(f):
        erule = cell.rule("edge", fe.gid)
        epts, ew = erule.points, erule.weights
        psi = _scaled(cell.edge_basis(fe.gid, k + 1).eval(epts), _nn_weights(fe))
        cols = lay["ups_E", fe.local]
        rhs[:nq, cols] += fe.sign * inner(gq.eval(epts) @ fe.n_fe_face, psi, ew)
        qe = q.eval(epts)
        lhs[:nq, nq] += qe @ ew
        rhs[nq, cols] += psi @ ew
    lhs[nq, :nq] = lhs[:nq, nq]
    sol = np.linalg.solve(lhs, rhs)
    return LocalOperator(lay, f"P{k}(F)", sol[:nq])


def _test_functions(cell: LocalCell):
    """Hess of P^{k+2} modulo affine functions, then cHoly^k."""
    k = cell.k
    v = cell.cell_basis(k + 2)[4:]
    return v, cell.cell_space("cHoly", k)


def potential_TP(cell: LocalCell, dd: LocalOperator | None = None) -> LocalOperator:
    """Symmetric matrix potential in the orthonormal basis of P^k(T;S)."""
    k, m = cell.k, cell.mesh
    lay = cell.layout("divdiv")
    dd = dd if dd is not None else op_DD(cell)
    v, ch = _test_functions(cell)
    nv = len(v)
    psi = cell.cell_basis(k, "sym3")
    crule = cell.rule("cell")
    cp, cw = crule.points, crule.weights

    hv = hess(v).eval(cp)
    mat = np.zeros((len(psi), len(psi)))
    mat[:nv] = inner(hv, psi.eval(cp), cw)
    mat[nv:] = inner(ch.eval(cp), psi.eval(cp), cw)

    rhs = np.zeros((len(psi), lay.total))
    rhs[:nv] = inner(v.eval(cp), cell.cell_basis(k).eval(cp), cw) @ dd.matrix
    rhs[nv:, lay["ups_H"]] = inner(ch.eval(cp), cell.cell_space("Htrim", k).eval(cp), cw)
    gv = grad(v)
    for fi, f in enumerate(cell.faces):
        n, omega = m.face_normal[f], cell.face_sign[fi]
        rule = cell.rule("face", f)
        pts, w = rule.points, rule.weights
        gam = gamma_nn_F(cell, fi).matrix
        rhs[:nv] += omega * inner(gv.eval(pts) @ n, cell.face_basis(f, k).eval(pts), w) @ gam
        rhs[:nv, lay["D_F", fi]] -= omega * inner(v.eval(pts),
                                                  cell.face_basis(f, k + 1).eval(pts), w)
        for fe in cell.face_edges(f):
            erule = cell.rule("edge", fe.gid)
            wts = np.einsum("cab,a,b->c", SYM2, fe.n_fe_edge, fe.n_f_edge)
            psi_e = _scaled(cell.edge_basis(fe.gid, k + 1).eval(erule.points), wts)
            rhs[:nv, lay["ups_E", fe.local]] += omega * fe.sign * inner(
                v.eval(erule.points), psi_e, erule.weights)
    return LocalOperator(lay, f"P{k}(T;S)", np.linalg.solve(mat, rhs))


def component_weights(cell: LocalCell) -> np.ndarray:
    """Diagonal of the component product in the orthonormal DOF bases."""
    lay, h = cell.layout("divdiv"), cell.h
    scale = {"ups_H": 1.0, "ups_F": h, "D_F": h**3, "ups_E": h**2}
    out = np.empty(lay.total)
    for b in lay.blocks:
        out[b.slice] = scale[b.name]
    return out


def component_product(cell: LocalCell) -> np.ndarray:
    return np.diag(component_weights(cell))


def tnorm(cell: LocalCell, values) -> float:
    values = np.asarray(values, float)
    return float(np.sqrt(values @ (component_weights(cell) * values)))


def interpolate_potential(cell: LocalCell) -> np.ndarray:
    """I_DD applied to the orthonormal basis of P^k(T;S), one column each."""
    return interpolate_divdiv(cell, cell.cell_basis(cell.k, "sym3"))


def stabilization(cell: LocalCell, tp: LocalOperator | None = None) -> np.ndarray:
    tp = tp if tp is not None else potential_TP(cell)
    diff = interpolate_potential(cell) @ tp.matrix
    diff[np.diag_indices_from(diff)] -= 1.0
    return diff.T @ (component_weights(cell)[:, None] * diff)


def local_product(cell: LocalCell, tp: LocalOperator | None = None) -> np.ndarray:
    """Discrete L2 product: potential mass plus stabilization."""
    tp = tp if tp is not None else potential_TP(cell)
    prod = tp.matrix.T @ tp.matrix + stabilization(cell, tp)
    return 0.5 * (prod + prod.T)


def local_matrices(cell: LocalCell) -> dict:
    """DD, TP and the discrete product in one pass."""
    dd = op_DD(cell)
    tp = potential_TP(cell, dd)
    return {"DD": dd.matrix, "TP": tp.matrix, "A": local_product(cell, tp)}
