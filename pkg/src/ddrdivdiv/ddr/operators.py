"""Local discrete operators uDG, uSC and DD as dense matrices.

Every face or cell block is the right-hand side of a variational identity
tested against an orthonormal basis, so no mass solve is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..polyspace.poly import curl2, curl3, div, grad, hess, trace
from ..polyspace.spaces import dev_basis, sym_basis
from ..polyspace.traces import edge_derivative_matrices, inner
from .cell import LocalCell

DEV = dev_basis().reshape(8, 9)
SYM2 = sym_basis(2)

# C tensor followed by the S2 coordinates, acting on row-major 2x2 entries
C_TO_S2 = np.array([
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, -1.0, 0.0],
    [-np.sqrt(0.5), 0.0, 0.0, np.sqrt(0.5)],
])


def c_tensor(eta: np.ndarray) -> np.ndarray:
    """The 2x2 map ``eta -> [[e12, (e22 - e11)/2], [(e22 - e11)/2, -e21]]``."""
    eta = np.asarray(eta, float)
    off = 0.5 * (eta[..., 1, 1] - eta[..., 0, 0])
    return np.stack([np.stack([eta[..., 0, 1], off], -1), np.stack([off, -eta[..., 1, 0]], -1)], -2)


@dataclass(frozen=True)
class LocalOperator:
    source: object
    target: object
    matrix: np.ndarray

    def __matmul__(self, other):
        return self.matrix @ other


def _edge_derivatives(cell: LocalCell, e, ell):
    _, _, x1, x2 = cell.edge_vertices(e)
    return edge_derivative_matrices(cell.edge_basis(e, ell), cell.edge_basis(e, ell - 1),
                                    cell.rule("edge", e), x1, x2)


def _scaled(scalar_vals, weights):
    """``scalar[j] * weights[c]`` flattened as ``j * ncomp + c``."""
    out = np.einsum("jq,c->jcq", scalar_vals, np.asarray(weights, float).reshape(-1))
    return out.reshape(-1, scalar_vals.shape[1])


def op_uDG(cell: LocalCell) -> LocalOperator:
    k, m = cell.k, cell.mesh
    src, dst = cell.layout("devgrad"), cell.layout("symcurl")
    mat = np.zeros((dst.total, src.total))

    for iv in range(len(cell.vertices)):
        mat[dst["tau_V", iv], src["G_V", iv]] = DEV

    eye_vec = np.array([1.0, 0.0, 0.0, 1.0])
    for ie, e in enumerate(cell.edges):
        i1, i2, _, _ = cell.edge_vertices(e)
        t, nrm = m.edge_tangent[e], m.edge_normals[e]
        nk, nk1 = k + 1, k + 2
        vol_k, a1_k, a2_k = _edge_derivatives(cell, e, k)
        vol_K, a1_K, a2_K = _edge_derivatives(cell, e, k + 1)
        rows = dst["tau_E", ie]
        mat[rows, src["G_E", ie]] = np.kron(np.eye(nk), np.eye(4) - np.outer(eye_vec, eye_vec) / 3)
        dk = np.zeros((nk * 4, nk))
        for a in (0, 3):
            dk[a::4] = np.eye(nk)
        mat[rows, src["v_tE", ie]] -= dk @ vol_k / 3
        mat[rows, src["v_V", i2]] -= np.outer(dk @ a2_k, t) / 3
        mat[rows, src["v_V", i1]] += np.outer(dk @ a1_k, t) / 3

        rows = dst["tau_tE", ie]
        mat[rows, src["v_nE", ie]] = np.kron(vol_K, np.eye(2))
        mat[rows, src["v_V", i2]] += np.kron(a2_K[:, None], nrm)
        mat[rows, src["v_V", i1]] -= np.kron(a1_K[:, None], nrm)

        rows = dst["C_E", ie]
        nn = np.kron(nrm, nrm)
        mat[rows, src["G_E", ie]] = np.kron(vol_K, np.eye(4))
        mat[rows, src["G_V", i2]] += np.kron(a2_K[:, None], nn)
        mat[rows, src["G_V", i1]] -= np.kron(a1_K[:, None], nn)

    sr = cell.cell_space("SRtrim", k)
    crule = cell.rule("cell")
    mat[dst["tau_T"], src["v_T"]] = -inner(div(sr).eval(crule.points),
                                           cell.cell_basis(k - 1, "vec3").eval(crule.points),
                                           crule.weights)
    for fi, f in enumerate(cell.faces):
        n, tf, omega = m.face_normal[f], m.face_tangents[f], cell.face_sign[fi]
        rule = cell.rule("face", f)
        pts, w = rule.points, rule.weights
        rt = cell.face_space(f, "RT", k + 1)
        cg = cell.face_space(f, "CGtrim", k)
        pk = cell.face_basis(f, k).eval(pts)
        pv = cell.face_basis(f, k - 1, "vec2").eval(pts)
        pg = cell.face_basis(f, k - 1).eval(pts)

        mat[dst["tau_RT", fi], src["v_nF", fi]] = -inner(div(rt).eval(pts), pk, w)
        mat[dst["tau_CG", fi], src["v_tF", fi]] = -inner(div(cg).eval(pts), pv, w)
        mat[dst["tau_CG", fi], src["G_F", fi]] = -inner(trace(cg).eval(pts), pg, w) / 3

        for fe in cell.face_edges(f):
            erule = cell.rule("edge", fe.gid)
            epts, ew = erule.points, erule.weights
            wv = rt.eval(epts) @ fe.n_fe_face
            sv = cg.eval(epts)
            psi_k = cell.edge_basis(fe.gid, k).eval(epts)
            psi_k1 = cell.edge_basis(fe.gid, k - 1).eval(epts)
            mat[dst["tau_RT", fi], src["v_nE", fe.local]] += fe.sign * inner(
                wv, _scaled(psi_k, fe.n_f_edge), ew)
            t_s_n = np.einsum("fqab,a,b->fq", sv, fe.t_face, fe.n_fe_face)
            n_s_n = np.einsum("fqab,a,b->fq", sv, fe.n_fe_face, fe.n_fe_face)
            mat[dst["tau_CG", fi], src["v_tE", fe.local]] += fe.sign * inner(t_s_n, psi_k1, ew)
            mat[dst["tau_CG", fi], src["v_nE", fe.local]] += fe.sign * inner(
                n_s_n, _scaled(psi_k, fe.n_fe_edge), ew)

        srv = sr.eval(pts)
        mat[dst["tau_T"], src["v_nF", fi]] += omega * inner(
            np.einsum("fqij,i,j->fq", srv, n, n), pk, w)
        mat[dst["tau_T"], src["v_tF", fi]] += omega * inner(
            np.einsum("fqij,ai,j->fqa", srv, tf, n), pv, w)
    return LocalOperator(src, dst, mat)


def op_uSC(cell: LocalCell) -> LocalOperator:
    k, m = cell.k, cell.mesh
    src, dst = cell.layout("symcurl"), cell.layout("divdiv")
    mat = np.zeros((dst.total, src.total))

    for ie, e in enumerate(cell.edges):
        i1, i2, _, _ = cell.edge_vertices(e)
        nrm = m.edge_normals[e]
        vol_K, a1_K, a2_K = _edge_derivatives(cell, e, k + 1)
        nk1 = k + 2
        rows = dst["ups_E", ie]
        mat[rows, src["C_E", ie]] = np.kron(np.eye(nk1), C_TO_S2)
        mat[rows, src["tau_E", ie]] = -np.kron(vol_K, C_TO_S2)
        vert = C_TO_S2 @ np.kron(nrm, nrm) @ DEV.T
        mat[rows, src["tau_V", i2]] -= np.kron(a2_K[:, None], vert)
        mat[rows, src["tau_V", i1]] += np.kron(a1_K[:, None], vert)

    hb = cell.cell_space("Htrim", k)
    sr = cell.cell_space("SRtrim", k)
    crule = cell.rule("cell")
    mat[dst["ups_H"], src["tau_T"]] = inner(curl3(hb).eval(crule.points), sr.eval(crule.points),
                                            crule.weights)
    for fi, f in enumerate(cell.faces):
        n, tf, omega = m.face_normal[f], m.face_tangents[f], cell.face_sign[fi]
        rule = cell.rule("face", f)
        pts, w = rule.points, rule.weights
        rt = cell.face_space(f, "RT", k + 1)
        cg = cell.face_space(f, "CGtrim", k)
        r = cell.face_basis(f, k + 1)
        gr = grad(r)
        mat[dst["ups_F", fi], src["tau_RT", fi]] = inner(curl2(r).eval(pts), rt.eval(pts), w)
        mat[dst["D_F", fi], src["tau_CG", fi]] = -inner(curl2(gr).eval(pts), cg.eval(pts), w)

        for fe in cell.face_edges(f):
            e = fe.gid
            i1, i2, x1, x2 = cell.edge_vertices(e)
            erule = cell.rule("edge", e)
            epts, ew = erule.points, erule.weights
            rv = r.eval(epts)
            grv = gr.eval(epts)
            psi_k = cell.edge_basis(e, k).eval(epts)
            psi_K = cell.edge_basis(e, k + 1).eval(epts)
            s = fe.sign
            mat[dst["ups_F", fi], src["tau_tE", fe.local]] -= s * inner(
                rv, _scaled(psi_K, fe.n_f_edge), ew)

            d_rows = dst["D_F", fi]
            mat[d_rows, src["tau_tE", fe.local]] += s * inner(
                grv @ fe.n_fe_face, _scaled(psi_K, fe.n_fe_edge), ew)
            weight = 2 * np.outer(fe.n_fe_edge, fe.n_fe_edge) + np.outer(fe.n_f_edge, fe.n_f_edge)
            mat[d_rows, src["tau_E", fe.local]] -= s * inner(
                grv @ fe.t_face, _scaled(psi_k, weight), ew)
            mat[d_rows, src["C_E", fe.local]] -= s * inner(
                rv, _scaled(psi_K, np.outer(fe.n_fe_edge, fe.n_fe_edge)), ew)
            nbn = DEV @ np.outer(fe.n_fe, fe.n_fe).ravel()
            r1 = r.eval(np.atleast_2d(x1))[:, 0]
            r2 = r.eval(np.atleast_2d(x2))[:, 0]
            mat[d_rows, src["tau_V", i2]] += s * np.outer(r2, nbn)
            mat[d_rows, src["tau_V", i1]] -= s * np.outer(r1, nbn)

        hv = hb.eval(pts)
        hxn = np.cross(hv, n)
        tt = np.einsum("fqij,ai,bj->fqab", hxn, tf, tf)
        nt = np.einsum("fqij,i,bj->fqb", hxn, n, tf)
        mat[dst["ups_H"], src["tau_CG", fi]] += omega * inner(tt, cg.eval(pts), w)
        mat[dst["ups_H"], src["tau_RT", fi]] += omega * inner(nt, rt.eval(pts), w)
    return LocalOperator(src, dst, mat)


def op_DD(cell: LocalCell) -> LocalOperator:
    k, m = cell.k, cell.mesh
    src = cell.layout("divdiv")
    v = cell.cell_basis(k)
    mat = np.zeros((len(v), src.total))
    crule = cell.rule("cell")
    mat[:, src["ups_H"]] = inner(hess(v).eval(crule.points),
                                 cell.cell_space("Htrim", k).eval(crule.points), crule.weights)
    gv = grad(v)
    for fi, f in enumerate(cell.faces):
        n, omega = m.face_normal[f], cell.face_sign[fi]
        rule = cell.rule("face", f)
        pts, w = rule.points, rule.weights
        r = cell.face_basis(f, k + 1).eval(pts)
        mat[:, src["ups_F", fi]] -= omega * inner(gv.eval(pts) @ n, r, w)
        mat[:, src["D_F", fi]] += omega * inner(v.eval(pts), r, w)
        for fe in cell.face_edges(f):
            erule = cell.rule("edge", fe.gid)
            psi = cell.edge_basis(fe.gid, k + 1).eval(erule.points)
            weights = np.einsum("cab,a,b->c", SYM2, fe.n_fe_edge, fe.n_f_edge)
            mat[:, src["ups_E", fe.local]] -= omega * fe.sign * inner(
                v.eval(erule.points), _scaled(psi, weights), erule.weights)
    return LocalOperator(src, f"P{k}(T)", mat)
