"""Integration-by-parts identities checked by quadrature on random polynomials.

These exercise frames, traces, orientation signs and quadrature without going
through any discrete operator.  Each check returns the largest relative misfit
over the faces of the element.
"""

from __future__ import annotations

import numpy as np

from ..polyspace.poly import PolyBasis, curl2, curl3, div, grad, hess, rot2, sym
from ..polyspace.spaces import dev_basis, sym_basis, tensorize
from ..polyspace.traces import BasisCache

IDENTITIES = ("DG.T", "DG.Ftn", "DG.Ftt", "SC.T", "SC.Fnn", "SC.Ftt2", "DD.T")


def random_poly(frame, degree, rng, vshape=(), kind=None) -> PolyBasis:
    """One random polynomial; ``kind`` restricts matrix values to sym or dev."""
    if kind == "sym":
        mono = tensorize(PolyBasis.monomials(frame, degree), sym_basis(3))
    elif kind == "dev":
        mono = tensorize(PolyBasis.monomials(frame, degree), dev_basis())
    else:
        mono = PolyBasis.monomials(frame, degree, vshape)
    return mono.transform(rng.standard_normal((1, len(mono))))


def _integral(vals, rule):
    return float(rule.weights @ np.asarray(vals))


def _misfit(lhs, terms):
    scale = max([abs(lhs)] + [abs(t) for t in terms] + [1e-300])
    return abs(lhs - sum(terms)) / scale


class _Context:
    def __init__(self, mesh, t, degree, rng):
        self.mesh, self.t, self.degree, self.rng = mesh, t, degree, rng
        self.cache = BasisCache(mesh, 2 * degree + 4)
        self.frame = self.cache.frame("cell", t)
        self.crule = self.cache.rule("cell", t)

    def faces(self):
        m = self.mesh
        for f, omega in zip(m.cells[self.t], m.cell_face_sign[self.t]):
            yield int(f), int(omega), self.cache.rule("face", int(f)), self.cache.frame("face", int(f))

    def edges(self, f):
        m = self.mesh
        n, tf = m.face_normal[f], m.face_tangents[f]
        for e, s in zip(m.face_edges[f], m.face_edge_sign[f]):
            t = m.edge_tangent[e]
            nfe = np.cross(n, t)
            yield int(e), int(s), t, nfe, tf @ t, tf @ nfe, self.cache.rule("edge", int(e))

    def endpoints(self, e):
        return self.mesh.vertices[self.mesh.edges[e]]


def ipp_dg_t(ctx: _Context) -> float:
    v = random_poly(ctx.frame, ctx.degree, ctx.rng, (3,))
    s = random_poly(ctx.frame, ctx.degree, ctx.rng, kind="dev")
    r = ctx.crule
    gv = grad(v).eval(r.points)[0]
    tr = np.trace(gv, axis1=-2, axis2=-1)[:, None, None] * np.eye(3) / 3
    lhs = _integral(np.einsum("qij,qij->q", gv - tr, s.eval(r.points)[0]), r)
    terms = [-_integral(np.einsum("qi,qi->q", v.eval(r.points)[0], div(s).eval(r.points)[0]), r)]
    for f, omega, fr, _ in ctx.faces():
        n = ctx.mesh.face_normal[f]
        terms.append(omega * _integral(
            np.einsum("qi,qij,j->q", v.eval(fr.points)[0], s.eval(fr.points)[0], n), fr))
    return _misfit(lhs, terms)


def ipp_dg_ftn(ctx: _Context) -> float:
    v = random_poly(ctx.frame, ctx.degree, ctx.rng, (3,))
    worst = 0.0
    for f, _, fr, frame in ctx.faces():
        n, tf = ctx.mesh.face_normal[f], ctx.mesh.face_tangents[f]
        w = random_poly(frame, ctx.degree, ctx.rng, (2,))
        gv = grad(v).eval(fr.points)[0]
        lhs = _integral(np.einsum("i,qij,bj,qb->q", n, gv, tf, w.eval(fr.points)[0]), fr)
        vn = v.eval(fr.points)[0] @ n
        terms = [-_integral(vn * div(w).eval(fr.points)[0], fr)]
        for e, s, _, _, _, nfe_f, er in ctx.edges(f):
            terms.append(s * _integral((v.eval(er.points)[0] @ n) * (w.eval(er.points)[0] @ nfe_f), er))
        worst = max(worst, _misfit(lhs, terms))
    return worst


def ipp_dg_ftt(ctx: _Context) -> float:
    v = random_poly(ctx.frame, ctx.degree, ctx.rng, (3,))
    worst = 0.0
    for f, _, fr, frame in ctx.faces():
        tf = ctx.mesh.face_tangents[f]
        sig = random_poly(frame, ctx.degree, ctx.rng, (2, 2))
        sv = sig.eval(fr.points)[0]
        gv = grad(v).eval(fr.points)[0]
        dv = np.trace(gv, axis1=-2, axis2=-1)
        devg = gv - dv[:, None, None] * np.eye(3) / 3
        lhs = _integral(np.einsum("ai,qij,bj,qab->q", tf, devg, tf, sv), fr)
        vt = v.eval(fr.points)[0] @ tf.T
        terms = [-_integral(np.einsum("qa,qa->q", vt, div(sig).eval(fr.points)[0]), fr),
                 -_integral(dv * np.trace(sv, axis1=-2, axis2=-1), fr) / 3]
        for e, s, t, nfe, t_f, nfe_f, er in ctx.edges(f):
            ve, se = v.eval(er.points)[0], sig.eval(er.points)[0]
            terms.append(s * _integral(
                (ve @ t) * np.einsum("a,qab,b->q", t_f, se, nfe_f)
                + (ve @ nfe) * np.einsum("a,qab,b->q", nfe_f, se, nfe_f), er))
        worst = max(worst, _misfit(lhs, terms))
    return worst


def ipp_sc_t(ctx: _Context) -> float:
    tau = random_poly(ctx.frame, ctx.degree, ctx.rng, kind="dev")
    sig = random_poly(ctx.frame, ctx.degree, ctx.rng, kind="sym")
    r = ctx.crule
    lhs = _integral(np.einsum("qij,qij->q", sym(curl3(tau)).eval(r.points)[0], sig.eval(r.points)[0]), r)
    terms = [_integral(np.einsum("qij,qij->q", tau.eval(r.points)[0], curl3(sig).eval(r.points)[0]), r)]
    for f, omega, fr, _ in ctx.faces():
        n = ctx.mesh.face_normal[f]
        sxn = np.cross(sig.eval(fr.points)[0], n)
        terms.append(omega * _integral(np.einsum("qij,qij->q", tau.eval(fr.points)[0], sxn), fr))
    return _misfit(lhs, terms)


def ipp_sc_fnn(ctx: _Context) -> float:
    tau = random_poly(ctx.frame, ctx.degree, ctx.rng, kind="dev")
    worst = 0.0
    for f, _, fr, frame in ctx.faces():
        n, tf = ctx.mesh.face_normal[f], ctx.mesh.face_tangents[f]
        r = random_poly(frame, ctx.degree, ctx.rng)
        rv = r.eval(fr.points)[0]
        scn = np.einsum("i,qij,j->q", n, sym(curl3(tau)).eval(fr.points)[0], n)
        lhs = _integral(scn * rv, fr)
        tnt = np.einsum("i,qij,bj->qb", n, tau.eval(fr.points)[0], tf)
        terms = [_integral(np.einsum("qb,qb->q", tnt, curl2(r).eval(fr.points)[0]), fr)]
        for e, s, t, _, _, _, er in ctx.edges(f):
            terms.append(-s * _integral(
                np.einsum("i,qij,j->q", n, tau.eval(er.points)[0], t) * r.eval(er.points)[0], er))
        worst = max(worst, _misfit(lhs, terms))
    return worst


def ipp_sc_ftt2(ctx: _Context) -> float:
    tau = random_poly(ctx.frame, ctx.degree, ctx.rng, kind="dev")
    worst = 0.0
    for f, _, fr, frame in ctx.faces():
        n, tf = ctx.mesh.face_normal[f], ctx.mesh.face_tangents[f]
        r = random_poly(frame, ctx.degree, ctx.rng)
        # tt block of tau as a face-frame polynomial so face derivatives are exact
        tau_tt = tau.map(lambda c: np.einsum("ai,...ij,bj->...ab", tf, c, tf))
        tt_face = _restrict(tau_tt, frame, fr)
        lhs = _integral(div(rot2(tt_face)).eval(fr.points)[0] * r.eval(fr.points)[0], fr)
        terms = [-_integral(np.einsum("qab,qab->q", tt_face.eval(fr.points)[0],
                                      curl2(grad(r)).eval(fr.points)[0]), fr)]
        gtau = grad(tau)
        for e, s, t, nfe, t_f, nfe_f, er in ctx.edges(f):
            p = er.points
            tv = tau.eval(p)[0]
            gr = grad(r).eval(p)[0]
            d_n, d_t = gr @ nfe_f, gr @ t_f
            rv = r.eval(p)[0]
            g_tt = np.einsum("qiml,m->qil", gtau.eval(p)[0], t)
            body = (np.einsum("i,qij,j->q", nfe, tv, t) * d_n
                    - (2 * np.einsum("i,qij,j->q", nfe, tv, nfe) + np.einsum("i,qij,j->q", n, tv, n)) * d_t
                    - np.einsum("i,qil,l->q", nfe, g_tt, nfe) * rv)
            x1, x2 = ctx.endpoints(e)
            ends = np.array([x1, x2])
            nn_end = np.einsum("i,qij,j->q", nfe, tau.eval(ends)[0], nfe) * r.eval(ends)[0]
            terms.append(s * (_integral(body, er) + nn_end[1] - nn_end[0]))
        worst = max(worst, _misfit(lhs, terms))
    return worst


def ipp_dd_t(ctx: _Context) -> float:
    """Divdiv identity; the face term carries a plus sign (see the ledger)."""
    ups = random_poly(ctx.frame, ctx.degree, ctx.rng, kind="sym")
    v = random_poly(ctx.frame, ctx.degree, ctx.rng)
    r = ctx.crule
    lhs = _integral(div(div(ups)).eval(r.points)[0] * v.eval(r.points)[0], r)
    terms = [_integral(np.einsum("qij,qij->q", ups.eval(r.points)[0], hess(v).eval(r.points)[0]), r)]
    gu = grad(ups)
    for f, omega, fr, _ in ctx.faces():
        n, tf = ctx.mesh.face_normal[f], ctx.mesh.face_tangents[f]
        p = fr.points
        uv, gv = ups.eval(p)[0], gu.eval(p)[0]
        unn = np.einsum("i,qij,j->q", n, uv, n)
        div_f = np.einsum("qijl,ai,j,al->q", gv, tf, n, tf)
        dn_nn = np.einsum("qijl,i,j,l->q", gv, n, n, n)
        vv = v.eval(p)[0]
        terms.append(-omega * _integral(unn * (grad(v).eval(p)[0] @ n), fr))
        terms.append(omega * _integral((2 * div_f + dn_nn) * vv, fr))
        for e, s, t, nfe, _, _, er in ctx.edges(f):
            terms.append(-omega * s * _integral(
                np.einsum("i,qij,j->q", nfe, ups.eval(er.points)[0], n) * v.eval(er.points)[0], er))
    return _misfit(lhs, terms)


def _restrict(basis: PolyBasis, frame, rule) -> PolyBasis:
    """Re-express a cell polynomial on a face frame by exact interpolation."""
    mono = PolyBasis.monomials(frame, basis.degree)
    vals = basis.eval(rule.points)
    shape = vals.shape[2:]
    sol, *_ = np.linalg.lstsq(mono.eval(rule.points).T, vals[0].reshape(len(rule.points), -1),
                              rcond=None)
    return PolyBasis(frame, basis.degree, sol.reshape((1, len(mono)) + shape))


_CHECKS = {
    "DG.T": ipp_dg_t, "DG.Ftn": ipp_dg_ftn, "DG.Ftt": ipp_dg_ftt,
    "SC.T": ipp_sc_t, "SC.Fnn": ipp_sc_fnn, "SC.Ftt2": ipp_sc_ftt2, "DD.T": ipp_dd_t,
}


def check_ipp(mesh, t: int = 0, degree: int = 2, seed: int = 0, trials: int = 1) -> dict:
    """Largest relative misfit of each identity over ``trials`` random draws."""
    rng = np.random.default_rng(seed)
    ctx = _Context(mesh, t, degree, rng)
    return {name: max(fn(ctx) for _ in range(trials)) for name, fn in _CHECKS.items()}
