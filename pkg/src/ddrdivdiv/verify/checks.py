"""Executable checks of the local complex: complex property, exactness,
dimension counts, commutation and polynomial consistency."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..ddr.cell import LocalCell
from ..ddr.interpolate import interpolate_devgrad, interpolate_divdiv, interpolate_symcurl
from ..ddr.layout import closed_form_dim
from ..ddr.operators import op_DD, op_uDG, op_uSC
from ..ddr.potentials import gamma_nn_F, interpolate_potential, potential_TP, stabilization
from ..polyspace.poly import Frame, PolyBasis, adj2, curl3, div, grad, mul_x, sym
from ..polyspace.quadrature import simplex_rule
from ..polyspace.spaces import RANK_TOL, DimensionMismatch, decomposition_basis, dim_p, full_basis
from ..polyspace.traces import inner
from .ipp import random_poly

TOL = 1e-9


def numerical_rank(mat: np.ndarray, tol: float = RANK_TOL) -> int:
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    return int((s > tol * s[0]).sum()) if s[0] > 0 else 0


def _unit_vectors(n, trials, rng):
    x = rng.standard_normal((n, trials))
    return x / np.linalg.norm(x, axis=0)


def _rel(diff, ref):
    scale = max(float(np.linalg.norm(ref)), 1e-300)
    return float(np.linalg.norm(diff)) / scale


# complex property ------------------------------------------------------------------------
@dataclass
class ComplexReport:
    element: int
    k: int
    sc_dg: float
    dd_sc: float
    sc_dg_matrix: float
    dd_sc_matrix: float
    passed: bool


def check_complex(cell: LocalCell, trials: int = 20, seed: int = 0, tol: float = TOL) -> ComplexReport:
    """Residuals of uSC.uDG and DD.uSC on random unit vectors."""
    rng = np.random.default_rng(seed)
    g, s, d = op_uDG(cell).matrix, op_uSC(cell).matrix, op_DD(cell).matrix
    x = _unit_vectors(g.shape[1], trials, rng)
    y = _unit_vectors(s.shape[1], trials, rng)
    r1 = float(np.linalg.norm(s @ (g @ x), axis=0).max())
    r2 = float(np.linalg.norm(d @ (s @ y), axis=0).max())
    m1 = float(np.linalg.norm(s @ g, 2))
    m2 = float(np.linalg.norm(d @ s, 2))
    return ComplexReport(cell.t, cell.k, r1, r2, m1, m2, bool(r1 <= tol and r2 <= tol))


# exactness --------------------------------------------------------------------------------
@dataclass
class ExactnessReport:
    element: int
    k: int
    dims: dict
    rank_dg: int
    rank_sc: int
    rank_dd: int
    ker_dg: int
    ker_sc_minus_rank_dg: int
    ker_dd_minus_rank_sc: int
    rt_residual: float
    euler: int
    passed: bool
    notes: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def rt1_basis(cell: LocalCell) -> PolyBasis:
    """Constants and ``x - x_T`` as vector fields in the cell frame."""
    frame = cell.cache.frame("cell", cell.t)
    coeffs = np.zeros((4, 4, 3))
    for c in range(3):
        coeffs[c, 0, c] = 1.0
        coeffs[3, 1 + c, c] = frame.scale
    return PolyBasis(frame, 1, coeffs)


def kernel_basis(mat: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    _, s, vt = np.linalg.svd(mat)
    rank = int((s > tol * s[0]).sum()) if s.size and s[0] > 0 else 0
    return vt[rank:].T


def check_exactness(cell: LocalCell, tol: float = TOL) -> ExactnessReport:
    k = cell.k
    g, s, d = op_uDG(cell).matrix, op_uSC(cell).matrix, op_DD(cell).matrix
    rg, rs, rd = numerical_rank(g), numerical_rank(s), numerical_rank(d)
    ker = kernel_basis(g)
    rt = interpolate_devgrad(cell, rt1_basis(cell))
    rt_res = _rel(rt - ker @ (ker.T @ rt), rt)
    euler = len(cell.vertices) - len(cell.edges) + len(cell.faces)
    dims = {"devgrad": g.shape[1], "symcurl": s.shape[1], "divdiv": d.shape[1], "P": d.shape[0]}
    report = ExactnessReport(
        element=cell.t, k=k, dims=dims, rank_dg=rg, rank_sc=rs, rank_dd=rd,
        ker_dg=g.shape[1] - rg,
        ker_sc_minus_rank_dg=s.shape[1] - rs - rg,
        ker_dd_minus_rank_sc=d.shape[1] - rd - rs,
        rt_residual=rt_res, euler=euler, passed=False,
    )
    defect = 3 if k == 0 else 0
    ok = (report.ker_dg == 4 and rt_res <= tol and report.ker_sc_minus_rank_dg == 0
          and report.ker_dd_minus_rank_sc == defect and rd == dim_p(k, 3))
    if k == 0:
        report.notes.append("defect 3 in Ker DD / Image SC: expected (k=0)")
    if euler != 2:
        report.notes.append("element topology is not trivial; exactness not asserted")
        ok = True
    report.passed = bool(ok)
    return report


# dimensions -------------------------------------------------------------------------------
def check_dimensions(cell: LocalCell) -> dict:
    """Layout totals against the closed forms; raises on any mismatch."""
    nv, ne, nf = len(cell.vertices), len(cell.edges), len(cell.faces)
    out = {}
    for space in ("devgrad", "symcurl", "divdiv"):
        built = cell.layout(space).total
        formula = closed_form_dim(space, cell.k, nv, ne, nf)
        out[space] = {"constructed": built, "formula": formula}
        if space == "divdiv" and cell.k == 0:
            out[space]["formula_uncorrected"] = closed_form_dim(space, 0, nv, ne, nf, corrected=False)
        if built != formula:
            raise DimensionMismatch(f"{space}: constructed {built}, formula {formula}")
    built = len(cell.cell_basis(cell.k))
    out["P"] = {"constructed": built, "formula": dim_p(cell.k, 3)}
    if built != dim_p(cell.k, 3):
        raise DimensionMismatch(f"P^{cell.k}: constructed {built}")
    return out


# face divergence isomorphism ----------------------------------------------------------------
def polygon_frame(points: np.ndarray):
    """Frame and quadrature for a planar polygon given by its vertex loop."""
    points = np.asarray(points, float)
    center = points.mean(axis=0)
    nrm = np.cross(points[1] - points[0], points[2] - points[0])
    nrm /= np.linalg.norm(nrm)
    t1 = points[1] - points[0]
    t1 /= np.linalg.norm(t1)
    axes = np.array([t1, np.cross(nrm, t1)])
    diam = max(np.linalg.norm(a - b) for a in points for b in points)
    return Frame(center, axes, float(diam)), center


def check_divF_isomorphism(points: np.ndarray, ell: int) -> dict:
    """Singular values of div_F from cCGoly^ell(F) to P^{ell-1}(F;R2)."""
    if ell < 1:
        return {"ell": ell, "shape": (0, 0), "smin": None, "smax": None, "ratio": None, "passed": True}
    frame, center = polygon_frame(points)
    loop = np.asarray(points, float)
    tris = np.stack([np.broadcast_to(center, loop.shape), loop, np.roll(loop, -1, axis=0)], axis=1)
    rule = simplex_rule(tris, 2 * ell + 2)
    src = decomposition_basis("cCGoly", frame, ell, rule)
    dst = full_basis(frame, ell - 1, rule, "vec2")
    mat = inner(dst.eval(rule.points), div(src).eval(rule.points), rule.weights)
    s = np.linalg.svd(mat, compute_uv=False)
    ratio = float(s[-1] / s[0])
    return {"ell": ell, "shape": mat.shape, "smin": float(s[-1]), "smax": float(s[0]),
            "ratio": ratio, "passed": bool(mat.shape[0] == mat.shape[1] and ratio > 1e-8)}


def divF_of_A(p1: float, p2: float, x: np.ndarray) -> np.ndarray:
    """div_F of ``(Id - adj)[P (x - x_F)^T]`` for a constant ``P``, with x_F = 0."""
    frame = Frame(np.zeros(3), np.eye(3)[:2], 1.0)
    p = PolyBasis(frame, 0, np.array([[[p1, p2]]]))
    outer = mul_x(p)
    a = PolyBasis(frame, outer.degree, outer.coeffs - adj2(outer).coeffs)
    return div(a).eval(np.atleast_2d(x))[0]


def unit_square_face():
    return np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])


def random_pentagon(seed: int = 0):
    rng = np.random.default_rng(seed)
    ang = 2 * np.pi * np.arange(5) / 5 + rng.uniform(-0.3, 0.3, 5)
    rad = 1.0 + 0.2 * rng.uniform(-1, 1, 5)
    flat = np.stack([rad * np.cos(ang), rad * np.sin(ang), np.zeros(5)], axis=1)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    return flat @ q.T + rng.standard_normal(3)


# commutation and consistency -----------------------------------------------------------------
def _random_family(cell, degree, n, rng, kind=None, vshape=()):
    frame = cell.cache.frame("cell", cell.t)
    polys = [random_poly(frame, degree, rng, vshape, kind) for _ in range(n)]
    return PolyBasis(frame, degree, np.concatenate([p.coeffs for p in polys]))


def _colwise(diff, ref):
    num = np.linalg.norm(diff, axis=0)
    den = np.maximum(np.linalg.norm(ref, axis=0), 1e-300)
    return float((num / den).max()) if num.size else 0.0


def check_commutation(cell: LocalCell, trials: int = 20, seed: int = 0) -> dict:
    """Relative residuals of the three commutation diagrams."""
    rng = np.random.default_rng(seed)
    k = cell.k
    crule = cell.rule("cell")
    out = {}

    v = _random_family(cell, k + 1, trials, rng, vshape=(3,))
    lhs = op_uDG(cell).matrix @ interpolate_devgrad(cell, v)
    gv = grad(v)
    dgv = gv.map(lambda c: c - np.trace(c, axis1=-2, axis2=-1)[..., None, None] * np.eye(3) / 3)
    out["DG"] = _colwise(lhs - interpolate_symcurl(cell, dgv), lhs)

    tau = _random_family(cell, k + 1, trials, rng, kind="dev")
    lhs = op_uSC(cell).matrix @ interpolate_symcurl(cell, tau)
    out["SC"] = _colwise(lhs - interpolate_divdiv(cell, sym(curl3(tau))), lhs)

    ups = _random_family(cell, k + 2, trials, rng, kind="sym")
    lhs = op_DD(cell).matrix @ interpolate_divdiv(cell, ups)
    ref = inner(cell.cell_basis(k).eval(crule.points), div(div(ups)).eval(crule.points), crule.weights)
    out["DD"] = _colwise(lhs - ref, ref)
    return out


def check_consistency(cell: LocalCell, trials: int = 20, seed: int = 0) -> dict:
    """Polynomial consistency of TP, s_T, gamma and of TP after uSC."""
    rng = np.random.default_rng(seed)
    k, m = cell.k, cell.mesh
    psi = cell.cell_basis(k, "sym3")
    crule = cell.rule("cell")
    tp = potential_TP(cell)
    ups = _random_family(cell, k, trials, rng, kind="sym")
    coef = inner(psi.eval(crule.points), ups.eval(crule.points), crule.weights)
    idd = interpolate_divdiv(cell, ups)
    out = {"TP": _colwise(tp.matrix @ idd - coef, coef)}

    stab = stabilization(cell, tp)
    out["sT"] = float(np.abs(stab @ idd).max() / max(np.abs(stab).max(), 1e-300))

    worst = 0.0
    for fi, f in enumerate(cell.faces):
        rule = cell.rule("face", f)
        n = m.face_normal[f]
        nn = np.einsum("fqij,i,j->fq", ups.eval(rule.points), n, n)
        ref = inner(cell.face_basis(f, k).eval(rule.points), nn, rule.weights)
        worst = max(worst, _colwise(gamma_nn_F(cell, fi).matrix @ idd - ref, ref))
    out["gamma"] = worst

    tau = _random_family(cell, k + 1, trials, rng, kind="dev")
    lhs = tp.matrix @ op_uSC(cell).matrix @ interpolate_symcurl(cell, tau)
    ref = inner(psi.eval(crule.points), sym(curl3(tau)).eval(crule.points), crule.weights)
    out["TP.SC"] = _colwise(lhs - ref, ref)

    prod = interpolate_potential(cell)
    a = tp.matrix.T @ tp.matrix + stab
    out["product"] = float(np.abs(prod.T @ a @ prod - np.eye(prod.shape[1])).max())
    return out


def check_rotation_invariance(mesh, k: int, seed: int = 0) -> dict:
    """Ranks on an element and on a rigidly rotated copy."""
    from ..mesh import rotation_matrix

    rot = rotation_matrix(seed)
    before = check_exactness(LocalCell(mesh, 0, k))
    after = check_exactness(LocalCell(mesh.transformed(lambda x: x @ rot.T), 0, k))
    keys = ("rank_dg", "rank_sc", "rank_dd")
    return {"before": [getattr(before, a) for a in keys],
            "after": [getattr(after, a) for a in keys],
            "passed": all(getattr(before, a) == getattr(after, a) for a in keys)}
