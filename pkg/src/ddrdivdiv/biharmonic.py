"""Mixed biharmonic scheme on the global divdiv space.

Unknowns are the divdiv DOFs (faces, then edges, then elements) followed by the
broken P^k coefficients of u.  The stored matrix is the symmetric form
``[[A, B^T], [B, 0]]`` with right-hand side ``[0, -F]``.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import numpy.polynomial.polynomial as P
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ddr.cell import LocalCell
from .ddr.interpolate import interpolate_divdiv
from .ddr.potentials import local_matrices
from .polyspace.poly import Frame, PolyBasis, div, exponents, hess, n_monomials
from .polyspace.spaces import dim_p, space_dim
from .polyspace.traces import BasisCache, inner

log = logging.getLogger(__name__)

CSV_HEADER = ("h", "ndof", "err_sigma", "err_u", "err_total")


class SingularSystemError(RuntimeError):
    pass


# DOF map --------------------------------------------------------------------------------
class GlobalDofMap:
    """Global offsets of the divdiv blocks and of the broken polynomial space."""

    def __init__(self, mesh, k: int):
        self.mesh, self.k = mesh, k
        self.face_size = 2 * dim_p(k + 1, 2)
        self.edge_size = 3 * dim_p(k + 1, 1)
        self.cell_size = space_dim("Htrim", k)
        self.u_size = dim_p(k, 3)
        self.face_offset = np.arange(mesh.n_faces) * self.face_size
        self.edge_offset = mesh.n_faces * self.face_size + np.arange(mesh.n_edges) * self.edge_size
        start = mesh.n_faces * self.face_size + mesh.n_edges * self.edge_size
        self.cell_offset = start + np.arange(mesh.n_cells) * self.cell_size
        self.n_sigma = start + mesh.n_cells * self.cell_size
        self.u_offset = np.arange(mesh.n_cells) * self.u_size
        self.n_u = mesh.n_cells * self.u_size

    @property
    def total(self) -> int:
        return self.n_sigma + self.n_u

    def sigma_indices(self, cell: LocalCell) -> np.ndarray:
        """Global index of every local divdiv DOF, in local layout order."""
        parts = [self.cell_offset[cell.t] + np.arange(self.cell_size)]
        parts += [self.face_offset[f] + np.arange(self.face_size) for f in cell.faces]
        parts += [self.edge_offset[e] + np.arange(self.edge_size) for e in cell.edges]
        idx = np.concatenate(parts)
        assert len(idx) == cell.layout("divdiv").total
        return idx

    def u_indices(self, t: int) -> np.ndarray:
        return self.u_offset[t] + np.arange(self.u_size)


# manufactured solutions -------------------------------------------------------------------
class ProductField:
    """Derivatives of ``u(x) = prod_a g(x_a)`` evaluated in closed form.

    ``kind`` selects the field: ``"u"``, ``"sigma"`` (minus the Hessian) or ``"f"``
    (divdiv of the Hessian).  Follows the interpolator field protocol.
    """

    def __init__(self, factor, kind: str):
        self.kind = kind
        self.ders = [np.asarray(factor, float)]
        for _ in range(5):
            self.ders.append(P.polyder(self.ders[-1]) if len(self.ders[-1]) > 1 else np.zeros(1))
        base = len(factor) - 1
        self.degree = 3 * base - {"u": 0, "sigma": 2, "f": 4}[kind]

    def _d(self, table, alpha):
        return table[alpha[0], :, 0] * table[alpha[1], :, 1] * table[alpha[2], :, 2]

    def _table(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        return np.stack([P.polyval(x, c) for c in self.ders])

    def _at(self, table, extra):
        eye = np.eye(3, dtype=int)
        if self.kind == "u":
            return self._d(table, sum(eye[i] for i in extra) if extra else np.zeros(3, int))
        if self.kind == "sigma":
            out = np.empty(table.shape[1:2] + (3, 3))
            for i in range(3):
                for j in range(3):
                    out[:, i, j] = -self._d(table, eye[i] + eye[j] + sum(eye[a] for a in extra))
            return out
        return sum(self._d(table, 2 * eye[i] + 2 * eye[j] + sum(eye[a] for a in extra))
                   for i in range(3) for j in range(3))

    def eval(self, x):
        return self._at(self._table(x), ())[None]

    values = eval

    def gradients(self, x):
        table = self._table(x)
        return np.stack([self._at(table, (a,)) for a in range(3)], axis=-1)[None]


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    u: object
    sigma: object
    f: object

    def values(self, x):
        return {"u": self.u.eval(x)[0], "sigma": self.sigma.eval(x)[0], "f": self.f.eval(x)[0]}


def _truncate(basis: PolyBasis, degree: int) -> PolyBasis:
    """Drop vanishing top-degree coefficients so quadrature degrees stay tight."""
    keep = n_monomials(basis.frame.dim, degree)
    dropped = basis.coeffs[:, keep:]
    if dropped.size and np.abs(dropped).max() > 1e-12 * max(np.abs(basis.coeffs).max(), 1.0):
        raise ValueError("polynomial has terms above the requested degree")
    return PolyBasis(basis.frame, degree, basis.coeffs[:, :keep])


def _product_polynomial(factor, dim=3) -> PolyBasis:
    """``prod_i g(x_i)`` for a univariate coefficient list ``g`` (constant first)."""
    deg = dim * (len(factor) - 1)
    exps = exponents(dim, deg)
    coeffs = np.zeros((1, len(exps)))
    g = np.asarray(factor, float)
    for i, e in enumerate(exps):
        if np.all(e < len(g)):
            coeffs[0, i] = np.prod(g[e])
    return PolyBasis(Frame(np.zeros(3), np.eye(3), 1.0), deg, coeffs)


BUBBLE = (0.0, 0.0, 1.0, -2.0, 1.0)  # t^2 (1 - t)^2


def manufactured_case(name: str = "paper-bubble", form: str = "product") -> ManufacturedCase:
    """The bubble case; ``form="monomial"`` gives the same fields as monomial expansions."""
    if name != "paper-bubble":
        raise ValueError(f"unknown manufactured case {name!r}")
    if form == "product":
        return ManufacturedCase(name, *(ProductField(BUBBLE, kd) for kd in ("u", "sigma", "f")))
    u = _product_polynomial(BUBBLE)
    hu = hess(u)
    sigma = _truncate(hu.map(np.negative), 10)
    f = _truncate(div(div(hu)), 8)
    return ManufacturedCase(name, u, sigma, f)


def zero_case() -> ManufacturedCase:
    frame = Frame(np.zeros(3), np.eye(3), 1.0)
    return ManufacturedCase("zero", PolyBasis(frame, 0, np.zeros((1, 1))),
                            PolyBasis(frame, 0, np.zeros((1, 1, 3, 3))),
                            PolyBasis(frame, 0, np.zeros((1, 1))))


# local assembly ------------------------------------------------------------------------------
def geometry_key(cell: LocalCell):
    """Translation-invariant fingerprint of the local geometry and orientation.

    Cells with equal keys produce identical local matrices.
    """
    m = cell.mesh
    h = cell.h
    parts = [np.round((m.vertices[cell.vertices] - m.cell_center[cell.t]) / h, 10).ravel(),
             [h, cell.k]]
    for fi, f in enumerate(cell.faces):
        loop = [cell.vertex_local[int(v)] for v in m.faces[f]]
        edges = [(fe.local, fe.sign) for fe in cell.face_edges(f)]
        parts += [loop, np.ravel(edges), [cell.face_sign[fi]],
                  np.round(m.face_normal[f], 10), np.round(m.face_tangents[f].ravel(), 10)]
    for e in cell.edges:
        i1, i2, _, _ = cell.edge_vertices(e)
        parts += [[i1, i2], np.round(m.edge_normals[e].ravel(), 10)]
    return tuple(np.concatenate([np.asarray(p, float).ravel() for p in parts]).tolist())


class LocalAssembler:
    """Builds and memoizes per-cell matrices, reusing them for congruent cells."""

    def __init__(self, mesh, k: int, reuse: bool = True):
        self.mesh, self.k, self.reuse = mesh, k, reuse
        self.cache = BasisCache(mesh, 2 * k + 6)
        self._memo = {}
        self.hits = 0

    def cell(self, t) -> LocalCell:
        return LocalCell(self.mesh, t, self.k, self.cache)

    def key(self, t):
        return geometry_key(self.cell(t)) if self.reuse else t

    def matrices(self, t) -> dict:
        key = self.key(t)
        if key in self._memo:
            self.hits += 1
            return self._memo[key]
        mats = local_matrices(self.cell(t))
        self._memo[key] = mats
        return mats


@dataclass
class GlobalSystem:
    mesh: object
    k: int
    dofs: GlobalDofMap
    matrix: sp.csc_matrix
    rhs: np.ndarray
    case: ManufacturedCase
    local: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _local_rhs(cell: LocalCell, f) -> np.ndarray:
    rule = cell.rule("cell", degree=f.degree + cell.k)
    return inner(cell.cell_basis(cell.k).eval(rule.points), f.eval(rule.points), rule.weights)[:, 0]


def assemble(mesh, k: int, case: ManufacturedCase | None = None, threads: int = 1,
             reuse: bool = True) -> GlobalSystem:
    case = case if case is not None else manufactured_case()
    dofs = GlobalDofMap(mesh, k)
    asm = LocalAssembler(mesh, k, reuse)

    # representatives are fixed serially so the result does not depend on scheduling
    keys = [asm.key(t) for t in range(mesh.n_cells)]
    first = {}
    for t, key in enumerate(keys):
        first.setdefault(key, t)

    def work(t):
        cell = asm.cell(t)
        mats = local_matrices(cell) if first[keys[t]] == t else None
        return mats, dofs.sigma_indices(cell), _local_rhs(cell, case.f)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            done = list(pool.map(work, range(mesh.n_cells)))
    else:
        done = [work(t) for t in range(mesh.n_cells)]
    memo = {keys[t]: done[t][0] for t in first.values()}
    asm.hits = mesh.n_cells - len(memo)
    results = [(t, memo[keys[t]], sidx, f_loc) for t, (_, sidx, f_loc) in enumerate(done)]

    rows, cols, vals = [], [], []
    rhs = np.zeros(dofs.total)
    local = {}
    for t, mats, sidx, f_loc in results:
        uidx = dofs.n_sigma + dofs.u_indices(t)
        a, b = mats["A"], mats["DD"]
        rows.append(np.repeat(sidx, len(sidx)))
        cols.append(np.tile(sidx, len(sidx)))
        vals.append(a.ravel())
        rows += [np.repeat(uidx, len(sidx)), np.tile(sidx, len(uidx))]
        cols += [np.tile(sidx, len(uidx)), np.repeat(uidx, len(sidx))]
        vals += [b.ravel(), b.ravel()]
        rhs[uidx] -= f_loc
        local[t] = mats
    matrix = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(dofs.total, dofs.total)).tocsc()
    log.info("assembled k=%d on %d cells: %d dofs, %d reused local blocks",
             k, mesh.n_cells, dofs.total, asm.hits)
    return GlobalSystem(mesh, k, dofs, matrix, rhs, case, local)


# solve ---------------------------------------------------------------------------------------
@dataclass
class Solution:
    sigma: np.ndarray
    u: np.ndarray
    residual: float


def solve(system: GlobalSystem, rhs: np.ndarray | None = None) -> Solution:
    """Sparse LU of the full indefinite system."""
    rhs = system.rhs if rhs is None else rhs
    try:
        lu = spla.splu(system.matrix)
    except RuntimeError as exc:
        raise SingularSystemError(f"factorization failed: {exc}") from None
    z = lu.solve(rhs)
    if not np.all(np.isfinite(z)):
        raise SingularSystemError("factorization produced non-finite values")
    res = float(np.linalg.norm(system.matrix @ z - rhs) / max(np.linalg.norm(rhs), 1e-300))
    if np.linalg.norm(rhs) == 0:
        res = float(np.linalg.norm(z))
    n = system.dofs.n_sigma
    return Solution(z[:n], z[n:], res)


def schur_min_eigenvalue(system: GlobalSystem) -> float:
    """Smallest eigenvalue of B A^-1 B^T (dense; small meshes only)."""
    n = system.dofs.n_sigma
    dense = system.matrix.toarray()
    a, b = dense[:n, :n], dense[n:, :n]
    schur = b @ np.linalg.solve(a, b.T)
    return float(np.linalg.eigvalsh(0.5 * (schur + schur.T)).min())


# errors ----------------------------------------------------------------------------------------
@dataclass
class ErrorReport:
    err_sigma: float
    err_u: float

    @property
    def err_total(self) -> float:
        return self.err_sigma + self.err_u


def interpolate_case(system: GlobalSystem) -> tuple:
    """Global I_DD sigma and the broken projection of u."""
    dofs, case = system.dofs, system.case
    cache = BasisCache(system.mesh, 2 * system.k + 6)
    isig = np.zeros(dofs.n_sigma)
    pu = np.zeros(dofs.n_u)
    for t in range(system.mesh.n_cells):
        cell = LocalCell(system.mesh, t, system.k, cache)
        isig[dofs.sigma_indices(cell)] = interpolate_divdiv(cell, case.sigma)[:, 0]
        rule = cell.rule("cell", degree=case.u.degree + system.k)
        pu[dofs.u_indices(t)] = inner(cell.cell_basis(system.k).eval(rule.points),
                                      case.u.eval(rule.points), rule.weights)[:, 0]
    return isig, pu


def compute_error(system: GlobalSystem, sol: Solution, reference: tuple | None = None) -> ErrorReport:
    isig, pu = reference if reference is not None else interpolate_case(system)
    dofs = system.dofs
    e_sig = sol.sigma - isig
    sq = 0.0
    for t in range(system.mesh.n_cells):
        cell = LocalCell(system.mesh, t, system.k)
        idx = dofs.sigma_indices(cell)
        sq += e_sig[idx] @ system.local[t]["A"] @ e_sig[idx]
    return ErrorReport(float(np.sqrt(max(sq, 0.0))), float(np.linalg.norm(sol.u - pu)))


# convergence ---------------------------------------------------------------------------------------
def fitted_slope(hs, errs):
    """Least-squares slope of log(err) against log(h); None for fewer than two sizes."""
    if len(hs) < 2:
        return None
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def run_case(mesh, k: int, case: ManufacturedCase | None = None, threads: int = 1) -> dict:
    system = assemble(mesh, k, case, threads)
    sol = solve(system)
    err = compute_error(system, sol)
    return {"h": mesh.h, "ndof": system.size, "err_sigma": err.err_sigma,
            "err_u": err.err_u, "err_total": err.err_total, "residual": sol.residual}


def convergence_study(meshes, degrees, case_name: str = "paper-bubble", threads: int = 1) -> dict:
    """Rows per degree plus the fitted slope of err_total."""
    case = manufactured_case(case_name)
    out = {}
    for k in degrees:
        rows = []
        for mesh in meshes:
            row = run_case(mesh, k, case, threads)
            log.info("k=%d h=%.4g ndof=%d err=%.4e", k, row["h"], row["ndof"], row["err_total"])
            rows.append(row)
        slope = fitted_slope([r["h"] for r in rows], [r["err_total"] for r in rows])
        out[k] = {"rows": rows, "slope": slope}
    return out


def write_csv(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([repr(float(r["h"])), int(r["ndof"])]
                            + [repr(float(r[c])) for c in CSV_HEADER[2:]])
