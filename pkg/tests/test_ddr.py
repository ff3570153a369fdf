import numpy as np
import pytest

from ddrdivdiv.ddr.cell import LocalCell
from ddrdivdiv.ddr.interpolate import interpolate_devgrad, interpolate_divdiv, interpolate_symcurl
from ddrdivdiv.ddr.layout import DofLayout, DofVector, closed_form_dim
from ddrdivdiv.ddr.operators import c_tensor, op_DD, op_uDG, op_uSC
from ddrdivdiv.ddr.potentials import (
    component_product,
    gamma_nn_F,
    local_matrices,
    local_product,
    potential_TP,
    stabilization,
    tnorm,
)
from ddrdivdiv.polyspace.poly import PolyBasis, curl3, div, grad, sym
from ddrdivdiv.polyspace.traces import inner
from ddrdivdiv.verify.checks import rt1_basis
from ddrdivdiv.verify.ipp import random_poly


def _family(cell, degree, n, seed, kind=None, vshape=()):
    rng = np.random.default_rng(seed)
    frame = cell.cache.frame("cell", cell.t)
    polys = [random_poly(frame, degree, rng, vshape, kind) for _ in range(n)]
    return PolyBasis(frame, degree, np.concatenate([p.coeffs for p in polys]))


def _const(cell, mat):
    frame = cell.cache.frame("cell", cell.t)
    return PolyBasis(frame, 0, np.asarray(mat, float)[None, None])


# layouts ------------------------------------------------------------------------------------
@pytest.mark.parametrize("k", range(4))
def test_layout_totals_match_closed_forms(k, elements):
    for m in elements.values():
        cell = LocalCell(m, 0, k)
        nv, ne, nf = len(cell.vertices), len(cell.edges), len(cell.faces)
        for space in ("devgrad", "symcurl", "divdiv"):
            assert cell.layout(space).total == closed_form_dim(space, k, nv, ne, nf)


def test_cube_k1_sizes(cube):
    cell = LocalCell(cube, 0, 1)
    assert cell.layout("divdiv").total == 188
    assert cell.layout("devgrad").total == 291


def test_tetrahedron_k0_divdiv(tet):
    assert LocalCell(tet, 0, 0).layout("divdiv").total == 60
    assert closed_form_dim("divdiv", 0, 4, 6, 4, corrected=False) == 57


def test_layout_block_order(cube):
    lay = LocalCell(cube, 0, 1).layout("divdiv")
    kinds = [b.entity for b in lay.blocks]
    assert kinds == sorted(kinds, key=["cell", "face", "edge", "vertex"].index)
    offsets = [b.offset for b in lay.blocks]
    assert offsets == sorted(offsets)
    assert lay.sizes_by_entity()["face"] == 6 * 2 * 6


def test_dofvector_length_checked(cube):
    lay = DofLayout("divdiv", 0, {"cell": [0], "face": range(6), "edge": range(12)})
    with pytest.raises(ValueError):
        DofVector(lay, np.zeros(lay.total + 1))
    vec = DofVector(lay, np.arange(lay.total))
    assert vec["ups_E", 0].shape == (6,)  # P1(E) with values in 2x2 symmetric


def test_negative_degree_rejected(cube):
    with pytest.raises(ValueError):
        LocalCell(cube, 0, -1)


# C tensor ---------------------------------------------------------------------------------
def test_c_tensor_examples():
    assert np.allclose(c_tensor(np.array([[1.0, 0], [0, 0]])), [[0, -0.5], [-0.5, 0]])
    assert np.allclose(c_tensor(np.eye(2)), 0.0)


# interpolators ----------------------------------------------------------------------------
def test_devgrad_constant_field(cube):
    cell = LocalCell(cube, 0, 1)
    c = np.array([0.3, -1.2, 2.0])
    frame = cell.cache.frame("cell", 0)
    v = PolyBasis(frame, 0, c[None, None])
    dofs = interpolate_devgrad(cell, v)[:, 0]
    lay = cell.layout("devgrad")
    for b in lay.blocks:
        if b.name == "v_V":
            assert np.allclose(dofs[b.slice], c)
        if b.name in ("G_F", "G_E", "G_V"):
            assert np.allclose(dofs[b.slice], 0, atol=1e-13)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_rt1_in_devgrad_kernel(k, elements):
    for m in elements.values():
        cell = LocalCell(m, 0, k)
        out = op_uDG(cell).matrix @ interpolate_devgrad(cell, rt1_basis(cell))
        assert np.abs(out).max() < 1e-10


def test_symcurl_zero_field(cube):
    cell = LocalCell(cube, 0, 1)
    zero = _const(cell, np.zeros((3, 3)))
    assert np.abs(interpolate_symcurl(cell, zero)).max() == 0.0


@pytest.mark.parametrize("k", [0, 1])
def test_devgrad_then_symcurl(k, elements):
    for m in elements.values():
        cell = LocalCell(m, 0, k)
        v = _family(cell, k + 2, 3, seed=k, vshape=(3,))
        dg = grad(v).map(lambda c: c - np.trace(c, axis1=-2, axis2=-1)[..., None, None] * np.eye(3) / 3)
        lhs = op_uDG(cell).matrix @ interpolate_devgrad(cell, v)
        rhs = interpolate_symcurl(cell, dg)
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(lhs)


def test_constant_symmetric_field_has_zero_DD(elements):
    mat = np.array([[1.0, 0.2, -0.4], [0.2, 3.0, 0.5], [-0.4, 0.5, -1.0]])
    for m in elements.values():
        for k in (0, 1, 2):
            cell = LocalCell(m, 0, k)
            out = op_DD(cell).matrix @ interpolate_divdiv(cell, _const(cell, mat))
            assert np.abs(out).max() < 1e-11


@pytest.mark.parametrize("k", [0, 1, 2])
def test_DD_commutes(k, elements):
    for m in elements.values():
        cell = LocalCell(m, 0, k)
        ups = _family(cell, k + 2, 4, seed=10 + k, kind="sym")
        crule = cell.rule("cell")
        ref = inner(cell.cell_basis(k).eval(crule.points), div(div(ups)).eval(crule.points), crule.weights)
        lhs = op_DD(cell).matrix @ interpolate_divdiv(cell, ups)
        assert np.linalg.norm(lhs - ref) <= 1e-10 * np.linalg.norm(ref)


def test_DD_rank_on_cube_k2(cube):
    d = op_DD(LocalCell(cube, 0, 2)).matrix
    assert np.linalg.matrix_rank(d, tol=1e-10 * np.linalg.norm(d, 2)) == 10


@pytest.mark.parametrize("k", [0, 1, 2])
def test_sequence_products_vanish(k, elements):
    rng = np.random.default_rng(k)
    for m in elements.values():
        cell = LocalCell(m, 0, k)
        g, s, d = op_uDG(cell).matrix, op_uSC(cell).matrix, op_DD(cell).matrix
        x = rng.standard_normal(g.shape[1])
        y = rng.standard_normal(s.shape[1])
        assert np.linalg.norm(s @ g @ x) <= 1e-10 * np.linalg.norm(x)
        assert np.linalg.norm(d @ s @ y) <= 1e-10 * np.linalg.norm(y)


# gamma and the potential -------------------------------------------------------------------
def test_gamma_of_constant(elements):
    mat = np.array([[2.0, 0.1, 0.3], [0.1, -1.0, 0.7], [0.3, 0.7, 0.5]])
    for m in elements.values():
        for k in (0, 1):
            cell = LocalCell(m, 0, k)
            dofs = interpolate_divdiv(cell, _const(cell, mat))[:, 0]
            for fi, f in enumerate(cell.faces):
                n = m.face_normal[f]
                gam = gamma_nn_F(cell, fi).matrix @ dofs
                val = gam @ cell.face_basis(f, k).eval(m.face_center[f][None])[:, 0]
                assert val == pytest.approx(n @ mat @ n, abs=1e-11)


def test_gamma_k0_uses_edge_data_only(cube):
    cell = LocalCell(cube, 0, 0)
    lay = cell.layout("divdiv")
    c = 1.7
    vec = interpolate_divdiv(cell, _const(cell, c * np.eye(3)))[:, 0]
    rng = np.random.default_rng(2)
    for b in lay.blocks:
        if b.entity != "edge":
            vec[b.slice] = rng.standard_normal(b.size)
    for fi, f in enumerate(cell.faces):
        gam = gamma_nn_F(cell, fi).matrix @ vec
        val = gam @ cell.face_basis(f, 0).eval(cube.face_center[f][None])[:, 0]
        assert val == pytest.approx(c)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_potential_reproduces_polynomials(k, elements):
    for m in elements.values():
        cell = LocalCell(m, 0, k)
        ups = _family(cell, k, 4, seed=k, kind="sym")
        psi = cell.cell_basis(k, "sym3")
        crule = cell.rule("cell")
        coef = inner(psi.eval(crule.points), ups.eval(crule.points), crule.weights)
        got = potential_TP(cell).matrix @ interpolate_divdiv(cell, ups)
        assert np.linalg.norm(got - coef) <= 1e-10 * np.linalg.norm(coef)


def test_potential_after_symcurl(elements):
    k = 1
    for m in elements.values():
        cell = LocalCell(m, 0, k)
        tau = _family(cell, k + 1, 3, seed=5, kind="dev")
        psi = cell.cell_basis(k, "sym3")
        crule = cell.rule("cell")
        ref = inner(psi.eval(crule.points), sym(curl3(tau)).eval(crule.points), crule.weights)
        got = potential_TP(cell).matrix @ op_uSC(cell).matrix @ interpolate_symcurl(cell, tau)
        assert np.linalg.norm(got - ref) <= 1e-10 * np.linalg.norm(ref)


def test_potential_of_zero(cube):
    cell = LocalCell(cube, 0, 1)
    tp = potential_TP(cell).matrix
    assert np.abs(tp @ np.zeros(tp.shape[1])).max() == 0.0


# products -------------------------------------------------------------------------------------
def test_component_norm_properties(cube):
    cell = LocalCell(cube, 0, 1)
    n = cell.layout("divdiv").total
    rng = np.random.default_rng(0)
    x = rng.standard_normal(n)
    assert tnorm(cell, np.zeros(n)) == 0.0
    assert tnorm(cell, x) > 0
    assert tnorm(cell, 2 * x) ** 2 == pytest.approx(4 * tnorm(cell, x) ** 2)
    assert np.allclose(component_product(cell), component_product(cell).T)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_product_is_consistent_and_positive(k, elements):
    for m in elements.values():
        cell = LocalCell(m, 0, k)
        tp = potential_TP(cell)
        a = local_product(cell, tp)
        assert np.allclose(a, a.T, atol=1e-13 * np.abs(a).max())
        assert np.linalg.eigvalsh(a).min() > 0
        ups = _family(cell, k, 3, seed=k, kind="sym")
        vals = interpolate_divdiv(cell, ups)
        stab = stabilization(cell, tp)
        assert np.abs(stab @ vals).max() <= 1e-10 * np.abs(stab).max() * np.abs(vals).max()
        crule = cell.rule("cell")
        e = ups.eval(crule.points)
        exact = inner(e, e, crule.weights)
        assert np.allclose(vals.T @ a @ vals, exact, rtol=1e-10, atol=1e-12 * np.abs(exact).max())


def test_local_matrices_shapes(cube):
    cell = LocalCell(cube, 0, 1)
    mats = local_matrices(cell)
    n = cell.layout("divdiv").total
    assert mats["DD"].shape == (4, n)
    assert mats["TP"].shape == (24, n)
    assert mats["A"].shape == (n, n)


def test_rigid_motion_invariance_of_ranks(cube):
    from ddrdivdiv.mesh import rotation_matrix

    rot = rotation_matrix(1)
    moved = cube.transformed(lambda x: x @ rot.T + np.array([3.0, -1.0, 0.5]))
    for k in (0, 1):
        a = op_DD(LocalCell(cube, 0, k)).matrix
        b = op_DD(LocalCell(moved, 0, k)).matrix
        sa = np.linalg.svd(a, compute_uv=False)
        sb = np.linalg.svd(b, compute_uv=False)
        assert np.allclose(sa, sb, rtol=1e-9)
