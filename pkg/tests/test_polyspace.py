import numpy as np
import pytest

from ddrdivdiv.mesh import Mesh, build_cartesian_mesh
from ddrdivdiv.polyspace.poly import (
    Frame,
    PolyBasis,
    adj2,
    apply_diff,
    curl2,
    curl3,
    div,
    dev,
    grad,
    hess,
    mul_x,
    rot2,
    trace,
)
from ddrdivdiv.polyspace.quadrature import quadrature_rule, segment_rule, simplex_rule
from ddrdivdiv.polyspace.spaces import (
    DimensionMismatch,
    decomposition_basis,
    dim_p,
    full_basis,
    gram,
    orthonormalize_svd,
    space_dim,
)
from ddrdivdiv.polyspace.traces import (
    BasisCache,
    edge_derivative,
    inner,
    l2_project,
    trace_to_edge,
    trace_to_face,
)
from ddrdivdiv.verify.checks import divF_of_A, polygon_frame, unit_square_face
from ddrdivdiv.verify.ipp import random_poly

ORIGIN3 = Frame(np.zeros(3), np.eye(3), 1.0)
ORIGIN2 = Frame(np.zeros(3), np.eye(3)[:2], 1.0)


def _square_rule(degree):
    pts = unit_square_face()
    frame, center = polygon_frame(pts)
    tris = np.stack([np.broadcast_to(center, pts.shape), pts, np.roll(pts, -1, 0)], axis=1)
    return frame, simplex_rule(tris, degree)


def _segment():
    mesh = Mesh.from_arrays(
        [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]],
        [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]], [[0, 1, 2, 3]])
    e = next(i for i, (a, b) in enumerate(mesh.edges) if {a, b} == {0, 1})
    return mesh, e


# quadrature ---------------------------------------------------------------------------------
def test_cube_rules():
    m = build_cartesian_mesh(1)
    assert quadrature_rule(m, "cell", 0, 0).measure == pytest.approx(1.0)
    r = quadrature_rule(m, "cell", 0, 3)
    x = r.points
    assert r.integrate(x[:, 0] ** 2 * x[:, 1]) == pytest.approx(1 / 6)


def test_tetrahedron_first_moment(tet):
    r = quadrature_rule(tet, "cell", 0, 1)
    assert r.integrate(r.points[:, 0]) == pytest.approx(1 / 24)


@pytest.mark.parametrize("degree", [2, 5, 9])
def test_monomial_exactness_on_cube(degree):
    m = build_cartesian_mesh(1)
    r = quadrature_rule(m, "cell", 0, degree)
    for a in range(degree + 1):
        b = degree - a
        got = r.integrate(r.points[:, 0] ** a * r.points[:, 2] ** b)
        assert got == pytest.approx(1 / ((a + 1) * (b + 1)), rel=1e-12)


def test_face_rule_area(elements):
    for m in elements.values():
        for f in range(m.n_faces):
            assert quadrature_rule(m, "face", f, 2).measure == pytest.approx(m.face_area[f])


def test_bad_rule_requests(cube):
    with pytest.raises(ValueError):
        quadrature_rule(cube, "cell", 0, -1)
    with pytest.raises(ValueError):
        quadrature_rule(cube, "ridge", 0, 2)


# projections -------------------------------------------------------------------------------------
def test_edge_projections():
    mesh, e = _segment()
    cache = BasisCache(mesh, 6)
    rule = cache.rule("edge", e)
    x = rule.points[:, 0]
    p0 = cache.full("edge", e, 0)
    c = l2_project(x[None], p0, rule)
    val = (c.T @ p0.eval(rule.points[:1]))[0, 0]
    assert val == pytest.approx(0.5)

    p1 = cache.full("edge", e, 1)
    c = l2_project((x**2)[None], p1, rule)
    probe = np.array([[0.0, 0, 0], [0.3, 0, 0], [1.0, 0, 0]])
    got = (c.T @ p1.eval(probe))[0]
    assert np.allclose(got, probe[:, 0] - 1 / 6, atol=1e-13)


def test_projection_idempotent():
    frame, rule = _square_rule(8)
    basis = full_basis(frame, 3, rule)
    f = random_poly(frame, 3, np.random.default_rng(1))
    samples = f.eval(rule.points)
    coef = l2_project(samples, basis, rule)
    back = coef.T @ basis.eval(rule.points)
    assert np.linalg.norm(back - samples) <= 1e-12 * np.linalg.norm(samples)


# bases and dimensions ----------------------------------------------------------------------
@pytest.mark.parametrize("ell", range(4))
def test_full_basis_orthonormal(ell, cube):
    r = quadrature_rule(cube, "cell", 0, 2 * ell + 2)
    frame = Frame.cell(cube.cell_center[0], cube.cell_diameter[0])
    for cod in ("scalar", "vec3", "sym3"):
        b = full_basis(frame, ell, r, cod)
        assert np.allclose(gram(b, r), np.eye(len(b)), atol=1e-11)


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_face_space_dimensions(ell):
    frame, rule = _square_rule(2 * ell + 4)
    assert space_dim("CGoly", ell) == ell * ell + 5 * ell + 4
    assert space_dim("cCGoly", ell) == ell * ell + ell
    for kind in ("Roly", "cRoly", "CGoly", "cCGoly", "RT", "CGtrim"):
        assert len(decomposition_basis(kind, frame, ell, rule)) == space_dim(kind, ell)


@pytest.mark.parametrize("ell", [0, 1, 2])
def test_cell_space_dimensions(ell, cube):
    r = quadrature_rule(cube, "cell", 0, 2 * ell + 6)
    frame = Frame.cell(cube.cell_center[0], cube.cell_diameter[0])
    for kind in ("SRoly", "cSRoly", "Holy", "cHoly", "SRtrim", "Htrim"):
        assert len(decomposition_basis(kind, frame, ell, r)) == space_dim(kind, ell)


def test_trivial_trimmed_space():
    assert space_dim("Htrim", 0) == 0
    assert space_dim("cCGoly", 0) == 0


def test_complement_pairs_fill_full_space():
    for ell in range(4):
        assert space_dim("Roly", ell) + space_dim("cRoly", ell) == 2 * dim_p(ell, 2)
        assert space_dim("Holy", ell) + space_dim("cHoly", ell) == 6 * dim_p(ell, 3)


def test_rank_deficient_span_is_reported():
    frame, rule = _square_rule(4)
    b = full_basis(frame, 1, rule)
    doubled = PolyBasis(frame, b.degree, np.concatenate([b.coeffs, b.coeffs]))
    with pytest.raises(DimensionMismatch):
        orthonormalize_svd(doubled, rule, expected=6)


def test_wrong_entity_dimension():
    frame, rule = _square_rule(4)
    with pytest.raises(ValueError):
        decomposition_basis("Holy", frame, 1, rule)


def test_holy_is_hessian_image(cube):
    r = quadrature_rule(cube, "cell", 0, 8)
    frame = Frame.cell(cube.cell_center[0], cube.cell_diameter[0])
    h = decomposition_basis("Holy", frame, 1, r)
    # every Holy^1 member is a Hessian of a cubic
    target = hess(PolyBasis.monomials(frame, 3))
    span = target.eval(r.points).reshape(len(target), -1)
    vals = h.eval(r.points).reshape(len(h), -1)
    coef, *_ = np.linalg.lstsq(span.T, vals.T, rcond=None)
    assert np.abs(span.T @ coef - vals.T).max() < 1e-10


# differential operators ------------------------------------------------------------------------
def test_A_matrix_and_its_divergence():
    p = PolyBasis(ORIGIN2, 0, np.array([[[1.0, 0.0]]]))
    outer = mul_x(p)
    a = PolyBasis(ORIGIN2, outer.degree, outer.coeffs - adj2(outer).coeffs)
    x = np.array([[0.3, -0.7, 0.0]])
    val = a.eval(x)[0, 0]
    assert np.allclose(val, [[0.3, 2 * -0.7], [0.0, -0.3]])
    assert np.allclose(divF_of_A(1.0, 0.0, x)[0], [3.0, 0.0], atol=1e-12)


def test_dev_identity_vanishes():
    ident = PolyBasis(ORIGIN3, 0, np.eye(3)[None, None])
    assert np.abs(dev(ident).coeffs).max() == 0.0


def test_hessian_of_affine_vanishes():
    aff = PolyBasis.monomials(ORIGIN3, 1)
    assert np.abs(hess(aff).coeffs).max() < 1e-14


@pytest.mark.parametrize("seed", range(5))
def test_complex_identities_random(seed):
    rng = np.random.default_rng(seed)
    q = random_poly(ORIGIN3, 4, rng)
    v = random_poly(ORIGIN3, 4, rng, (3,))
    m = random_poly(ORIGIN3, 4, rng, (3, 3))
    assert np.abs(curl3(grad(q)).coeffs).max() < 1e-12
    assert np.abs(div(curl3(v)).coeffs).max() < 1e-12
    # row-wise CURL of a gradient field and div of row-wise CURL
    assert np.abs(curl3(grad(v)).coeffs).max() < 1e-12
    assert np.abs(div(curl3(m)).coeffs).max() < 1e-12
    f = random_poly(ORIGIN2, 3, rng)
    assert np.abs(div(curl2(f)).coeffs).max() < 1e-12
    assert np.abs(rot2(grad(f)).coeffs).max() < 1e-12


def test_trace_of_hessian_is_laplacian():
    x = np.random.default_rng(0).random((5, 3))
    u = PolyBasis.monomials(ORIGIN3, 2)[4]  # x^2 in graded order
    lap = trace(hess(u)).eval(x)
    assert np.allclose(lap, np.full_like(lap, lap[0, 0]))


def test_apply_diff_dispatch():
    q = PolyBasis.monomials(ORIGIN3, 2)
    assert np.allclose(apply_diff("grad", q).coeffs, grad(q).coeffs)
    with pytest.raises(ValueError):
        apply_diff("laplacian", q)


def test_derivative_matches_finite_differences():
    rng = np.random.default_rng(7)
    frame = Frame(np.array([0.2, -0.1, 0.4]), np.eye(3), 0.7)
    p = random_poly(frame, 5, rng)
    x = rng.random((4, 3))
    eps = 1e-6
    g = grad(p).eval(x)[0]
    for a in range(3):
        d = np.zeros(3)
        d[a] = eps
        fd = (p.eval(x + d) - p.eval(x - d))[0] / (2 * eps)
        assert np.allclose(g[:, a], fd, atol=1e-6)


# traces --------------------------------------------------------------------------------------------
def test_constant_matrix_traces(cube):
    rng = np.random.default_rng(0)
    mat = rng.standard_normal((3, 3))
    mat = mat + mat.T
    const = PolyBasis(Frame.cell(cube.cell_center[0], 1.0), 0, mat[None, None])
    cache = BasisCache(cube, 4)
    for f in range(cube.n_faces):
        target = cache.full("face", f, 0)
        c, res = trace_to_face(const, cube, f, "nn", target)
        n = cube.face_normal[f]
        assert res < 1e-12
        assert (c.T @ target.eval(cube.face_center[f][None]))[0, 0] == pytest.approx(n @ mat @ n)
    for e in range(cube.n_edges):
        target = cache.full("edge", e, 0, "mat2")
        c, res = trace_to_edge(const, cube, e, "nn", target)
        nrm = cube.edge_normals[e]
        got = np.tensordot(c.T, target.eval(cube.edge_midpoint[e][None]), axes=([1], [0]))
        assert res < 1e-12
        assert np.allclose(got[0, 0], nrm @ mat @ nrm.T)


def test_linear_function_on_edge():
    mesh, e = _segment()
    cache = BasisCache(mesh, 4)
    p = PolyBasis(ORIGIN3, 1, np.array([[0.0, 1.0, 0.0, 0.0]]))  # x
    target = cache.full("edge", e, 1)
    rule = cache.rule("edge", e)
    c = l2_project(p.eval(rule.points), target, rule)
    ends = mesh.vertices[mesh.edges[e]]
    vals = (c.T @ target.eval(ends))[0]
    assert np.allclose(np.sort(vals), [0.0, 1.0])


def test_edge_nn_of_gradient_is_path_independent(tet):
    rng = np.random.default_rng(3)
    frame = Frame.cell(tet.cell_center[0], tet.cell_diameter[0])
    v = random_poly(frame, 2, rng, (3,))
    cache = BasisCache(tet, 6)
    eps = 1e-6
    for e in range(tet.n_edges):
        target = cache.full("edge", e, 1, "mat2")
        direct, _ = trace_to_edge(grad(v), tet, e, "nn", target)
        rule = cache.rule("edge", e)
        nrm = tet.edge_normals[e]
        # contract v with n_Ei first, then differentiate along n_Ej by central differences
        staged = np.empty((1, len(rule), 2, 2))
        for j in range(2):
            step = eps * nrm[j]
            dv = (v.eval(rule.points + step) - v.eval(rule.points - step))[0] / (2 * eps)
            staged[0, :, :, j] = dv @ nrm.T
        coef = l2_project(staged, target, rule)
        assert np.allclose(direct, coef, atol=1e-7)


def test_srtrim_tangential_trace_lies_in_p0(cube):
    r = quadrature_rule(cube, "cell", 0, 8)
    frame = Frame.cell(cube.cell_center[0], cube.cell_diameter[0])
    sr = decomposition_basis("SRtrim", frame, 1, r)
    cache = BasisCache(cube, 6)
    for f in range(cube.n_faces):
        n, t = cube.face_normal[f], cube.face_tangents[f]
        rule = cache.rule("face", f)
        # tangential part of sigma n_F
        tn = np.einsum("fqij,ai,j->fqa", sr.eval(rule.points), t, n)
        target = cache.full("face", f, 0, "vec2")
        coef = l2_project(tn, target, rule)
        approx = np.tensordot(coef.T, target.eval(rule.points), axes=([1], [0]))
        assert np.abs(approx - tn).max() < 1e-10


def test_htrim_trace_lies_in_cgtrim(cube):
    r = quadrature_rule(cube, "cell", 0, 8)
    frame = Frame.cell(cube.cell_center[0], cube.cell_diameter[0])
    ht = decomposition_basis("Htrim", frame, 1, r)
    cache = BasisCache(cube, 6)
    for f in range(cube.n_faces):
        n, t = cube.face_normal[f], cube.face_tangents[f]
        rule = cache.rule("face", f)
        # tangential block of sigma x n_F, in face coordinates
        vals = ht.eval(rule.points)
        cross = np.cross(vals, n[None, None, None, :])
        tt = np.einsum("fqij,ai,bj->fqab", cross, t, t)
        target = cache.space("face", f, "CGtrim", 1)
        coef = l2_project(tt, target, rule)
        approx = np.tensordot(coef.T, target.eval(rule.points), axes=([1], [0]))
        assert np.abs(approx - tt).max() < 1e-10


# edge derivative -----------------------------------------------------------------------------------
def test_edge_derivative_examples():
    mesh, e = _segment()
    a, b = mesh.edges[e]
    cache = BasisCache(mesh, 6)
    rule = cache.rule("edge", e)
    sgn = 1.0 if mesh.vertices[b][0] > mesh.vertices[a][0] else -1.0
    xa, xb = mesh.vertices[a][0], mesh.vertices[b][0]
    for ell in (1, 2):
        src = cache.full("edge", e, ell - 1)
        ve = l2_project(rule.points[None, :, 0], src, rule)[:, 0]
        d = edge_derivative(mesh, e, ell, xa, xb, ve, cache)
        vals = d @ cache.full("edge", e, ell).eval(rule.points)
        assert np.allclose(vals, sgn, atol=1e-12)

    src = cache.full("edge", e, 0)
    ve = l2_project(np.full((1, len(rule)), 2.5), src, rule)[:, 0]
    d = edge_derivative(mesh, e, 1, 2.5, 2.5, ve, cache)
    assert np.abs(d).max() < 1e-13

    x = rule.points[:, 0]
    ve = l2_project((x**2)[None], src, rule)[:, 0]
    assert (ve @ src.eval(rule.points[:1]))[0] == pytest.approx(1 / 3)
    d = edge_derivative(mesh, e, 1, xa**2, xb**2, ve, cache)
    vals = d @ cache.full("edge", e, 1).eval(rule.points)
    assert np.allclose(vals, sgn * 2 * x, atol=1e-12)


def test_edge_derivative_rejects_negative_degree():
    mesh, e = _segment()
    with pytest.raises(ValueError):
        edge_derivative(mesh, e, -1, 0.0, 0.0, [])


def test_inner_shapes():
    w = np.array([0.5, 0.5])
    a = np.ones((2, 2, 3))
    b = np.ones((4, 2, 3))
    assert inner(a, b, w).shape == (2, 4)
    assert np.allclose(inner(a, b, w), 3.0)
    _ = segment_rule(np.zeros(3), np.ones(3), 3)
