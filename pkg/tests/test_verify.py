import numpy as np
import pytest

from ddrdivdiv.ddr.cell import LocalCell
from ddrdivdiv.mesh import build_cartesian_mesh
from ddrdivdiv.polyspace.spaces import DimensionMismatch
from ddrdivdiv.verify import checks
from ddrdivdiv.verify.checks import (
    check_complex,
    check_dimensions,
    check_divF_isomorphism,
    check_exactness,
    check_rotation_invariance,
    divF_of_A,
    kernel_basis,
    numerical_rank,
    random_pentagon,
    unit_square_face,
)
from ddrdivdiv.verify.ipp import IDENTITIES, check_ipp
from ddrdivdiv.verify.suite import element_mesh, failed_checks, run_suite


def test_numerical_rank_and_kernel():
    m = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
    assert numerical_rank(m) == 1
    ker = kernel_basis(m)
    assert ker.shape == (3, 2)
    assert np.abs(m @ ker).max() < 1e-12
    assert numerical_rank(np.zeros((0, 3))) == 0
    assert numerical_rank(np.zeros((2, 2))) == 0


def test_complex_on_cube_k0(cube):
    rep = check_complex(LocalCell(cube, 0, 0))
    assert rep.passed
    assert rep.sc_dg <= 1e-10 and rep.dd_sc <= 1e-10


def test_complex_on_tet_k2(tet):
    rep = check_complex(LocalCell(tet, 0, 2), trials=5)
    assert rep.passed and rep.dd_sc_matrix <= 1e-10


def test_exactness_cube_k1(cube):
    rep = check_exactness(LocalCell(cube, 0, 1))
    assert rep.passed
    assert rep.dims["divdiv"] == 188
    assert rep.ker_dg == 4
    assert rep.ker_sc_minus_rank_dg == 0 and rep.ker_dd_minus_rank_sc == 0
    assert rep.rank_dd == 4


def test_exactness_tet_k1(tet):
    rep = check_exactness(LocalCell(tet, 0, 1))
    assert rep.passed and rep.ker_dg == 4 and rep.rt_residual <= 1e-9


def test_k0_defect_is_three(elements):
    for m in elements.values():
        rep = check_exactness(LocalCell(m, 0, 0))
        assert rep.ker_dd_minus_rank_sc == 3
        assert rep.passed
        assert any("expected (k=0)" in note for note in rep.notes)


def test_exactness_report_is_plain_data(cube):
    d = check_exactness(LocalCell(cube, 0, 1)).to_dict()
    assert set(d) >= {"rank_dg", "rank_sc", "rank_dd", "rt_residual", "passed", "dims"}


def test_dimension_examples(cube, tet):
    out = check_dimensions(LocalCell(cube, 0, 1))
    assert out["devgrad"]["constructed"] == 291
    out = check_dimensions(LocalCell(tet, 0, 0))
    assert out["divdiv"]["formula_uncorrected"] == 57
    assert out["divdiv"]["constructed"] == 60
    assert check_dimensions(LocalCell(cube, 0, 2))["P"]["constructed"] == 10


def test_dimension_mismatch_is_fatal(cube, monkeypatch):
    monkeypatch.setattr(checks, "closed_form_dim", lambda *a, **kw: -1)
    with pytest.raises(DimensionMismatch, match="devgrad"):
        check_dimensions(LocalCell(cube, 0, 1))


@pytest.mark.parametrize("ell", [1, 2, 3, 4])
def test_face_divergence_isomorphism(ell):
    for pts in (unit_square_face(), random_pentagon(0), random_pentagon(5)):
        out = check_divF_isomorphism(pts, ell)
        assert out["shape"] == (ell * ell + ell, ell * ell + ell)
        assert out["passed"] and out["ratio"] > 1e-8


def test_face_divergence_trivial_case():
    assert check_divF_isomorphism(unit_square_face(), 0)["passed"]


def test_divF_A_identity():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((6, 3))
    assert np.abs(divF_of_A(1.0, 0.0, x) - np.array([3.0, 0.0])).max() <= 1e-12
    assert np.abs(divF_of_A(0.0, 1.0, x) - np.array([0.0, 3.0])).max() <= 1e-12


@pytest.mark.parametrize("name", ["cube", "tet", "hex"])
def test_ipp_identities(name):
    mesh = element_mesh(name)
    for degree in (1, 3):
        out = check_ipp(mesh, degree=degree, seed=degree, trials=2)
        assert set(out) == set(IDENTITIES)
        assert max(out.values()) <= 1e-10


def test_ipp_on_interior_cell():
    mesh = build_cartesian_mesh(2)
    out = check_ipp(mesh, t=5, degree=2)
    assert max(out.values()) <= 1e-10


def test_rotation_invariance(cube, tet):
    for mesh in (cube, tet):
        assert check_rotation_invariance(mesh, 1)["passed"]


def test_suite_reports_and_is_deterministic(tet):
    a = run_suite(tet, 1, seed=3, trials=4)
    b = run_suite(tet, 1, seed=3, trials=4)
    assert failed_checks(a) == []
    assert a == b


def test_element_mesh_names(tmp_path):
    with pytest.raises(ValueError):
        element_mesh("octahedron")
    with pytest.raises(ValueError):
        element_mesh("file")
    assert element_mesh("voronoi").n_faces == 14
