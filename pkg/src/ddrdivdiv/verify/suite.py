"""Named test elements and a per-element battery of checks."""

from __future__ import annotations

from importlib import resources

from ..ddr.cell import LocalCell
from ..mesh import build_cartesian_mesh, load_mesh, perturbed_hexahedron, read_mesh, reference_tetrahedron
from ..polyspace.spaces import DimensionMismatch
from .checks import TOL, check_commutation, check_complex, check_consistency, check_dimensions, check_exactness
from .ipp import check_ipp

ELEMENTS = ("cube", "tet", "hex", "voronoi")


def voronoi_cell():
    text = resources.files("ddrdivdiv").joinpath("data/voronoi_cell.json").read_text()
    return load_mesh(text)


def element_mesh(name: str, path=None):
    """Single-element mesh by name; ``"file"`` reads ``path``."""
    if name == "cube":
        return build_cartesian_mesh(1)
    if name == "tet":
        return reference_tetrahedron()
    if name == "hex":
        return perturbed_hexahedron()
    if name == "voronoi":
        return voronoi_cell()
    if name == "file":
        if path is None:
            raise ValueError("element 'file' needs a mesh path")
        return read_mesh(path)
    raise ValueError(f"unknown element {name!r}")


def run_suite(mesh, k: int, seed: int = 0, trials: int = 20, t: int = 0) -> dict:
    """Every check on cell ``t``; each entry carries a ``passed`` flag."""
    cell = LocalCell(mesh, t, k)
    out = {}
    try:
        out["dimensions"] = dict(check_dimensions(cell), passed=True)
    except DimensionMismatch as exc:
        out["dimensions"] = {"error": str(exc), "passed": False}

    cx = check_complex(cell, trials, seed)
    out["complex"] = {"sc_dg": cx.sc_dg, "dd_sc": cx.dd_sc, "passed": cx.passed}

    ex = check_exactness(cell)
    out["exactness"] = ex.to_dict()

    com = check_commutation(cell, trials, seed)
    out["commutation"] = dict(com, passed=bool(max(com.values()) <= TOL))
    con = check_consistency(cell, trials, seed)
    out["consistency"] = dict(con, passed=bool(max(con.values()) <= TOL))

    ipp = check_ipp(mesh, t, degree=k + 2, seed=seed)
    out["ipp"] = dict(ipp, passed=bool(max(ipp.values()) <= 1e-10))
    return out


def failed_checks(report: dict) -> list:
    return [name for name, entry in report.items() if not entry["passed"]]
