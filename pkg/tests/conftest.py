import pytest

from ddrdivdiv.mesh import build_cartesian_mesh, perturbed_hexahedron, reference_tetrahedron
from ddrdivdiv.verify.suite import voronoi_cell


@pytest.fixture(scope="session")
def elements():
    return {
        "cube": build_cartesian_mesh(1),
        "tet": reference_tetrahedron(),
        "hex": perturbed_hexahedron(),
        "voronoi": voronoi_cell(),
    }


@pytest.fixture(scope="session")
def cube():
    return build_cartesian_mesh(1)


@pytest.fixture(scope="session")
def tet():
    return reference_tetrahedron()


CRITERIA = {}


@pytest.fixture
def criterion():
    """Record ``(number, passed, detail)`` for the acceptance summary."""
    def record(number, passed, detail=""):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
        CRITERIA[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
