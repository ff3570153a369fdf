import csv
import json

import pytest

from ddrdivdiv.cli import run
from ddrdivdiv.mesh import read_mesh


def _json(capsys, argv):
    code = run(argv)
    return code, json.loads(capsys.readouterr().out)


def test_check_cube_degree_one(capsys):
    code, rep = _json(capsys, ["check", "--element", "cube", "--degree", "1", "--trials", "3", "--json"])
    assert code == 0
    assert rep["passed"] and rep["checks"]["exactness"]["passed"]


def test_check_degree_zero_notes_defect(capsys):
    code, rep = _json(capsys, ["check", "--element", "tet", "--degree", "0", "--trials", "3", "--json"])
    assert code == 0
    assert any("expected (k=0)" in n for n in rep["checks"]["exactness"]["notes"])


def test_check_plain_output(capsys):
    assert run(["check", "--element", "tet", "--degree", "0", "--trials", "2"]) == 0
    out = capsys.readouterr().out
    assert "exactness" in out and "FAIL" not in out


def test_check_json_is_seed_deterministic(capsys):
    argv = ["check", "--element", "hex", "--degree", "1", "--trials", "2", "--seed", "7", "--json"]
    run(argv)
    first = capsys.readouterr().out
    run(argv)
    assert capsys.readouterr().out == first


@pytest.mark.parametrize("argv", [
    [],
    ["check", "--degree", "-1"],
    ["check", "--element", "octahedron"],
    ["check", "--element", "file"],
    ["solve", "--degree", "0"],
    ["solve", "--cube", "0"],
    ["convergence", "--degrees", "2..1"],
    ["convergence", "--sizes", "a,b"],
    ["convergence", "--family", "nowhere.json"],
    ["gen-mesh", "--cube", "2"],
])
def test_bad_usage_exits_two(argv, capsys):
    assert run(argv) == 2
    assert capsys.readouterr().err


def test_gen_mesh_then_solve(tmp_path, capsys):
    path = tmp_path / "cube1.json"
    assert run(["gen-mesh", "--cube", "1", "--out", str(path)]) == 0
    assert read_mesh(path).n_cells == 1
    out = tmp_path / "solve.csv"
    assert run(["solve", "--mesh", str(path), "--degree", "0", "--out", str(out)]) == 0
    assert "err_total=" in capsys.readouterr().out
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["h", "ndof", "err_sigma", "err_u", "err_total"]
    assert len(rows) == 2


def test_convergence_csv_and_determinism(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.csv"
        assert run(["convergence", "--family", "cube", "--degrees", "0", "--sizes", "1,2",
                    "--out", str(out)]) == 0
        outs.append(out)
    assert "k=0 slope=" in capsys.readouterr().out
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert (tmp_path / "a_cube_k0.csv").is_file()
    with open(outs[0]) as fh:
        assert len(list(csv.reader(fh))) == 3


def test_convergence_from_files(tmp_path, capsys):
    paths = []
    for n in (1, 2):
        p = tmp_path / f"c{n}.json"
        run(["gen-mesh", "--cube", str(n), "--out", str(p)])
        paths.append(str(p))
    out = tmp_path / "f.csv"
    assert run(["convergence", "--family", ",".join(paths), "--degrees", "0", "--out", str(out)]) == 0
    assert (tmp_path / "f_file_k0.csv").is_file()
