import json
import re
import subprocess
import sys
from pathlib import Path

import pytest

from critsos.certify import load_certificate, verify_certificate
from critsos.cli import (
    EXIT_INPUT, EXIT_OK, EXIT_UNBOUNDED, HierarchyResult, HierarchyRow, ProblemFileError, load_problem,
    main, parse_problem_text, report, run_hierarchy,
)
from critsos.critical import Problem
from critsos.sdpsolve import UNBOUNDED_DIAGNOSTIC, import_sdpa

FIXTURES = Path(__file__).parent / "fixtures"


def test_load_paraboloid_fixture():
    pf = load_problem(FIXTURES / "paraboloid.yaml")
    assert pf.problem.n == 3 and pf.problem.s == 1
    assert pf.options["dmin"] == 1 and pf.options["minimizers"] == [[0.0, 0.0, 0.0]]


def test_unknown_identifier_names_it_with_position():
    with pytest.raises(ProblemFileError) as info:
        load_problem(FIXTURES / "unknown_identifier.yaml")
    err = info.value
    assert "'w'" in str(err)
    # line 4 is '  - "1 - x^2 - w^2"'; w is at column 16
    assert (err.line, err.column) == (4, 16)


@pytest.mark.parametrize("text, fragment", [
    ("vars: [x, x]\nobjective: x\n", "duplicate variable"),
    ("vars: [x]\n", "missing required key 'objective'"),
    ("vars: [x]\nobjective: x\nextra: 1\n", "unknown key"),
    ("vars: [x]\nobjective: [x\n", "YAML syntax error"),
    ("vars: [x]\nobjective: x^-1\n", "negative exponent"),
    ("vars: [x]\nobjective: x\noptions: {mode: lasso}\n", "mode must be"),
    ("vars: [x]\nobjective: x\noptions: {minimizers: [[1, 2]]}\n", "coordinates"),
    ("", "empty problem file"),
])
def test_problem_file_errors(text, fragment):
    with pytest.raises(ProblemFileError) as info:
        parse_problem_text(text)
    assert fragment in str(info.value)


def test_missing_file():
    with pytest.raises(ProblemFileError):
        load_problem(FIXTURES / "does_not_exist.yaml")


def test_paraboloid_hierarchy(paraboloid):
    res = run_hierarchy(paraboloid, d_min=1, d_max=2)
    assert res.rows[0].status == "optimal"
    assert abs(res.rows[0].bound) <= 1e-6
    assert res.stabilized and res.stabilized_at == 1
    assert res.rows[0].certificate_passed


def test_marshall_hierarchy(marshall):
    res = run_hierarchy(marshall, d_min=2, d_max=4)
    assert any(r.bound is not None and abs(r.bound) <= 1e-6 for r in res.rows)
    assert res.monotone


def test_unattained_infimum_every_row_unbounded():
    res = run_hierarchy(Problem.from_strings("x", "x"), d_min=1, d_max=3)
    assert [r.status for r in res.rows] == ["unbounded"] * 3
    assert len(res.diagnostics) == 3
    assert all(UNBOUNDED_DIAGNOSTIC in r.message for r in res.rows)


def test_hierarchy_argument_checks(motzkin):
    with pytest.raises(ValueError):
        run_hierarchy(motzkin, d_min=2)
    with pytest.raises(ValueError):
        run_hierarchy(motzkin, d_min=4, d_max=3)
    with pytest.raises(ValueError):
        run_hierarchy(motzkin, mode="lasso")


def test_default_range(marshall):
    res = run_hierarchy(marshall, stop_early=False)
    assert [r.d for r in res.rows] == [2, 3, 4, 5, 6]


def _row(d, bound):
    return HierarchyRow(d, "optimal", bound, 0.01, [3], 2, 5)


def test_table_report_two_rows():
    res = HierarchyResult("critical", [_row(1, -0.5), _row(2, -0.25)], 1e-6)
    text = report(res)
    lines = text.splitlines()
    assert lines[0].split()[:3] == ["d", "status", "f*_d"]
    col = [float(ln.split()[2]) for ln in lines[2:4]]
    assert col == sorted(col)
    assert "monotone: yes" in text


def test_structured_report_is_complete(paraboloid):
    res = run_hierarchy(paraboloid, d_min=1, d_max=2)
    doc = json.loads(report(res, "structured"))
    assert set(doc) >= {"mode", "rows", "stabilized", "stabilized_at", "monotone", "diagnostics", "conv_tol"}
    row = doc["rows"][0]
    assert set(row) >= {"d", "status", "bound", "solve_time", "block_dims", "certificate"}
    cert = load_certificate(row["certificate"])
    assert verify_certificate(paraboloid, cert).passed


def test_structured_report_is_deterministic(paraboloid):
    def strip(doc):
        for r in doc["rows"]:
            r.pop("solve_time")
        return doc

    a = strip(json.loads(report(run_hierarchy(paraboloid, d_min=1, d_max=2), "structured")))
    b = strip(json.loads(report(run_hierarchy(paraboloid, d_min=1, d_max=2), "structured")))
    assert a == b


def test_main_end_to_end(tmp_path, capsys):
    cert_path = tmp_path / "cert.yaml"
    code = main([str(FIXTURES / "paraboloid.yaml"), "--export-sdpa", str(tmp_path / "sdpa"),
                 "--certificate", str(cert_path), "--format", "structured"])
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["bhc"][0]["verdict"] == "holds"
    files = sorted((tmp_path / "sdpa").glob("*.dat-s"))
    assert [f.name for f in files] == ["relaxation_d1.dat-s", "relaxation_d2.dat-s"]
    assert import_sdpa(files[0].read_text()).block_dims == [4, 1]
    pf = load_problem(FIXTURES / "paraboloid.yaml")
    assert verify_certificate(pf.problem, load_certificate(cert_path.read_text())).passed


def test_main_check_bhc_flag(capsys):
    code = main([str(FIXTURES / "marshall.yaml"), "--dmax", "3", "--check-bhc", "0", "--check-bhc", "-1"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "BHC at (0): holds" in out
    assert "BHC at (-1): inconclusive" in out  # f(-1) = 1 is not the minimum


def test_main_exit_codes(capsys):
    assert main([str(FIXTURES / "linear.yaml")]) == EXIT_UNBOUNDED
    assert UNBOUNDED_DIAGNOSTIC in capsys.readouterr().out
    assert main([str(FIXTURES / "unknown_identifier.yaml")]) == EXIT_INPUT
    assert "unknown identifier 'w'" in capsys.readouterr().err


def test_environment_overrides(monkeypatch, capsys):
    monkeypatch.setenv("CRITSOS_DMAX", "1")
    monkeypatch.setenv("CRITSOS_FORMAT", "structured")
    assert main([str(FIXTURES / "paraboloid.yaml")]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert [r["d"] for r in doc["rows"]] == [1]
    # a flag beats the environment
    assert main([str(FIXTURES / "paraboloid.yaml"), "--dmax", "2", "--format", "table"]) == EXIT_OK
    assert re.search(r"^2\s+optimal", capsys.readouterr().out, re.M)


def test_bad_environment_value(monkeypatch):
    monkeypatch.setenv("CRITSOS_DMAX", "two")
    assert main([str(FIXTURES / "paraboloid.yaml")]) == EXIT_INPUT


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "critsos", str(FIXTURES / "paraboloid.yaml")],
                         capture_output=True, text=True, check=False)
    assert out.returncode == 0
    assert "stabilized at d=1" in out.stdout
