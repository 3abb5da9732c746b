"""Command-line interface: golden-file output, exit codes, and flag handling.

The golden files under tests/golden/ were produced by the CLI itself and
hand-audited against closed-form solutions (see the fixture comments in
tests/data/).  Solver-backed goldens pin ``--kernel python`` so the bytes do
not depend on whether the compiled extension is present.
"""

import contextlib
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from coneprog import cli

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def run_cli(argv):
    """Invoke the CLI in-process; return (exit code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            code = cli.main([str(a) for a in argv])
        except SystemExit as exc:  # argparse usage failures
            code = exc.code if isinstance(exc.code, int) else 2
    return code, out.getvalue(), err.getvalue()


def golden(name):
    return (GOLDEN / name).read_text()


# ---------------------------------------------------------------------------
# golden-file comparisons (byte-exact)
# ---------------------------------------------------------------------------


def test_golden_parse_lasso():
    code, out, err = run_cli(["parse", DATA / "lasso.prob"])
    assert code == 0
    assert err == ""
    assert out == golden("lasso.parse.txt")


def test_parse_output_is_a_fixed_point(tmp_path):
    # Reformatting already-canonical text must reproduce it byte for byte.
    first = golden("lasso.parse.txt")
    reparsed = tmp_path / "canonical.prob"
    reparsed.write_text(first)
    code, out, _ = run_cli(["parse", reparsed])
    assert code == 0
    assert out == first


def test_golden_check_signed():
    code, out, _ = run_cli(["check", DATA / "sqsq.prob"])
    assert code == 0
    assert out == golden("sqsq.check.txt")


def test_golden_check_unsigned():
    code, out, _ = run_cli(["check", "--no-signs", DATA / "sqsq.prob"])
    assert code == 2
    assert out == golden("sqsq.check-unsigned.txt")


def test_golden_check_noncompliant():
    code, out, _ = run_cli(["check", DATA / "nondcp.prob"])
    assert code == 2
    assert out == golden("nondcp.check.txt")
    assert "offence:" in out


def test_golden_canon():
    code, out, _ = run_cli(["canon", DATA / "abs_eq.prob"])
    assert code == 0
    assert out == golden("abs_eq.canon.txt")
    # The dump fixture consumed by solve-cone is that same artifact.
    assert out == (DATA / "abs_eq.cone").read_text()


def test_golden_solve_text():
    code, out, _ = run_cli(["solve", DATA / "abs_eq.prob", "--kernel", "python"])
    assert code == 0
    assert out == golden("abs_eq.solve.txt")


def test_golden_solve_machine():
    code, out, _ = run_cli(
        ["solve", DATA / "abs_eq.prob", "--kernel", "python", "--format", "machine"]
    )
    assert code == 0
    assert out == golden("abs_eq.solve.json")
    report = json.loads(out)  # must be well-formed JSON
    assert report["status"] == "optimal"
    np.testing.assert_allclose(report["optval"], 1.0, rtol=1e-6)
    assert list(report["variables"]) == ["x"]
    assert isinstance(report["iterations"], int)
    assert set(report["residuals"]) == {"primal", "dual", "gap"}


def test_golden_solve_lasso():
    code, out, _ = run_cli(["solve", DATA / "lasso.prob", "--kernel", "python"])
    assert code == 0
    assert out == golden("lasso.solve.txt")


def test_golden_sweep_text():
    code, out, _ = run_cli(
        [
            "sweep", DATA / "lasso.prob", "--param", "gamma",
            "--values", "0.1,1,10",
            "--column", "norm1(x)",
            "--column", "sum_squares(A * x - b)",
            "--kernel", "python",
        ]
    )
    assert code == 0
    assert out == golden("lasso.sweep.txt")


def test_golden_sweep_machine():
    code, out, _ = run_cli(
        [
            "sweep", DATA / "lasso.prob", "--param", "gamma",
            "--values", "0.1,1,10",
            "--column", "norm1(x)",
            "--kernel", "python", "--format", "machine",
        ]
    )
    assert code == 0
    assert out == golden("lasso.sweep.json")
    report = json.loads(out)
    assert report["param"] == "gamma"
    assert [row["status"] for row in report["rows"]] == ["optimal"] * 3
    norms = [row["columns"]["norm1(x)"] for row in report["rows"]]
    assert norms[0] >= norms[1] >= norms[2] - 1e-9  # heavier penalty, smaller norm


def test_golden_solve_cone():
    code, out, _ = run_cli(["solve-cone", DATA / "abs_eq.cone", "--kernel", "python"])
    assert code == 0
    assert out == golden("abs_eq.solvecone.txt")


def test_module_invocation_matches_in_process():
    # `python -m coneprog.cli` is the documented no-install entry point.
    proc = subprocess.run(
        [sys.executable, "-m", "coneprog.cli", "parse", str(DATA / "lasso.prob")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout == golden("lasso.parse.txt")


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------


def test_exit_zero_for_conclusive_nonoptimal_statuses():
    code, out, _ = run_cli(["solve", DATA / "infeasible.prob", "--kernel", "python"])
    assert code == 0
    assert out.startswith("status: infeasible\n")
    code, out, _ = run_cli(["solve", DATA / "unbounded.prob", "--kernel", "python"])
    assert code == 0
    assert out.startswith("status: unbounded\n")


def test_exit_three_when_iteration_cap_hits():
    code, out, _ = run_cli(
        ["solve", DATA / "lasso.prob", "--kernel", "python", "--max-iter", "10"]
    )
    assert code == 3
    assert out.startswith("status: inaccurate\n")


def test_exit_two_for_missing_file():
    code, out, err = run_cli(["parse", DATA / "no_such_file.prob"])
    assert code == 2
    assert out == ""
    assert err.startswith("error:")


def test_exit_two_for_syntax_error_with_position(tmp_path):
    bad = tmp_path / "bad.prob"
    bad.write_text("var x\nminimize x +\n")
    code, _, err = run_cli(["parse", bad])
    assert code == 2
    assert err.startswith("error: 3:1:")  # row:col of the offending token


def test_exit_two_for_usage_errors():
    assert run_cli([])[0] == 2
    assert run_cli(["frobnicate", str(DATA / "lasso.prob")])[0] == 2
    assert run_cli(["solve"])[0] == 2
    assert run_cli(["solve", str(DATA / "lasso.prob"), "--kernel", "bogus"])[0] == 2


def test_sweep_requires_exactly_one_grid():
    base = ["sweep", str(DATA / "lasso.prob"), "--param", "gamma"]
    assert run_cli(base)[0] == 2  # neither
    both = base + ["--values", "1,2", "--logspace", "0", "1", "3"]
    assert run_cli(both)[0] == 2


def test_sweep_unknown_parameter_name():
    code, _, err = run_cli(
        ["sweep", DATA / "lasso.prob", "--param", "delta", "--values", "1,2"]
    )
    assert code == 2
    assert "delta" in err


def test_sweep_rejects_nonscalar_column():
    code, _, err = run_cli(
        [
            "sweep", DATA / "lasso.prob", "--param", "gamma",
            "--values", "1", "--column", "A * x",
        ]
    )
    assert code == 2
    assert "scalar" in err


def test_solve_param_override_errors():
    code, _, err = run_cli(["solve", DATA / "lasso.prob", "--param", "nope=1"])
    assert code == 2
    assert "nope" in err
    code, _, err = run_cli(["solve", DATA / "lasso.prob", "--param", "gamma=abc"])
    assert code == 2
    code, _, err = run_cli(["solve", DATA / "lasso.prob", "--param", "gamma"])
    assert code == 2  # missing '='


def test_solve_cone_rejects_malformed_dump(tmp_path):
    bad = tmp_path / "bad.cone"
    bad.write_text("cone-program v1\nvars 2\nc 0\n")  # c length != vars
    code, _, err = run_cli(["solve-cone", bad])
    assert code == 2
    assert err.startswith("error:")


def test_invalid_tolerance_rejected():
    code, _, err = run_cli(["solve", DATA / "lasso.prob", "--tol", "-1"])
    assert code == 2
    assert err.startswith("error:")


# ---------------------------------------------------------------------------
# flag behaviour
# ---------------------------------------------------------------------------


def test_solve_param_override_changes_answer():
    code, out, _ = run_cli(
        ["solve", DATA / "lasso.prob", "--kernel", "python", "--param", "gamma=10"]
    )
    assert code == 0
    assert "optval: 14.0400" in out


def test_negative_and_vector_param_overrides(tmp_path):
    prob = tmp_path / "shift.prob"
    prob.write_text(
        "var x[2]\nparam c\nminimize sum_squares(x - c)\ndata\n  c = 0\n"
    )
    code, out, _ = run_cli(
        ["solve", prob, "--kernel", "python", "--param", "c=-3"]
    )
    assert code == 0
    assert "x: -3.0000 -3.0000" in out


def test_sweep_parallel_matches_serial():
    argv = [
        "sweep", DATA / "lasso.prob", "--param", "gamma",
        "--logspace", "-1", "1", "7",
        "--column", "norm1(x)", "--kernel", "python",
    ]
    _, serial, _ = run_cli(argv + ["--jobs", "1"])
    code, parallel, _ = run_cli(argv + ["--jobs", "4"])
    assert code == 0
    assert parallel == serial


def test_sweep_missing_binding_fails_before_any_row(tmp_path):
    prob = tmp_path / "needs_two.prob"
    prob.write_text(
        "var x\nparam g nonneg\nparam h nonneg\n"
        "minimize square(x) + g * x + h\ndata\n  g = 1\n"
    )
    code, out, err = run_cli(
        ["sweep", prob, "--param", "g", "--values", "1,2", "--kernel", "python"]
    )
    assert code == 2  # h never bound: rejected up front, no partial table
    assert out == ""
    assert "h" in err


def test_sweep_inaccurate_rows_exit_three():
    code, out, _ = run_cli(
        [
            "sweep", DATA / "lasso.prob", "--param", "gamma",
            "--values", "0.1,1", "--kernel", "python", "--max-iter", "10",
        ]
    )
    assert code == 3
    assert out.count("inaccurate") == 2


def test_sweep_error_rows_exit_two(monkeypatch):
    # A failure at one grid point is recorded in its row; the other rows
    # still solve, and the error status dominates the exit code.
    from coneprog.errors import ConeprogError
    from coneprog.problem import Problem

    real_solve = Problem.solve

    def flaky(self, binding=None, settings=None):
        for key, val in (binding or {}).items():
            if getattr(key, "name", None) == "gamma" and float(np.asarray(val)) == 1.0:
                raise ConeprogError("synthetic failure at gamma=1")
        return real_solve(self, binding, settings)

    monkeypatch.setattr(Problem, "solve", flaky)
    code, out, _ = run_cli(
        [
            "sweep", DATA / "lasso.prob", "--param", "gamma",
            "--values", "0.1,1,10", "--kernel", "python",
        ]
    )
    assert code == 2
    lines = out.splitlines()
    assert len(lines) == 4  # header + three rows
    assert "optimal" in lines[1] and "optimal" in lines[3]
    assert lines[2].split() == ["1.0000", "error", "-"]  # blank optval cell


def test_check_verdicts_across_fixture_corpus():
    compliant = [
        "lasso.prob", "abs_eq.prob", "ls_box.prob", "infeasible.prob",
        "unbounded.prob", "sqsq.prob", "flow.prob", "norminf.prob",
        "norm2.prob", "maxmin.prob",
    ]
    for name in compliant:
        code, out, _ = run_cli(["check", DATA / name])
        assert code == 0, name
        assert "verdict: compliant" in out, name
    code, out, _ = run_cli(["check", DATA / "nondcp.prob"])
    assert code == 2
    assert "verdict: not compliant" in out
