import csv
import json

import numpy as np
import pytest

from windcap.cli import main
from windcap.model import case_to_dict
from windcap.optkit import SolveOutcome, Status, backend_register, backend_unregister


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def estimated(tmp_path_factory):
    out = tmp_path_factory.mktemp("est")
    assert run("estimate", "case3", "-o", out, "--solver", "highs") == 0
    return out


def test_uc_writes_schedule(tmp_path, capsys):
    assert run("uc", "case3", "-o", tmp_path) == 0
    assert (tmp_path / "schedule.json").exists()
    assert "UC objective: 4640" in capsys.readouterr().out


def test_missing_case_file(tmp_path, capsys):
    assert run("uc", tmp_path / "nope.json", "-o", tmp_path) == 1
    assert "no such file" in capsys.readouterr().err


def test_infeasible_reserve_exit_code(case3, tmp_path):
    d = case_to_dict(case3)
    d["reserve_up"] = 0.5
    d["wind"][0]["forecast"] = [0.0] * 4
    d["loads"][2] = [170.0] * 4
    p = tmp_path / "c.json"
    p.write_text(json.dumps(d))
    assert run("uc", p, "-o", tmp_path) == 2


def test_estimate_outputs(estimated):
    rows = list(csv.DictReader(open(estimated / "trace.csv")))
    assert len(rows) == 11
    est = json.loads((estimated / "estimate.json").read_text())
    assert est["iterations"] == 11 and 0 < est["alpha0"] < 1
    assert est["worst_case"]["check_value"] == pytest.approx(est["worst_case"]["value"],
                                                             rel=1e-5, abs=1e-9)
    assert (estimated / "worst_case.csv").exists()


def test_estimate_tiny_interval(tmp_path):
    assert run("estimate", "case3", "-o", tmp_path, "--solver", "highs",
               "--alpha-lo", 0.5, "--alpha-hi", 0.5001) == 0
    assert len(list(csv.DictReader(open(tmp_path / "trace.csv")))) <= 1


def test_estimate_bad_interval(tmp_path):
    assert run("estimate", "case3", "-o", tmp_path, "--alpha-lo", 0.6, "--alpha-hi", 0.5) == 1


def test_unknown_solver_lists_backends(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        run("uc", "case3", "-o", tmp_path, "--solver", "gurobi-ish")
    assert err.value.code == 1
    msg = capsys.readouterr().err
    assert "embedded" in msg and "highs" in msg


def test_sample_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("sample", "case3", "-o", a, "--samples", 5, "--seed", 7) == 0
    assert run("sample", "case3", "-o", b, "--samples", 5, "--seed", 7) == 0
    assert (a / "scenarios.csv").read_bytes() == (b / "scenarios.csv").read_bytes()
    assert len((a / "scenarios.csv").read_text().splitlines()) == 6


def test_validate_usage_errors(estimated, tmp_path):
    assert run("validate", "case3", "-o", estimated, "--samples", 0) == 1
    assert run("validate", "case3", "-o", tmp_path, "--alpha", 0.5) == 1


def test_validate_after_estimate(estimated):
    assert run("validate", "case3", "-o", estimated, "--samples", 200, "--seed", 2,
               "--solver", "highs") == 0
    rep = json.loads((estimated / "validation.json").read_text())
    est = json.loads((estimated / "estimate.json").read_text())
    se = (est["alpha0"] * (1 - est["alpha0"]) / 200) ** 0.5
    assert rep["feasible_fraction"] >= est["alpha0"] - 4 * se


def test_coverage(tmp_path):
    assert run("coverage", "case3", "-o", tmp_path, "--alpha", 0, "--samples", 200,
               "--reps", 3) == 0
    assert json.loads((tmp_path / "coverage.json").read_text())["mean"] == 0.0
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("coverage", "case39", "-o", d, "--alpha", 0.95, "--samples", 300, "--reps", 5,
                   "--hours", "1,15", "--seed", 4) == 0
    assert (a / "coverage.json").read_bytes() == (b / "coverage.json").read_bytes()


def test_fullrun_matches_stagewise(tmp_path, estimated):
    out = tmp_path / "full"
    assert run("fullrun", "case3", "-o", out, "--solver", "highs", "--samples", 50) == 0
    full = json.loads((out / "estimate.json").read_text())
    staged = json.loads((estimated / "estimate.json").read_text())
    assert full["alpha0"] == staged["alpha0"]
    assert [r["fw"] for r in full["trace"]] == pytest.approx([r["fw"] for r in staged["trace"]])
    assert np.array_equal(json.loads((out / "schedule.json").read_text())["u"],
                          json.loads((estimated / "schedule.json").read_text())["u"])


class _GivesUp:
    def solve_lp(self, model, options=None):
        return SolveOutcome(Status.ITERATION_LIMIT)

    solve_milp = solve_lp


def test_non_conclusive_exit_code(tmp_path, capsys):
    backend_register("gives-up", _GivesUp())
    try:
        assert run("uc", "case3", "-o", tmp_path, "--solver", "gives-up") == 3
        assert "non-conclusive" in capsys.readouterr().err
    finally:
        backend_unregister("gives-up")
