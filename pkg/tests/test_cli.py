"""End-to-end tests of the command-line interface."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gslope import chi_quantile, lambda_max, GroupSpec, prox_sorted_l1
from gslope.cli import main


def _write_csv(path, array):
    np.savetxt(path, np.atleast_2d(np.asarray(array, dtype=float)), delimiter=",")


def _write_vector(path, values):
    with open(path, "w") as fh:
        for v in values:
            fh.write("%r\n" % float(v))


def _write_groups(path, labels):
    with open(path, "w") as fh:
        for col, lab in enumerate(labels, start=1):
            fh.write("%d,%s\n" % (col, lab))


def _solve_inputs(tmp_path, y, lam, labels=None):
    p = len(y)
    labels = labels if labels is not None else [str(i + 1) for i in range(p)]
    xp = os.path.join(tmp_path, "X.csv")
    yp = os.path.join(tmp_path, "y.csv")
    gp = os.path.join(tmp_path, "groups.csv")
    lp = os.path.join(tmp_path, "lam.csv")
    _write_csv(xp, np.eye(p))
    _write_vector(yp, y)
    _write_groups(gp, labels)
    _write_vector(lp, lam)
    return xp, yp, gp, lp


def test_solve_zero_response(tmp_path):
    tmp = str(tmp_path)
    xp, yp, gp, lp = _solve_inputs(tmp, np.zeros(3), [1.0, 0.5, 0.25])
    out = os.path.join(tmp, "out")
    assert main(["solve", xp, yp, gp, "--lambda-file", lp, "--out", out]) == 0
    fit = json.load(open(os.path.join(out, "fit.json")))
    assert fit["beta"] == [0.0, 0.0, 0.0]
    assert fit["selected"] == []
    assert fit["diagnostics"]["iterations"] == 0


def test_solve_matches_scalar_prox_and_round_trips(tmp_path):
    tmp = str(tmp_path)
    y = np.array([3.0, 1.0, -2.0, 0.5])
    lam = np.array([2.0, 1.5, 1.0, 0.5])
    xp, yp, gp, lp = _solve_inputs(tmp, y, lam)
    out = os.path.join(tmp, "out")
    assert main(["solve", xp, yp, gp, "--lambda-file", lp, "--out", out]) == 0

    fit = json.load(open(os.path.join(out, "fit.json")))
    np.testing.assert_allclose(fit["beta"], prox_sorted_l1(y, lam), atol=1e-10)

    # effects.csv repeats fit.json at full printed precision
    rows = [
        line.split(",")
        for line in open(os.path.join(out, "effects.csv")).read().strip().split("\n")[1:]
    ]
    assert [r[0] for r in rows] == ["1", "2", "3", "4"]
    for (label, printed), stored in zip(rows, fit["effects"]):
        assert printed == repr(float(stored))


def test_solve_reports_selected_group_labels(tmp_path):
    tmp = str(tmp_path)
    y = np.array([4.0, 0.1, 3.0])
    xp, yp, gp, lp = _solve_inputs(tmp, y, [1.0, 1.0, 1.0], labels=["a", "b", "c"])
    out = os.path.join(tmp, "out")
    assert main(["solve", xp, yp, gp, "--lambda-file", lp, "--out", out]) == 0
    fit = json.load(open(os.path.join(out, "fit.json")))
    assert fit["selected"] == ["a", "c"]


def test_solve_malformed_csv_reports_line(tmp_path, capsys):
    tmp = str(tmp_path)
    xp, yp, gp, lp = _solve_inputs(tmp, np.zeros(2), [1.0, 0.5])
    with open(xp, "w") as fh:
        fh.write("1.0,0.0\nnot-a-number,1.0\n")
    out = os.path.join(tmp, "nothing")
    assert main(["solve", xp, yp, gp, "--lambda-file", lp, "--out", out]) == 1
    err = capsys.readouterr().err
    assert "line 2" in err
    assert not os.path.exists(out)


def test_solve_dimension_mismatch(tmp_path, capsys):
    tmp = str(tmp_path)
    xp, yp, gp, lp = _solve_inputs(tmp, np.zeros(3), [1.0, 0.5, 0.2])
    _write_vector(yp, np.zeros(5))
    assert main(["solve", xp, yp, gp, "--lambda-file", lp, "--out", tmp]) == 1
    assert "rows" in capsys.readouterr().err


def test_solve_incomplete_groups_file(tmp_path, capsys):
    tmp = str(tmp_path)
    xp, yp, gp, lp = _solve_inputs(tmp, np.zeros(3), [1.0, 0.5, 0.2])
    _write_groups(gp, ["1", "2"])  # covers only two of three columns
    assert main(["solve", xp, yp, gp, "--lambda-file", lp, "--out", tmp]) == 1
    assert "group" in capsys.readouterr().err


def test_solve_wrong_lambda_length(tmp_path, capsys):
    tmp = str(tmp_path)
    xp, yp, gp, lp = _solve_inputs(tmp, np.zeros(3), [1.0, 0.5])
    assert main(["solve", xp, yp, gp, "--lambda-file", lp, "--out", tmp]) == 1
    assert "penalty" in capsys.readouterr().err.lower()


def test_solve_max_iter_exit_writes_nothing(tmp_path, capsys):
    tmp = str(tmp_path)
    rng = np.random.default_rng(0)
    p = 6
    X = rng.normal(size=(12, p)) / np.sqrt(12)
    y = rng.normal(size=12) + X @ rng.normal(scale=3.0, size=p)
    xp = os.path.join(tmp, "X.csv")
    yp = os.path.join(tmp, "y.csv")
    gp = os.path.join(tmp, "groups.csv")
    lp = os.path.join(tmp, "lam.csv")
    _write_csv(xp, X)
    _write_vector(yp, y)
    _write_groups(gp, ["1", "1", "2", "2", "3", "3"])
    _write_vector(lp, [0.2, 0.1, 0.05])
    out = os.path.join(tmp, "out")
    rc = main(
        ["solve", xp, yp, gp, "--lambda-file", lp, "--out", out, "--max-iter", "1"]
    )
    assert rc == 2
    assert "no convergence" in capsys.readouterr().err
    assert not os.path.exists(out)


def test_solve_generated_lambda_requires_q(tmp_path, capsys):
    tmp = str(tmp_path)
    xp, yp, gp, _ = _solve_inputs(tmp, np.zeros(3), [1.0, 0.5, 0.2])
    rc = main(["solve", xp, yp, gp, "--lambda-method", "max", "--out", tmp])
    assert rc == 1
    assert "--q" in capsys.readouterr().err


def test_lambdas_max_first_value(tmp_path):
    out = os.path.join(str(tmp_path), "lambda.csv")
    rc = main(
        ["lambdas", "--method", "max", "--q", "0.1", "--m", "10", "--ranks", "1",
         "--weights", "unit", "--out", out]
    )
    assert rc == 0
    lines = open(out).read().strip().split("\n")
    comments = [l for l in lines if l.startswith("#")]
    values = [float(l) for l in lines if not l.startswith("#")]
    assert len(values) == 10
    assert values[0] == pytest.approx(2.5758, abs=5e-5)
    assert values[0] == pytest.approx(chi_quantile(1, 1.0 - 0.1 / 10), abs=1e-12)
    assert any("method=max" in c for c in comments)
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_lambdas_mean_equals_max_on_homogeneous_spec(tmp_path):
    tmp = str(tmp_path)
    fmax = os.path.join(tmp, "max.csv")
    fmean = os.path.join(tmp, "mean.csv")
    common = ["--q", "0.1", "--m", "8", "--ranks", "3", "--weights", "sqrt-rank"]
    assert main(["lambdas", "--method", "max"] + common + ["--out", fmax]) == 0
    assert main(["lambdas", "--method", "mean"] + common + ["--out", fmean]) == 0
    vmax = [float(l) for l in open(fmax) if not l.startswith("#")]
    vmean = [float(l) for l in open(fmean) if not l.startswith("#")]
    np.testing.assert_allclose(vmean, vmax, atol=1e-9)


def test_lambdas_ranks_from_file(tmp_path):
    tmp = str(tmp_path)
    rp = os.path.join(tmp, "ranks.csv")
    with open(rp, "w") as fh:
        fh.write("1\n2\n4\n")
    out = os.path.join(tmp, "lam.csv")
    rc = main(
        ["lambdas", "--method", "mean", "--q", "0.2", "--m", "3", "--ranks", rp,
         "--out", out]
    )
    assert rc == 0
    values = [float(l) for l in open(out) if not l.startswith("#")]
    assert len(values) == 3


def test_lambdas_corrected_requires_n(tmp_path):
    out = os.path.join(str(tmp_path), "lam.csv")
    with pytest.raises(SystemExit) as exc:
        main(
            ["lambdas", "--method", "corrected-equal", "--q", "0.1", "--m", "5",
             "--ranks", "2", "--out", out]
        )
    assert exc.value.code == 2
    assert not os.path.exists(out)


def test_estimate_sigma_subcommand(tmp_path):
    tmp = str(tmp_path)
    rng = np.random.default_rng(1)
    n, p = 60, 8
    X = rng.normal(size=(n, p)) / np.sqrt(n)
    beta = np.zeros(p)
    beta[:2] = 3.0
    y = X @ beta + 0.5 * rng.normal(size=n)
    xp = os.path.join(tmp, "X.csv")
    yp = os.path.join(tmp, "y.csv")
    gp = os.path.join(tmp, "groups.csv")
    _write_csv(xp, X)
    _write_vector(yp, y)
    _write_groups(gp, ["%d" % (i // 2) for i in range(p)])
    out = os.path.join(tmp, "out")
    rc = main(
        ["estimate-sigma", xp, yp, gp, "--lambda-method", "corrected-general",
         "--q", "0.1", "--out", out]
    )
    assert rc == 0
    fit = json.load(open(os.path.join(out, "fit.json")))
    assert fit["diagnostics"]["sigma_used"] != 1.0
    assert fit["diagnostics"]["sigma_used"] > 0.0


def test_estimate_sigma_dof_exhaustion_exits_3(tmp_path, capsys):
    tmp = str(tmp_path)
    rng = np.random.default_rng(2)
    X = rng.normal(size=(4, 6))
    y = X @ rng.normal(scale=5.0, size=6) + 0.01 * rng.normal(size=4)
    xp = os.path.join(tmp, "X.csv")
    yp = os.path.join(tmp, "y.csv")
    gp = os.path.join(tmp, "groups.csv")
    lp = os.path.join(tmp, "lam.csv")
    _write_csv(xp, X)
    _write_vector(yp, y)
    _write_groups(gp, ["a", "a", "a", "b", "b", "b"])
    _write_vector(lp, [1e-6, 1e-6])
    out = os.path.join(tmp, "out")
    rc = main(["estimate-sigma", xp, yp, gp, "--lambda-file", lp, "--out", out])
    assert rc == 3
    assert "support too large" in capsys.readouterr().err
    assert not os.path.exists(out)


def _scenario_file(tmp, **overrides):
    raw = {
        "name": "cli_toy",
        "design_kind": "identity",
        "m": 12,
        "sizes": [2, 3],
        "weights": "sqrt-rank",
        "k": [2],
        "q": [0.1],
        "lambda_method": "max",
        "signal": "sqrt-calibrated",
        "sigma": "known",
        "replicates": 6,
        "seed": 99,
    }
    raw.update(overrides)
    path = os.path.join(tmp, "scenario.json")
    with open(path, "w") as fh:
        json.dump(raw, fh)
    return path


def test_simulate_deterministic_across_runs_and_workers(tmp_path):
    tmp = str(tmp_path)
    scenario = _scenario_file(tmp)
    outs = []
    for sub, workers in (("r1", "1"), ("r2", "1"), ("r3", "2")):
        out = os.path.join(tmp, sub)
        rc = main(["simulate", scenario, "--out", out, "--workers", workers])
        assert rc == 0
        outs.append(out)
    ref = open(os.path.join(outs[0], "report.csv"), "rb").read()
    for out in outs[1:]:
        assert open(os.path.join(out, "report.csv"), "rb").read() == ref
    ref_strg = open(os.path.join(outs[0], "strg.csv"), "rb").read()
    assert open(os.path.join(outs[2], "strg.csv"), "rb").read() == ref_strg


def test_simulate_seed_override_changes_output(tmp_path):
    tmp = str(tmp_path)
    scenario = _scenario_file(tmp)
    out_a = os.path.join(tmp, "a")
    out_b = os.path.join(tmp, "b")
    assert main(["simulate", scenario, "--out", out_a]) == 0
    assert main(["simulate", scenario, "--out", out_b, "--seed", "100"]) == 0
    assert (
        open(os.path.join(out_a, "report.csv"), "rb").read()
        != open(os.path.join(out_b, "report.csv"), "rb").read()
    )


def test_simulate_rejects_unknown_design_kind(tmp_path, capsys):
    tmp = str(tmp_path)
    scenario = _scenario_file(tmp, design_kind="cauchy")
    out = os.path.join(tmp, "out")
    assert main(["simulate", scenario, "--out", out]) == 1
    assert "design_kind" in capsys.readouterr().err
    assert not os.path.exists(out)


def test_simulate_rejects_unknown_field(tmp_path, capsys):
    tmp = str(tmp_path)
    scenario = _scenario_file(tmp, bogus_knob=3)
    assert main(["simulate", scenario, "--out", os.path.join(tmp, "out")]) == 1
    assert "bogus_knob" in capsys.readouterr().err


def test_simulate_accepts_bundled_name(tmp_path, monkeypatch):
    # resolve by bundle name, shrunk through the seed override only; keep
    # the run tiny by pointing at a file that mirrors the bundled schema
    tmp = str(tmp_path)
    scenario = _scenario_file(tmp, replicates=2)
    out = os.path.join(tmp, "out")
    assert main(["simulate", scenario, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "report.csv"))


def test_console_script_entry_point(tmp_path):
    out = os.path.join(str(tmp_path), "lambda.csv")
    proc = subprocess.run(
        [sys.executable, "-m", "gslope.cli", "lambdas", "--method", "max",
         "--q", "0.1", "--m", "4", "--ranks", "2", "--out", out],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout == ""
    assert os.path.exists(out)
    spec = GroupSpec(
        q=0.1, ranks=np.full(4, 2), weights=np.sqrt(np.full(4, 2.0))
    )
    values = [float(l) for l in open(out) if not l.startswith("#")]
    np.testing.assert_allclose(values, lambda_max(spec), atol=1e-12)
