import csv
import json

import numpy as np
import pytest
import yaml

from gfunc_rhp import cli

GENUS0_INIT = '["0.8377535715513416+0.6480542736638852i","0.8377535715513416-0.6480542736638852i"]'
T01_INIT = '["1.0174+0.486i","1.0174-0.486i"]'


def _run(argv):
    return cli.main([str(a) for a in argv])


def test_usage_errors(tmp_path, capsys):
    assert _run(["frobnicate"]) == cli.EXIT_USAGE
    assert _run([]) == cli.EXIT_USAGE
    bad = tmp_path / "bad.yaml"
    bad.write_text("problem: [unclosed\n")
    assert _run(["solve", "--config", bad, "--out", tmp_path]) == cli.EXIT_USAGE
    assert _run(["solve", "--set", "problem=nope", "--out", tmp_path]) == cli.EXIT_USAGE
    assert _run(["solve", "--set", "parameters.q=1", "--out", tmp_path]) == cli.EXIT_USAGE
    assert _run(["continue", "--set", "sweep={component: q, from: 1, to: 2, steps: 3}",
                 "--out", tmp_path]) == cli.EXIT_USAGE
    assert _run(["continue", "--out", tmp_path]) == cli.EXIT_USAGE
    assert _run(["validate", "--suite", "bogus", "--out", tmp_path]) == cli.EXIT_USAGE
    assert _run(["solve", "--set", "initial_alphas=[1]", "--out", tmp_path]) == cli.EXIT_USAGE
    assert _run(["solve", "--set", "problem=nls-genus2", "--out", tmp_path]) == cli.EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_load_config_merges_file_and_overrides(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({"parameters": {"mu": 2.5, "x": 0.0, "t": 0.2}, "loop_offset_factor": 0.25}))
    cfg = cli.load_config(str(p), ["parameters.x=1.5", "newton.max_iters=12"])
    assert cfg.beta() == (2.5, 1.5, 0.2)
    assert cfg.geometry().offset_factor == 0.25
    assert cfg.newton_options().max_iters == 12
    with pytest.raises(cli.UsageError):
        cli.load_config(None, ["no_equals_sign"])


def test_parse_points():
    assert cli.parse_points([[1, 2], "3-4i", 5]) == [1 + 2j, 3 - 4j, 5]
    with pytest.raises(cli.UsageError):
        cli.parse_alphas(["1+1i"])


def test_validate_writes_reports(tmp_path):
    assert _run(["validate", "--suite", "cauchy,appendix", "--out", tmp_path]) == cli.EXIT_OK
    rec = json.loads((tmp_path / "validation.json").read_text())
    assert [r["name"] for r in rec["reports"]][:2] == ["cauchy-inside", "cauchy-outside"]
    assert all(r["passed"] for r in rec["reports"])


def test_solve_and_replay(tmp_path):
    out = tmp_path / "solve"
    assert _run(["solve", "--set", f"initial_alphas={GENUS0_INIT}", "--out", out]) == cli.EXIT_OK
    rec = json.loads((out / "run_record.json").read_text())
    assert rec["command"] == "solve" and rec["tool"] == "gfunc-rhp"
    assert rec["solution"]["residual_norm"] < 1e-10
    assert rec["sign_report"]["passed"]
    assert _run(["replay", out / "run_record.json", "--out", tmp_path / "again"]) == cli.EXIT_OK
    # a RunRecord is also a valid config
    assert cli.load_config(str(out / "run_record.json")).initial_alphas == rec["config"]["initial_alphas"]


def test_continue_rows_match_json(tmp_path):
    out = tmp_path / "cont"
    code = _run(["continue", "--set", "parameters.t=0.1", "--set", f"initial_alphas={T01_INIT}",
                 "--set", "sweep={component: mu, from: 2.2, to: 2.1, steps: 1}", "--out", out])
    assert code == cli.EXIT_OK
    with open(out / "trajectory.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 3
    head = rows[0]
    rec = json.loads((out / "run_record.json").read_text())
    assert rec["trajectory"]["columns"] == head
    csv_vals = np.array([[float(v) for v in r] for r in rows[1:]])
    assert np.array_equal(csv_vals, np.array(rec["trajectory"]["rows"], dtype=float))
    assert csv_vals[-1, head.index("mu")] == pytest.approx(2.1)
    assert _run(["replay", out / "run_record.json", "--out", tmp_path / "again"]) == cli.EXIT_OK


def test_polynomial_problem(tmp_path):
    out = tmp_path / "poly"
    cfg = {
        "problem": "synthetic",
        "synthetic": {"coeffs": [0, {"x": -1}, {"t": -2}, 0.5], "beta_names": ["x", "t"]},
        "parameters": {"x": 1.0, "t": 0.5},
        "initial_alphas": ["0.3+0.8i", "0.3-0.8i"],
    }
    p = tmp_path / "poly.json"
    p.write_text(json.dumps(cfg))
    loaded = cli.load_config(str(p))
    assert loaded.beta_names == ("x", "t")
    f, init, _ = cli.make_problem(loaded)
    assert f.schwarz and len(init) == 2


def test_derivs_on_toy(tmp_path):
    assert _run(["derivs", "--set", "problem=appendix-toy", "--set", "parameters={mu: 1.0}",
                 "--out", tmp_path]) == cli.EXIT_OK
    rec = json.loads((tmp_path / "derivs.json").read_text())
    assert len(rec["reports"]) == 2
    assert _run(["solve", "--set", "problem=appendix-toy", "--set", "parameters={mu: 1.0}",
                 "--out", tmp_path]) == cli.EXIT_USAGE


@pytest.mark.slow
def test_sign_grid_size(tmp_path):
    out = tmp_path / "signs"
    assert _run(["signs", "--set", f"initial_alphas={GENUS0_INIT}", "--out", out]) == cli.EXIT_OK
    with open(out / "imh_grid.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["re", "im", "Imh", "region"]
    assert len(rows) == 200 * 200 + 1
    outside = [float(r[2]) for r in rows[1:] if r[3] == "outside"]
    assert np.all(np.isfinite(outside))


def test_version(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--version"])
    assert capsys.readouterr().out.strip() == cli.__version__
