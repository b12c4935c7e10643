import json
import subprocess
import sys

import numpy as np
import pytest

from aniscale import cli
from aniscale.field_synth import LatticeField
from aniscale.quadrature import NonConvergenceError


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_predict_lrd(capsys):
    code, out, _ = run(["predict", "--regime", "lrd", "--upsilon", "0.5", "1.2"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["gamma0"] == pytest.approx(0.5 / 1.2)
    assert d["H_plus"] == pytest.approx([0.75, 0.5])
    assert "config_hash" in d


def test_predict_hyperbolic_has_no_transition(capsys):
    code, out, _ = run(["predict", "--regime", "Hyperbolic", "--upsilon", "0.4", "-0.2",
                        "--gamma-grid", "1 2"], capsys)
    d = json.loads(out)
    assert code == 0 and d["transition"] is False and d["gamma0"] is None


def test_excluded_lrnd_exits_4(capsys):
    code, _, err = run(["predict", "--regime", "lrnd2", "--upsilon", "1", "0.8", "--mu", "0.3"], capsys)
    assert code == 4
    assert "upsilon1 != 1" in err


def test_config_errors_exit_2(capsys, tmp_path):
    with pytest.raises(SystemExit) as ei:
        cli.main(["predict", "--regime", "lrd", "--upsilon", "0.5", "1.2", "--bogus"])
    assert ei.value.code == 2
    with pytest.raises(SystemExit) as ei:
        cli.main(["predict", "--regi", "lrd"])          # abbreviations are refused
    assert ei.value.code == 2
    code, _, err = run(["predict"], capsys)
    assert code == 2 and "regime" in err
    code, _, _ = run(["predict", "--regime", "LRD", "--upsilon", "2", "2"], capsys)
    assert code == 2
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"colour": "red"}))
    code, _, err = run(["predict", "--config", str(bad)], capsys)
    assert code == 2 and "colour" in err


def test_non_convergence_exits_3(capsys, monkeypatch):
    def boom(*a, **k):
        raise NonConvergenceError("budget exhausted")
    monkeypatch.setattr(cli.th, "predict", boom)
    code, _, err = run(["predict", "--regime", "LRD", "--upsilon", "0.5", "0.5"], capsys)
    assert code == 3 and "non-convergence" in err


def test_help_lists_flags():
    out = subprocess.run([sys.executable, "-m", "aniscale", "scan", "--help"], capture_output=True,
                         text=True, check=True).stdout
    for flag in ("--config", "--regime", "--upsilon", "--gamma-grid", "--lambda-grid", "--replicas",
                 "--law", "--seed", "--mode", "--out", "--tol", "--threads", "--log-rule"):
        assert flag in out


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"regime": "ND", "upsilon": [0.5, 1.5], "seed": 4}))
    code, out, _ = run(["predict", "--config", str(cfg)], capsys)
    assert code == 0 and json.loads(out)["gamma0"] == pytest.approx(0.5)
    code, out, _ = run(["predict", "--config", str(cfg), "--upsilon", "1", "1"], capsys)
    assert json.loads(out)["gamma0"] == pytest.approx(1.0)


def test_env_out_overrides_flag(capsys, tmp_path, monkeypatch):
    env_dir = tmp_path / "env"
    monkeypatch.setenv("ANISCALE_OUT", str(env_dir))
    code, _, _ = run(["predict", "--regime", "LRD", "--upsilon", "0.5", "1.2", "--out",
                      str(tmp_path / "flag")], capsys)
    assert code == 0
    assert (env_dir / "predict.json").exists()
    assert not (tmp_path / "flag").exists()


def test_kappa_command(capsys):
    code, out, _ = run(["kappa", "--regime", "LRD", "--upsilon", "0.5", "1.2", "--gamma", "1"], capsys)
    d = json.loads(out)
    assert code == 0
    plus = [r for r in d["kappa_squared"] if r["side"] == "plus"][0]
    assert plus["closed_or_1d"] == pytest.approx(41.99895985525978, rel=1e-9)
    assert abs(plus["rel_delta"]) < 1e-6


def test_oracle_command(capsys, tmp_path):
    code, out, _ = run(["oracle", "--regime", "Hyperbolic", "--upsilon", "0.4", "-0.2",
                        "--gamma-grid", "1", "--lambda-grid", "16 32", "--out", str(tmp_path)], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("regime,gamma,lambda") and len(lines) == 5
    assert (tmp_path / "oracle.csv").exists() and (tmp_path / "run_config.json").exists()


def test_synth_is_reproducible(capsys, tmp_path):
    args = ["synth", "--regime", "LRD", "--upsilon", "0.5", "1.2", "--size", "16", "12",
            "--replicas", "2", "--seed", "9", "--law", "rademacher"]
    assert run(args + ["--out", str(tmp_path / "a")], capsys)[0] == 0
    assert run(args + ["--out", str(tmp_path / "b")], capsys)[0] == 0
    for r in range(2):
        fa = LatticeField.load(str(tmp_path / "a" / f"field_{r:04d}.f64"))
        fb = LatticeField.load(str(tmp_path / "b" / f"field_{r:04d}.f64"))
        assert fa.values.shape == (16, 12)
        assert np.array_equal(fa.values, fb.values)
        assert (tmp_path / "a" / f"field_{r:04d}.f64").read_bytes() == \
            (tmp_path / "b" / f"field_{r:04d}.f64").read_bytes()
    meta = json.loads((tmp_path / "a" / "field_0001.f64.json").read_text())
    assert meta["seed"] == 9 and meta["replica"] == 1 and meta["law"] == "rademacher"


def test_scan_and_report(capsys, tmp_path):
    code, out, _ = run(["scan", "--regime", "Hyperbolic", "--upsilon", "0.4", "-0.2",
                        "--gamma-grid", "0.5 1 1.5 2 2.5 3", "--out", str(tmp_path)], capsys)
    assert code == 0 and out.startswith("regime,gamma,lambda,stat,value,err")
    code, out, _ = run(["report", "--input", str(tmp_path / "scan.json")], capsys)
    assert code == 0
    assert "no scaling transition detected" in out
    assert "PASS transition" in out
    code, _, _ = run(["report", "--input", str(tmp_path / "missing.json")], capsys)
    assert code == 2


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "aniscale", "predict", "--regime", "ND",
                          "--upsilon", "1", "1"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["gamma0"] == pytest.approx(1.0)
