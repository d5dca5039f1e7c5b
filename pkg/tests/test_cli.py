import json

import pytest

from irgraph.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_presets(capsys):
    code, out = run(capsys, "presets")
    assert code == 0 and "dubins" in json.loads(out)


def test_norm_and_solve(capsys):
    code, out = run(capsys, "norm", "--kernel", "halftriangle", "--space", "interval", "--m", "500")
    d = json.loads(out)
    assert code == 0 and abs(d["norm"] - 0.6366) < 2e-3 and d["c0_lo"] <= d["c0"] <= d["c0_hi"]
    code, out = run(capsys, "solve", "--kernel", "constant:c=2")
    assert code == 0 and abs(json.loads(out)["rho_scalar"] - 0.796812) < 1e-6


def test_generate_and_analyze(capsys, tmp_path):
    code, _ = run(capsys, "generate", "--kernel", "constant:c=2", "--n", "500", "--out", str(tmp_path))
    assert code == 0
    code, out = run(capsys, "analyze", str(tmp_path / "edges.txt"), "--types", str(tmp_path / "types.txt"))
    d = json.loads(out)
    assert code == 0 and d["n"] == 500 and d["c1"] > 0


def test_compare_exit_codes(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kernel": "constant:c=2", "generate": {"n": 2000, "seeds": [0, 1]},
                               "metrics": ["c1_frac"], "bands": {"c1_frac": 0.05}}))
    code, out = run(capsys, "compare", "--config", str(cfg), "--out", str(tmp_path / "a"),
                    "--format", "csv")
    assert code == 0 and out.startswith("PASS")
    assert (tmp_path / "a" / "report.json").exists() and (tmp_path / "a" / "c1_frac.csv").exists()
    cfg.write_text(json.dumps({"kernel": "constant:c=2", "generate": {"n": 2000, "seeds": [0]},
                               "metrics": ["c1_frac"], "bands": {"c1_frac": 1e-9}}))
    code, _ = run(capsys, "compare", "--config", str(cfg))
    assert code == 2


def test_error_exit(capsys):
    assert main(["solve", "--kernel", "nosuch:c=1"]) == 1


def test_sweep_turova_diameter(capsys):
    code, out = run(capsys, "sweep", "--rank1", "4", "--eps", "1e-4,1e-3,1e-2")
    assert code == 0 and abs(json.loads(out)["exponent"] - 1) < 0.02
    code, out = run(capsys, "turova", "--delta", "1", "--format", "csv")
    assert code == 0 and out.splitlines()[0].startswith("delta,")
    code, out = run(capsys, "diameter", "--kernel", "constant:c=0.5", "--n", "500", "--seeds", "2")
    assert code == 0 and json.loads(out)[0]["n"] == 500
