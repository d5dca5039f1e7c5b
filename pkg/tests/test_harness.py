import csv
import json
import math

import numpy as np
import pytest
from scipy import special

import oracles
from irgraph.errors import InsufficientDataError
from irgraph.harness import (GridFamily, Rank1Family, bessel_first_zero, bessel_j, compare,
                             constant_kernel, deletion_means, deletion_smoke, diameter_study,
                             merge_config, sweep_transition, theory_diameter_rate, turova_critical)


def test_compare_zero_kernel():
    rep = compare({"kernel": "constant:c=0", "generate": {"n": 2000, "seeds": [0, 1]},
                   "metrics": ["c1_frac", "edges_frac", "giant_edges_frac", "two_core_frac"],
                   "bands": {}})
    for r in rep.rows:
        assert r.theoretical == 0
    assert rep.row("edges_frac").simulated == 0
    assert rep.row("c1_frac").simulated == pytest.approx(1 / 2000)


def test_compare_bipartite_type_mix():
    rep = compare({"kernel": "matrix:[[0, 4], [4, 0]]",
                   "space": {"kind": "finite", "weights": [0.5, 0.5]},
                   "generate": {"n": 100_000, "seeds": [0]}, "metrics": ["type_mix"],
                   "bands": {"type_mix": 0.01}})
    for i in (0, 1):
        r = rep.row(f"type_mix[{i}]")
        assert r.theoretical == pytest.approx(oracles.ER_RHO[2.0] / 2, abs=1e-9)
        assert abs(r.delta) < 0.01 and r.passed


def test_report_reproducible_and_bands_from_config(tmp_path):
    cfg = {"kernel": "constant:c=1.5", "generate": {"n": 3000, "seeds": [3, 4]},
           "metrics": ["c1_frac", "degree_tv"], "bands": {"c1_frac": 1e-9}}
    a, b = compare(cfg), compare(cfg)
    assert a.digest() == b.digest()
    assert a.to_dict(False) == b.to_dict(False)
    assert a.row("c1_frac").passed is False and a.row("degree_tv").passed is None
    assert not a.all_pass
    assert "solve_survival" in a.provenance["theory_calls"]
    a.write(tmp_path, "csv")
    rows = list(csv.reader(open(tmp_path / "c1_frac.csv")))
    assert rows[0] == ["n", "seed", "simulated", "theoretical", "delta"] and len(rows) == 3
    d = json.loads((tmp_path / "report.json").read_text())
    assert d["hash"] == a.digest() and "timestamp" in d


def test_report_single_seed_has_no_stderr():
    rep = compare({"kernel": "constant:c=2", "generate": {"n": 1000, "seeds": [0]},
                   "metrics": ["c1_frac"]})
    assert rep.row("c1_frac").stderr is None


def test_diameter_metric_skipped_above_cap():
    rep = compare({"kernel": "constant:c=2", "generate": {"n": 2000, "seeds": [0]},
                   "metrics": ["diameter"], "diameter_cap": 1000})
    r = rep.row("diameter")
    assert r.skipped and r.passed is None


def test_compare_rejects_unknown_metric():
    with pytest.raises(ValueError):
        compare({"metrics": ["girth"]})


def test_merge_config_nested():
    cfg = merge_config({"generate": {"n": 5}})
    assert cfg["generate"]["n"] == 5 and cfg["generate"]["variant"] == "min"


def test_sweep_rank1_p4():
    r = sweep_transition(Rank1Family(4), np.logspace(-4, -2, 7))
    assert abs(r.exponent - 1) < 0.02
    assert r.c0 == 0.5 and len(r.local_slopes) == 7


def test_sweep_constant_family():
    r = sweep_transition(GridFamily(constant_kernel(1.0)), [1e-3, 3e-3, 1e-2, 3e-2])
    assert abs(r.exponent - 1) < 0.05


def test_sweep_insufficient():
    with pytest.raises(InsufficientDataError):
        sweep_transition(Rank1Family(4), [1e-3, 1e-2])


def test_deletions():
    rows = deletion_smoke(constant_kernel(2), 20_000, [0, 1], [0, 0.005, 0.05, 0.2])
    m = deletion_means(rows)
    assert m[0] == 0
    assert all(r.change == 0 for r in rows if r.delta == 0)
    vals = list(m.values())
    assert all(a <= b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 3.7, 9.0, -0.5, -0.975])
def test_bessel_zero_matches_scipy(nu):
    z = bessel_first_zero(nu)
    assert abs(special.jv(nu, z)) < 1e-10
    assert bessel_j(nu, 1.3) == pytest.approx(special.jv(nu, 1.3), rel=1e-12)
    # no smaller zero
    xs = np.linspace(1e-3, z * 0.999, 400)
    assert np.all(special.jv(nu, xs) > 0)


def test_turova_delta_one():
    r = turova_critical(1.0)
    assert r.bessel_zero == pytest.approx(oracles.J0_FIRST_ZERO, abs=1e-12)
    assert r.lam_formula == pytest.approx(0.72290, abs=1e-5)
    assert abs(r.lam_numeric / r.lam_formula - 1) < 0.02
    assert r.zero_error < 1e-10


def test_turova_small_delta_uses_numeric_only():
    r = turova_critical(0.03)
    assert r.lam_formula is None and r.lam_numeric > 0


def test_diameter_rates():
    assert theory_diameter_rate(0.5, 0.5) == pytest.approx(1 / math.log(2))
    assert theory_diameter_rate(2, oracles.ER2_DUAL_NORM) == pytest.approx(3.66374, abs=1e-4)
    assert theory_diameter_rate(1.0005, 0.9) is None


def test_diameter_study_critical_flag():
    rows = diameter_study(constant_kernel(1.0), [500], [0, 1])
    assert rows[0].prediction is None and rows[0].rel_error is None
