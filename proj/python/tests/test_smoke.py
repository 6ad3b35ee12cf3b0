import math

import numpy as np
import pytest

import kacrice


def test_catalog_has_fields():
    names = {f["name"] for f in kacrice.catalog()}
    assert {"exp1", "exp-mix", "f2"} <= names


def test_er_index_counts():
    unit = 1.0 / (math.sqrt(3.0) * math.pi)
    for k, mult in enumerate([1, 2, 1]):
        out = kacrice.count(field="exp1", N=2, method="er", volume=1, index=k)
        assert out["result"]["estimate"] == pytest.approx(mult * unit, rel=1e-3)
        assert out["config"]["budget"]["seed"] == 20240917


def test_closed_form_matches_er():
    cf = kacrice.closed_form_n2("exp1")
    er = kacrice.count({"field": "exp1", "N": 2, "method": "er", "volume": 1.0})
    assert sum(cf) == pytest.approx(er["result"]["estimate"], rel=1e-6)


def test_shell_goi_partition():
    out = kacrice.count(field="exp1", N=2, method="shell-goi", shell=[0.5, 1.5])
    t = out["table"]
    assert sum(r["estimate"] for r in t["by_index"]) == pytest.approx(t["total"]["estimate"], rel=1e-6)


def test_check_reports():
    reps = kacrice.check("f2", 1)
    assert any(r["status"] == "fails" for r in reps)
    assert all(r["status"] == "holds" for r in kacrice.check("exp1", 2))


def test_condition_error():
    with pytest.raises(kacrice.ConditionError):
        kacrice.count(field="f2", N=2, method="er", volume=1.0)
    with pytest.raises(ValueError):
        kacrice.count(field="exp1", N=2, method="nope", volume=1.0)


def test_rmt_sample_sorted():
    ev = kacrice.rmt_sample({"ensemble": "goi", "n": 3, "c": 0.5}, 200, seed=5)
    assert ev.shape == (200, 3)
    assert np.all(np.diff(ev, axis=1) >= 0)
    again = kacrice.rmt_sample({"ensemble": "goi", "n": 3, "c": 0.5}, 200, seed=5)
    assert np.array_equal(ev, again)


def test_simulate_runs():
    out = kacrice.simulate("exp1", 2, (0.5, 1.5), reps=3, h=0.1)
    assert out["reps"] == 3
    assert out["total"]["mean"] > 0


def test_eta_prime():
    v = kacrice.eta_prime(1.0, 0.0, 0.0, np.array([1.0]), np.array([0.0]), -1.0)
    assert v == pytest.approx(1.0)
