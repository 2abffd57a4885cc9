import math

import numpy as np
import pytest

import rgan


def test_presets_round_trip():
    names = rgan.preset_names()
    assert "sigma-1d" in names and "realistic-garch" in names
    cfg = rgan.preset("AS", lambda1=0.5)
    assert cfg["lambda1"] == 0.5
    assert rgan.config_hash(cfg) == rgan.config_hash(rgan.preset("AS", lambda1=0.5))
    assert rgan.config_hash(cfg) != rgan.config_hash("AS")
    with pytest.raises(ValueError):
        rgan.preset("AS", not_a_key=1)


def test_explicit_solutions():
    s = rgan.explicit_solution("sigma-1d")
    assert s["pi"][0] == pytest.approx(0.316796536259, rel=1e-10)
    assert s["residual"] < 1e-10
    assert rgan.explicit_solution("realistic") is None
    fr = rgan.solve_fully_robust(np.array([0.035, 0.055]), 0.015, np.diag([0.0225, 0.1225]), 1.0, 1.0)
    assert np.allclose(fr["drift"], np.array([0.035, 0.055]) - fr["pi"] / 2.0, atol=1e-12)
    lo, hi = rgan.no_trade_bounds(0.04, 0.35, 0.5, 0.01)
    assert lo < 0.04 / (0.5 * 0.35**2) < hi


def test_simulate_shape_and_seed():
    p = rgan.simulate("AS", 16, seed=3)
    assert p.shape == (66, 16, 2)
    assert np.all(p[0] == 1.0)
    assert np.array_equal(p, rgan.simulate("AS", 16, seed=3))
    assert not np.array_equal(p, rgan.simulate("AS", 16, seed=4))


def test_reference_evaluation_cash_anchor():
    cfg = rgan.preset("small-cost-5.5", pool="none", scale=0.01)
    rep = rgan.evaluate_reference(cfg)
    by_name = {s["strategy"]: s for s in rep["strategies"]}
    assert set(by_name) == {"cash", "merton", "no_trade"}
    assert abs(by_name["cash"]["E_u"]["value"] - 2.0151) < 5e-5


def test_tiny_run(tmp_path, monkeypatch):
    monkeypatch.setenv("RGAN_OUTPUT_ROOT", str(tmp_path))
    cfg = rgan.preset("sigma-1d", scale=0.001, epochs=2, batch=40, n_steps=5, hidden=[4], pool="none")
    rep = rgan.run(cfg, fresh=True)
    names = [s["strategy"] for s in rep["strategies"]]
    assert names[0] == "neural"
    assert math.isfinite(rep["strategies"][0]["err_rel"]["value"])
    assert (tmp_path / f"sigma-1d-{rep['config_hash']}" / "checkpoints" / "best_gen.bin").exists()
