"""Robust utility optimization with adversarially trained markets."""

import json

from . import _core
from ._core import (
    merton_weight,
    no_trade_bounds,
    preset_names,
    simulate as _simulate,
    solve_1d_robust_vol,
    solve_fully_robust,
    solve_multid_robust_vol,
)

__all__ = [
    "preset",
    "preset_names",
    "config_hash",
    "explicit_solution",
    "simulate",
    "evaluate_reference",
    "run",
    "solve_1d_robust_vol",
    "solve_multid_robust_vol",
    "solve_fully_robust",
    "merton_weight",
    "no_trade_bounds",
]


def _dump(config):
    if isinstance(config, str):
        return json.dumps({"preset": config})
    return json.dumps(config)


def preset(name, **overrides):
    """Config dict for a named preset, with keyword overrides applied."""
    cfg = json.loads(_core.preset_json(name))
    cfg.update(overrides)
    return json.loads(_core.normalize_config(json.dumps(cfg)))


def config_hash(config):
    return _core.config_hash(_dump(config))


def explicit_solution(config):
    return _core.explicit_solution(_dump(config))


def simulate(config, n_paths, seed=0):
    """Reference-market prices, shape (n_steps + 1, n_paths, d)."""
    return _simulate(_dump(config), n_paths, seed)


def evaluate_reference(config):
    """Cash, Merton, explicit and no-trade strategies; no training."""
    return json.loads(_core.evaluate_reference(_dump(config)))


def run(config, fresh=False):
    """Train, evaluate and write artifacts; returns the report."""
    return json.loads(_core.run(_dump(config), fresh))
