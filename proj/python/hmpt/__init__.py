"""Hidden-Markov Polya tree density estimation and two-sample comparison."""

import json

from ._core import Fit, HmptError, scenario_names, simulate

__all__ = ["Fit", "HmptError", "fit_density", "fit_twosample", "simulate", "scenario_names"]

# Keyword shortcuts and where they live in the JSON run config.
_SHORTCUTS = {
    "particles": ("smc", "particles"),
    "seed": ("smc", "seed"),
    "max_depth": ("smc", "max_depth"),
    "min_count": ("smc", "min_count"),
    "kappa": ("smc", "kappa"),
    "grid": ("prior", "n_l"),
    "eta": ("prior", "eta"),
    "spike": ("prior", "spike"),
    "scaling": ("io", "scaling"),
}


def _config(config, overrides):
    cfg = json.loads(json.dumps(config or {}))
    for key, value in overrides.items():
        if key == "model":
            cfg.setdefault("model", {})["kind"] = value
            continue
        if key not in _SHORTCUTS:
            raise TypeError(f"unknown option '{key}'")
        section, name = _SHORTCUTS[key]
        cfg.setdefault(section, {})[name] = value
    return json.dumps(cfg)


def fit_density(x, config=None, threads=1, **overrides):
    """Fit a density to the rows of x. Defaults: APT model, N_L=32, M=1000, eta=0.01."""
    return Fit([x], _config(config, overrides), False, threads)


def fit_twosample(x1, x2, config=None, threads=1, **overrides):
    """Compare two samples under the multi-resolution scanning model. Defaults: eta=0.1."""
    return Fit([x1, x2], _config(config, overrides), True, threads)
