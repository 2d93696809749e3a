"""Built-in problem configurations (same format as JSON config files)."""
from __future__ import annotations

import copy

from .errors import UnknownScenario

SCENARIOS = {
    "linear-tanh": {
        "description": "x' = -x + tanh(t): a global pullback attractor tracking Gamma from -1 to 1",
        "command": "pullback",
        "n": 1,
        "d": 1,
        "field": ["-x1 + Gamma1"],
        "forcing": ["tanh(t)"],
        "parameters": {},
        "declared_limits": {"-": [-1.0], "+": [1.0]},
        "sides": "two-sided",
        "transform": {"kind": "exp-two-sided", "alpha": 1.0},
        "controls": {"t_max": 1000.0},
        "init": {"x": [-1.0], "s": -0.999},
        "equilibria": {"box": [[-5.0, 5.0]], "grid": 11},
        "pullback": {"past": [-1.0], "target": [1.0], "delta": 1e-6, "rate": 1.0},
        "tip": {"r_lo": 0.1, "r_hi": 10.0, "tol": 1e-4},
    },
    "quadratic-rtip": {
        "description": "x' = (x + Lambda(r t))^2 - 1 with Lambda(tau) = 1.5 (tanh(tau/2) + 1): rate-induced tipping",
        "command": "tip",
        "n": 1,
        "d": 1,
        "field": ["(x1 + Gamma1)^2 - 1"],
        "forcing": ["lmax/2*(tanh(t/2) + 1)"],
        "parameters": {"lmax": 3.0},
        "declared_limits": {"-": [0.0], "+": [3.0]},
        "sides": "two-sided",
        "transform": "auto",
        "controls": {"t_max": 1000000.0},
        "init": {"x": [-1.0], "s": -0.999},
        "equilibria": {"box": [[-6.0, 6.0]], "grid": 25},
        "pullback": {"past": [-1.0], "target": [-4.0], "delta": 1e-6, "rate": 1.0},
        "tip": {"r_lo": 0.1, "r_hi": 10.0, "tol": 1e-4},
    },
    "radial-steady": {
        "description": ("radial steady states u'' + (n-1)/r u' + V(r) u + u - u^3 = 0 written as a "
                        "first-order system in r, potential V(r) = Vinf r^2/(1+r^2)"),
        "command": "simulate",
        "n": 2,
        "d": 2,
        "field": ["x2", "Gamma1*x2 + Gamma2*x1 + x1 - x1^3"],
        "forcing": ["(1 - n)/t", "-Vinf*t^2/(1 + t^2)"],
        "parameters": {"n": 3.0, "Vinf": -3.0},
        "declared_limits": {"+": [0.0, 3.0]},
        "sides": "future-only",
        "transform": "auto",
        "controls": {"t_max": 99.0, "dt_out": 1.0},
        "init": {"x": [1.5, 0.0], "t": 1.0},
        "equilibria": {"box": [[-3.0, 3.0], [-3.0, 3.0]], "grid": 7, "sides": ["+"]},
    },
}


def names() -> list:
    return list(SCENARIOS)


def get(name: str) -> dict:
    try:
        cfg = copy.deepcopy(SCENARIOS[name])
    except KeyError:
        raise UnknownScenario(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}") from None
    cfg["name"] = name
    return cfg
