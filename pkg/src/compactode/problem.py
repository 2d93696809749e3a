"""Nonautonomous problem definition: x' = f(x, Γ(t)) and its limit systems."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .errors import (
    ConfigError,
    Disagreement,
    DomainError,
    NoLimit,
    SideUnavailable,
)

SIDES = ("two-sided", "future-only", "past-only")
TOL_LIMIT = 1e-8
K0, K_MAX = 4, 40

_RESERVED = re.compile(r"^(t|x\d+|Gamma\d+)$")


def side_sign(side: str) -> float:
    if side == "+":
        return 1.0
    if side == "-":
        return -1.0
    raise ValueError(f"side must be '+' or '-', got {side!r}")


def _check_params(params: Mapping[str, float]) -> dict:
    out = {}
    for k, v in params.items():
        if _RESERVED.match(k) or k in ex.FUNCTIONS:
            raise ConfigError(f"parameter name {k!r} is reserved")
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(f"parameter {k!r} is not finite")
        out[k] = v
    return out


def _as_exprs(items) -> tuple:
    return tuple(ex.parse(c) if isinstance(c, str) else c for c in items)


@dataclass(frozen=True, eq=False)
class ForcingProfile:
    """Γ(t) = (Γ1(t), ..., Γd(t)), optionally evaluated at a scaled time r·t.

    ``declared_limits`` maps a side ('+' or '-') to the known limit vector.
    """

    components: tuple
    params: Mapping[str, float] = field(default_factory=dict)
    declared_limits: Mapping[str, tuple] | None = None
    sides: str = "two-sided"
    time_scale: float = 1.0

    def __post_init__(self):
        comps = _as_exprs(self.components)
        if not comps:
            raise ConfigError("forcing needs at least one component")
        params = _check_params(self.params)
        for i, c in enumerate(comps):
            ex.check_vars(c, {"t", *params}, f"forcing component Gamma{i + 1}")
        if self.sides not in SIDES:
            raise ConfigError(f"sides must be one of {SIDES}")
        if not self.time_scale > 0:
            raise ConfigError("time scale (rate) must be positive")
        declared = None
        if self.declared_limits:
            declared = {}
            for side, vals in self.declared_limits.items():
                side_sign(side)
                vals = tuple(float(v) for v in vals)
                if len(vals) != len(comps) or not all(map(math.isfinite, vals)):
                    raise ConfigError(f"declared limit for side {side!r} must be {len(comps)} finite values")
                declared[side] = vals
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "declared_limits", declared)
        object.__setattr__(self, "_fn", ex.compile_exprs(comps, ["t"], params))

    @property
    def d(self) -> int:
        return len(self.components)

    @property
    def allowed_sides(self) -> tuple:
        return {"two-sided": ("-", "+"), "future-only": ("+",), "past-only": ("-",)}[self.sides]

    def with_rate(self, r: float) -> "ForcingProfile":
        """Profile t ↦ Γ(r·t) (rate multiplies any existing scale)."""
        return replace(self, time_scale=self.time_scale * float(r))

    def value_tuple(self, t: float) -> tuple:
        return self._fn(self.time_scale * t)

    def value(self, t: float) -> np.ndarray:
        return np.array(self._fn(self.time_scale * t))

    def rate(self, t: float) -> np.ndarray:
        """Γ̇(t), exact via forward mode."""
        env = dict(self.params)
        env["t"] = self.time_scale * t
        return np.array([self.time_scale * ex.deriv(c, "t", env) for c in self.components])

    def rate_and_accel(self, i: int, t: float) -> tuple:
        """(Γi, Γ̇i, Γ̈i) at t."""
        env = dict(self.params)
        env["t"] = self.time_scale * t
        v, d1, d2 = ex.second_deriv(self.components[i], "t", env)
        r = self.time_scale
        return v, r * d1, r * r * d2


def forcing_value(p: ForcingProfile, t: float) -> np.ndarray:
    return p.value(t)


def forcing_rate(p: ForcingProfile, t: float) -> np.ndarray:
    return p.rate(t)


def limit_samples(p: ForcingProfile, side: str):
    """Γ at t = ±2^k, k = K0..K_MAX; stops early at a domain error."""
    sgn = side_sign(side)
    ts, vals = [], []
    for k in range(K0, K_MAX + 1):
        t = sgn * 2.0 ** k
        try:
            v = p.value(t)
        except DomainError:
            break
        ts.append(t)
        vals.append(v)
    return np.array(ts), np.array(vals).reshape(len(ts), p.d)


def estimate_limits(p: ForcingProfile, side: str, tol: float = TOL_LIMIT) -> np.ndarray:
    """Numerical estimate of Γ^side (the final sample), or NoLimit."""
    if side not in p.allowed_sides:
        raise SideUnavailable(f"profile is {p.sides}; side {side!r} not available")
    ts, vals = limit_samples(p, side)
    if len(ts) < K_MAX - K0 + 1:
        raise NoLimit(f"forcing not finite for |t| >= {2.0 ** (K0 + len(ts)):g} on side {side!r}")
    tail = vals[-8:]
    diffs = np.diff(tail, axis=0)
    monotone = np.all(diffs >= 0, axis=0) | np.all(diffs <= 0, axis=0)
    spread = np.ptp(tail, axis=0)
    if not np.any(monotone) and np.all(spread > tol):
        raise NoLimit(f"forcing oscillates as t -> {'+' if side == '+' else '-'}inf")
    last = vals[-3:]
    if np.max(np.ptp(last, axis=0)) > tol:
        raise NoLimit(
            f"forcing samples do not settle on side {side!r} "
            f"(last spread {np.max(np.ptp(last, axis=0)):.3g})")
    est = vals[-1]
    if p.declared_limits and side in p.declared_limits:
        decl = np.array(p.declared_limits[side])
        if np.max(np.abs(decl - est)) > tol:
            raise Disagreement(
                f"declared limit {decl.tolist()} disagrees with estimate {est.tolist()} on side {side!r}")
        return decl
    return est


@dataclass(frozen=True, eq=False)
class VectorFieldDef:
    """f(x, Γ) with components in x1..xn, Gamma1..Gammad and named parameters."""

    components: tuple
    d: int
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        comps = _as_exprs(self.components)
        if not comps:
            raise ConfigError("vector field needs at least one component")
        params = _check_params(self.params)
        n = len(comps)
        xs = [f"x{i + 1}" for i in range(n)]
        gs = [f"Gamma{j + 1}" for j in range(self.d)]
        for i, c in enumerate(comps):
            ex.check_vars(c, {*xs, *gs, *params}, f"field component f{i + 1}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "xnames", tuple(xs))
        object.__setattr__(self, "gnames", tuple(gs))
        object.__setattr__(self, "_fn", ex.compile_exprs(comps, xs + gs, params))

    @property
    def n(self) -> int:
        return len(self.components)

    def f_tuple(self, x, gamma) -> tuple:
        return self._fn(*x, *gamma)

    def f(self, x, gamma) -> np.ndarray:
        return np.array(self._fn(*x, *gamma))

    def _env(self, x, gamma) -> dict:
        env = dict(self.params)
        env.update(zip(self.xnames, map(float, x)))
        env.update(zip(self.gnames, map(float, gamma)))
        return env

    def _jac(self, env, names) -> np.ndarray:
        J = np.empty((self.n, len(names)))
        for j, name in enumerate(names):
            for i, c in enumerate(self.components):
                J[i, j] = ex.deriv(c, name, env)
        return J

    def dfdx(self, x, gamma) -> np.ndarray:
        return self._jac(self._env(x, gamma), self.xnames)

    def dfdgamma(self, x, gamma) -> np.ndarray:
        return self._jac(self._env(x, gamma), self.gnames)


@dataclass(frozen=True, eq=False)
class LimitSystem:
    """Autonomous field x ↦ f(x, Γ^side)."""

    field: VectorFieldDef
    gamma: np.ndarray
    side: str

    @property
    def n(self) -> int:
        return self.field.n

    def __call__(self, x) -> np.ndarray:
        return self.field.f(x, self.gamma)

    def jacobian(self, x) -> np.ndarray:
        return self.field.dfdx(x, self.gamma)


def limit_system(v: VectorFieldDef, p: ForcingProfile, side: str) -> LimitSystem:
    if v.d != p.d:
        raise ConfigError(f"field expects d={v.d} forcing components, profile has {p.d}")
    return LimitSystem(v, estimate_limits(p, side), side)


def make_problem(field_src: Sequence[str], forcing_src: Sequence[str],
                 params: Mapping[str, float] | None = None,
                 declared_limits=None, sides: str = "two-sided"):
    """Convenience constructor returning (VectorFieldDef, ForcingProfile)."""
    params = dict(params or {})
    fp = ForcingProfile(tuple(forcing_src), params, declared_limits, sides)
    vf = VectorFieldDef(tuple(field_src), fp.d, params)
    return vf, fp
