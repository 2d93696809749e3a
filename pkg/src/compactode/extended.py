"""Autonomous compactified system on the extended phase space U × s_domain.

    x' = f(x, Γ(h(s)))      interior,      f(x, Γ^±)   at s = ±1
    s' = γ(s)               interior,      0           at s = ±1
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conditions import LimitReport, check_condition_one, check_condition_two
from .errors import ConditionsViolated, ConfigError, OutOfDomain
from .problem import ForcingProfile, VectorFieldDef, estimate_limits
from .transform import END_S, Transform

CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class ExtendedState:
    x: np.ndarray
    s: float

    def as_vector(self) -> np.ndarray:
        return np.append(np.asarray(self.x, dtype=float), self.s)


@dataclass(frozen=True)
class EndData:
    side: str
    gamma: np.ndarray          # frozen Γ^side
    L: np.ndarray              # lim Γ̇/ġ (condition one)
    l_s: float                 # γ' at the end
    condition_one: LimitReport
    condition_two: LimitReport

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "gamma_limit": self.gamma.tolist(),
            "L": self.L.tolist(),
            "l_s": self.l_s,
            "condition_one": self.condition_one.to_dict(),
            "condition_two": self.condition_two.to_dict(),
        }


class CompactifiedSystem:
    """Built by :func:`assemble`; immutable afterwards."""

    def __init__(self, field: VectorFieldDef, forcing: ForcingProfile, transform: Transform,
                 end_data: dict):
        self.field = field
        self.forcing = forcing
        self.transform = transform
        self.end_data = end_data
        self.n = field.n
        self.s_domain = transform.s_domain
        self._frozen = {END_S[k]: tuple(float(g) for g in d.gamma) for k, d in end_data.items()}

    @property
    def ends(self) -> tuple:
        return tuple(self.end_data)

    def state(self, x, s) -> ExtendedState:
        """Validated state; s is clamped when it overshoots by at most 1e-12."""
        lo, hi = self.s_domain
        s = float(s)
        if s < lo - CLAMP_TOL or s > hi + CLAMP_TOL:
            raise OutOfDomain(f"s={s!r} outside {self.s_domain}")
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.n:
            raise ConfigError(f"state has {x.size} components, system has n={self.n}")
        return ExtendedState(x, min(max(s, lo), hi))

    def _clamp(self, s: float) -> float:
        lo, hi = self.s_domain
        return lo if s < lo else (hi if s > hi else s)

    def _forcing_at(self, s: float):
        """(Γ, ṡ, t or None) at s (already clamped)."""
        frozen = self._frozen.get(s)
        if frozen is not None:
            return frozen, 0.0, None
        tr = self.transform
        t = tr.h(s)
        return self.forcing.value_tuple(t), tr.gamma(s), t

    def rhs_vector(self, y) -> np.ndarray:
        """Right-hand side on a flat (x1..xn, s) vector; the integrator's hot path."""
        s = self._clamp(float(y[-1]))
        G, sd, _ = self._forcing_at(s)
        out = list(self.field.f_tuple(y[:-1], G))
        out.append(sd)
        return np.array(out)

    def rhs(self, state: ExtendedState):
        s = self._clamp(state.s)
        G, sd, _ = self._forcing_at(s)
        return np.array(self.field.f_tuple(state.x, G)), sd

    def jacobian(self, state: ExtendedState) -> np.ndarray:
        n = self.n
        s = self._clamp(state.s)
        x = np.asarray(state.x, dtype=float)
        G, sd, t = self._forcing_at(s)
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = self.field.dfdx(x, G)
        if t is None or sd == 0.0:
            side = "+" if s > 0 else "-"
            dG_ds = self.end_data[side].L
        else:
            dG_ds = self.forcing.rate(t) / sd
        J[:n, n] = self.field.dfdgamma(x, G) @ dG_ds
        J[n, n] = self.transform.gamma_prime(s)
        return J

    def s_lyapunov(self, side: str) -> float:
        return self.end_data[side].l_s

    def describe(self) -> dict:
        return {
            "n": self.n,
            "d": self.forcing.d,
            "transform": self.transform.describe(),
            "s_domain": list(self.s_domain),
            "ends": {k: v.to_dict() for k, v in self.end_data.items()},
        }


def end_data(p: ForcingProfile, tr: Transform, side: str) -> EndData:
    one = check_condition_one(p, tr, side)
    if not one.converged:
        raise ConditionsViolated(
            f"condition one fails on side {side!r} ({one.verdict}): {one.detail}", report=one)
    two = check_condition_two(tr, side)
    if not two.converged:
        raise ConditionsViolated(
            f"condition two fails on side {side!r} ({two.verdict}): {two.detail}", report=two)
    return EndData(side, estimate_limits(p, side), np.asarray(one.value, dtype=float),
                   float(tr.endpoint_slope(side)), one, two)


def assemble(v: VectorFieldDef, p: ForcingProfile, tr: Transform) -> CompactifiedSystem:
    """Check both transformation conditions on every compact end and build the system."""
    if v.d != p.d:
        raise ConfigError(f"field expects d={v.d} forcing components, profile has {p.d}")
    missing = [s for s in tr.ends if s not in p.allowed_sides]
    if missing:
        raise ConfigError(f"transform compactifies side(s) {missing} that the {p.sides} profile lacks")
    data = {side: end_data(p, tr, side) for side in tr.ends}
    return CompactifiedSystem(v, p, tr, data)


def rhs(sys: CompactifiedSystem, state: ExtendedState):
    return sys.rhs(state)


def jacobian(sys: CompactifiedSystem, state: ExtendedState) -> np.ndarray:
    return sys.jacobian(state)


def s_lyapunov(sys: CompactifiedSystem, side: str) -> float:
    return sys.s_lyapunov(side)
