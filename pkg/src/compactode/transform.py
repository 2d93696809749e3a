"""Compactification transforms s = g(t), t = h(s) and the s-dynamics γ(s).

A transform squeezes the time line (or a half line) into a bounded
s-interval.  The compactified flow runs s' = γ(s) = ġ(h(s)) = 1/h'(s), which
vanishes at the compact ends s = ±1.

The exponential and algebraic families are written in terms of the gaps
u = 1 − s and v = 1 + s.  Near a compact end the gap is tiny, and computing
it as ``1 - s`` from a rounded s would lose all relative precision, so
``g`` returns the gaps directly (closed form, or by inverting h in the
log-gap variable).  ``g_dot`` and the condition checks then stay accurate
out to |t| = 2^40.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import expr as ex
from .errors import (
    ConfigError,
    DegenerateLimits,
    DomainError,
    NonPositiveOrder,
    NonPositiveRate,
    NotMonotone,
    OutOfDomain,
    TransformError,
    Unsupported,
)
from .problem import ForcingProfile, TOL_LIMIT, estimate_limits

END_S = {"+": 1.0, "-": -1.0}
W_MIN = -745.0          # log of the smallest subnormal double
SAMPLE_KS = range(4, 41)


def sampled_limit(fn: Callable[[float], float], side: str, tol: float = 1e-6):
    """Limit of ``fn`` at ±∞ from samples at ±2^k, or None.

    Samples stop at the first non-finite value or domain error.  The last
    three finite samples must agree within ``tol`` (relative to max(1,|v|)).
    """
    sgn = 1.0 if side == "+" else -1.0
    vals = []
    for k in SAMPLE_KS:
        try:
            v = fn(sgn * 2.0 ** k)
        except (DomainError, ZeroDivisionError, OverflowError):
            break
        if not math.isfinite(v):
            break
        vals.append(v)
    if len(vals) < 3:
        return None
    a, b, c = vals[-3:]
    scale = max(1.0, abs(c))
    if max(abs(a - b), abs(b - c), abs(a - c)) <= tol * scale:
        return c
    return None


class Transform:
    """Common interface.  Subclasses set ``kind``, ``s_domain``, ``t_domain``."""

    kind = "abstract"
    s_domain = (-1.0, 1.0)
    t_domain = (-math.inf, math.inf)
    builtin = False         # analytic endpoint limits available

    # --- sides and domains

    @property
    def ends(self) -> tuple:
        out = []
        if self.s_domain[0] == -1.0:
            out.append("-")
        if self.s_domain[1] == 1.0:
            out.append("+")
        return tuple(out)

    @property
    def sides(self) -> str:
        e = self.ends
        return "two-sided" if len(e) == 2 else ("future-only" if e == ("+",) else "past-only")

    def _interior(self, s: float) -> None:
        lo, hi = self.s_domain
        if not (lo <= s <= hi) or s in (-1.0, 1.0):
            raise OutOfDomain(f"s={s!r} is not in the interior of {self.s_domain} (t=±inf has no finite image)")

    def _check_t(self, t: float) -> None:
        lo, hi = self.t_domain
        if not (lo <= t <= hi) or not math.isfinite(t):
            raise OutOfDomain(f"t={t!r} outside transform t-domain {self.t_domain}")

    def _in_s_domain(self, s: float) -> None:
        lo, hi = self.s_domain
        if not (lo <= s <= hi):
            raise OutOfDomain(f"s={s!r} outside {self.s_domain}")

    # --- interface

    def h(self, s: float) -> float:
        raise NotImplementedError

    def h_prime(self, s: float) -> float:
        self._interior(s)
        return 1.0 / self.gamma(s)

    def g(self, t: float) -> float:
        raise NotImplementedError

    def g_dot(self, t: float) -> float:
        raise NotImplementedError

    def accel_ratio(self, t: float) -> float:
        """g̈(t)/ġ(t), which equals γ'(g(t))."""
        raise NotImplementedError

    def gamma(self, s: float) -> float:
        raise NotImplementedError

    def gamma_prime(self, s: float) -> float:
        raise NotImplementedError

    def endpoint_slope(self, side: str) -> float:
        """γ' at the compact end of ``side`` (the extra exponent l_s)."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.describe().items() if k != "kind")
        return f"<Transform {self.kind} {args}>"


# ---------------------------------------------------------------------------
# exponential and algebraic families

class _GapFamily(Transform):
    """Shared machinery: h, γ, γ' in terms of (s, u=1−s, v=1+s)."""

    builtin = True
    closed_form = False

    def _suv(self, s):
        return s, 1.0 - s, 1.0 + s

    # family hooks
    def _h_suv(self, s, u, v):
        raise NotImplementedError

    def _gam_suv(self, s, u, v):
        raise NotImplementedError

    def _gamp_suv(self, s, u, v):
        raise NotImplementedError

    def _closed_gap(self, t):
        return None

    # public API

    def h(self, s):
        self._interior(s)
        return self._h_suv(*self._suv(s))

    def gamma(self, s):
        self._in_s_domain(s)
        if s in (-1.0, 1.0):
            return 0.0
        return self._gam_suv(*self._suv(s))

    def gamma_prime(self, s):
        self._in_s_domain(s)
        if s == 1.0:
            return self.endpoint_slope("+")
        if s == -1.0:
            return self.endpoint_slope("-")
        return self._gamp_suv(*self._suv(s))

    def g_gap(self, t: float):
        """(s, 1−s, 1+s) at t with the small gap accurate to full precision."""
        self._check_t(t)
        if t == 0.0:
            return 0.0, 1.0, 1.0
        closed = self._closed_gap(t)
        if closed is not None:
            return closed
        return self._invert(t)

    def g(self, t):
        return self.g_gap(t)[0]

    def g_dot(self, t):
        s, u, v = self.g_gap(t)
        if u == 0.0 or v == 0.0:
            return 0.0
        return self._gam_suv(s, u, v)

    def accel_ratio(self, t):
        s, u, v = self.g_gap(t)
        if u == 0.0:
            return self.endpoint_slope("+")
        if v == 0.0:
            return self.endpoint_slope("-")
        return self._gamp_suv(s, u, v)

    def _from_w(self, side, w):
        if side == "+":
            u = math.exp(w)
            s = -math.expm1(w)
            return s, u, 2.0 - u
        v = math.exp(w)
        s = math.expm1(w)
        return s, 2.0 - v, v

    def _invert(self, t):
        """Solve h(s) = t in the log-gap variable w = ln(1∓s)."""
        side = "+" if t > 0 else "-"
        # along w from 0 towards W_MIN, h runs monotonically from 0 to ±∞
        sgn = 1.0 if side == "+" else -1.0
        target = abs(t)

        def H(w):
            return sgn * self._h_gap(side, w)

        lo, hi = W_MIN, 0.0          # H(lo) >= target > H(hi) = 0
        if H(lo) < target:
            return self._from_w(side, lo)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if H(mid) >= target:
                lo = mid
            else:
                hi = mid
        w = 0.5 * (lo + hi)
        # one guarded Newton polish: dH/dw = h'(s)·ds/dw·sgn = −gap/γ
        s, u, v = self._from_w(side, w)
        gam = self._gam_suv(s, u, v)
        if gam > 0:
            gap = u if side == "+" else v
            slope = -gap / gam
            if slope != 0:
                w_new = w - (H(w) - target) / slope
                if lo <= w_new <= hi:
                    w = w_new
        return self._from_w(side, w)


class ExponentialTransform(_GapFamily):
    """h(s) = ln(1+s)/α⁻ − ln(1−s)/α⁺, restricted to one side when a rate is absent.

    γ(s) = (1−s)(1+s)/(p(1−s) + q(1+s)) with p = 1/α⁻, q = 1/α⁺.
    """

    def __init__(self, alpha_minus: float | None, alpha_plus: float | None, kind: str):
        for a in (alpha_minus, alpha_plus):
            if a is not None and not (a > 0 and math.isfinite(a)):
                raise NonPositiveRate(f"exponential rate must be positive and finite, got {a!r}")
        self.alpha_minus = alpha_minus
        self.alpha_plus = alpha_plus
        self.kind = kind
        self.p = 0.0 if alpha_minus is None else 1.0 / alpha_minus
        self.q = 0.0 if alpha_plus is None else 1.0 / alpha_plus
        if alpha_minus is None:
            self.s_domain, self.t_domain = (0.0, 1.0), (0.0, math.inf)
        elif alpha_plus is None:
            self.s_domain, self.t_domain = (-1.0, 0.0), (-math.inf, 0.0)
        self.closed_form = kind in ("exp-two-sided", "exp-right", "exp-left")

    def describe(self):
        d = {"kind": self.kind}
        if self.kind == "exp-two-sided":
            d["alpha"] = self.alpha_plus
        elif self.kind == "exp-right":
            d["alpha"] = self.alpha_plus
        elif self.kind == "exp-left":
            d["alpha"] = self.alpha_minus
        else:
            d["alpha_minus"], d["alpha_plus"] = self.alpha_minus, self.alpha_plus
        return d

    def _h_suv(self, s, u, v):
        out = 0.0
        if self.p:
            out += self.p * math.log(v)
        if self.q:
            out -= self.q * math.log(u)
        return out

    def _h_gap(self, side, w):
        s, u, v = self._from_w(side, w)
        if side == "+":
            return (self.p * math.log(v) if self.p else 0.0) - self.q * w
        return self.p * w - (self.q * math.log(u) if self.q else 0.0)

    def _gam_suv(self, s, u, v):
        return u * v / (self.p * u + self.q * v)

    def _gamp_suv(self, s, u, v):
        D = self.p * u + self.q * v
        return (-2.0 * s * D - u * v * (self.q - self.p)) / (D * D)

    def endpoint_slope(self, side):
        if side == "+" and self.alpha_plus is not None:
            return -self.alpha_plus
        if side == "-" and self.alpha_minus is not None:
            return self.alpha_minus
        raise OutOfDomain(f"{self.kind} has no compact end on side {side!r}")

    def _closed_gap(self, t):
        if not self.closed_form:
            return None
        if self.kind == "exp-two-sided":
            a = self.alpha_plus
            e = math.exp(-a * abs(t))
            s = (1.0 - e) / (1.0 + e)
            small, big = 2.0 * e / (1.0 + e), 2.0 / (1.0 + e)
            return (s, small, big) if t > 0 else (-s, big, small)
        if self.kind == "exp-right":
            a = self.alpha_plus
            u = math.exp(-a * t)
            return -math.expm1(-a * t), u, 2.0 - u
        a = self.alpha_minus
        v = math.exp(a * t)
        return math.expm1(a * t), 2.0 - v, v


class AlgebraicTransform(_GapFamily):
    """h(s) = s (1+s)^(−a) (1−s)^(−b) with a = 1/α⁻, b = 1/α⁺ (zero on a free side).

    γ(s) = (1+s)^(a+1) (1−s)^(b+1) / B(s),
    B(s) = (1+s)(1−s) − a s(1−s) + b s(1+s).
    """

    def __init__(self, alpha_minus: float | None, alpha_plus: float | None, kind: str):
        for a in (alpha_minus, alpha_plus):
            if a is not None and not (a > 0 and math.isfinite(a)):
                raise NonPositiveOrder(f"algebraic order must be positive and finite, got {a!r}")
        self.alpha_minus = alpha_minus
        self.alpha_plus = alpha_plus
        self.kind = kind
        self.a = 0.0 if alpha_minus is None else 1.0 / alpha_minus
        self.b = 0.0 if alpha_plus is None else 1.0 / alpha_plus
        if alpha_minus is None:
            self.s_domain, self.t_domain = (0.0, 1.0), (0.0, math.inf)
        elif alpha_plus is None:
            self.s_domain, self.t_domain = (-1.0, 0.0), (-math.inf, 0.0)
        one = (alpha_minus in (None, 1.0)) and (alpha_plus in (None, 1.0))
        self.closed_form = one and kind in ("alg-two-sided", "alg-right", "alg-left")

    def describe(self):
        d = {"kind": self.kind}
        if self.kind in ("alg-two-sided", "alg-right"):
            d["alpha"] = self.alpha_plus
        elif self.kind == "alg-left":
            d["alpha"] = self.alpha_minus
        else:
            d["alpha_minus"], d["alpha_plus"] = self.alpha_minus, self.alpha_plus
        return d

    def _h_suv(self, s, u, v):
        return s * v ** (-self.a) * u ** (-self.b)

    def _h_gap(self, side, w):
        s, u, v = self._from_w(side, w)
        if s == 0.0:
            return 0.0
        if side == "+":
            lg = math.log(s) - self.a * math.log(v) - self.b * w
            return math.exp(lg) if lg < 700 else math.inf
        lg = math.log(-s) - self.a * w - self.b * math.log(u)
        return -math.exp(lg) if lg < 700 else -math.inf

    def _B(self, s, u, v):
        return u * v - self.a * s * u + self.b * s * v

    def _gam_suv(self, s, u, v):
        a, b = self.a, self.b
        return v ** (a + 1.0) * u ** (b + 1.0) / self._B(s, u, v)

    def _gamp_suv(self, s, u, v):
        a, b = self.a, self.b
        B = self._B(s, u, v)
        dN = (a + 1.0) * v ** a * u ** (b + 1.0) - (b + 1.0) * v ** (a + 1.0) * u ** b
        dB = -2.0 * s - a + 2.0 * a * s + b + 2.0 * b * s
        gam = v ** (a + 1.0) * u ** (b + 1.0) / B
        return (dN - gam * dB) / B

    def endpoint_slope(self, side):
        if side in self.ends:
            return 0.0
        raise OutOfDomain(f"{self.kind} has no compact end on side {side!r}")

    def _closed_gap(self, t):
        if not self.closed_form:
            return None
        if self.kind == "alg-two-sided":
            at = abs(t)
            r = math.sqrt(1.0 + 4.0 * at * at)
            s = 2.0 * at / (1.0 + r)
            small = (1.0 + 1.0 / (r + 2.0 * at)) / (1.0 + r)
            big = 2.0 - small
            return (s, small, big) if t > 0 else (-s, big, small)
        if self.kind == "alg-right":
            return t / (1.0 + t), 1.0 / (1.0 + t), (1.0 + 2.0 * t) / (1.0 + t)
        return t / (1.0 - t), (1.0 - 2.0 * t) / (1.0 - t), 1.0 / (1.0 - t)


_SIDEDNESS = ("two-sided", "right", "left")


def _rates(alpha, sidedness):
    if isinstance(alpha, (tuple, list)):
        if sidedness != "two-sided":
            raise ConfigError("two rates require a two-sided transform")
        am, ap = (float(a) for a in alpha)
        return am, ap, "two-rate"
    if sidedness not in _SIDEDNESS:
        raise ConfigError(f"sidedness must be one of {_SIDEDNESS}")
    a = float(alpha)
    return (a if sidedness != "right" else None), (a if sidedness != "left" else None), sidedness


def make_exponential(alpha, sidedness: str = "two-sided") -> ExponentialTransform:
    """Exponential transform; ``alpha`` may be a (α⁻, α⁺) pair for two rates."""
    am, ap, kind = _rates(alpha, sidedness)
    for a in (am, ap):
        if a is not None and not a > 0:
            raise NonPositiveRate(f"exponential rate must be positive, got {a!r}")
    return ExponentialTransform(am, ap, f"exp-{kind}")


def make_algebraic(alpha, sidedness: str = "two-sided") -> AlgebraicTransform:
    """Algebraic transform; ``alpha`` may be a (α⁻, α⁺) pair for two orders."""
    am, ap, kind = _rates(alpha, sidedness)
    for a in (am, ap):
        if a is not None and not a > 0:
            raise NonPositiveOrder(f"algebraic order must be positive, got {a!r}")
    return AlgebraicTransform(am, ap, f"alg-{kind}")


# ---------------------------------------------------------------------------
# transforms driven by numerical inversion of g on t

class _TInverse(Transform):
    """g given as a function of t; h found by bisection on t (cached)."""

    T_BRACKET = 2.0 ** 40

    def _g_raw(self, t):
        raise NotImplementedError

    def _t_bracket(self):
        lo, hi = self.t_domain
        return max(lo, -self.T_BRACKET), min(hi, self.T_BRACKET)

    def h(self, s):
        self._interior(s)
        cache = self.__dict__.setdefault("_hcache", {})
        if s in cache:
            return cache[s]
        lo, hi = self._t_bracket()
        if self._g_raw(lo) >= s:
            t = lo
        elif self._g_raw(hi) <= s:
            t = hi
        else:
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid in (lo, hi):
                    break
                if self._g_raw(mid) < s:
                    lo = mid
                else:
                    hi = mid
            t = 0.5 * (lo + hi)
            gd = self.g_dot(t)
            if gd > 0:
                t_new = t - (self._g_raw(t) - s) / gd
                if lo <= t_new <= hi:
                    t = t_new
        if len(cache) > 100000:
            cache.clear()
        cache[s] = t
        return t

    def g(self, t):
        self._check_t(t)
        return self._g_raw(t)

    def gamma(self, s):
        self._in_s_domain(s)
        if s in (-1.0, 1.0):
            return 0.0
        return self.g_dot(self.h(s))

    def gamma_prime(self, s):
        self._in_s_domain(s)
        if s == 1.0:
            return self.endpoint_slope("+")
        if s == -1.0:
            return self.endpoint_slope("-")
        return self.accel_ratio(self.h(s))

    def endpoint_slope(self, side):
        if side not in self.ends:
            raise OutOfDomain(f"{self.kind} has no compact end on side {side!r}")
        cache = self.__dict__.setdefault("_slope", {})
        if side not in cache:
            cache[side] = sampled_limit(self.accel_ratio, side)
        val = cache[side]
        if val is None:
            raise TransformError(f"g''/g' has no numerical limit on side {side!r}")
        return val


class GammaBasedTransform(_TInverse):
    """g built from one monotone forcing component, normalised to [-1, 1] (or a half)."""

    kind = "gamma-based"

    def __init__(self, p: ForcingProfile, component: int = 0, sides: str | None = None):
        if not 0 <= component < p.d:
            raise ConfigError(f"component index {component} out of range for d={p.d}")
        self.profile = p
        self.component = component
        sides = sides or p.sides
        self._sides = sides
        i = component
        self._check_sign_change(sides)
        if sides == "two-sided":
            lm, lp = estimate_limits(p, "-")[i], estimate_limits(p, "+")[i]
            if abs(lp - lm) <= TOL_LIMIT:
                raise DegenerateLimits(f"Gamma{i + 1} has equal limits {lm!r} at both ends")
            self._shift, self._scale = lp + lm, 2.0 / (lp - lm)   # g = (2Γ − Γ⁺ − Γ⁻)/(Γ⁺ − Γ⁻)
            self._shift *= 0.5
            self.limits = (lm, lp)
        elif sides == "future-only":
            g0 = p.value(0.0)[i]
            lp = estimate_limits(p, "+")[i]
            if abs(lp - g0) <= TOL_LIMIT:
                raise DegenerateLimits(f"Gamma{i + 1}(0) equals its future limit")
            self._shift, self._scale = g0, 1.0 / (lp - g0)
            self.s_domain, self.t_domain = (0.0, 1.0), (0.0, math.inf)
            self.limits = (None, lp)
        elif sides == "past-only":
            g0 = p.value(0.0)[i]
            lm = estimate_limits(p, "-")[i]
            if abs(lm - g0) <= TOL_LIMIT:
                raise DegenerateLimits(f"Gamma{i + 1}(0) equals its past limit")
            self._shift, self._scale = g0, -1.0 / (lm - g0)
            self.s_domain, self.t_domain = (-1.0, 0.0), (-math.inf, 0.0)
            self.limits = (lm, None)
        else:
            raise ConfigError(f"unknown sides {sides!r}")
        self._check_monotone()

    def describe(self):
        return {"kind": self.kind, "component": self.component, "sides": self._sides}

    def _check_sign_change(self, sides):
        # a rate of both signs rules the component out before its limits are looked at
        ts = [0.0] + [sg * 2.0 ** k for k in range(-4, 41) for sg in (1.0, -1.0)]
        if sides == "future-only":
            ts = [t for t in ts if t >= 0]
        elif sides == "past-only":
            ts = [t for t in ts if t <= 0]
        rates = []
        for t in ts:
            try:
                rates.append(self.profile.rate(t)[self.component])
            except DomainError:
                continue
        if any(r > 0 for r in rates) and any(r < 0 for r in rates):
            raise NotMonotone(f"Gamma{self.component + 1} changes direction")

    def _check_monotone(self):
        ts = [0.0]
        for k in range(-4, 41):
            ts += [2.0 ** k, -(2.0 ** k)]
        lo, hi = self.t_domain
        for t in ts:
            if not lo <= t <= hi:
                continue
            try:
                gd = self.g_dot(t)
            except DomainError:
                continue
            if gd < 0 or (gd == 0 and abs(t) < 1.0):
                raise NotMonotone(
                    f"Gamma{self.component + 1} is not strictly monotone (normalised rate {gd:.3g} at t={t:g})")

    def _g_raw(self, t):
        return (self.profile.value(t)[self.component] - self._shift) * self._scale

    def g_dot(self, t):
        return self.profile.rate(t)[self.component] * self._scale

    def accel_ratio(self, t):
        _, d1, d2 = self.profile.rate_and_accel(self.component, t)
        if d1 == 0:
            raise DomainError("zero forcing rate")
        return d2 / d1


class CustomTransform(_TInverse):
    """User-supplied g(t) and/or h(s) expressions.

    ``log_speed`` (an expression in t for ln ġ) is optional; when present the
    ratio g̈/ġ is its t-derivative, which stays finite long after ġ itself
    underflows.  Monotonicity and a vanishing ġ at the ends are checked on construction.
    """

    kind = "custom"

    def __init__(self, g: str | ex.Expr | None = None, h: str | ex.Expr | None = None,
                 log_speed: str | ex.Expr | None = None, sides: str = "two-sided",
                 params=None, validate: bool = True):
        if g is None and h is None:
            raise ConfigError("custom transform needs g or h")
        parse = lambda e: ex.parse(e) if isinstance(e, str) else e  # noqa: E731
        self.params = dict(params or {})
        self.g_expr = parse(g) if g is not None else None
        self.h_expr = parse(h) if h is not None else None
        self.log_speed = parse(log_speed) if log_speed is not None else None
        for e, var in ((self.g_expr, "t"), (self.h_expr, "s"), (self.log_speed, "t")):
            if e is not None:
                ex.check_vars(e, {var, *self.params}, "custom transform")
        self._sides = sides
        if sides == "future-only":
            self.s_domain, self.t_domain = (None, 1.0), (0.0, math.inf)
        elif sides == "past-only":
            self.s_domain, self.t_domain = (-1.0, None), (-math.inf, 0.0)
        elif sides == "two-sided":
            self.s_domain = (-1.0, 1.0)
        else:
            raise ConfigError(f"unknown sides {sides!r}")
        if None in self.s_domain:
            s0 = self._g_raw(0.0) if self.g_expr is not None else self._hinv(0.0)
            self.s_domain = tuple(s0 if x is None else x for x in self.s_domain)
        if validate:
            self._validate()

    def describe(self):
        d = {"kind": self.kind, "sides": self._sides}
        for k, e in (("g", self.g_expr), ("h", self.h_expr), ("log_speed", self.log_speed)):
            if e is not None:
                d[k] = ex.render(e)
        return d

    def _env(self, name, val):
        env = dict(self.params)
        env[name] = val
        return env

    def _hinv(self, t):
        # s with h(s) = t, bisection on the s-domain
        lo, hi = self.s_domain
        lo = -1.0 if lo is None else lo
        hi = 1.0 if hi is None else hi
        hs = lambda s: ex.evaluate(self.h_expr, self._env("s", s))  # noqa: E731
        a, b = lo, hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            if mid in (a, b):
                break
            try:
                val = hs(mid)
            except DomainError:
                val = math.inf if mid > 0 else -math.inf
            if val < t:
                a = mid
            else:
                b = mid
        return 0.5 * (a + b)

    def _g_raw(self, t):
        if self.g_expr is not None:
            return ex.evaluate(self.g_expr, self._env("t", t))
        return self._hinv(t)

    def h(self, s):
        self._interior(s)
        if self.h_expr is not None:
            return ex.evaluate(self.h_expr, self._env("s", s))
        return super().h(s)

    def h_prime(self, s):
        self._interior(s)
        if self.h_expr is not None:
            return ex.deriv(self.h_expr, "s", self._env("s", s))
        return 1.0 / self.gamma(s)

    def g_dot(self, t):
        if self.log_speed is not None:
            lv = ex.evaluate(self.log_speed, self._env("t", t))
            return math.exp(lv) if lv > -745 else 0.0
        if self.g_expr is not None:
            return ex.deriv(self.g_expr, "t", self._env("t", t))
        return 1.0 / ex.deriv(self.h_expr, "s", self._env("s", self._hinv(t)))

    def accel_ratio(self, t):
        if self.log_speed is not None:
            return ex.deriv(self.log_speed, "t", self._env("t", t))
        if self.g_expr is not None:
            _, d1, d2 = ex.second_deriv(self.g_expr, "t", self._env("t", t))
            if d1 == 0:
                raise DomainError("g' vanished")
            return d2 / d1
        s = self._hinv(t)
        _, h1, h2 = ex.second_deriv(self.h_expr, "s", self._env("s", s))
        return -h2 / (h1 * h1)

    def gamma(self, s):
        self._in_s_domain(s)
        if s in (-1.0, 1.0):
            return 0.0
        if self.h_expr is not None:
            return 1.0 / ex.deriv(self.h_expr, "s", self._env("s", s))
        return self.g_dot(self.h(s))

    def _validate(self):
        lo, hi = self.s_domain
        grid = np.linspace(lo, hi, 1001)[1:-1]
        if self.h_expr is not None:
            vals = [self.h(float(s)) for s in grid]
            if np.any(np.diff(vals) <= 0):
                raise NotMonotone("custom h is not strictly increasing on the s-domain")
        else:
            tlo, thi = self.t_domain
            ts = np.linspace(max(tlo, -50.0), min(thi, 50.0), 1001)
            vals = [self._g_raw(float(t)) for t in ts]
            if np.any(np.diff(vals) < 0):
                raise NotMonotone("custom g is not monotone")
        for side in self.ends:
            t = (1.0 if side == "+" else -1.0) * 2.0 ** 20
            try:
                gd = self.g_dot(t)
            except DomainError:
                continue
            if gd > 1e-3:
                raise TransformError(f"g' does not vanish towards the {side!r} end")


def make_gamma_based(p: ForcingProfile, component: int = 0, sides: str | None = None) -> GammaBasedTransform:
    return GammaBasedTransform(p, component, sides)


def make_custom(g=None, h=None, log_speed=None, sides="two-sided", params=None) -> CustomTransform:
    return CustomTransform(g, h, log_speed, sides, params)


_KINDS = {
    "exp-two-sided": (make_exponential, "two-sided"),
    "exp-right": (make_exponential, "right"),
    "exp-left": (make_exponential, "left"),
    "alg-two-sided": (make_algebraic, "two-sided"),
    "alg-right": (make_algebraic, "right"),
    "alg-left": (make_algebraic, "left"),
}


def from_spec(spec: dict, profile: ForcingProfile | None = None) -> Transform:
    """Build a transform from its JSON description."""
    kind = spec.get("kind")
    if kind in _KINDS:
        maker, sided = _KINDS[kind]
        if "alpha" not in spec:
            raise ConfigError(f"transform {kind} needs 'alpha'")
        return maker(spec["alpha"], sided)
    if kind in ("exp-two-rate", "alg-two-rate"):
        maker = make_exponential if kind.startswith("exp") else make_algebraic
        try:
            return maker((spec["alpha_minus"], spec["alpha_plus"]))
        except KeyError:
            raise ConfigError(f"transform {kind} needs 'alpha_minus' and 'alpha_plus'") from None
    if kind == "gamma-based":
        if profile is None:
            raise ConfigError("gamma-based transform needs the forcing profile")
        return make_gamma_based(profile, int(spec.get("component", 0)), spec.get("sides"))
    if kind == "custom":
        return make_custom(spec.get("g"), spec.get("h"), spec.get("log_speed"),
                           spec.get("sides", "two-sided"), spec.get("params"))
    raise ConfigError(f"unknown transform kind {kind!r}")


def scaled(tr: Transform, r: float) -> Transform:
    """Exponential rates multiplied by r (algebraic orders are scale free)."""
    if isinstance(tr, ExponentialTransform):
        am = None if tr.alpha_minus is None else tr.alpha_minus * r
        ap = None if tr.alpha_plus is None else tr.alpha_plus * r
        return ExponentialTransform(am, ap, tr.kind)
    if isinstance(tr, AlgebraicTransform):
        return tr
    raise Unsupported(f"cannot rescale a {tr.kind} transform")
