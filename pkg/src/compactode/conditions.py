"""Transformation conditions, forcing decay classes and transform recommendation.

Condition one asks for a finite limit of Γ̇(t)/ġ(t) at each compact end,
condition two for a finite limit of g̈(t)/ġ(t).  Both are judged from samples
at t = ±2^k; see :func:`judge` for the convergence rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    InsufficientDecayWindow,
    OutOfDomain,
    SideUnavailable,
    Unrecommendable,
    Unsupported,
)
from .problem import ForcingProfile, estimate_limits, side_sign
from .transform import SAMPLE_KS, Transform, make_algebraic, make_exponential

TOL_COND = 1e-6
FIT_TOL = 0.05
M_MAX = 4
SAFETY = 0.9
DIVERGE = 1e12
RATE_MATCH = 0.05       # rates within 5% count as equal when choosing one- vs two-rate


# ---------------------------------------------------------------------------
# reference envelopes

def envelope_threshold(m: int) -> float:
    """T_m = exp^(m−2)(e): 0, 1, e, e^e, ..."""
    x = math.e
    if m < 2:
        for _ in range(2 - m):
            x = math.log(x) if x > 0 else -math.inf
        return max(x, 0.0)
    for _ in range(m - 2):
        x = math.exp(x)
    return x


def _logs(m: int, t: float) -> list:
    """[L_0, L_1, ..., L_m] with L_0 = |t| and L_k = ln L_(k−1)."""
    if m < 0 or int(m) != m:
        raise ValueError("envelope order m must be a non-negative integer")
    if not abs(t) > envelope_threshold(m):
        raise OutOfDomain(f"|t|={abs(t)!r} not above T_{m}={envelope_threshold(m)!r}")
    L = [abs(t)]
    for _ in range(m):
        L.append(math.log(L[-1]))
    return L


def envelope_value(m: int, t: float) -> float:
    """A(t, m) = −1 / ln^m|t|."""
    return -1.0 / _logs(m, t)[-1]


def envelope_rate(m: int, t: float) -> float:
    """Ȧ(t, m) = 1 / (t · ln^m|t| · Π_{k=1..m} ln^k|t|)."""
    L = _logs(m, t)
    prod = t * L[-1]
    for k in range(1, m + 1):
        prod *= L[k]
    return 1.0 / prod


def envelope_accel_ratio(m: int, t: float) -> float:
    """Ä/Ȧ = −[1/t + 1/(t P_m) + Σ_{k=1..m} 1/(t P_k)], P_k = L_1⋯L_k."""
    L = _logs(m, t)
    P = [1.0]
    for k in range(1, m + 1):
        P.append(P[-1] * L[k])
    total = 1.0 / t + 1.0 / (t * P[m])
    for k in range(1, m + 1):
        total += 1.0 / (t * P[k])
    return -total


class EnvelopeTransform(Transform):
    """Asymptotic transform family with ġ = |Ȧ(t, m)| (for condition checks only)."""

    kind = "envelope"

    def __init__(self, m: int, sides: str = "two-sided"):
        self.m = int(m)
        if sides == "future-only":
            self.s_domain = (0.0, 1.0)
        elif sides == "past-only":
            self.s_domain = (-1.0, 0.0)

    def describe(self):
        return {"kind": self.kind, "m": self.m}

    def g_dot(self, t):
        return abs(envelope_rate(self.m, t))

    def accel_ratio(self, t):
        return envelope_accel_ratio(self.m, t)

    def _no(self, *a):
        raise Unsupported("envelope transforms are asymptotic only; no global g, h or γ")

    h = g = gamma = gamma_prime = endpoint_slope = _no


# ---------------------------------------------------------------------------
# limit reports

@dataclass
class LimitReport:
    converged: bool
    value: object                      # float, vector or None
    verdict: str                       # finite | diverges | oscillates
    samples: list = field(default_factory=list)   # (t, ratio)
    side: str = "+"
    component: int | None = None       # worst component for vector ratios
    method: str = "sampled"            # sampled | analytic
    detail: str = ""

    def to_dict(self) -> dict:
        val = self.value
        if isinstance(val, np.ndarray):
            val = val.tolist()
        return {
            "converged": self.converged,
            "verdict": self.verdict,
            "value": val,
            "side": self.side,
            "component": self.component,
            "method": self.method,
            "detail": self.detail,
            "samples": [[t, (r.tolist() if isinstance(r, np.ndarray) else r)] for t, r in self.samples],
        }


_RANK = {"finite": 0, "oscillates": 1, "diverges": 2}


def judge(values, tol: float = TOL_COND):
    """(converged, value, verdict, detail) for a scalar sample sequence.

    Converged when the last three samples agree within tol·max(1, |last|), or
    when the last four share a sign with strictly shrinking magnitude (a
    bounded monotone tail; the value is then the Aitken extrapolation, clipped
    to the monotone range).  Strictly growing magnitude, or any sample beyond
    1e12, is divergence; anything else is oscillation.
    """
    v = [float(x) for x in values]
    if any(abs(x) > DIVERGE for x in v):
        return False, None, "diverges", "ratio exceeds 1e12"
    if len(v) >= 3:
        a, b, c = v[-3:]
        if max(abs(a - b), abs(b - c), abs(a - c)) <= tol * max(1.0, abs(c)):
            return True, c, "finite", "last three samples agree"
    tail = v[-4:]
    if len(tail) >= 2:
        signs = {math.copysign(1.0, x) for x in tail if x != 0}
        mags = [abs(x) for x in tail]
        same = len(signs) == 1 and all(x != 0 for x in tail)
        if same and len(tail) == 4 and all(m2 < m1 for m1, m2 in zip(mags, mags[1:])):
            a, b, c = tail[-3:]
            d2 = c - 2.0 * b + a
            est = c - (c - b) ** 2 / d2 if d2 != 0 else c
            lo, hi = sorted((0.0, c))
            est = min(max(est, lo), hi)
            return True, est, "finite", "monotone bounded tail (Aitken estimate)"
        if same and all(m2 > m1 for m1, m2 in zip(mags, mags[1:])):
            return False, None, "diverges", "magnitude grows monotonically"
    if len(v) < 3:
        return False, None, "oscillates", f"only {len(v)} usable samples"
    return False, None, "oscillates", "samples neither settle nor grow monotonically"


def _sides_ok(side, *objs):
    for o in objs:
        allowed = o.allowed_sides if isinstance(o, ForcingProfile) else o.ends
        if side not in allowed:
            raise SideUnavailable(f"side {side!r} not available for {type(o).__name__}")


def check_condition_one(p: ForcingProfile, tr: Transform, side: str) -> LimitReport:
    """Γ̇(t)/ġ(t) componentwise at t = ±2^k / r (r the profile's time scale).

    Dividing by r samples a rate-scaled problem at the same points of its own
    time τ = r·t, so a transform scaled along with the forcing gives identical ratios.
    """
    _sides_ok(side, p, tr)
    sgn = side_sign(side)
    samples = []
    stop = ""
    for k in SAMPLE_KS:
        t = sgn * 2.0 ** k / p.time_scale
        try:
            gd = tr.g_dot(t)
            rate = p.rate(t)
        except (DomainError, OutOfDomain) as exc:
            stop = f"stopped at t={t:g}: {exc}"
            break
        if gd == 0.0:
            if np.all(rate == 0.0):
                stop = f"stopped at t={t:g}: both rates underflow"
                break
            samples.append((t, np.where(rate == 0.0, 0.0, np.copysign(np.inf, rate))))
            break
        ratio = rate / gd
        if not np.all(np.isfinite(ratio)):
            stop = f"stopped at t={t:g}: non-finite ratio"
            break
        samples.append((t, ratio))
        if np.any(np.abs(ratio) > DIVERGE):
            break
    if not samples:
        return LimitReport(False, None, "oscillates", [], side, None, "sampled", stop or "no samples")
    R = np.array([r for _, r in samples])
    worst, worst_rank, vals, details = 0, -1, [], []
    all_conv = True
    for i in range(R.shape[1]):
        col = R[:, i]
        if np.any(np.isinf(col)):
            conv, val, verdict, det = False, None, "diverges", "ġ underflows before Γ̇"
        else:
            conv, val, verdict, det = judge(col)
        all_conv &= conv
        vals.append(val)
        details.append(det)
        rank = _RANK[verdict] + (0 if conv else 0.5)
        if rank > worst_rank:
            worst, worst_rank = i, rank
    verdict = judge_verdict = "finite" if all_conv else None
    if not all_conv:
        col = R[:, worst]
        judge_verdict = "diverges" if np.any(np.isinf(col)) else judge(col)[2]
    value = np.array(vals, dtype=float) if all_conv else None
    detail = details[worst] + (f"; {stop}" if stop else "")
    return LimitReport(all_conv, value, judge_verdict or verdict, samples, side, worst, "sampled", detail)


def check_condition_two(tr: Transform, side: str) -> LimitReport:
    """Limit of g̈/ġ (= γ' at the end).  Analytic for the built-in families."""
    _sides_ok(side, tr)
    if tr.builtin:
        val = tr.endpoint_slope(side)
        return LimitReport(True, val, "finite", [], side, None, "analytic", "family endpoint value")
    sgn = side_sign(side)
    samples = []
    stop = ""
    for k in SAMPLE_KS:
        t = sgn * 2.0 ** k
        try:
            r = tr.accel_ratio(t)
        except (DomainError, OutOfDomain, ZeroDivisionError) as exc:
            stop = f"stopped at t={t:g}: {exc}"
            break
        if not math.isfinite(r):
            stop = f"stopped at t={t:g}: non-finite ratio"
            break
        samples.append((t, r))
        if abs(r) > DIVERGE:
            break
    conv, val, verdict, det = judge([r for _, r in samples])
    return LimitReport(conv, val, verdict, samples, side, None, "sampled",
                       det + (f"; {stop}" if stop else ""))


# ---------------------------------------------------------------------------
# decay classification

@dataclass
class DecayClass:
    side: str
    cls: str                    # exponential | algebraic | envelope | pathological | nondecaying
    rate: float | None = None   # ρ for exponential
    order: float | None = None  # m for algebraic
    envelope_m: int | None = None
    slope: float | None = None
    residual: float | None = None
    n_samples: int = 0
    detail: str = ""

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("side", "cls", "rate", "order", "envelope_m", "slope", "residual", "n_samples", "detail")}


def _fit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return coef[0], float(np.max(np.abs(resid)))


def _speed_samples(p: ForcingProfile, side: str):
    sgn = side_sign(side)
    ts, sp = [], []
    for j in range(0, 161):
        t = sgn * 2.0 ** (j / 4)
        try:
            v = float(np.linalg.norm(p.rate(t)))
        except DomainError:
            break
        if not math.isfinite(v):
            break
        ts.append(t)
        sp.append(v)
        if v == 0.0:
            break
    return np.array(ts), np.array(sp)


def classify_decay(p: ForcingProfile, side: str) -> DecayClass:
    """Exponential / algebraic / envelope / pathological / nondecaying."""
    if side not in p.allowed_sides:
        raise SideUnavailable(f"profile is {p.sides}; side {side!r} not available")
    ts, sp = _speed_samples(p, side)
    if len(sp) == 0:
        raise InsufficientDecayWindow("forcing rate not computable near |t| = 1")
    if np.all(sp == 0.0):
        return DecayClass(side, "exponential", rate=math.inf, n_samples=len(sp),
                          detail="forcing rate vanishes identically")
    pos = sp > 0
    ts, sp = ts[pos], sp[pos]
    n = len(sp)
    q = max(1, n // 4)
    if not np.max(sp[-q:]) < 0.5 * np.max(sp[:q]):
        try:
            estimate_limits(p, side)
            return DecayClass(side, "pathological", n_samples=n,
                              detail="forcing has a limit but its rate does not decay")
        except Exception:
            return DecayClass(side, "nondecaying", n_samples=n, detail="forcing rate does not decay")
    half = n // 2
    if n - half < 6:
        raise InsufficientDecayWindow(
            f"only {n - half} samples in the fitting window before the forcing rate underflows")
    at, y = np.abs(ts[half:]), np.log(sp[half:])
    s_exp, r_exp = _fit(at, y)
    s_alg, r_alg = _fit(np.log(at), y)
    if min(r_exp, r_alg) < FIT_TOL:
        if r_exp <= r_alg and s_exp < 0:
            return DecayClass(side, "exponential", rate=-s_exp, slope=s_exp, residual=r_exp, n_samples=n)
        if s_alg < 0:
            return DecayClass(side, "algebraic", order=-s_alg, slope=s_alg, residual=r_alg, n_samples=n)
    for m in range(M_MAX + 1):
        tm = envelope_threshold(m)
        sel = at > tm
        if np.count_nonzero(sel) < 6:
            continue
        ratio = np.array([s / abs(envelope_rate(m, t)) for s, t in zip(sp[half:][sel], at[sel])])
        tail = ratio[len(ratio) // 2:]
        steady = np.ptp(np.log(tail)) < FIT_TOL
        shrinking = np.all(np.diff(tail) <= 0)
        if steady or shrinking:
            return DecayClass(side, "envelope", envelope_m=m, residual=min(r_exp, r_alg), n_samples=n,
                              detail=f"rate/|A'(t,{m})| settles")
    return DecayClass(side, "pathological", residual=min(r_exp, r_alg), n_samples=n,
                      detail=f"no model fits and no envelope order up to {M_MAX} bounds the rate")


# ---------------------------------------------------------------------------
# recommendation

@dataclass
class Recommendation:
    transform: Transform
    rationale: str
    decay: dict
    condition_one: dict
    condition_two: dict

    def to_dict(self) -> dict:
        return {
            "transform": self.transform.describe(),
            "rationale": self.rationale,
            "decay": {k: v.to_dict() for k, v in self.decay.items()},
            "condition_one": {k: v.to_dict() for k, v in self.condition_one.items()},
            "condition_two": {k: v.to_dict() for k, v in self.condition_two.items()},
        }


def _side_alpha(dc: DecayClass):
    if dc.cls == "exponential":
        return "exp", (1.0 if math.isinf(dc.rate) else SAFETY * dc.rate)
    if dc.cls == "algebraic":
        if dc.order <= 1.0:
            raise Unrecommendable(f"algebraic decay of order m={dc.order:.4g} <= 1 on side {dc.side!r}",
                                  decay=dc)
        return "alg", SAFETY * (dc.order - 1.0)
    if dc.cls == "envelope":
        raise Unrecommendable(
            f"forcing decays like the reference envelope of order m={dc.envelope_m} on side {dc.side!r}; "
            "no closed-form transform is constructed for this class", decay=dc)
    raise Unrecommendable(f"{dc.cls} forcing on side {dc.side!r}", decay=dc)


def verify(p: ForcingProfile, tr: Transform):
    """Both condition reports on every compact side of ``tr``."""
    one = {s: check_condition_one(p, tr, s) for s in tr.ends}
    two = {s: check_condition_two(tr, s) for s in tr.ends}
    return one, two


def recommend(p: ForcingProfile) -> Recommendation:
    sides = p.allowed_sides
    decay = {s: classify_decay(p, s) for s in sides}
    picks = {s: _side_alpha(decay[s]) for s in sides}
    if len(sides) == 1:
        (s,) = sides
        fam, a = picks[s]
        maker = make_exponential if fam == "exp" else make_algebraic
        tr = maker(a, "right" if s == "+" else "left")
        why = f"{decay[s].cls} decay on side {s}; {fam} {'right' if s == '+' else 'left'}-sided, alpha={a:.6g}"
    else:
        (fm, am), (fp, ap) = picks["-"], picks["+"]
        if fm == fp:
            maker = make_exponential if fm == "exp" else make_algebraic
            if abs(am - ap) <= RATE_MATCH * max(am, ap):
                a = min(am, ap)
                tr = maker(a)
                why = f"{decay['+'].cls} decay on both sides; {fm} two-sided, alpha={a:.6g}"
            else:
                tr = maker((am, ap))
                why = f"{decay['+'].cls} decay with different rates; {fm} two-rate, alpha-={am:.6g}, alpha+={ap:.6g}"
        else:
            # algebraic transforms satisfy condition one for exponential decay too
            am = am if fm == "alg" else 1.0
            ap = ap if fp == "alg" else 1.0
            tr = make_algebraic((am, ap))
            why = f"mixed decay types; alg two-rate, alpha-={am:.6g}, alpha+={ap:.6g}"
    one, two = verify(p, tr)
    bad = [r for r in list(one.values()) + list(two.values()) if not r.converged]
    if bad:
        raise Unrecommendable(
            f"recommended {tr.kind} fails re-verification on side {bad[0].side!r}: {bad[0].detail}",
            decay=decay)
    return Recommendation(tr, why, decay, one, two)
