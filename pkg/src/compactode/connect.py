"""Pullback-attractor traces and critical rates of rate-induced tipping.

A probe at rate r builds the compactified system for Γ(r·t), traces the
branch leaving the embedded past sink, and classifies where it ends:
``tracked`` (the designated future attractor), ``tipped`` (escape, or some
other future set), or ``undecided``.  :func:`critical_rate` bisects on r
between a tracked and a tipped probe.
"""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .conditions import recommend
from .errors import NoSignChange, NonMonotoneFamily, Resonance, UndecidedProbe, Unsupported
from .extended import CompactifiedSystem, assemble
from .invariant import (
    DELTA,
    Equilibrium,
    EmbeddedSet,
    embed,
    find_equilibria,
    omega_classify,
    unstable_branch,
)
from .odeint import Controls, Trajectory, integrate
from .problem import ForcingProfile, VectorFieldDef, limit_system
from .transform import Transform, scaled

BISECT_TOL = 1e-4
SETTLE_TIME = 1e3


def max_workers() -> int:
    env = os.environ.get("COMPACTODE_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            pass
    return cap


@dataclass
class PullbackResult:
    trajectory: Trajectory
    verdict: str                   # tracked | tipped | other | undecided
    index: int | None              # matched future set
    future_sets: list
    past: EmbeddedSet
    settled: Trajectory | None = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "index": self.index,
            "termination": self.trajectory.termination,
            "final_state": self.final.tolist(),
            "past": self.past.to_dict(),
            "future_sets": [es.to_dict() for es in self.future_sets],
            "steps": self.trajectory.stats.get("steps"),
        }

    @property
    def final(self) -> np.ndarray:
        return (self.settled or self.trajectory).final


def _embed_all(eqs, sys, side):
    out = []
    for e in eqs:
        try:
            out.append(embed(e, sys, side))
        except Resonance:
            # still usable as a classification target
            n = sys.n
            v = np.zeros(n + 1)
            v[n] = 1.0
            out.append(EmbeddedSet(e, side, 1.0 if side == "+" else -1.0, sys.s_lyapunov(side), v,
                                   np.append(e.spectrum, sys.s_lyapunov(side)), np.zeros((n + 1, n + 1))))
    return out


def pullback_trace(sys: CompactifiedSystem, past: Equilibrium, future: list, delta: float = DELTA,
                   controls: Controls | None = None, target: int | None = None,
                   omega_tol: float = 1e-4, settle_time: float = SETTLE_TIME) -> PullbackResult:
    """Trace the branch from the embedded past equilibrium and classify its terminus.

    When the branch reaches s ≈ 1 away from every future set, the run is
    continued on the frozen future system for ``settle_time``; the future
    limit system decides the fate from there.
    """
    es = embed(past, sys, "-")
    sets = _embed_all(future, sys, "+")
    traj = unstable_branch(sys, es, delta, controls)
    settled = None
    idx = omega_classify(traj, sets, omega_tol)
    if idx is None and traj.termination == "s_reached_end":
        y = traj.final.copy()
        y[-1] = 1.0
        ctl = (controls or Controls()).updated(t_max=settle_time, dt_out=None)
        settled = integrate(sys, y, ctl, t0=traj.t[-1])
        idx = omega_classify(settled, sets, omega_tol)
        last = settled
    else:
        last = traj
    if last.termination == "escaped":
        verdict = "tipped"
    elif idx is None:
        verdict = "undecided"
    elif target is None or idx == target:
        verdict = "tracked"
    else:
        verdict = "other"
    return PullbackResult(traj, verdict, idx, sets, es, settled)


@dataclass
class RateProblem:
    """Family x' = f(x, Γ(r·t)) over the rate r > 0.

    ``transform_for(r)`` gives the transform for each probe; by default the
    recommendation for the base profile, with exponential rates scaled by r.
    ``past_hint``/``target_hint`` pick the past sink and the tracked future
    attractor (nearest equilibrium of the right type).
    """

    field: VectorFieldDef
    forcing: ForcingProfile
    box: list
    grid: int = 21
    past_hint: list | None = None
    target_hint: list | None = None
    transform_for: Callable[[float], Transform] | None = None
    delta: float = DELTA
    controls: Controls = field(default_factory=lambda: Controls(t_max=1e6))
    omega_tol: float = 1e-4
    tipped: Callable[[PullbackResult], bool] | None = None
    tracked: Callable[[PullbackResult], bool] | None = None

    def __post_init__(self):
        if self.transform_for is None:
            base = recommend(self.forcing).transform
            self.transform_for = lambda r, _b=base: scaled(_b, r)
        # the limit systems do not depend on r
        self.past_eqs = list(find_equilibria(limit_system(self.field, self.forcing, "-"), self.box, self.grid))
        self.future_eqs = list(find_equilibria(limit_system(self.field, self.forcing, "+"), self.box, self.grid))
        sinks = [e for e in self.past_eqs if e.type == "sink"]
        if not sinks:
            raise Unsupported("past limit system has no sink in the search box")
        self.past = _nearest(sinks, self.past_hint)
        attractors = [e for e in self.future_eqs if e.type == "sink"]
        target = _nearest(attractors, self.target_hint) if attractors else None
        self.target = None if target is None else self.future_eqs.index(target)

    def system(self, r: float) -> CompactifiedSystem:
        if not r > 0:
            raise ValueError("rate must be positive")
        return assemble(self.field, self.forcing.with_rate(r), self.transform_for(r))

    def probe(self, r: float) -> dict:
        res = pullback_trace(self.system(r), self.past, self.future_eqs, self.delta, self.controls,
                             self.target, self.omega_tol)
        if self.tipped is not None and self.tipped(res):
            cls = "tipped"
        elif self.tracked is not None and self.tracked(res):
            cls = "tracked"
        else:
            cls = {"tracked": "tracked", "tipped": "tipped", "other": "tipped"}.get(res.verdict, "undecided")
        return {"r": float(r), "verdict": cls, "detail": res.verdict,
                "termination": res.trajectory.termination, "final_state": res.final.tolist()}


def _nearest(eqs, hint):
    if hint is None:
        return eqs[0]
    h = np.asarray(hint, dtype=float)
    return min(eqs, key=lambda e: float(np.linalg.norm(e.x - h)))


@dataclass
class CriticalRate:
    r_star: float
    r_lo: float
    r_hi: float
    probes: list

    def to_dict(self) -> dict:
        return {"r_star": self.r_star, "bracket": [self.r_lo, self.r_hi], "probes": self.probes}


def _check_monotone(probes):
    seq = [p["verdict"] for p in sorted(probes, key=lambda p: p["r"])]
    changes = sum(1 for a, b in zip(seq, seq[1:]) if a != b)
    if changes > 1:
        warnings.warn(f"probe classifications change {changes} times across the bracket",
                      NonMonotoneFamily, stacklevel=3)


def critical_rate(rp: RateProblem, r_lo: float, r_hi: float, bisect_tol: float = BISECT_TOL,
                  batch: int = 1) -> CriticalRate:
    """Bisection (or ``batch``-point sectioning) for the tracked/tipped boundary.

    Stops when r_hi − r_lo < bisect_tol · r_mid.
    """
    r_lo, r_hi = float(r_lo), float(r_hi)
    if r_lo == r_hi:
        return CriticalRate(r_lo, r_lo, r_hi, [])
    if not 0 < r_lo < r_hi:
        raise ValueError("need 0 < r_lo < r_hi")
    probes = []

    def run(rs):
        if len(rs) == 1 or max_workers() == 1:
            out = [rp.probe(r) for r in rs]
        else:
            with ThreadPoolExecutor(max_workers=min(len(rs), max_workers())) as pool:
                out = list(pool.map(rp.probe, rs))
        probes.extend(out)
        for p in out:
            if p["verdict"] == "undecided":
                raise UndecidedProbe(f"probe at r={p['r']:.17g} is undecided ({p['termination']})",
                                     r=p["r"], probes=probes)
        return out

    lo_p, hi_p = run([r_lo, r_hi])
    if lo_p["verdict"] == hi_p["verdict"]:
        raise NoSignChange(f"both ends classify as {lo_p['verdict']}", probes=probes)
    c_lo = lo_p["verdict"]
    batch = max(1, int(batch))
    while r_hi - r_lo >= bisect_tol * 0.5 * (r_lo + r_hi):
        rs = [r_lo + (r_hi - r_lo) * (k + 1) / (batch + 1) for k in range(batch)]
        out = run(rs)
        new_lo, new_hi = r_lo, r_hi
        for r, p in zip(rs, out):
            if p["verdict"] == c_lo:
                new_lo = r
            else:
                new_hi = r
                break
        r_lo, r_hi = new_lo, new_hi
    _check_monotone(probes)
    return CriticalRate(0.5 * (r_lo + r_hi), r_lo, r_hi, probes)
