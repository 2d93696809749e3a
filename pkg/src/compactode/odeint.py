"""Adaptive Dormand–Prince 5(4) integration with events and dense output.

The step-size controller is the usual one (safety 0.9, error exponent −1/5,
growth clamped to [0.2, 5]).  Dense output uses the pair's fourth-order
continuous extension, so sampling on a fixed grid costs no extra right-hand
side evaluations.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DomainError, NonFiniteState, OutOfDomain

# Butcher tableau
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4
# continuous extension: y(t + θh) = y + h·K^T·(P·[θ, θ², θ³, θ⁴])
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY, FAC_MIN, FAC_MAX = 0.9, 0.2, 5.0
STALL = 1e-14
GAP_FLOOR = 1e-14               # s-error scale below which rounding in s dominates


@dataclass(frozen=True)
class Controls:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    t_max: float = 100.0            # duration of internal time
    max_steps: int = 1_000_000
    s_end_eps: float = 1e-9
    escape_radius: float = 1e3
    dt_out: float | None = None     # dense sampling interval (None: accepted steps only)
    h_max: float = math.inf
    h_init: float | None = None
    h_fixed: float | None = None    # disables adaptivity (used for order checks)

    def updated(self, **kw) -> "Controls":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


@dataclass
class Trajectory:
    """Accepted steps (t, y, ẏ) plus optional dense samples.

    ``y`` holds (x1..xn, s) for compactified runs and (x1..xn) for direct runs.
    """

    t: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    termination: str
    compactified: bool
    end_side: str | None = None
    t_out: np.ndarray | None = None
    y_out: np.ndarray | None = None
    stats: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.y.shape[1] - (1 if self.compactified else 0)

    @property
    def x(self) -> np.ndarray:
        return self.y[:, : self.n]

    @property
    def s(self) -> np.ndarray | None:
        return self.y[:, -1] if self.compactified else None

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]

    def samples(self):
        """(times, states) on the dense grid when requested, else the accepted steps."""
        if self.t_out is not None:
            return self.t_out, self.y_out
        return self.t, self.y

    def x_at_times(self, times) -> np.ndarray:
        """Cubic Hermite interpolation of x between accepted steps."""
        return _hermite(self.t, self.y[:, : self.n], self.ydot[:, : self.n], np.asarray(times, dtype=float))

    def interp_x_at_s(self, s_query) -> np.ndarray:
        """x as a function of s (monotone for compactified runs), Hermite in s."""
        if not self.compactified:
            raise ValueError("trajectory has no s component")
        s = self.y[:, -1]
        sd = self.ydot[:, -1]
        x = self.y[:, : self.n]
        keep = np.concatenate([[True], np.diff(s) > 0])
        s, sd, x, xd = s[keep], sd[keep], x[keep], self.ydot[keep, : self.n]
        with np.errstate(divide="ignore", invalid="ignore"):
            dxds = np.where(sd[:, None] > 0, xd / sd[:, None], np.nan)
        return _hermite(s, x, dxds, np.asarray(s_query, dtype=float))

    def to_csv(self, path) -> None:
        ts, ys = self.samples()
        n = self.n
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "s"] + [f"x{i + 1}" for i in range(n)])
            for t, y in zip(ts, ys):
                s = y[-1] if self.compactified else math.nan
                w.writerow([f"{t:.17g}", f"{s:.17g}"] + [f"{v:.17g}" for v in y[:n]])

    def summary(self) -> dict:
        return {
            "termination": self.termination,
            "end_side": self.end_side,
            "t_final": float(self.t[-1]),
            "state_final": self.y[-1].tolist(),
            **self.stats,
        }


def _hermite(tk, yk, dk, tq):
    """Piecewise cubic Hermite; falls back to linear where a slope is missing."""
    tq = np.atleast_1d(tq)
    idx = np.clip(np.searchsorted(tk, tq, side="right") - 1, 0, len(tk) - 2)
    if len(tk) == 1:
        return np.repeat(yk[:1], len(tq), axis=0)
    t0, t1 = tk[idx], tk[idx + 1]
    h = (t1 - t0)[:, None]
    th = ((tq - t0) / (t1 - t0))[:, None]
    y0, y1, d0, d1 = yk[idx], yk[idx + 1], dk[idx], dk[idx + 1]
    h00 = 2 * th**3 - 3 * th**2 + 1
    h10 = th**3 - 2 * th**2 + th
    h01 = -2 * th**3 + 3 * th**2
    h11 = th**3 - th**2
    cub = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    lin = y0 + th * (y1 - y0)
    ok = np.isfinite(d0) & np.isfinite(d1)
    return np.where(ok, cub, lin)


def _initial_step(fun, t0, y0, f0, ctl):
    sc = ctl.abs_tol + ctl.rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / sc) ** 2))
    d1 = np.sqrt(np.mean((f0 / sc) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, ctl.t_max, ctl.h_max)
    try:
        f1 = fun(t0 + h0, y0 + h0 * f0)
        d2 = np.sqrt(np.mean(((f1 - f0) / sc) ** 2)) / h0
    except (DomainError, OutOfDomain):
        return h0 * 1e-3
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, ctl.h_max)


def _solve(fun: Callable, t0: float, y0: np.ndarray, ctl: Controls,
           event: Callable[[float, np.ndarray], str | None], compactified: bool,
           end_side: str | None = None) -> Trajectory:
    y = np.array(y0, dtype=float)
    # compactified runs measure the s-error relative to the gap 1 − |s|: an
    # absolute error in s is a relative error in the time t = h(s) near the ends
    gap_scaled = compactified and not ctl.h_fixed
    t = float(t0)
    try:
        f = np.asarray(fun(t, y), dtype=float)
    except (DomainError, OutOfDomain) as exc:
        raise NonFiniteState(f"right-hand side not defined at the initial state: {exc}") from None
    if not np.all(np.isfinite(f)):
        raise NonFiniteState("non-finite right-hand side at the initial state")
    t_end = t + ctl.t_max
    ts, ys, fs = [t], [y.copy()], [f.copy()]
    t_out, y_out = None, None
    if ctl.dt_out:
        t_out, y_out = [t], [y.copy()]
        next_out = t + ctl.dt_out
    fixed = ctl.h_fixed is not None
    h = ctl.h_fixed if fixed else (ctl.h_init or _initial_step(fun, t, y, f, ctl))
    steps = rejects = 0
    nfev = 1
    K = np.empty((7, y.size))
    # a run started on the end subspace is a run of the frozen limit system
    started_at_end = event(t, y) == "s_reached_end"
    termination = None if started_at_end else event(t, y)
    while termination is None:
        if steps >= ctl.max_steps:
            termination = "max_steps"
            break
        if t >= t_end:
            termination = "horizon"
            break
        h = min(h, ctl.h_max, t_end - t)
        hmin = STALL * max(1.0, abs(t))
        if h < hmin and t_end - t > hmin:
            termination = "stalled"
            break
        K[0] = f
        ok = True
        try:
            for i in range(1, 7):
                yi = y + h * (np.dot(A[i], K[:i]))
                K[i] = fun(t + C[i] * h, yi)
                if not np.all(np.isfinite(K[i])):
                    ok = False
                    break
            nfev += 6
        except (DomainError, OutOfDomain):
            ok = False
        if ok:
            y_new = y + h * (B5 @ K)
            ok = bool(np.all(np.isfinite(y_new)))
        if not ok:
            rejects += 1
            if fixed:
                raise NonFiniteState(f"non-finite state near t={t:.17g}")
            h *= 0.25
            if h < hmin:
                raise NonFiniteState(f"right-hand side breaks down near t={t:.17g}")
            continue
        if fixed:
            err = 0.0
        else:
            sc = ctl.abs_tol + ctl.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            if gap_scaled:
                gap = max(0.0, min(1.0 - abs(y[-1]), 1.0 - abs(y_new[-1])))
                sc[-1] = max((ctl.abs_tol + ctl.rel_tol) * gap, GAP_FLOOR)
            err = float(np.sqrt(np.mean((h * (E @ K) / sc) ** 2)))
        if err > 1.0:
            rejects += 1
            h *= max(FAC_MIN, SAFETY * err ** -0.2)
            continue
        t_new = t + h
        if t_end - t_new < 1e-12 * max(1.0, abs(t_end)):
            t_new = t_end
        f_new = K[6].copy()           # FSAL: last stage is f(t_new, y_new)
        if ctl.dt_out:
            while next_out <= t_new + 1e-12 * max(1.0, abs(t_new)):
                th = min(1.0, (next_out - t) / h)
                Q = K.T @ P
                y_out.append(y + h * (Q @ np.array([th, th**2, th**3, th**4])))
                t_out.append(next_out)
                next_out = t_out[0] + ctl.dt_out * len(t_out)
        t, y, f = t_new, y_new, f_new
        ts.append(t)
        ys.append(y.copy())
        fs.append(f.copy())
        steps += 1
        termination = event(t, y)
        if started_at_end and termination == "s_reached_end":
            termination = None
        if not fixed:
            fac = FAC_MAX if err == 0 else min(FAC_MAX, max(FAC_MIN, SAFETY * err ** -0.2))
            h *= fac
    traj = Trajectory(
        np.array(ts), np.array(ys), np.array(fs), termination, compactified,
        end_side if termination == "s_reached_end" else None,
        None if t_out is None else np.array(t_out),
        None if y_out is None else np.array(y_out),
        {"steps": steps, "rejects": rejects, "nfev": nfev},
    )
    if traj.t_out is not None and traj.t_out[-1] < traj.t[-1]:
        traj.t_out = np.append(traj.t_out, traj.t[-1])
        traj.y_out = np.vstack([traj.y_out, traj.y[-1]])
    return traj


def integrate(sys, init, controls: Controls | None = None, t0: float = 0.0) -> Trajectory:
    """Integrate a compactified system from ``init`` (ExtendedState or flat vector).

    ``t0`` only labels the starting internal time; with init = (x0, g(t0)) the
    internal time then coincides with the original time t.
    """
    ctl = controls or Controls()
    if hasattr(init, "as_vector"):
        y0 = init.as_vector()
    else:
        y0 = np.asarray(init, dtype=float)
    y0 = sys.state(y0[:-1], y0[-1]).as_vector()
    n = sys.n
    hi_end = "+" in sys.ends and sys.s_domain[1] == 1.0
    R = ctl.escape_radius
    eps = ctl.s_end_eps

    def fun(t, y):
        return sys.rhs_vector(y)

    def event(t, y):
        if np.linalg.norm(y[:n]) >= R:
            return "escaped"
        if hi_end and 1.0 - y[-1] <= eps:
            return "s_reached_end"
        return None

    return _solve(fun, t0, y0, ctl, event, True, "+" if hi_end else None)


def direct_integrate(v, p, t0: float, x0, controls: Controls | None = None) -> Trajectory:
    """Integrate x' = f(x, Γ(t)) in the original time."""
    ctl = controls or Controls()
    R = ctl.escape_radius

    def fun(t, x):
        return np.array(v.f_tuple(x, p.value_tuple(t)))

    def event(t, y):
        return "escaped" if np.linalg.norm(y) >= R else None

    return _solve(fun, t0, np.asarray(x0, dtype=float).reshape(-1), ctl, event, False)


def integrate_field(fun: Callable, t0: float, y0, controls: Controls | None = None) -> Trajectory:
    """Plain autonomous/nonautonomous ODE y' = fun(t, y) with the escape event only."""
    ctl = controls or Controls()
    R = ctl.escape_radius

    def event(t, y):
        return "escaped" if np.linalg.norm(y) >= R else None

    return _solve(lambda t, y: np.asarray(fun(t, y), dtype=float), t0,
                  np.asarray(y0, dtype=float).reshape(-1), ctl, event, False)


def distance_series(traj: Trajectory, side: str):
    """(t, d) with d = 1 ∓ s, the distance to the end subspace s = ±1."""
    if not traj.compactified:
        raise ValueError("distance series needs a compactified trajectory")
    ts, ys = traj.samples()
    s = ys[:, -1]
    d = 1.0 - s if side == "+" else 1.0 + s
    return ts, d
