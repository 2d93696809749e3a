"""Equilibria of the limit systems, their embeddings at s = ±1, traced branches
and stable-set membership.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import Ambiguous, Resonance, SeedEscape, Unsupported
from .extended import CompactifiedSystem
from .odeint import Controls, Trajectory, integrate
from .transform import END_S

NEWTON_TOL = 1e-12
ACCEPT_RESIDUAL = 1e-10
DEDUP_TOL = 1e-6
EIG_ZERO_TOL = 1e-8
DELTA = 1e-6
CONV_TOL = 1e-5
DIVERGENCE_RADIUS = 1.0


@dataclass
class Equilibrium:
    x: np.ndarray
    spectrum: np.ndarray            # complex eigenvalues of ∂f/∂x
    type: str                       # sink | source | saddle | nonhyperbolic
    residual: float
    side: str | None = None

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "spectrum": [[float(z.real), float(z.imag)] for z in self.spectrum],
            "type": self.type,
            "residual": self.residual,
            "side": self.side,
        }


def classify_spectrum(spec, tol: float = EIG_ZERO_TOL) -> str:
    re = np.real(spec)
    if np.any(np.abs(re) <= tol):
        return "nonhyperbolic"
    if np.all(re < 0):
        return "sink"
    if np.all(re > 0):
        return "source"
    return "saddle"


def _newton(F, J, x0, tol=NEWTON_TOL, max_iter=100):
    x = np.array(x0, dtype=float)
    try:
        fx = F(x)
    except Exception:
        return x, np.inf, False
    nf = np.linalg.norm(fx)
    for _ in range(max_iter):
        Jx = J(x)
        try:
            step = np.linalg.solve(Jx, -fx)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(Jx, -fx, rcond=None)[0]
        lam = 1.0
        while lam > 1.0 / 1024:
            xn = x + lam * step
            try:
                fn = F(xn)
                nfn = np.linalg.norm(fn)
            except Exception:
                nfn = np.inf
            if nfn < nf or nfn == 0.0:
                break
            lam *= 0.5
        else:
            return x, nf, False
        x, fx, nf = xn, fn, nfn
        if nf == 0.0 or np.linalg.norm(lam * step) <= tol * max(1.0, np.linalg.norm(x)):
            return x, nf, True
    return x, nf, nf <= ACCEPT_RESIDUAL


@dataclass
class EquilibriumSearch:
    equilibria: list
    seeds: list = field(default_factory=list)     # per-seed diagnostics

    def __iter__(self):
        return iter(self.equilibria)

    def __len__(self):
        return len(self.equilibria)

    def __getitem__(self, i):
        return self.equilibria[i]


def find_equilibria(field_fn, box, grid: int = 11, dedup_tol: float = DEDUP_TOL,
                    eig_zero_tol: float = EIG_ZERO_TOL) -> EquilibriumSearch:
    """Damped Newton from every node of a ``grid``^n lattice over ``box``.

    ``field_fn`` is a limit system (callable with ``.jacobian``).
    """
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    if grid < 2:
        raise ValueError("grid needs at least 2 points per axis")
    if not np.all(np.isfinite(box)) or np.any(box[:, 1] < box[:, 0]):
        raise ValueError("box must be finite intervals")
    axes = [np.linspace(lo, hi, grid) for lo, hi in box]
    margin = 1e-9 * (1.0 + np.abs(box).max())
    found: list = []
    seeds = []
    for node in itertools.product(*axes):
        x, res, ok = _newton(field_fn, field_fn.jacobian, node)
        diag = {"seed": list(node), "converged": bool(ok and res <= ACCEPT_RESIDUAL), "residual": float(res)}
        if diag["converged"] and np.all(x >= box[:, 0] - margin) and np.all(x <= box[:, 1] + margin):
            idx = next((i for i, e in enumerate(found) if np.linalg.norm(e.x - x) <= dedup_tol), None)
            if idx is None:
                spec = np.linalg.eigvals(field_fn.jacobian(x))
                found.append(Equilibrium(x, spec, classify_spectrum(spec, eig_zero_tol), float(res),
                                         getattr(field_fn, "side", None)))
                idx = len(found) - 1
            diag["root"] = idx
        elif diag["converged"]:
            diag["converged"] = False
            diag["note"] = "root outside box"
        seeds.append(diag)
    return EquilibriumSearch(found, seeds)


@dataclass
class EmbeddedSet:
    base: Equilibrium
    side: str
    s_star: float
    l_s: float
    extra_eigenvector: np.ndarray
    full_spectrum: np.ndarray
    jacobian: np.ndarray

    @property
    def point(self) -> np.ndarray:
        return np.append(self.base.x, self.s_star)

    def to_dict(self) -> dict:
        return {
            "x": self.base.x.tolist(),
            "side": self.side,
            "s": self.s_star,
            "type": self.base.type,
            "l_s": self.l_s,
            "extra_eigenvector": self.extra_eigenvector.tolist(),
            "full_spectrum": [[float(z.real), float(z.imag)] for z in self.full_spectrum],
        }


def embed(eq: Equilibrium, sys: CompactifiedSystem, side: str,
          eig_zero_tol: float = EIG_ZERO_TOL) -> EmbeddedSet:
    """Embed an equilibrium of the ``side`` limit system at s = ±1."""
    if side not in sys.ends:
        raise Unsupported(f"system has no compact end on side {side!r}")
    n = sys.n
    s_star = END_S[side]
    J = sys.jacobian(sys.state(eq.x, s_star))
    Jx, col = J[:n, :n], J[:n, n]
    l_s = sys.s_lyapunov(side)
    if np.all(col == 0.0):
        v = np.zeros(n + 1)
        v[n] = 1.0
    else:
        if np.any(np.abs(eq.spectrum - l_s) <= eig_zero_tol):
            raise Resonance(f"l_s={l_s!r} coincides with an eigenvalue of the {side!r} limit system")
        vx = np.linalg.solve(Jx - l_s * np.eye(n), -col)
        v = np.append(vx, 1.0)
    return EmbeddedSet(eq, side, s_star, l_s, v, np.append(eq.spectrum, l_s), J)


def unstable_branch(sys: CompactifiedSystem, es: EmbeddedSet, delta: float = DELTA,
                    controls: Controls | None = None) -> Trajectory:
    """Trace the one-dimensional branch leaving (x*, −1) along the s-direction."""
    if es.side != "-":
        raise Unsupported("branches are traced from past embeddings only")
    if es.base.type not in ("sink", "saddle"):
        raise Unsupported(f"past equilibrium is {es.base.type}; only sinks and saddles give 1-D branches")
    if es.l_s < 0:
        raise Unsupported("s-direction is not unstable at the past end")
    ctl = controls or Controls(t_max=1e6)
    v = es.extra_eigenvector / np.linalg.norm(es.extra_eigenvector)
    seed = es.point + delta * v
    n = sys.n
    if np.linalg.norm(seed[:n]) >= ctl.escape_radius:
        raise SeedEscape("seed lies outside the escape radius")
    t0 = sys.transform.h(seed[-1]) if -1.0 < seed[-1] < 1.0 else 0.0
    traj = integrate(sys, seed, ctl, t0=t0)
    if traj.termination == "escaped" and traj.y[-1, -1] + 1.0 <= 2.0 * (seed[-1] + 1.0):
        raise SeedEscape(f"branch escapes before leaving the seed neighbourhood (delta={delta:g})")
    return traj


@dataclass
class Membership:
    verdict: str                 # converges | escapes | undecided
    distance: float
    final: np.ndarray
    conv_tol: float
    divergence_radius: float
    escape_radius: float

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}


def stable_membership(sys: CompactifiedSystem, es: EmbeddedSet, point, controls: Controls | None = None,
                      conv_tol: float = CONV_TOL, divergence_radius: float = DIVERGENCE_RADIUS) -> Membership:
    """Does the forward orbit of ``point`` end at (x*, +1)?"""
    if es.side != "+":
        raise Unsupported("membership is tested against future embeddings")
    if es.base.type == "nonhyperbolic":
        raise Unsupported("future equilibrium is nonhyperbolic in x; membership is not decided")
    ctl = controls or Controls()
    y0 = point.as_vector() if hasattr(point, "as_vector") else np.asarray(point, dtype=float)
    traj = integrate(sys, y0, ctl)
    if traj.termination == "s_reached_end":
        y = traj.final.copy()
        y[-1] = 1.0
        traj = integrate(sys, y, ctl)
    y = traj.final
    dist = float(np.linalg.norm(y - es.point))
    dx = float(np.linalg.norm(y[:-1] - es.base.x))
    if traj.termination == "escaped":
        verdict = "escapes"
    elif dist <= conv_tol:
        verdict = "converges"
    elif abs(1.0 - y[-1]) <= ctl.s_end_eps and dx > divergence_radius:
        verdict = "escapes"
    else:
        verdict = "undecided"
    return Membership(verdict, dist, y, conv_tol, divergence_radius, ctl.escape_radius)


def omega_classify(traj: Trajectory, sets, tol: float = 1e-4):
    """Index of the embedded set whose (x*, s*) is within ``tol`` of the terminus."""
    if traj.termination == "escaped":
        return None
    y = traj.final
    hits = [i for i, es in enumerate(sets) if np.linalg.norm(y - es.point) <= tol]
    if len(hits) > 1:
        raise Ambiguous(f"terminus within {tol:g} of embedded sets {hits}")
    return hits[0] if hits else None
