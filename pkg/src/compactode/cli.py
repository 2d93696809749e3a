"""Command-line front end.

    compactode check CONFIG        decay classes, recommended transform, condition reports
    compactode simulate CONFIG     integrate the compactified system, write trajectory.csv
    compactode equilibria CONFIG   equilibria of the limit systems and their embeddings
    compactode pullback CONFIG     pullback-attractor trace from the embedded past sink
    compactode tip CONFIG          critical rate by bisection (probes.json)
    compactode scenario list|show|run NAME

Exit codes: 0 success, 2 analytic refusal, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import scenarios
from .conditions import (
    classify_decay,
    recommend,
    verify,
)
from .connect import RateProblem, critical_rate, pullback_trace
from .errors import (
    CompactError,
    ConditionsViolated,
    ConfigError,
    NoSignChange,
    UndecidedProbe,
    Unrecommendable,
)
from .extended import assemble
from .invariant import embed, find_equilibria
from .jsonio import dumps, write
from .odeint import Controls, distance_series, integrate
from .problem import ForcingProfile, VectorFieldDef, estimate_limits, limit_system
from .transform import from_spec, scaled


def load_schema(name: str) -> dict:
    return json.loads(resources.files("compactode").joinpath("schemas", name).read_text())


# ---------------------------------------------------------------------------
# configuration

class Problem:
    """A loaded, validated configuration."""

    def __init__(self, cfg: dict):
        try:
            jsonschema.validate(cfg, load_schema("config.schema.json"))
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {path}: {exc.message}") from None
        if len(cfg["field"]) != cfg["n"]:
            raise ConfigError(f"n={cfg['n']} but {len(cfg['field'])} field components")
        if len(cfg["forcing"]) != cfg["d"]:
            raise ConfigError(f"d={cfg['d']} but {len(cfg['forcing'])} forcing components")
        self.cfg = cfg
        params = cfg.get("parameters", {})
        self.forcing = ForcingProfile(tuple(cfg["forcing"]), params, cfg.get("declared_limits"),
                                      cfg.get("sides", "two-sided"))
        self.field = VectorFieldDef(tuple(cfg["field"]), cfg["d"], params)
        self.controls = Controls(**cfg.get("controls", {}))
        self._recommendation = None

    @property
    def n(self):
        return self.field.n

    def describe(self) -> dict:
        c = self.cfg
        return {
            "name": c.get("name"),
            "n": c["n"],
            "d": c["d"],
            "field": c["field"],
            "forcing": c["forcing"],
            "parameters": c.get("parameters", {}),
            "sides": self.forcing.sides,
        }

    def recommendation(self):
        if self._recommendation is None:
            self._recommendation = recommend(self.forcing)
        return self._recommendation

    def transform(self, rate: float = 1.0):
        spec = self.cfg.get("transform", "auto")
        if spec == "auto":
            base = self.recommendation().transform
        else:
            base = from_spec(spec, self.forcing)
        return base if rate == 1.0 else scaled(base, rate)

    def system(self, rate: float = 1.0):
        p = self.forcing if rate == 1.0 else self.forcing.with_rate(rate)
        return assemble(self.field, p, self.transform(rate))


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None


# ---------------------------------------------------------------------------
# commands: each fills ``report`` in place so a partial report survives errors

def cmd_check(pb: Problem, report: dict, out: Path, args) -> None:
    p = pb.forcing
    report["limits"] = {}
    for side in p.allowed_sides:
        report["limits"][side] = estimate_limits(p, side).tolist()
    report["decay"] = {}
    for side in p.allowed_sides:
        report["decay"][side] = classify_decay(p, side).to_dict()
    spec = pb.cfg.get("transform", "auto")
    if spec == "auto":
        try:
            rec = pb.recommendation()
        except Unrecommendable as exc:
            report["transform"] = None
            if isinstance(exc.decay, dict):
                report["decay"] = {k: v.to_dict() for k, v in exc.decay.items()}
            raise
        report["transform"] = rec.transform.describe()
        report["rationale"] = rec.rationale
        one, two = rec.condition_one, rec.condition_two
    else:
        tr = pb.transform()
        report["transform"] = tr.describe()
        one, two = verify(p, tr)
    report["conditions"] = {
        "one": {k: v.to_dict() for k, v in one.items()},
        "two": {k: v.to_dict() for k, v in two.items()},
    }
    bad = [r for r in list(one.values()) + list(two.values()) if not r.converged]
    if bad:
        raise ConditionsViolated(f"transformation condition fails on side {bad[0].side!r}: {bad[0].detail}",
                                 report=bad[0])


def _distance_fit(traj, sys, abs_tol: float) -> dict:
    if "+" not in sys.ends:
        return {}
    ts, d = distance_series(traj, "+")
    # below ~1e3·abs_tol the computed gap is dominated by integration error
    sel = (d > 1e3 * abs_tol) & (d < 1e-2) & (ts > ts[0])
    fit = {"l_s": sys.s_lyapunov("+"), "n_points": int(np.count_nonzero(sel))}
    if np.count_nonzero(sel) >= 3:
        fit["exp_slope"] = float(np.polyfit(ts[sel], np.log(d[sel]), 1)[0])
        pos = sel & (ts > 0)
        if np.count_nonzero(pos) >= 3:
            fit["loglog_slope"] = float(np.polyfit(np.log(ts[pos]), np.log(d[pos]), 1)[0])
    return fit


def cmd_simulate(pb: Problem, report: dict, out: Path, args) -> None:
    sys_ = pb.system()
    report["transform"] = sys_.transform.describe()
    init = dict(pb.cfg.get("init", {}))
    if args.x0 is not None:
        init["x"] = args.x0
    if args.s0 is not None:
        init["s"] = args.s0
        init.pop("t", None)
    if args.t0 is not None:
        init["t"] = args.t0
        init.pop("s", None)
    if "x" not in init:
        raise ConfigError("simulate needs an initial state (config 'init' or --x0)")
    if "t" in init:
        t0 = float(init["t"])
        s0 = sys_.transform.g(t0)
    else:
        s0 = float(init.get("s", 0.0))
        t0 = sys_.transform.h(s0) if s0 not in (-1.0, 1.0) else 0.0
    ctl = pb.controls
    traj = integrate(sys_, sys_.state(init["x"], s0), ctl, t0=t0)
    traj.to_csv(out / "trajectory.csv")
    report["summary"] = traj.summary()
    report["distance_fit"] = _distance_fit(traj, sys_, ctl.abs_tol)
    report["files"] = {"trajectory": "trajectory.csv"}


def cmd_equilibria(pb: Problem, report: dict, out: Path, args) -> None:
    eqc = pb.cfg.get("equilibria")
    if not eqc:
        raise ConfigError("equilibria needs an 'equilibria' block with a box")
    if len(eqc["box"]) != pb.n:
        raise ConfigError(f"box has {len(eqc['box'])} intervals, n={pb.n}")
    sides = eqc.get("sides", list(pb.forcing.allowed_sides))
    try:
        sys_ = pb.system()
        report["transform"] = sys_.transform.describe()
    except CompactError as exc:
        sys_ = None
        report["transform"] = None
        report["embedding_error"] = {"type": type(exc).__name__, "message": str(exc)}
    report["sides"] = {}
    for side in sides:
        lim = limit_system(pb.field, pb.forcing, side)
        found = find_equilibria(lim, eqc["box"], eqc.get("grid", 11))
        entry = {
            "gamma_limit": lim.gamma.tolist(),
            "equilibria": [e.to_dict() for e in found],
            "seeds": len(found.seeds),
            "seeds_converged": sum(1 for s in found.seeds if s["converged"]),
            "embeddings": [],
        }
        if sys_ is not None and side in sys_.ends:
            for e in found:
                try:
                    entry["embeddings"].append(embed(e, sys_, side).to_dict())
                except CompactError as exc:
                    entry["embeddings"].append({"x": e.x.tolist(), "error": type(exc).__name__,
                                                "message": str(exc)})
        report["sides"][side] = entry


def _rate_problem(pb: Problem) -> RateProblem:
    eqc = pb.cfg.get("equilibria")
    if not eqc:
        raise ConfigError("needs an 'equilibria' block with a box for the equilibrium search")
    pbc = pb.cfg.get("pullback", {})
    return RateProblem(
        pb.field, pb.forcing, eqc["box"], eqc.get("grid", 11),
        past_hint=pbc.get("past"), target_hint=pbc.get("target"),
        transform_for=pb.transform,
        delta=pbc.get("delta", 1e-6),
        controls=pb.controls,
    )


def cmd_pullback(pb: Problem, report: dict, out: Path, args) -> None:
    rate = args.rate if args.rate is not None else pb.cfg.get("pullback", {}).get("rate", 1.0)
    rp = _rate_problem(pb)
    sys_ = rp.system(rate)
    report["transform"] = sys_.transform.describe()
    report["rate"] = rate
    res = pullback_trace(sys_, rp.past, rp.future_eqs, rp.delta, rp.controls, rp.target, rp.omega_tol)
    res.trajectory.to_csv(out / "trajectory.csv")
    report["result"] = res.to_dict()
    report["result"]["target_index"] = rp.target
    report["files"] = {"trajectory": "trajectory.csv"}


def cmd_tip(pb: Problem, report: dict, out: Path, args) -> None:
    tc = pb.cfg.get("tip", {})
    r_lo = args.r_lo if args.r_lo is not None else tc.get("r_lo")
    r_hi = args.r_hi if args.r_hi is not None else tc.get("r_hi")
    tol = args.tol if args.tol is not None else tc.get("tol", 1e-4)
    batch = args.batch if args.batch is not None else tc.get("batch", 1)
    if r_lo is None or r_hi is None:
        raise ConfigError("tip needs --r-lo and --r-hi (or a 'tip' block)")
    rp = _rate_problem(pb)
    report["transform"] = rp.transform_for(1.0).describe()
    report["r_star"] = None
    try:
        cr = critical_rate(rp, r_lo, r_hi, tol, batch)
    except (NoSignChange, UndecidedProbe) as exc:
        write(out / "probes.json", {"r_star": None, "probes": exc.probes or []})
        report["files"] = {"probes": "probes.json"}
        raise
    report["r_star"] = cr.r_star
    report["bracket"] = [cr.r_lo, cr.r_hi]
    report["n_probes"] = len(cr.probes)
    write(out / "probes.json", cr.to_dict())
    report["files"] = {"probes": "probes.json"}


COMMANDS = {
    "check": cmd_check,
    "simulate": cmd_simulate,
    "equilibria": cmd_equilibria,
    "pullback": cmd_pullback,
    "tip": cmd_tip,
}


def run_command(command: str, cfg: dict, out, args=None, quiet: bool = False) -> int:
    """Run one subcommand on a config dict; writes report.json and returns the exit code."""
    if args is None:
        args = build_parser().parse_args([command, "-"])
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"command": command, "status": "ok", "exit_code": 0}
    code = 0
    try:
        pb = Problem(cfg)
        report["problem"] = pb.describe()
        COMMANDS[command](pb, report, out, args)
    except CompactError as exc:
        code = exc.exit_code
        report["status"] = "refused" if code == 2 else "failed"
        report["exit_code"] = code
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        rep = getattr(exc, "report", None)
        if rep is not None and hasattr(rep, "to_dict"):
            report["error"]["report"] = rep.to_dict()
    report.setdefault("problem", {"name": cfg.get("name"), "n": cfg.get("n", 0), "d": cfg.get("d", 0),
                                  "field": cfg.get("field", []), "forcing": cfg.get("forcing", [])})
    write(out / "report.json", report)
    if not quiet:
        print(dumps(_brief(report)))
    return code


def _brief(report: dict) -> dict:
    """Console view: the report without bulky sample lists."""
    def strip(o):
        if isinstance(o, dict):
            return {k: strip(v) for k, v in o.items() if k != "samples"}
        if isinstance(o, list):
            return [strip(v) for v in o]
        return o
    return strip(report)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="compactode", description=__doc__.splitlines()[0] if __doc__ else None,
                                 formatter_class=argparse.RawDescriptionHelpFormatter, epilog=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="problem configuration (JSON)")
        p.add_argument("--out", default="compactode-out", help="output directory (default: %(default)s)")
        p.add_argument("-q", "--quiet", action="store_true", help="do not echo the report")
        add_flags(p)

    for name in COMMANDS:
        common(sub.add_parser(name, help=f"run {name}"))

    sc = sub.add_parser("scenario", help="built-in scenarios")
    sc.add_argument("action", choices=["list", "show", "run"])
    sc.add_argument("name", nargs="?")
    sc.add_argument("--command", dest="scenario_command", choices=list(COMMANDS),
                    help="override the scenario's default command")
    sc.add_argument("--out", default="compactode-out")
    sc.add_argument("-q", "--quiet", action="store_true")
    add_flags(sc)
    return ap


def add_flags(p):
    p.add_argument("--x0", type=float, nargs="+", help="simulate: initial x")
    p.add_argument("--s0", type=float, help="simulate: initial s")
    p.add_argument("--t0", type=float, help="simulate: initial time (s0 = g(t0))")
    p.add_argument("--rate", type=float, help="pullback: forcing rate r")
    p.add_argument("--r-lo", type=float, dest="r_lo", help="tip: lower rate")
    p.add_argument("--r-hi", type=float, dest="r_hi", help="tip: upper rate")
    p.add_argument("--tol", type=float, help="tip: relative bisection tolerance")
    p.add_argument("--batch", type=int, help="tip: probes per refinement step")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "scenario":
        if args.action == "list":
            for name in scenarios.names():
                print(f"{name}\t{scenarios.SCENARIOS[name]['description']}")
            return 0
        if not args.name:
            print("scenario name required", file=sys.stderr)
            return 2
        try:
            cfg = scenarios.get(args.name)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return exc.exit_code
        if args.action == "show":
            print(dumps(cfg))
            return 0
        command = args.scenario_command or cfg["command"]
        return run_command(command, cfg, args.out, args, args.quiet)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return run_command(args.command, cfg, args.out, args, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
