"""Compactification of asymptotically autonomous ODEs x' = f(x, Γ(t)).

The time line is squeezed into a bounded s-interval so that the future and
past limit systems sit on invariant end subspaces s = ±1 of an autonomous
extended system.  On top of that: transformation-condition checks, decay
classification, equilibria and their embeddings, pullback-attractor traces
and critical rates of rate-induced tipping.
"""
from .conditions import (
    EnvelopeTransform,
    check_condition_one,
    check_condition_two,
    classify_decay,
    envelope_rate,
    envelope_value,
    recommend,
)
from .connect import RateProblem, critical_rate, pullback_trace
from .expr import deriv, evaluate, parse, render
from .extended import ExtendedState, assemble
from .invariant import embed, find_equilibria, omega_classify, stable_membership, unstable_branch
from .odeint import Controls, Trajectory, direct_integrate, distance_series, integrate
from .problem import ForcingProfile, VectorFieldDef, estimate_limits, limit_system, make_problem
from .transform import make_algebraic, make_custom, make_exponential, make_gamma_based

__version__ = "0.1.0"

__all__ = [
    "EnvelopeTransform",
    "check_condition_one",
    "check_condition_two",
    "classify_decay",
    "envelope_rate",
    "envelope_value",
    "recommend",
    "RateProblem",
    "critical_rate",
    "pullback_trace",
    "deriv",
    "evaluate",
    "parse",
    "render",
    "ExtendedState",
    "assemble",
    "embed",
    "find_equilibria",
    "omega_classify",
    "stable_membership",
    "unstable_branch",
    "Controls",
    "Trajectory",
    "direct_integrate",
    "distance_series",
    "integrate",
    "ForcingProfile",
    "VectorFieldDef",
    "estimate_limits",
    "limit_system",
    "make_problem",
    "make_algebraic",
    "make_custom",
    "make_exponential",
    "make_gamma_based",
]
