import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compactode.errors import DegenerateLimits, NonPositiveRate, NotMonotone, OutOfDomain
from compactode.problem import ForcingProfile
from compactode.transform import (
    from_spec,
    make_algebraic,
    make_custom,
    make_exponential,
    make_gamma_based,
    scaled,
)

KINDS = [
    ("exp", "two-sided"), ("exp", "right"), ("exp", "left"),
    ("alg", "two-sided"), ("alg", "right"), ("alg", "left"),
]


def build(fam, sided, alpha):
    return (make_exponential if fam == "exp" else make_algebraic)(alpha, sided)


def test_exponential_examples():
    tr = make_exponential(1.0)
    assert tr.h(0.0) == 0.0 and tr.g(0.0) == 0.0
    assert tr.g(1.0) == pytest.approx(math.tanh(0.5), abs=1e-15)
    assert abs(tr.g(1.0) - 0.4621172) < 1e-7
    # the rounded 0.4621172 maps to 1.0000001; the exact preimage is tanh(0.5)
    assert tr.h(math.tanh(0.5)) == pytest.approx(1.0, abs=1e-8)
    assert make_exponential(2.0).gamma(0.0) == 1.0


def test_algebraic_examples():
    tr = make_algebraic(1.0)
    assert tr.g(2.0) == pytest.approx((-1 + math.sqrt(17)) / 4, abs=1e-12)
    assert tr.h(tr.g(2.0)) == pytest.approx(2.0, abs=1e-10)
    assert tr.h(0.5) == pytest.approx(0.5 / 0.75, abs=1e-12)
    assert make_algebraic(2.0).h(make_algebraic(2.0).g(3.0)) == pytest.approx(3.0, abs=1e-9)
    for a in (0.5, 1.0, 2.0, 3.7):
        assert make_algebraic(a).gamma(0.0) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("fam,sided", KINDS)
@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_endpoints(fam, sided, alpha):
    tr = build(fam, sided, alpha)
    for side in tr.ends:
        s = 1.0 if side == "+" else -1.0
        assert tr.gamma(s) == 0.0
        expect = 0.0 if fam == "alg" else (-alpha if side == "+" else alpha)
        assert abs(tr.gamma_prime(s) - expect) <= 1e-12
        assert tr.endpoint_slope(side) == pytest.approx(expect, abs=1e-12)


@pytest.mark.parametrize("fam,sided", KINDS)
def test_inverse_pair_and_gamma_identity(fam, sided):
    tr = build(fam, sided, 1.3)
    lo, hi = tr.s_domain
    s = np.linspace(lo, hi, 1002)[1:-1]
    back = np.array([tr.g(tr.h(x)) for x in s])
    assert np.max(np.abs(back - s)) < 1e-10
    hs = np.array([tr.h(x) for x in s])
    assert np.all(np.diff(hs) > 0)
    for x in s[::10]:
        assert tr.h_prime(x) * tr.gamma(x) == pytest.approx(1.0, abs=1e-10)
        assert tr.gamma(x) > 0


@pytest.mark.parametrize("fam", ["exp", "alg"])
def test_g_monotone(fam):
    tr = build(fam, "two-sided", 0.8)
    ts = np.linspace(-200, 200, 1000)
    gs = np.array([tr.g(t) for t in ts])
    assert np.all(np.diff(gs) >= 0)
    assert gs[0] > -1 - 1e-15 and gs[-1] < 1 + 1e-15


def test_one_sided_domains():
    assert make_exponential(1.0, "right").s_domain == (0.0, 1.0)
    assert make_algebraic(1.0, "left").s_domain == (-1.0, 0.0)
    with pytest.raises(OutOfDomain):
        make_exponential(1.0, "right").h(-0.5)


def test_two_rate():
    tr = make_exponential((1.0, 3.0))
    assert tr.gamma_prime(1.0) == pytest.approx(-3.0, abs=1e-12)
    assert tr.gamma_prime(-1.0) == pytest.approx(1.0, abs=1e-12)
    s = np.linspace(-0.999, 0.999, 201)
    assert max(abs(tr.g(tr.h(x)) - x) for x in s) < 1e-10
    tr = make_algebraic((0.5, 2.0))
    assert max(abs(tr.g(tr.h(x)) - x) for x in s) < 1e-10


def test_rejects_bad_rates():
    with pytest.raises(NonPositiveRate):
        make_exponential(0.0)
    with pytest.raises(NonPositiveRate):
        make_exponential(-1.0)


def test_gamma_based_tanh():
    tr = make_gamma_based(ForcingProfile(("tanh(t)",)))
    for t in (-3.0, -0.5, 0.0, 1.0, 4.0):
        assert tr.g(t) == pytest.approx(math.tanh(t), abs=1e-12)
    assert tr.endpoint_slope("+") == pytest.approx(-2.0, abs=1e-6)
    assert tr.endpoint_slope("-") == pytest.approx(2.0, abs=1e-6)


def test_gamma_based_refusals():
    with pytest.raises(DegenerateLimits):
        make_gamma_based(ForcingProfile(("2 + 0*t",)))
    with pytest.raises(NotMonotone):
        make_gamma_based(ForcingProfile(("sech(t)",)))


def test_custom_transform_matches_builtin():
    tr = make_custom(g="tanh(t/2)")
    ref = make_exponential(1.0)
    for s in (-0.9, -0.2, 0.3, 0.95):
        assert tr.h(s) == pytest.approx(ref.h(s), abs=1e-9)
        assert tr.gamma(s) == pytest.approx(ref.gamma(s), abs=1e-9)


def test_from_spec_and_scaled():
    tr = from_spec({"kind": "exp-two-sided", "alpha": 1.5})
    assert tr.gamma_prime(1.0) == pytest.approx(-1.5)
    tr2 = scaled(tr, 2.0)
    assert tr2.gamma_prime(1.0) == pytest.approx(-3.0)
    alg = from_spec({"kind": "alg-right", "alpha": 1.0})
    assert scaled(alg, 5.0) is alg


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(KINDS), st.floats(0.2, 5.0), st.floats(0.001, 0.999))
def test_property_inverse_and_positivity(kind, alpha, frac):
    fam, sided = kind
    tr = build(fam, sided, alpha)
    lo, hi = tr.s_domain
    s = lo + frac * (hi - lo)
    assert tr.gamma(s) > 0
    assert abs(tr.g(tr.h(s)) - s) < 1e-10
    s2 = min(s + 1e-3 * (hi - lo), hi - 1e-9)
    if s2 > s:
        assert tr.h(s2) > tr.h(s)
