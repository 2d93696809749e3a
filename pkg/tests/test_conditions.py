import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from compactode.conditions import (
    EnvelopeTransform,
    check_condition_one,
    check_condition_two,
    classify_decay,
    envelope_accel_ratio,
    envelope_rate,
    envelope_value,
    judge,
    recommend,
)
from compactode.errors import Unrecommendable
from compactode.problem import ForcingProfile
from compactode.transform import make_algebraic, make_custom, make_exponential

TANH = ForcingProfile(("tanh(t)",))
RADIAL = ForcingProfile(("(1 - n)/t", "-Vinf*t^2/(1 + t^2)"), {"n": 3.0, "Vinf": -3.0}, sides="future-only")
BUMPS = ForcingProfile(("tanh(t) + sin(t^3)/t^2",))


def test_envelope_examples():
    assert envelope_value(2, math.exp(math.e)) == pytest.approx(-1.0, abs=1e-14)
    assert envelope_rate(2, math.exp(math.e)) == pytest.approx(math.exp(-(math.e + 1)), rel=1e-12)
    # e^{-(e+1)} = 0.024276, which the quoted "≈ 0.0244" rounds loosely
    assert abs(envelope_rate(2, math.exp(math.e)) - 0.0244) < 5e-4


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_envelope_decays(m):
    vals = [abs(envelope_value(m, 2.0 ** k)) for k in range(20, 41)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert abs(envelope_accel_ratio(m, 2.0 ** 40)) < 1e-3
    assert abs(envelope_accel_ratio(m, -(2.0 ** 40))) < 1e-3


def test_condition_one_truth_table():
    one = {a: check_condition_one(TANH, make_exponential(a), "+") for a in (1.0, 2.0, 3.0)}
    assert one[1.0].converged and one[1.0].value == pytest.approx(0.0, abs=1e-6)
    assert one[2.0].converged and one[2.0].value == pytest.approx(1.0, abs=1e-6)
    assert not one[3.0].converged and one[3.0].verdict == "diverges"
    past = check_condition_one(TANH, make_exponential(1.0), "-")
    assert past.converged and abs(past.value) < 1e-6


def test_condition_one_algebraic_radial():
    rep = check_condition_one(RADIAL, make_algebraic(1.0, "right"), "+")
    assert rep.converged
    assert rep.value[0] == pytest.approx(2.0, abs=1e-4)
    assert rep.value[1] == pytest.approx(0.0, abs=1e-4)


def test_condition_two():
    assert check_condition_two(make_exponential(1.5), "+").value == pytest.approx(-1.5)
    assert check_condition_two(make_exponential(1.5), "-").value == pytest.approx(1.5)
    assert check_condition_two(make_algebraic(1.0), "+").value == pytest.approx(0.0, abs=1e-12)


def remark_transform(k):
    # g ~ 1 − exp(−t^k) on t ≥ 0, with ln ġ supplied for accuracy at large t
    return make_custom(g="1 - exp(-t^k)", log_speed="ln(k) + (k - 1)*ln(t) - t^k",
                       sides="future-only", params={"k": k})


def test_condition_two_custom_family():
    r1 = check_condition_two(remark_transform(1.0), "+")
    assert r1.converged and r1.value == pytest.approx(-1.0, abs=1e-3)
    assert remark_transform(1.0).accel_ratio(2.0 ** 30) == pytest.approx(-1.0, abs=1e-3)
    r05 = check_condition_two(remark_transform(0.5), "+")
    assert r05.converged and abs(r05.value) < 1e-3
    r2 = check_condition_two(remark_transform(2.0), "+")
    assert not r2.converged and r2.verdict == "diverges"


def test_envelope_transform_reports():
    for m in range(4):
        rep = check_condition_two(EnvelopeTransform(m), "+")
        assert rep.converged and abs(rep.value) < 1e-3


def test_classify_decay():
    dc = classify_decay(TANH, "+")
    assert dc.cls == "exponential" and dc.rate == pytest.approx(2.0, rel=0.05)
    dc = classify_decay(RADIAL, "+")
    assert dc.cls == "algebraic" and dc.order == pytest.approx(2.0, rel=0.05)
    assert classify_decay(BUMPS, "+").cls == "pathological"


def test_recommend():
    rec = recommend(TANH)
    assert rec.transform.kind == "exp-two-sided"
    assert rec.transform.alpha_plus == pytest.approx(1.8, rel=1e-6)
    assert all(r.converged for r in rec.condition_one.values())
    assert all(r.converged for r in rec.condition_two.values())
    rec = recommend(RADIAL)
    assert rec.transform.kind == "alg-right"
    assert rec.transform.alpha_plus == pytest.approx(0.9, rel=1e-6)
    with pytest.raises(Unrecommendable):
        recommend(BUMPS)


def test_judge_rules():
    assert judge([1.0, 1.0, 1.0])[:3] == (True, 1.0, "finite")
    conv, val, verdict, _ = judge([0.5, 0.25, 0.125, 0.0625])
    assert conv and verdict == "finite" and 0.0 <= val <= 0.0625
    assert judge([1.0, 10.0, 100.0, 1000.0])[2] == "diverges"
    assert judge([1.0, 2e12])[2] == "diverges"
    assert judge([1.0, -1.0, 1.0, -1.0])[2] == "oscillates"


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_judge_constant_sequences(c):
    conv, val, verdict, _ = judge([c] * 5)
    assert conv and val == c and verdict == "finite"
