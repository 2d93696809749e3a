import numpy as np
import pytest

from compactode.errors import Ambiguous, Unsupported
from compactode.extended import assemble
from compactode.invariant import (
    ACCEPT_RESIDUAL,
    embed,
    find_equilibria,
    omega_classify,
    stable_membership,
    unstable_branch,
)
from compactode.odeint import Controls, integrate
from compactode.problem import limit_system, make_problem
from compactode.transform import make_algebraic, make_exponential

LINEAR = make_problem(["-x1 + Gamma1"], ["tanh(t)"])
QUAD = make_problem(["(x1 + Gamma1)^2 - 1"], ["1.5*(tanh(t/2) + 1)"])
# frozen at both ends to x² − 1
SQUARE = make_problem(["x1^2 - 1 + 0*Gamma1"], ["tanh(t)"])


def test_linear_equilibrium():
    eqs = find_equilibria(limit_system(*LINEAR, "+"), [[-5, 5]], 11)
    assert len(eqs) == 1
    e = eqs[0]
    assert e.x[0] == pytest.approx(1.0, abs=1e-8)
    assert e.type == "sink" and e.spectrum[0].real == pytest.approx(-1.0)


def test_square_equilibria():
    eqs = find_equilibria(limit_system(*QUAD, "-"), [[-5, 5]], 11)
    by_x = {round(e.x[0]): e for e in eqs}
    assert set(by_x) == {-1, 1}
    assert by_x[-1].type == "sink" and by_x[-1].spectrum[0].real == pytest.approx(-2.0)
    assert by_x[1].type == "source" and by_x[1].spectrum[0].real == pytest.approx(2.0)
    assert all(e.residual < ACCEPT_RESIDUAL for e in eqs)


def test_hamiltonian_centre():
    v, p = make_problem(["x2", "-(x1 - x1^3) + 0*Gamma1"], ["tanh(t)"])
    eqs = find_equilibria(limit_system(v, p, "+"), [[-2, 2], [-2, 2]], 9)
    origin = min(eqs, key=lambda e: np.linalg.norm(e.x))
    np.testing.assert_allclose(sorted(origin.spectrum.imag), [-1.0, 1.0], atol=1e-12)
    assert origin.type == "nonhyperbolic"
    assert len(eqs) == 3


def _fd_jacobian(sys, y, h=1e-6):
    n = y.size
    J = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        # one-sided in s at the ends: the state is clamped to the domain
        yp, ym = y + e, y - e
        lo, hi = sys.s_domain
        yp[-1], ym[-1] = min(yp[-1], hi), max(ym[-1], lo)
        J[:, j] = (sys.rhs_vector(yp) - sys.rhs_vector(ym)) / (yp[j] - ym[j])
    return J


@pytest.mark.parametrize("make,ls", [(lambda: make_exponential(1.0), 1.0), (lambda: make_algebraic(1.0), 0.0)])
def test_embedding_spectrum(make, ls):
    sys = assemble(*QUAD, make())
    past = [e for e in find_equilibria(limit_system(*QUAD, "-"), [[-5, 5]], 11) if e.type == "sink"][0]
    es = embed(past, sys, "-")
    np.testing.assert_allclose(sorted(es.full_spectrum.real), sorted([-2.0, ls]), atol=1e-10)
    assert es.l_s == sys.transform.gamma_prime(-1.0)
    J = es.jacobian
    np.testing.assert_allclose(J, _fd_jacobian(sys, es.point), atol=1e-5, rtol=1e-5)
    # extended eigenproblem
    v = es.extra_eigenvector
    np.testing.assert_allclose(J @ v, es.l_s * v, atol=1e-8)


def test_extra_vector_normal_when_column_vanishes():
    sys = assemble(*LINEAR, make_exponential(1.0))
    fut = find_equilibria(limit_system(*LINEAR, "+"), [[-5, 5]], 11)[0]
    es = embed(fut, sys, "+")
    np.testing.assert_array_equal(es.extra_eigenvector, [0.0, 1.0])
    assert es.l_s == -1.0


def test_extra_vector_tilted_when_column_nonzero():
    sys = assemble(*LINEAR, make_exponential(2.0))
    fut = find_equilibria(limit_system(*LINEAR, "+"), [[-5, 5]], 11)[0]
    es = embed(fut, sys, "+")
    assert es.extra_eigenvector[0] != 0.0


def _linear_branch(tr, delta):
    sys = assemble(*LINEAR, tr)
    past = find_equilibria(limit_system(*LINEAR, "-"), [[-5, 5]], 11)[0]
    return sys, unstable_branch(sys, embed(past, sys, "-"), delta)


def test_linear_branch_reaches_future_sink():
    sys, traj = _linear_branch(make_exponential(1.0), 1e-6)
    assert traj.termination == "s_reached_end"
    assert abs(traj.final[0] - 1.0) < 1e-4
    fut = find_equilibria(limit_system(*LINEAR, "+"), [[-5, 5]], 11)[0]
    assert omega_classify(traj, [embed(fut, sys, "+")]) == 0


@pytest.mark.parametrize("make", [lambda: make_exponential(1.0), lambda: make_algebraic(4.0)])
def test_branch_delta_robustness(make):
    tr = make()
    _, a = _linear_branch(tr, 1e-6)
    _, b = _linear_branch(tr, 5e-7)
    lo = max(a.s[0], b.s[0])
    hi = min(a.s[-1], b.s[-1])
    s = np.linspace(lo, hi, 2001)
    diff = np.max(np.abs(a.interp_x_at_s(s) - b.interp_x_at_s(s)))
    assert diff <= 2 * 1e-6


def test_zero_offset_stays_put():
    sys = assemble(*LINEAR, make_exponential(1.0))
    traj = integrate(sys, sys.state([-1.0], -1.0), Controls(t_max=50.0))
    assert np.all(traj.x == -1.0) and np.all(traj.s == -1.0)


def test_membership():
    sys = assemble(*SQUARE, make_exponential(1.0))
    eqs = find_equilibria(limit_system(*SQUARE, "+"), [[-5, 5]], 11)
    sink = embed([e for e in eqs if e.type == "sink"][0], sys, "+")
    source = embed([e for e in eqs if e.type == "source"][0], sys, "+")
    assert stable_membership(sys, sink, sink.point).verdict == "converges"
    assert stable_membership(sys, sink, np.array([-1.0 + 1e-3, 1.0]), Controls(t_max=20.0)).verdict == "converges"
    assert stable_membership(sys, source, np.array([1.1, 1.0])).verdict == "escapes"


def test_persistence_of_future_sink():
    sys = assemble(*LINEAR, make_exponential(1.0))
    fut = embed(find_equilibria(limit_system(*LINEAR, "+"), [[-5, 5]], 11)[0], sys, "+")
    rng = np.random.default_rng(11)
    delta = 1e-3
    for _ in range(20):
        y0 = np.array([1.0 + rng.uniform(-delta, delta), 1.0 - rng.uniform(0.0, delta)])
        traj = integrate(sys, y0, Controls(t_max=100.0))
        assert omega_classify(traj, [fut]) == 0


def test_omega_classify_edge_cases():
    v, p = make_problem(["x1^2 + 0*Gamma1"], ["tanh(t)"])
    sys = assemble(v, p, make_exponential(1.0))
    esc = integrate(sys, sys.state([1.0], 1.0), Controls(t_max=5.0, escape_radius=10.0))
    assert omega_classify(esc, []) is None
    lin = assemble(*LINEAR, make_exponential(1.0))
    fut = embed(find_equilibria(limit_system(*LINEAR, "+"), [[-5, 5]], 11)[0], lin, "+")
    traj = integrate(lin, lin.state([1.0], 1.0), Controls(t_max=1.0))
    with pytest.raises(Ambiguous):
        omega_classify(traj, [fut, fut])


def test_membership_refuses_nonhyperbolic():
    v, p = make_problem(["x2", "-(x1 - x1^3) + 0*Gamma1"], ["tanh(t)"])
    sys = assemble(v, p, make_exponential(1.0))
    eqs = find_equilibria(limit_system(v, p, "+"), [[-2, 2], [-2, 2]], 9)
    origin = min(eqs, key=lambda e: np.linalg.norm(e.x))
    with pytest.raises(Unsupported):
        stable_membership(sys, embed(origin, sys, "+"), np.array([0.01, 0.0, 1.0]))
