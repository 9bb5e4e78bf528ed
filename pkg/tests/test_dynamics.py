import numpy as np
import pytest

import fisheranneal as fa
from fisheranneal import dynamics


def overdamped_fig1a():
    return fa.Overdamped(fa.get_potential("fig1a"), fa.inverse_log(C=4.0))


def underdamped_fig1a():
    return fa.Underdamped(fa.get_potential("fig1a"),
                          fa.shifted_inverse_log(base=1.0, C=1.0))


def constant_j(c=0.8):
    pot = fa.get_potential("fig3b")
    return fa.NonReversible(pot, fa.constant(1.0), fa.ConstantJ(fa.constant(c)))


# ---------------------------------------------------------------------------
# gamma
# ---------------------------------------------------------------------------

def test_gamma_overdamped_is_zero():
    spec = overdamped_fig1a()
    x = np.array([[0.3], [2.0], [-1.5]])
    assert np.all(fa.gamma(spec, 3.0, x) == 0.0)


def test_gamma_underdamped_is_velocity_force_pair():
    spec = underdamped_fig1a()
    state = np.array([2.0, -0.7])
    g = fa.gamma(spec, 3.0, state)
    # (-v, V'(x)) with V'(2) = 1/4
    assert g == pytest.approx([0.7, 0.25])


def test_gamma_quadratic_j_hand_value():
    pot = fa.quadratic_form(np.eye(2), np.zeros(2))
    spec = fa.NonReversible(pot, fa.constant(1.0),
                            fa.QuadraticJ(np.array([[0.0, 1.0], [1.0, 0.0]]),
                                          np.zeros(2)))
    g = fa.gamma(spec, 1.0, np.array([1.0, 2.0]))
    assert g == pytest.approx([3.0, 0.0], abs=1e-14)


def test_gamma_constant_j():
    spec = constant_j(c=0.8)
    x = np.array([0.4, -0.2])
    g = fa.gamma(spec, 2.0, x)
    grad = spec.potential.grad(x)
    assert g == pytest.approx([0.8 * grad[1], -0.8 * grad[0]])


# ---------------------------------------------------------------------------
# divergence identity
# ---------------------------------------------------------------------------

def test_divergence_overdamped_exactly_zero():
    spec = overdamped_fig1a()
    res = fa.check_pi_gamma_divergence(spec, 3.0, [np.linspace(-1, 2, 9)])
    assert res == 0.0


def test_divergence_ex52_below_tolerance(ex52_skew):
    axes = [np.linspace(-0.5, 0.5, 11)] * 2
    res = fa.check_pi_gamma_divergence(ex52_skew, 0.0, axes, fd_step=1e-4)
    assert res < 1e-6


def test_divergence_constant_j_and_underdamped():
    axes2 = [np.linspace(-0.5, 0.5, 7)] * 2
    assert fa.check_pi_gamma_divergence(constant_j(), 2.0, axes2) < 1e-6
    spec = underdamped_fig1a()
    assert fa.check_pi_gamma_divergence(spec, 3.0, axes2) < 1e-6


def test_divergence_broken_field_detected(ex52_skew):
    axes = [np.linspace(-0.5, 0.5, 11)] * 2
    broken = lambda t, x: ex52_skew.potential.grad(x)
    res = fa.check_pi_gamma_divergence(ex52_skew, 0.0, axes, gamma_field=broken)
    assert res > 1e-2


def test_divergence_underflow_reported():
    pot = fa.quadratic_form([[1.0]], [0.0])
    spec = fa.Overdamped(pot, fa.constant(1e-4))
    with pytest.raises(ValueError, match="underflow"):
        fa.check_pi_gamma_divergence(spec, 1.0, [np.array([0.0, 40.0])])


# ---------------------------------------------------------------------------
# drift
# ---------------------------------------------------------------------------

def test_drift_overdamped_stationary_point():
    spec = overdamped_fig1a()
    assert fa.drift(spec, 3.0, np.array([1.0])) == pytest.approx([0.0])


def test_drift_ex52_hand_value(ex52_skew):
    d = fa.drift(ex52_skew, 0.0, np.array([0.1, 0.1]))
    assert d == pytest.approx([-0.104905, -0.1069], abs=1e-12)


def test_drift_underdamped_rest_at_minimum():
    spec = underdamped_fig1a()
    state = np.array([1.0, 0.0])   # minimizer of fig1a, zero velocity
    assert fa.drift(spec, 3.0, state) == pytest.approx([0.0, 0.0])


def test_drift_dimension_mismatch():
    spec = overdamped_fig1a()
    with pytest.raises(dynamics.DimensionError):
        fa.drift(spec, 3.0, np.zeros(2))


# ---------------------------------------------------------------------------
# decomposition closure: drift == diffusion * grad log pi + div(diffusion) - gamma
# (div of the squared diffusion vanishes: it is constant in x for every family)
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("make_spec", [overdamped_fig1a, underdamped_fig1a,
                                       constant_j],
                         ids=["overdamped", "underdamped", "constant_j"])
def test_decomposition_closure(make_spec):
    spec = make_spec()
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1.5, 1.5, size=(20, spec.state_dim))
    for t in (3.0, 10.0):
        aat = spec.diffusion_matrix(t)
        lhs = spec.drift(t, pts)
        rhs = spec.grad_log_reference(t, pts) @ aat.T - spec.gamma(t, pts)
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_decomposition_closure_quadratic_j(ex52_skew):
    # For the spatially varying stream function, the divergence-free gamma and
    # the contracting drift carry the divergence correction with opposite
    # signs; closure holds after adding back twice the correction.
    spec = ex52_skew
    rng = np.random.default_rng(4)
    pts = rng.uniform(-1.0, 1.0, size=(20, 2))
    t = 0.5
    aat = spec.diffusion_matrix(t)
    lhs = spec.drift(t, pts)
    rhs = (spec.grad_log_reference(t, pts) @ aat.T - spec.gamma(t, pts)
           - 2.0 * spec.beta(t) * spec.j_row_divergence(t, pts))
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_nonreversible_requires_2d():
    pot = fa.get_potential("fig1a")
    with pytest.raises(dynamics.DimensionError):
        fa.NonReversible(pot, fa.constant(1.0), fa.ConstantJ(fa.constant(1.0)))
    pot2 = fa.get_potential("fig3a")
    with pytest.raises(dynamics.DimensionError):
        fa.Underdamped(pot2, fa.constant(1.0))


def test_quadratic_j_validation():
    with pytest.raises(dynamics.DimensionError):
        fa.QuadraticJ(np.array([[0.0, 1.0], [0.5, 0.0]]), np.zeros(2))
    with pytest.raises(dynamics.DimensionError):
        fa.QuadraticJ(np.zeros((2, 2)), np.zeros(3))
