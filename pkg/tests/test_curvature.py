import numpy as np
import pytest

import fisheranneal as fa
from fisheranneal import curvature
from fisheranneal.potentials import Potential
from fisheranneal.schedules import Schedule


def linear_potential():
    return Potential(
        name="linear", dim=1,
        value=lambda x: 2.0 * np.asarray(x)[..., 0],
        grad=lambda x: np.full(np.asarray(x).shape, 2.0),
        hess=lambda x: np.zeros(np.asarray(x).shape[:-1] + (1, 1)),
    )


def increasing_schedule():
    return Schedule(kind="linear_up", value=lambda t: 1.0 + 0.1 * np.asarray(t),
                    deriv=lambda t: 0.1 * np.ones_like(np.asarray(t, float)))


# ---------------------------------------------------------------------------
# overdamped field
# ---------------------------------------------------------------------------

def test_overdamped_annealed_certifies_curvature_floor():
    hf = fa.hessian_overdamped(fa.get_potential("fig1a"), fa.inverse_log(C=4.0))
    xs = [np.array([x]) for x in np.linspace(-5.0, 7.0, 50)]
    rep = fa.lambda_certificate(hf, xs, np.linspace(3.0, 100.0, 40))
    assert rep.feasible
    assert rep.lam >= 0.25 - 1e-9


def test_overdamped_constant_temperature_gives_min_eigenvalue():
    pot = fa.quadratic_form(np.diag([2.0, 0.1]), np.zeros(2))
    hf = fa.hessian_overdamped(pot, fa.constant(1.0))
    rep = fa.lambda_certificate(hf, [np.zeros(2)], [5.0])
    assert rep.feasible
    assert rep.lam == pytest.approx(0.1, abs=1e-9)


def test_overdamped_heating_flat_potential_infeasible():
    hf = fa.hessian_overdamped(linear_potential(), increasing_schedule())
    rep = fa.lambda_certificate(hf, [np.array([0.0])], [2.0])
    assert not rep.feasible
    assert rep.lam is None
    assert rep.min_gap < 0


# ---------------------------------------------------------------------------
# diagonal-diffusion field
# ---------------------------------------------------------------------------

def test_diag_identity_reduces_to_overdamped():
    pot = fa.get_potential("fig3b")
    beta = fa.inverse_log(C=2.0)
    plain = fa.hessian_overdamped(pot, beta)
    diag = fa.hessian_nonreversible_diag(pot, fa.DiagonalAlpha.identity(2), beta)
    rng = np.random.default_rng(0)
    for _ in range(20):
        t = rng.uniform(3, 40)
        x = rng.uniform(-2, 2, size=2)
        assert np.max(np.abs(plain.field(t, x) - diag.field(t, x))) < 1e-12
        assert np.max(np.abs(plain.metric(t, x) - diag.metric(t, x))) < 1e-12


def test_diag_constant_scaling_hand_value():
    # alpha = 2 I, V = x^2/2, temperature 1: field 16, metric 4, rate 4
    pot = fa.quadratic_form([[1.0]], [0.0])
    hf = fa.hessian_nonreversible_diag(pot, fa.DiagonalAlpha.constant([2.0]),
                                       fa.constant(1.0))
    assert hf.field(1.0, np.array([0.3]))[0, 0] == pytest.approx(16.0)
    assert hf.metric(1.0, np.array([0.3]))[0, 0] == pytest.approx(4.0)
    rep = fa.lambda_certificate(hf, [np.array([0.3])], [1.0])
    assert rep.lam == pytest.approx(4.0, abs=1e-9)


def test_diag_with_rotational_gamma_matches_skew_matrix():
    # alpha = I with gamma = c(t) (d2V, -d1V) must reproduce
    # beta * [[d11V - c d12V, d12V - (c/2)(d22V - d11V)], [., d22V + c d12V]]
    pot = fa.get_potential("fig3b")
    beta = fa.constant(1.3)
    c_fn = lambda t: 0.7 / t
    gam = fa.GammaField.rotational(pot, c_fn)
    hf = fa.hessian_nonreversible_diag(pot, fa.DiagonalAlpha.identity(2),
                                       beta, gamma=gam)
    rng = np.random.default_rng(1)
    for _ in range(20):
        t = rng.uniform(2, 20)
        x = rng.uniform(-2, 2, size=2)
        H = pot.hess(x)
        c = c_fn(t)
        b = 1.3
        expect = b * np.array([
            [H[0, 0] - c * H[0, 1],
             H[0, 1] - 0.5 * c * (H[1, 1] - H[0, 0])],
            [H[0, 1] - 0.5 * c * (H[1, 1] - H[0, 0]),
             H[1, 1] + c * H[0, 1]],
        ])
        assert np.max(np.abs(hf.field(t, x) - expect)) < 1e-12


def test_diag_dimension_guard():
    pot = fa.get_potential("fig3a")
    with pytest.raises(ValueError):
        fa.hessian_nonreversible_diag(pot, fa.DiagonalAlpha.identity(1),
                                      fa.constant(1.0))


# ---------------------------------------------------------------------------
# skew-drift field
# ---------------------------------------------------------------------------

def test_j_drift_race_example_eigenvalues(ex52_skew):
    hf = fa.hessian_j_drift(ex52_skew)
    F = hf.field(0.0, np.zeros(2))
    eigs = np.linalg.eigvalsh(F)
    assert eigs[0] == pytest.approx(1.05, abs=1e-10)
    # against the bare curvature floor of the energy itself
    assert np.linalg.eigvalsh(ex52_skew.potential.hess(np.zeros(2)))[0] \
        == pytest.approx(0.1)


def test_j_drift_zero_stream_function_reduces_to_plain():
    pot = fa.get_potential("fig3b")
    beta = fa.inverse_log(C=2.0)
    spec = fa.NonReversible(pot, beta, fa.QuadraticJ(np.zeros((2, 2)), np.zeros(2)))
    hf = fa.hessian_j_drift(spec)
    plain = fa.hessian_overdamped(pot, beta)
    x = np.array([0.4, -0.9])
    assert np.max(np.abs(hf.field(7.0, x) - plain.field(7.0, x))) < 1e-14


def test_j_drift_constant_stream_function():
    pot = fa.get_potential("fig3b")
    spec = fa.NonReversible(pot, fa.constant(1.0),
                            fa.ConstantJ(fa.constant(0.6)))
    hf = fa.hessian_j_drift(spec)
    x = np.array([0.2, 0.5])
    H = pot.hess(x)
    expect = np.array([
        [H[0, 0] - 0.6 * H[0, 1], H[0, 1] - 0.3 * (H[1, 1] - H[0, 0])],
        [H[0, 1] - 0.3 * (H[1, 1] - H[0, 0]), H[1, 1] + 0.6 * H[0, 1]],
    ])
    assert np.max(np.abs(hf.field(4.0, x) - expect)) < 1e-12


# ---------------------------------------------------------------------------
# kinetic (underdamped) field
# ---------------------------------------------------------------------------

def test_underdamped_matches_limit_display():
    # z1 = z2 = 1, constant friction rbar, curvature u:
    # [[1, (2 rbar + 1 - u)/2], [., rbar^2 + rbar - u]]
    rbar, u = 2.0, 1.3
    F, M = curvature.underdamped_matrices(1.0, 1.0, rbar, 0.0, u)
    assert F == pytest.approx(np.array([[1.0, 0.5 * (2 * rbar + 1 - u)],
                                        [0.5 * (2 * rbar + 1 - u),
                                         rbar ** 2 + rbar - u]]))
    assert M == pytest.approx(np.array([[1.0, 1.0], [1.0, rbar + 1.0]]))


def test_underdamped_zero_completion_never_psd():
    # z = 0 leaves a zero diagonal entry against a nonzero off-diagonal
    F, _ = curvature.underdamped_matrices(0.0, 0.0, 3.0, 0.0, 1.0)
    assert F[0, 0] == 0.0
    assert F[0, 1] == pytest.approx(1.5)
    assert np.linalg.eigvalsh(F)[0] < 0


def test_underdamped_via_potential_curvature():
    params = fa.UnderdampedParams(1.0, 1.0, 0.25, 0.25, fa.constant(3.0))
    F, M = fa.hessian_underdamped(params, fa.get_potential("fig1a"), 5.0, [0.7])
    F2, M2 = curvature.underdamped_matrices(1.0, 1.0, 3.0, 0.0, 0.25)
    assert np.array_equal(F, F2) and np.array_equal(M, M2)


def test_underdamped_reconciliation_r3_case():
    # r = 3, z1 = z2 = 1, u = 1, steady friction: the assembled matrix is
    # [[1, 3], [3, 11]] (off-diagonal (r + r + 1 - u)/2 = 3), which IS
    # positive definite: det = 2 > 0. Four times that determinant equals the
    # quadratic-form sufficient condition value 8, so the matrix route and
    # the determinant route agree; see test_reconciliation_identity below.
    F, _ = curvature.underdamped_matrices(1.0, 1.0, 3.0, 0.0, 1.0)
    assert F == pytest.approx(np.array([[1.0, 3.0], [3.0, 11.0]]))
    det = np.linalg.det(F)
    assert det == pytest.approx(2.0)
    assert 4.0 * det == pytest.approx(8.0)
    quad = (-1.0 ** 4 * 1.0 ** 2 + 2 * (3 * (1 + 1) - 1) * 1.0 * 1.0
            - ((1 - 1) * 3 + 1) ** 2 - 0.0)
    assert quad == pytest.approx(8.0)
    assert np.linalg.eigvalsh(F)[0] > 0


def test_reconciliation_identity_symbolic():
    # the quadratic-form sufficient condition is exactly 4 det(field):
    # pointwise positive semidefiniteness and the determinant inequality are
    # the same statement (given the positive corner), for every parameter
    import sympy as sp

    z1, z2, r, dr, u = sp.symbols("z1 z2 r dr u", real=True)
    off = (r + r * z1 * z2 + z2 ** 2 - z1 ** 2 * u) / 2
    corner = r ** 2 + r * z2 ** 2 - z1 * z2 * u - dr / 2
    det4 = sp.expand(4 * (z1 * z2 * corner - off ** 2))
    quad = sp.expand(
        -z1 ** 4 * u ** 2
        + 2 * (r * (1 + z1 * z2) - z2 ** 2) * z1 ** 2 * u
        - ((1 - z1 * z2) * r + z2 ** 2) ** 2
        - 2 * z1 * z2 * dr
    )
    assert sp.simplify(det4 - quad) == 0


def test_sufficient_conditions_imply_pointwise_psd():
    # whenever the simple flags pass, the assembled matrix must be PSD for
    # every curvature value in [lmin, lmax]
    rng = np.random.default_rng(42)
    checked = 0
    while checked < 25:
        r = rng.uniform(0.5, 5.0)
        z2 = rng.uniform(0.1, 2.0)
        lmin = rng.uniform(0.05, 3.0)
        lmax = lmin + rng.uniform(0.0, 3.0)
        params = fa.UnderdampedParams(1.0, z2, lmin, lmax, fa.constant(r))
        flags = fa.check_prop62(params, 5.0)
        if not flags.feasible:
            continue
        checked += 1
        for u in np.linspace(lmin, lmax, 9):
            F, _ = curvature.underdamped_matrices(1.0, z2, r, 0.0, u)
            assert np.linalg.eigvalsh(F)[0] >= -1e-12


# ---------------------------------------------------------------------------
# sufficient-condition flags
# ---------------------------------------------------------------------------

def test_prop62_feasible_case():
    params = fa.UnderdampedParams(1.0, 1.0, 1.0, 1.0, fa.constant(3.0))
    flags = fa.check_prop62(params, 10.0)
    assert flags.quadratic_in_lmin and flags.trace_corner and flags.z2_admissible
    assert flags.feasible
    assert flags.general_quadratic


def test_prop62_r1_always_infeasible():
    for lmin in np.linspace(0.1, 5.0, 12):
        for lmax in np.linspace(lmin, 5.0, 8):
            params = fa.UnderdampedParams(1.0, 1.0, lmin, lmax, fa.constant(1.0))
            assert not fa.check_prop62(params, 5.0).quadratic_in_lmin


def test_prop62_z2_zero_boundary_infeasible():
    # z2 = 0 reduces condition (i) to -(lambda - r)^2 at lmin = lmax = r
    params = fa.UnderdampedParams(1.0, 0.0, 2.0, 2.0, fa.constant(2.0))
    flags = fa.check_prop62(params, 5.0)
    assert not flags.quadratic_in_lmin
    assert not flags.z2_admissible


# ---------------------------------------------------------------------------
# closed-form decay rate
# ---------------------------------------------------------------------------

def test_corollary_rate_hand_values():
    res = fa.corollary63_lambda(0.5, 4.0)
    assert res.exact == pytest.approx(1.0 - 0.25 * np.sqrt(12.5), abs=1e-12)
    assert res.approx == pytest.approx(0.1875, abs=1e-15)
    assert res.regime_flag            # ratio 0.125 > 0.1


def test_corollary_rate_small_ratio_regime():
    res = fa.corollary63_lambda(0.1, 20.0)
    assert res.approx == pytest.approx(2 * 0.1 / 20 - 1 / 400, abs=1e-15)
    assert not res.regime_flag
    # independent root oracle: smaller zero of the constraint quadratic
    # f(lmin, lam) = -1 + 2 (lmax - 1) lmin - lmin^2 - lmax (lmax - 2 lam) lam
    coeffs = [2 * 20.0, -(20.0 ** 2),
              -1 + 2 * 19.0 * 0.1 - 0.01]          # 40 lam^2 - 400 lam + c0
    roots = np.sort(np.roots(coeffs))
    assert res.exact == pytest.approx(roots[0], abs=1e-9)
    assert abs(res.exact - res.approx) <= 0.2 * res.approx


def test_corollary_rate_precondition_errors():
    with pytest.raises(curvature.PreconditionError, match="lmin \\+ 2"):
        fa.corollary63_lambda(1.0, 2.0)
    with pytest.raises(curvature.PreconditionError):
        fa.corollary63_lambda(-1.0, 4.0)


# ---------------------------------------------------------------------------
# certificate
# ---------------------------------------------------------------------------

def test_certificate_field_equals_metric():
    hf = curvature.HessianField(
        "toy", 2,
        field=lambda t, x: np.eye(2) * 2.0,
        metric=lambda t, x: np.eye(2) * 2.0)
    rep = fa.lambda_certificate(hf, [np.zeros(2)], [1.0])
    assert rep.lam == pytest.approx(1.0, abs=1e-9)
    assert rep.min_gap >= -1e-10


def test_certificate_matches_closed_form_rate():
    res = fa.corollary63_lambda(0.5, 4.0)
    params = fa.UnderdampedParams(1.0, 1.0, 0.5, 4.0, fa.constant(2.0))
    hf = fa.underdamped_field_in_u(params)
    grid = [np.array([u]) for u in np.linspace(0.5, 4.0, 200)]
    rep = fa.lambda_certificate(hf, grid, [10.0])
    assert rep.feasible
    assert abs(rep.lam - res.exact) < 1e-6
    # the closed form is the binding root: never above the grid certificate
    assert res.exact <= rep.lam + 1e-6


def test_certificate_scaling_covariance():
    base = fa.hessian_overdamped(fa.get_potential("fig1a"), fa.inverse_log(C=4.0))
    scaled = curvature.HessianField(
        "scaled", 1,
        field=lambda t, x: (3.0 + np.sin(t)) * base.field(t, x),
        metric=lambda t, x: (3.0 + np.sin(t)) * base.metric(t, x))
    grid = [np.array([x]) for x in np.linspace(-3, 5, 30)]
    t_grid = np.linspace(3, 60, 15)
    lam0 = fa.lambda_certificate(base, grid, t_grid).lam
    lam1 = fa.lambda_certificate(scaled, grid, t_grid).lam
    assert abs(lam0 - lam1) < 1e-9


def test_certificate_complementary_slackness():
    hf = fa.hessian_overdamped(fa.get_potential("fig1b"), fa.constant(1.0))
    grid = [np.array([x]) for x in np.linspace(-3, 3, 60)]
    rep = fa.lambda_certificate(hf, grid, [1.0])
    assert -1e-10 <= rep.min_gap <= curvature.BISECT_TOL * 2


def test_certificate_singular_metric_is_error():
    hf = curvature.HessianField(
        "toy", 2,
        field=lambda t, x: np.eye(2),
        metric=lambda t, x: np.diag([1.0, 0.0]))
    with pytest.raises(ValueError, match="positive definite"):
        fa.lambda_certificate(hf, [np.zeros(2)], [1.0])


def test_certificate_report_json():
    hf = fa.hessian_overdamped(fa.get_potential("fig1a"), fa.constant(1.0))
    rep = fa.lambda_certificate(hf, [np.array([0.0])], [1.0],
                                conditions={"demo": True},
                                regime_flags=["note"])
    import json
    doc = json.loads(rep.to_json())
    assert doc["family"] == "overdamped"
    assert doc["feasible"] is True
    assert doc["conditions"] == {"demo": True}
    assert doc["regime_flags"] == ["note"]
    assert "grid" in doc["grid_spec"]


# ---------------------------------------------------------------------------
# decay envelope
# ---------------------------------------------------------------------------

def test_envelope_pure_exponential():
    lam0, I0, t0, t1 = 0.7, 2.0, 1.0, 9.0
    env = fa.gronwall_envelope(lambda r: lam0 * np.ones_like(r),
                               lambda r: np.zeros_like(r), I0, t0, t1)
    assert env == pytest.approx(I0 * np.exp(-2 * lam0 * (t1 - t0)), rel=1e-9)


def test_envelope_forcing_limit():
    lam0, c_a = 0.25, 1.0
    env = fa.gronwall_envelope(lambda r: lam0 * np.ones_like(r),
                               lambda r: c_a / r, 1.0, np.e, 1e4)
    assert env * 1e4 == pytest.approx(c_a / lam0, rel=0.02)


def test_envelope_self_convergence():
    lam = lambda r: 0.25 * np.ones_like(r)
    forcing = lambda r: 1.0 / r
    loose = fa.gronwall_envelope(lam, forcing, 1.0, np.e, 100.0, rel_tol=1e-6)
    tight = fa.gronwall_envelope(lam, forcing, 1.0, np.e, 100.0, rel_tol=1e-12)
    assert loose == pytest.approx(tight, rel=1e-6)


def test_envelope_monotone_in_initial_value_and_forcing():
    lam = lambda r: 0.3 * np.ones_like(r)
    a1 = lambda r: 1.0 / r
    a2 = lambda r: 2.0 / r
    e_base = fa.gronwall_envelope(lam, a1, 1.0, 2.0, 50.0)
    assert fa.gronwall_envelope(lam, a1, 2.0, 2.0, 50.0) > e_base
    assert fa.gronwall_envelope(lam, a2, 1.0, 2.0, 50.0) > e_base


def test_envelope_edge_cases():
    lam = lambda r: np.ones_like(r)
    assert fa.gronwall_envelope(lam, lam, 3.0, 5.0, 5.0) == 3.0
    with pytest.raises(ValueError):
        fa.gronwall_envelope(lam, lam, 1.0, 5.0, 4.0)
    with pytest.raises(ValueError, match="divergent"):
        fa.gronwall_envelope(lam, lambda r: np.full_like(r, np.inf),
                             1.0, 1.0, 2.0)


def test_forcing_estimator_matches_gaussian_expectation():
    # closed form: E[tr H] and E|grad V|^2 under a Gaussian ensemble law
    pot = fa.get_potential("fig1a")
    beta = fa.inverse_log(C=4.0)
    rng = np.random.default_rng(10)
    m, s2 = 0.4, 1.7
    xs = rng.normal(m, np.sqrt(s2), size=(400_000, 1))
    t = 5.0
    est = fa.overdamped_forcing_estimate(pot, beta, t, xs)
    b, db = beta(t), beta.deriv(t)
    e_tr = 0.25
    e_g2 = (0.25 ** 2) * (s2 + (m - 1.0) ** 2)
    expect = (db / b) * e_tr - (db / b ** 2) * e_g2
    assert est == pytest.approx(expect, rel=5e-3)


# ---------------------------------------------------------------------------
# finite-difference cross-assembly of every field (guards transcription)
# ---------------------------------------------------------------------------

from fd_assembly import (fd_assemble_diag, fd_assemble_j_drift,
                         fd_assemble_overdamped, fd_assemble_underdamped)


def test_fd_cross_assembly_all_families():
    rng = np.random.default_rng(2718)
    tol = 1e-6

    # overdamped on a non-trivial 2D energy
    pot2 = fa.get_potential("fig3b")
    beta = fa.inverse_log(C=3.0)
    hf = fa.hessian_overdamped(pot2, beta)
    for _ in range(50):
        t = rng.uniform(3, 50)
        x = rng.uniform(-2, 2, size=2)
        assert np.max(np.abs(hf.field(t, x) - fd_assemble_overdamped(pot2, beta, t, x))) < tol

    # diagonal diffusion with curvature in alpha and a rotational drift term
    alpha = fa.DiagonalAlpha(entries=(
        (lambda s: 1.0 + 0.2 * np.sin(s), lambda s: 0.2 * np.cos(s),
         lambda s: -0.2 * np.sin(s)),
        (lambda s: 1.5 + 0.1 * np.cos(s), lambda s: -0.1 * np.sin(s),
         lambda s: -0.1 * np.cos(s)),
    ))
    gam = fa.GammaField.rotational(pot2, lambda t: 1.0 / t)
    hf = fa.hessian_nonreversible_diag(pot2, alpha, beta, gamma=gam)
    for _ in range(50):
        t = rng.uniform(3, 50)
        x = rng.uniform(-2, 2, size=2)
        assert np.max(np.abs(hf.field(t, x)
                             - fd_assemble_diag(pot2, alpha, beta, gam, t, x))) < tol

    # skew drift with a full quadratic stream function
    c_hess = np.array([[0.3, -0.5], [-0.5, 0.2]])
    spec = fa.NonReversible(pot2, beta, fa.QuadraticJ(c_hess, np.array([0.1, -0.2])))
    hf = fa.hessian_j_drift(spec)
    for _ in range(50):
        t = rng.uniform(3, 50)
        x = rng.uniform(-2, 2, size=2)
        assert np.max(np.abs(hf.field(t, x) - fd_assemble_j_drift(spec, t, x))) < tol

    # kinetic family over a curvature-varying 1D energy
    pot1 = fa.get_potential("fig1b")
    params = fa.UnderdampedParams(1.0, 0.8, 0.5, 1.5,
                                  fa.shifted_inverse_log(base=2.0, C=1.0))
    for _ in range(50):
        t = rng.uniform(3, 50)
        x = rng.uniform(-2, 2)
        F, _ = fa.hessian_underdamped(params, pot1, t, [x])
        assert np.max(np.abs(F - fd_assemble_underdamped(params, pot1, t, x))) < tol
