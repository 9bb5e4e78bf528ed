"""Analytic Gaussian (Ornstein-Uhlenbeck) ground truth for quadratic energies.

For the overdamped family with V(x) = (x - mu)' H (x - mu) / 2 the particle
law stays Gaussian; its mean and covariance obey

    dm/dt = -H (m - mu)
    dS/dt = -H S - S H + 2 beta(t) I

which we integrate with classic fourth-order Runge-Kutta at a fraction of the
particle step size. Closed-form KL and relative-Fisher values between
Gaussians back the estimator validation tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .dynamics import Overdamped
from .integrate import StepPlan


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        S = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if S.shape != (m.shape[0], m.shape[0]) or not np.allclose(S, S.T):
            raise ValueError("cov must be symmetric with matching dimension")
        if np.linalg.eigvalsh(S)[0] < -1e-12:
            raise ValueError("cov must be positive semidefinite")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", S)


def solve_gaussian_oracle(spec: Overdamped, plan: StepPlan, init: GaussianState,
                          substeps: int = 10) -> list[tuple[float, GaussianState]]:
    """Exact law of the continuous SDE at the plan's record times.

    Requires an Overdamped spec whose potential carries quadratic structure.
    """
    if not isinstance(spec, Overdamped):
        raise ValueError("the Gaussian oracle covers the overdamped family only")
    if not spec.potential.is_quadratic():
        raise ValueError("the Gaussian oracle requires a quadratic potential")
    H, mu = spec.potential.quadratic
    d = spec.potential.dim
    eye = np.eye(d)

    def f_mean(t, m):
        return -H @ (m - mu)

    def f_cov(t, S):
        return -H @ S - S @ H + 2.0 * spec.beta(t) * eye

    m = init.mean.copy()
    S = init.cov.copy()
    record_at = set(plan.record_steps())
    out = []
    if 0 in record_at:
        out.append((plan.t0, GaussianState(m.copy(), S.copy())))
    dt = plan.h / substeps
    for n in range(plan.n_steps):
        t = plan.time_at(n)
        for k in range(substeps):
            tk = t + k * dt
            m, S = _rk4(f_mean, f_cov, tk, m, S, dt)
        if (n + 1) in record_at:
            out.append((plan.time_at(n + 1), GaussianState(m.copy(), S.copy())))
    return out


def _rk4(f_mean, f_cov, t, m, S, dt):
    k1m, k1S = f_mean(t, m), f_cov(t, S)
    k2m = f_mean(t + dt / 2, m + dt / 2 * k1m)
    k2S = f_cov(t + dt / 2, S + dt / 2 * k1S)
    k3m = f_mean(t + dt / 2, m + dt / 2 * k2m)
    k3S = f_cov(t + dt / 2, S + dt / 2 * k2S)
    k4m = f_mean(t + dt, m + dt * k3m)
    k4S = f_cov(t + dt, S + dt * k3S)
    m = m + dt / 6 * (k1m + 2 * k2m + 2 * k3m + k4m)
    S = S + dt / 6 * (k1S + 2 * k2S + 2 * k3S + k4S)
    return m, 0.5 * (S + S.T)


# ---------------------------------------------------------------------------
# Closed forms between Gaussians
# ---------------------------------------------------------------------------

def gaussian_kl(mean_p, cov_p, mean_q, cov_q) -> float:
    """KL(N(mean_p, cov_p) || N(mean_q, cov_q)) in nats."""
    mp = np.atleast_1d(np.asarray(mean_p, float))
    mq = np.atleast_1d(np.asarray(mean_q, float))
    Sp = np.atleast_2d(np.asarray(cov_p, float))
    Sq = np.atleast_2d(np.asarray(cov_q, float))
    d = mp.shape[0]
    Sq_inv = np.linalg.inv(Sq)
    dm = mq - mp
    term = np.trace(Sq_inv @ Sp) + dm @ Sq_inv @ dm - d
    logdet = np.log(np.linalg.det(Sq)) - np.log(np.linalg.det(Sp))
    return float(0.5 * (term + logdet))


def gaussian_relative_fisher(mean_p, cov_p, mean_q, cov_q, weight: float) -> float:
    """weight * E_p |grad log(p/q)|^2 for Gaussians p and q.

    Equals weight * (tr(A S_p A) + |S_q^{-1}(m_p - m_q)|^2) with
    A = S_q^{-1} - S_p^{-1}.
    """
    mp = np.atleast_1d(np.asarray(mean_p, float))
    mq = np.atleast_1d(np.asarray(mean_q, float))
    Sp = np.atleast_2d(np.asarray(cov_p, float))
    Sq = np.atleast_2d(np.asarray(cov_q, float))
    A = np.linalg.inv(Sq) - np.linalg.inv(Sp)
    shift = np.linalg.inv(Sq) @ (mp - mq)
    return float(weight * (np.trace(A @ Sp @ A) + shift @ shift))


def normal_bin_masses(edges, mean: float, var: float) -> np.ndarray:
    """Exact bin probabilities of a 1D normal over consecutive edges."""
    z = (np.asarray(edges, float) - mean) / np.sqrt(var)
    cdf = ndtr(z)
    return np.diff(cdf)


def binned_gaussian_kl(edges, state: GaussianState, ref, t: float) -> float:
    """Discrete KL of the exact (binned) Gaussian law against the reference.

    Bin probabilities of the Gaussian are exact integrals renormalized over
    the grid; reference weights follow the midpoint protocol, matching what
    the empirical histogram pipeline computes. 1D only.
    """
    from .measure import discrete_kl

    edges = np.asarray(edges, dtype=float)
    if state.mean.shape[0] != 1:
        raise ValueError("binned_gaussian_kl is one-dimensional")
    p = normal_bin_masses(edges, float(state.mean[0]), float(state.cov[0, 0]))
    p = p / p.sum()
    mids = 0.5 * (edges[1:] + edges[:-1])
    logu = ref.log_unnorm(t, mids[:, None])
    w = np.exp(logu - np.max(logu))
    return discrete_kl(p, w / w.sum())
