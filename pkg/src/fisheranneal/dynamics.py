"""Dynamics specifications and the gradient / non-gradient drift decomposition.

Three families are supported, each paired with a time-dependent Gibbs
reference density:

* ``Overdamped``      dX = -grad(V) dt + sqrt(2 beta(t)) dB, reference
  proportional to exp(-V/beta(t)).
* ``NonReversible``   the overdamped equation plus a skew drift built from a
  stream function c: dX = (-grad(V) - J grad(V) - beta(t) divJ) dt +
  sqrt(2 beta(t)) dB with J = [[0, c], [-c, 0]] and divJ = (d2 c, -d1 c).
* ``Underdamped``     kinetic pair dx = v dt, dv = (-r(t) v - V'(x)) dt +
  sqrt(2 r(t)) dB with noise on the velocity only; reference proportional
  to exp(-v^2/2 - V(x)).

``gamma`` returns the non-gradient component of the Fokker-Planck drift,
the field that is divergence-free against the reference density. For the
skew drift with spatially varying c, the divergence-correction term in
``gamma`` and in ``drift`` enter with opposite signs; both conventions are
exercised by ``check_pi_gamma_divergence`` and the integration tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Union

import numpy as np

from .potentials import Potential
from .schedules import Schedule


class DimensionError(ValueError):
    pass


def _as_state(x, state_dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != state_dim:
        raise DimensionError(
            f"state vectors must have last axis {state_dim}, got shape {x.shape}"
        )
    return x


# ---------------------------------------------------------------------------
# Skew-field parameterizations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantJ:
    """Stream function c = c(t): spatially constant rotation strength."""

    c_schedule: Schedule

    def c(self, t, x):
        return np.broadcast_to(self.c_schedule(t), np.asarray(x).shape[:-1]).copy()

    def c_grad(self, t, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def c_hessian(self):
        return np.zeros((2, 2))


@dataclass(frozen=True)
class QuadraticJ:
    """Stream function c(x) = (x - m)' C (x - m) / 2 with constant Hessian C."""

    c_hess: np.ndarray
    c_minimizer: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.c_hess, dtype=float)
        m = np.asarray(self.c_minimizer, dtype=float)
        if C.shape != (2, 2) or not np.allclose(C, C.T):
            raise DimensionError("c_hess must be a symmetric 2x2 matrix")
        if m.shape != (2,):
            raise DimensionError("c_minimizer must be a 2-vector")
        object.__setattr__(self, "c_hess", C)
        object.__setattr__(self, "c_minimizer", m)

    def c(self, t, x):
        y = _as_state(x, 2) - self.c_minimizer
        return 0.5 * np.einsum("...i,ij,...j->...", y, self.c_hess, y)

    def c_grad(self, t, x):
        y = _as_state(x, 2) - self.c_minimizer
        return y @ self.c_hess

    def c_hessian(self):
        return self.c_hess.copy()


JField = Union[ConstantJ, QuadraticJ]


# ---------------------------------------------------------------------------
# Dynamics variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Overdamped:
    """Gradient flow with annealed isotropic noise."""

    potential: Potential
    beta: Schedule

    @property
    def state_dim(self):
        return self.potential.dim

    @property
    def noise_indices(self):
        return tuple(range(self.state_dim))

    def diffusion_weight(self, t):
        return self.beta(t)

    def drift(self, t, x):
        x = _as_state(x, self.state_dim)
        return -self.potential.grad(x)

    def gamma(self, t, x):
        return np.zeros_like(_as_state(x, self.state_dim))

    def diffusion_matrix(self, t):
        return self.beta(t) * np.eye(self.state_dim)

    def log_reference_unnorm(self, t, x):
        return -self.potential.value(_as_state(x, self.state_dim)) / self.beta(t)

    def grad_log_reference(self, t, x):
        return -self.potential.grad(_as_state(x, self.state_dim)) / self.beta(t)


@dataclass(frozen=True)
class NonReversible:
    """Overdamped flow in 2D with an added skew (rotational) drift."""

    potential: Potential
    beta: Schedule
    j_field: JField

    def __post_init__(self):
        if self.potential.dim != 2:
            raise DimensionError("the skew drift requires a two-dimensional potential")

    @property
    def state_dim(self):
        return 2

    @property
    def noise_indices(self):
        return (0, 1)

    def diffusion_weight(self, t):
        return self.beta(t)

    def j_apply(self, t, x):
        """J grad(V) with J = [[0, c], [-c, 0]]."""
        g = self.potential.grad(_as_state(x, 2))
        c = self.j_field.c(t, x)
        return np.stack([c * g[..., 1], -c * g[..., 0]], axis=-1)

    def j_row_divergence(self, t, x):
        """Row-wise divergence of J: (d2 c, -d1 c)."""
        dc = self.j_field.c_grad(t, x)
        return np.stack([dc[..., 1], -dc[..., 0]], axis=-1)

    def drift(self, t, x):
        x = _as_state(x, 2)
        return (-self.potential.grad(x) - self.j_apply(t, x)
                - self.beta(t) * self.j_row_divergence(t, x))

    def gamma(self, t, x):
        """Divergence-free field J grad(V) - beta (d2 c, -d1 c)."""
        return self.j_apply(t, x) - self.beta(t) * self.j_row_divergence(t, x)

    def diffusion_matrix(self, t):
        return self.beta(t) * np.eye(2)

    def log_reference_unnorm(self, t, x):
        return -self.potential.value(_as_state(x, 2)) / self.beta(t)

    def grad_log_reference(self, t, x):
        return -self.potential.grad(_as_state(x, 2)) / self.beta(t)


@dataclass(frozen=True)
class Underdamped:
    """Kinetic pair (position, velocity) with noise on the velocity only."""

    potential: Potential
    friction: Schedule

    def __post_init__(self):
        if self.potential.dim != 1:
            raise DimensionError("the kinetic sampler takes a one-dimensional potential")

    @property
    def state_dim(self):
        return 2

    @property
    def noise_indices(self):
        return (1,)

    def diffusion_weight(self, t):
        return self.friction(t)

    def drift(self, t, x):
        x = _as_state(x, 2)
        pos, vel = x[..., 0], x[..., 1]
        dv = -self.friction(t) * vel - self.potential.grad(pos[..., None])[..., 0]
        return np.stack([vel, dv], axis=-1)

    def gamma(self, t, x):
        x = _as_state(x, 2)
        pos, vel = x[..., 0], x[..., 1]
        return np.stack([-vel, self.potential.grad(pos[..., None])[..., 0]], axis=-1)

    def diffusion_matrix(self, t):
        out = np.zeros((2, 2))
        out[1, 1] = self.friction(t)
        return out

    def log_reference_unnorm(self, t, x):
        x = _as_state(x, 2)
        return -0.5 * x[..., 1] ** 2 - self.potential.value(x[..., 0][..., None])

    def grad_log_reference(self, t, x):
        x = _as_state(x, 2)
        dvx = -self.potential.grad(x[..., 0][..., None])[..., 0]
        return np.stack([dvx, -x[..., 1]], axis=-1)


DynamicsSpec = Union[Overdamped, NonReversible, Underdamped]


# ---------------------------------------------------------------------------
# Free-function forms of the model operations
# ---------------------------------------------------------------------------

def gamma(spec: DynamicsSpec, t, x):
    """Non-gradient component of the Fokker-Planck drift at (t, x)."""
    return spec.gamma(t, x)


def drift(spec: DynamicsSpec, t, x):
    """Full deterministic drift of the SDE at (t, x)."""
    return spec.drift(t, x)


def check_pi_gamma_divergence(spec, t, axes, fd_step: float = 1e-4,
                              gamma_field=None) -> float:
    """Max |div(pi gamma)| over a grid, by central differences on pi * gamma.

    ``axes`` is a sequence of 1D coordinate arrays (one per state dimension);
    the check runs over their tensor product. The Gibbs weight is normalized
    by its maximum over the probed points, which keeps the residual scale-free
    without needing the normalization constant. ``gamma_field`` overrides the
    spec's own field (used to probe deliberately broken fields). Points where
    the weight underflows to zero raise, listing the offenders.
    """
    axes = [np.asarray(a, dtype=float) for a in axes]
    if len(axes) != spec.state_dim:
        raise DimensionError(f"need {spec.state_dim} axes, got {len(axes)}")
    field = gamma_field if gamma_field is not None else spec.gamma

    pts = np.array(list(product(*axes)))
    # all displaced points share one normalization so FD differences are exact
    probe = [pts]
    for i in range(spec.state_dim):
        e = np.zeros(spec.state_dim)
        e[i] = fd_step
        probe.extend([pts + e, pts - e])
    all_pts = np.concatenate(probe, axis=0)
    log_w = spec.log_reference_unnorm(t, all_pts)
    log_w = log_w - np.max(log_w)
    w = np.exp(log_w)
    if np.any(w == 0.0):
        bad = all_pts[w == 0.0]
        raise ValueError(
            f"reference density underflows at {len(bad)} probed points, e.g. {bad[:3]}"
        )

    flux = w[:, None] * field(t, all_pts)
    n = len(pts)
    residual = np.zeros(n)
    for i in range(spec.state_dim):
        plus = flux[(2 * i + 1) * n:(2 * i + 2) * n, i]
        minus = flux[(2 * i + 2) * n:(2 * i + 3) * n, i]
        residual += (plus - minus) / (2.0 * fd_step)
    return float(np.max(np.abs(residual)))
