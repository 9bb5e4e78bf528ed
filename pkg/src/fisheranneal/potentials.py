"""Potential library: closed-form energies with analytic gradients and Hessians.

All callables use the array convention ``x.shape == (..., dim)``:
``value`` returns shape ``(...)``, ``grad`` shape ``(..., dim)`` and ``hess``
shape ``(..., dim, dim)``. The library ships the lowered 1D/2D instances used
by the named experiment presets plus a generic quadratic form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class Potential:
    """A twice-differentiable energy with optional structure hints.

    ``convexity_bounds`` is an interval (lmin, lmax), 0 < lmin <= lmax,
    containing every eigenvalue of the Hessian over the relevant domain.
    ``quadratic`` carries (H, mu) when V(x) = (x-mu)' H (x-mu) / 2 exactly,
    which unlocks the analytic Gaussian oracle.
    """

    name: str
    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    minimizer: Optional[np.ndarray] = None
    convexity_bounds: Optional[tuple[float, float]] = None
    quadratic: Optional[tuple[np.ndarray, np.ndarray]] = None
    domain: tuple[float, float] = field(default=(-20.0, 20.0))

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.convexity_bounds is not None:
            lo, hi = self.convexity_bounds
            if not (0 < lo <= hi):
                raise ValueError("convexity bounds require 0 < lmin <= lmax")

    def is_quadratic(self) -> bool:
        return self.quadratic is not None


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise ValueError(f"expected last axis of size {dim}, got shape {x.shape}")
    return x


def quadratic_form(H, mu, name: str = "quadratic") -> Potential:
    """V(x) = (x - mu)' H (x - mu) / 2 for a symmetric positive definite H."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    d = mu.shape[0]
    if H.shape != (d, d) or not np.allclose(H, H.T):
        raise ValueError("H must be a symmetric d x d matrix")
    eigs = np.linalg.eigvalsh(H)
    if eigs[0] <= 0:
        raise ValueError("H must be positive definite")

    def value(x):
        y = _as_points(x, d) - mu
        return 0.5 * np.einsum("...i,ij,...j->...", y, H, y)

    def grad(x):
        y = _as_points(x, d) - mu
        return y @ H

    def hess(x):
        y = _as_points(x, d)
        return np.broadcast_to(H, y.shape[:-1] + (d, d)).copy()

    return Potential(
        name=name,
        dim=d,
        value=value,
        grad=grad,
        hess=hess,
        minimizer=mu.copy(),
        convexity_bounds=(float(eigs[0]), float(eigs[-1])),
        quadratic=(H.copy(), mu.copy()),
    )


def _scalar_potential(name, f, df, d2f, minimizer=None, convexity_bounds=None,
                      quadratic=None, domain=(-20.0, 20.0)) -> Potential:
    """Wrap scalar callables of a single coordinate into the (..., 1) convention."""

    def value(x):
        return f(_as_points(x, 1)[..., 0])

    def grad(x):
        return df(_as_points(x, 1)[..., 0])[..., None]

    def hess(x):
        return d2f(_as_points(x, 1)[..., 0])[..., None, None]

    return Potential(
        name=name, dim=1, value=value, grad=grad, hess=hess,
        minimizer=None if minimizer is None else np.atleast_1d(np.asarray(minimizer, float)),
        convexity_bounds=convexity_bounds, quadratic=quadratic, domain=domain,
    )


# ---------------------------------------------------------------------------
# Preset instances (the 1D/2D energies the experiment presets evaluate)
# ---------------------------------------------------------------------------

def shifted_quadratic_1d() -> Potential:
    """V(x) = (x - 1)^2 / 8; curvature 1/4 everywhere."""
    return _scalar_potential(
        "shifted_quadratic_1d",
        f=lambda s: (s - 1.0) ** 2 / 8.0,
        df=lambda s: (s - 1.0) / 4.0,
        d2f=lambda s: np.full_like(s, 0.25),
        minimizer=[1.0],
        convexity_bounds=(0.25, 0.25),
        quadratic=(np.array([[0.25]]), np.array([1.0])),
    )


def quadratic_cosine_1d() -> Potential:
    """V(x) = (x + 1)^2 / 2 - cos(x) / 2; strongly convex, curvature in [1/2, 3/2]."""
    return _scalar_potential(
        "quadratic_cosine_1d",
        f=lambda s: (s + 1.0) ** 2 / 2.0 - np.cos(s) / 2.0,
        df=lambda s: (s + 1.0) + np.sin(s) / 2.0,
        d2f=lambda s: 1.0 + np.cos(s) / 2.0,
        minimizer=_newton_min(lambda s: (s + 1.0) + np.sin(s) / 2.0,
                              lambda s: 1.0 + np.cos(s) / 2.0, -1.0),
        convexity_bounds=(0.5, 1.5),
    )


def quartic_well_1d() -> Potential:
    """V(x) = (x + 2)^4 / 4 - x^2 / 2 + x / 8; non-convex double well."""
    return _scalar_potential(
        "quartic_well_1d",
        f=lambda s: (s + 2.0) ** 4 / 4.0 - s ** 2 / 2.0 + s / 8.0,
        df=lambda s: (s + 2.0) ** 3 - s + 0.125,
        d2f=lambda s: 3.0 * (s + 2.0) ** 2 - 1.0,
        minimizer=_newton_min(lambda s: (s + 2.0) ** 3 - s + 0.125,
                              lambda s: 3.0 * (s + 2.0) ** 2 - 1.0, -3.2),
        domain=(-12.0, 8.0),
    )


def quadratic_sine_1d() -> Potential:
    """V(x) = (x - 2)^2 / 2 - sin(5x) / 2; non-convex ripples on a well."""
    return _scalar_potential(
        "quadratic_sine_1d",
        f=lambda s: (s - 2.0) ** 2 / 2.0 - np.sin(5.0 * s) / 2.0,
        df=lambda s: (s - 2.0) - 2.5 * np.cos(5.0 * s),
        d2f=lambda s: 1.0 + 12.5 * np.sin(5.0 * s),
        minimizer=_newton_min(lambda s: (s - 2.0) - 2.5 * np.cos(5.0 * s),
                              lambda s: 1.0 + 12.5 * np.sin(5.0 * s), 2.4),
        domain=(-12.0, 14.0),
    )


def isotropic_quadratic_2d() -> Potential:
    """V(x, y) = (x^2 + y^2) / 2."""
    return quadratic_form(np.eye(2), np.zeros(2), name="isotropic_quadratic_2d")


def quadratic_cosine_2d() -> Potential:
    """V(x, y) = x^2 + y^2 - cos(x + y) / 2; curvature eigenvalues in [1, 3]."""

    def value(x):
        p = _as_points(x, 2)
        return p[..., 0] ** 2 + p[..., 1] ** 2 - np.cos(p[..., 0] + p[..., 1]) / 2.0

    def grad(x):
        p = _as_points(x, 2)
        s = np.sin(p[..., 0] + p[..., 1]) / 2.0
        return np.stack([2.0 * p[..., 0] + s, 2.0 * p[..., 1] + s], axis=-1)

    def hess(x):
        p = _as_points(x, 2)
        c = np.cos(p[..., 0] + p[..., 1]) / 2.0
        out = np.zeros(p.shape[:-1] + (2, 2))
        out[..., 0, 0] = 2.0 + c
        out[..., 1, 1] = 2.0 + c
        out[..., 0, 1] = c
        out[..., 1, 0] = c
        return out

    return Potential(
        name="quadratic_cosine_2d", dim=2, value=value, grad=grad, hess=hess,
        minimizer=np.zeros(2), convexity_bounds=(1.0, 3.0), domain=(-12.0, 12.0),
    )


def quadratic_sine_2d() -> Potential:
    """V(x, y) = x^2 + y^2 - sin(2x + 2y); non-convex."""

    def value(x):
        p = _as_points(x, 2)
        return p[..., 0] ** 2 + p[..., 1] ** 2 - np.sin(2.0 * (p[..., 0] + p[..., 1]))

    def grad(x):
        p = _as_points(x, 2)
        c = 2.0 * np.cos(2.0 * (p[..., 0] + p[..., 1]))
        return np.stack([2.0 * p[..., 0] - c, 2.0 * p[..., 1] - c], axis=-1)

    def hess(x):
        p = _as_points(x, 2)
        s = 4.0 * np.sin(2.0 * (p[..., 0] + p[..., 1]))
        out = np.zeros(p.shape[:-1] + (2, 2))
        out[..., 0, 0] = 2.0 + s
        out[..., 1, 1] = 2.0 + s
        out[..., 0, 1] = s
        out[..., 1, 0] = s
        return out

    return Potential(
        name="quadratic_sine_2d", dim=2, value=value, grad=grad, hess=hess,
        domain=(-12.0, 12.0),
    )


def anisotropic_quadratic_2d(a: float = 2.0, b: float = 0.1) -> Potential:
    """V(x, y) = (a x^2 + b y^2) / 2; the stiff/soft pair of the drift-race example."""
    return quadratic_form(np.diag([a, b]), np.zeros(2), name="anisotropic_quadratic_2d")


def _newton_min(df, d2f, s0: float, iters: int = 60):
    """Locate a stationary point of a scalar potential by Newton on the gradient."""
    s = s0
    for _ in range(iters):
        step = df(s) / d2f(s)
        s = s - step
        if abs(step) < 1e-14:
            break
    return [float(s)]


PRESET_POTENTIALS: dict[str, Callable[[], Potential]] = {
    "fig1a": shifted_quadratic_1d,
    "fig1b": quadratic_cosine_1d,
    "fig2a": quartic_well_1d,
    "fig2b": quadratic_sine_1d,
    "fig3a": isotropic_quadratic_2d,
    "fig3b": quadratic_cosine_2d,
    "fig3c": quadratic_sine_2d,
    "ex52": anisotropic_quadratic_2d,
    # the kinetic presets reuse the 1D energies
    "fig6a": shifted_quadratic_1d,
    "fig6b": quadratic_cosine_1d,
    "fig7a": quartic_well_1d,
    "fig7b": quadratic_sine_1d,
}


def get_potential(preset: str) -> Potential:
    if preset not in PRESET_POTENTIALS:
        raise KeyError(
            f"unknown potential preset '{preset}' (choose from {sorted(PRESET_POTENTIALS)})"
        )
    return PRESET_POTENTIALS[preset]()


# ---------------------------------------------------------------------------
# Finite-difference validation helpers (used by the test suite)
# ---------------------------------------------------------------------------

def fd_grad(pot: Potential, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of pot.value at a single point x."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i in range(pot.dim):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (pot.value(x + e) - pot.value(x - e)) / (2 * h)
    return out


def fd_hess(pot: Potential, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference Hessian of pot.value via differences of the gradient."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((pot.dim, pot.dim))
    for i in range(pot.dim):
        e = np.zeros_like(x)
        e[i] = h
        out[:, i] = (pot.grad(x + e) - pot.grad(x - e)) / (2 * h)
    return 0.5 * (out + out.T)
