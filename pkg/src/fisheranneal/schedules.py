"""Scalar time schedules (annealing temperatures, friction profiles).

Every schedule exposes ``value(t)`` and ``deriv(t)``, both vectorized over
numpy arrays, plus ``t_min``, the open lower bound of its domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

E = float(np.e)


@dataclass(frozen=True)
class Schedule:
    """A positive scalar function of time with an analytic derivative."""

    kind: str
    value: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    t_min: float = field(default=-np.inf)
    params: dict = field(default_factory=dict)

    def __call__(self, t):
        return self.value(t)

    def check_domain(self, t) -> None:
        t = np.asarray(t, dtype=float)
        if np.any(t <= self.t_min):
            raise ValueError(
                f"schedule '{self.kind}' undefined at t <= {self.t_min} "
                f"(got min t = {t.min()})"
            )


def inverse_log(C: float, t0: float = E) -> Schedule:
    """C / log(t); the classic annealing temperature. Defined for t > 1."""
    if C <= 0:
        raise ValueError("C must be positive")
    if t0 <= 1:
        raise ValueError("t0 must exceed 1 so that log(t) > 0")
    return Schedule(
        kind="inverse_log",
        value=lambda t: C / np.log(t),
        deriv=lambda t: -C / (t * np.log(t) ** 2),
        t_min=1.0,
        params={"C": C, "t0": t0},
    )


def shifted_inverse_log(base: float, C: float, t0: float = E) -> Schedule:
    """base + C / log(t); friction profile for the kinetic sampler."""
    if base < 0 or C <= 0:
        raise ValueError("base must be >= 0 and C > 0")
    if t0 <= 1:
        raise ValueError("t0 must exceed 1 so that log(t) > 0")
    return Schedule(
        kind="shifted_inverse_log",
        value=lambda t: base + C / np.log(t),
        deriv=lambda t: -C / (t * np.log(t) ** 2),
        t_min=1.0,
        params={"base": base, "C": C, "t0": t0},
    )


def hyperbolic(t0: float) -> Schedule:
    """1 / (t0 + t); polynomially decaying temperature. Defined for t > -t0."""
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    return Schedule(
        kind="hyperbolic",
        value=lambda t: 1.0 / (t0 + t),
        deriv=lambda t: -1.0 / (t0 + t) ** 2,
        t_min=-t0,
        params={"t0": t0},
    )


def constant(c: float) -> Schedule:
    """Constant schedule; derivative is identically zero."""
    if c <= 0:
        raise ValueError("constant schedule must be positive")
    return Schedule(
        kind="constant",
        value=lambda t: np.full_like(np.asarray(t, dtype=float), c) if np.ndim(t) else c,
        deriv=lambda t: np.zeros_like(np.asarray(t, dtype=float)) if np.ndim(t) else 0.0,
        t_min=-np.inf,
        params={"c": c},
    )


def from_config(kind: str, **kw) -> Schedule:
    """Build a schedule from CLI/config keyword parameters."""
    builders = {
        "inverse_log": lambda: inverse_log(kw["C"], kw.get("t0", E)),
        "shifted_inverse_log": lambda: shifted_inverse_log(
            kw["base"], kw.get("C", 1.0), kw.get("t0", E)
        ),
        "hyperbolic": lambda: hyperbolic(kw["t0"]),
        "constant": lambda: constant(kw["c"]),
    }
    if kind not in builders:
        raise ValueError(f"unknown schedule kind '{kind}' (choose from {sorted(builders)})")
    return builders[kind]()
