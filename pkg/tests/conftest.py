import numpy as np
import pytest

import fisheranneal as fa


@pytest.fixture
def ex52_skew():
    """Anisotropic quadratic with the cross-curvature stream function."""
    pot = fa.get_potential("ex52")
    c_hess = np.array([[0.0, -0.95], [-0.95, 0.0]])
    return fa.NonReversible(pot, fa.constant(1.0),
                            fa.QuadraticJ(c_hess, np.zeros(2)))


def fd_time_deriv(fn, t, h=1e-5):
    return (fn(t + h) - fn(t - h)) / (2.0 * h)
