"""Shared helpers: curve constructors and frozen oracle values.

The oracle constants below were computed independently of the package
(closed forms plus high-resolution trapezoid quadrature checked by
Richardson extrapolation across n = 2^12 .. 2^16) and are frozen here so
the tests compare against fixed numbers, not against the code under test.
"""

import numpy as np
import pytest

from curveflow import AngleGrid, CurveState, steiner_normalize

TWO_PI = 2.0 * np.pi

# perimeter of the x^2/4 + y^2 = 1 ellipse (a=2, b=1)
ELLIPSE21_PERIMETER = 9.688448220547677
# mean of 1/(1 - 0.3 cos 2t) over a period: 1/sqrt(1 - 0.09)
LAMBDA_COS2 = 1.0482848367219182
# |int e^{it}/kappa dt| for kappa = 1/(1 + 0.3 cos t): 0.3*pi
CLOSING_DEFECT_COS1 = 0.9424777960769379
# area enclosed by p = 1 + 0.1 cos 2t: pi*(1 - 0.015)
AREA_COS2 = 3.094468763785946
# isoperimetric ratio L^2/(4 pi A) of the a=2, b=1 ellipse
ELLIPSE21_I0 = 1.188827144275826
# shrinking-circle radius for that ellipse and its horizon for F(u) = u
ELLIPSE21_R0 = 0.6631401472371998
ELLIPSE21_T1_POWER1 = 0.10993871371944376


def ellipse_support(n, a, b):
    """Support samples of an origin-centered axis-aligned ellipse."""
    theta = np.arange(n) * (TWO_PI / n)
    return np.sqrt(a * a * np.cos(theta) ** 2 + b * b * np.sin(theta) ** 2)


def ellipse_curvature(n, a, b):
    """Closed-form curvature kappa = p^3 / (a b)^2 on the same grid."""
    return ellipse_support(n, a, b) ** 3 / (a * a * b * b)


def fourier_support(n, a0, modes):
    """a0 + sum eps*cos(k theta + phase) for modes [(k, eps, phase), ...]."""
    theta = np.arange(n) * (TWO_PI / n)
    p = np.full(n, float(a0))
    for k, eps, phase in modes:
        p = p + eps * np.cos(k * theta + phase)
    return p


def make_state(p, t=0.0):
    return CurveState(AngleGrid(len(p)), np.asarray(p, dtype=float), t)


@pytest.fixture
def ellipse21_128():
    return make_state(ellipse_support(128, 2.0, 1.0))


@pytest.fixture
def circle_64():
    return make_state(np.full(64, 1.0))


@pytest.fixture
def bumpy_128():
    """Asymmetric convex test curve with k = 2 and k = 3 content."""
    return make_state(
        steiner_normalize(fourier_support(128, 1.0, [(2, 0.1, 0.0), (3, 0.05, 0.7)]))
    )
