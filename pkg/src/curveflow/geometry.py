"""Support-function geometry of smooth strictly convex plane curves.

A closed strictly convex curve is represented by samples of its support
function p(theta) on a uniform grid of tangent-angle values
theta_j = 2*pi*j/n.  All differentiation is spectral (FFT) and all
integrals are trapezoid sums, which are spectrally accurate for smooth
periodic data.  The dual pair of representations is

    radius of curvature   rho = 1/kappa = p + p''          (support -> kappa)
    support reconstruction    p'' + p = 1/kappa             (kappa -> support)

The second problem is solvable only when the closing condition
int e^{i theta} / kappa dtheta = 0 holds; the corresponding first-harmonic
ambiguity of p (pure translations) is fixed by pinning the Steiner point
to the origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ClosingConditionViolated,
    ConvexityLost,
    InvalidGeometry,
    InvalidParams,
)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class AngleGrid:
    """Uniform periodic grid in the tangent angle theta.

    Parameters
    ----------
    n : int
        Number of samples; must be even and at least 8 so the FFT
        conventions (real transforms, Nyquist handling) apply.
    """

    n: int

    def __post_init__(self):
        if self.n < 8 or self.n % 2 != 0:
            raise InvalidParams(f"grid size must be even and >= 8, got {self.n}")

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.n) * (TWO_PI / self.n)

    @property
    def dtheta(self) -> float:
        return TWO_PI / self.n


@dataclass(frozen=True)
class CurveState:
    """Immutable snapshot of a convex curve: support samples at time t."""

    grid: AngleGrid
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        p = np.array(self.p, dtype=float, copy=True)
        if p.ndim != 1 or p.size != self.grid.n:
            raise InvalidParams(
                f"support vector has shape {p.shape}, expected ({self.grid.n},)"
            )
        p.setflags(write=False)
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class GeometricSummary:
    """Scalar geometry of one state: lengths, area, shape ratios, kappa range."""

    length: float
    area: float
    isoperimetric_ratio: float
    inradius_lower: float
    outradius_upper: float
    kappa_min: float
    kappa_max: float


def integrate(values: np.ndarray) -> float:
    """Trapezoid rule over one period (no duplicated endpoint)."""
    return float(np.mean(values) * TWO_PI)


def spectral_derivative(values: np.ndarray, order: int) -> np.ndarray:
    """Differentiate a periodic sample vector by FFT multipliers.

    Odd derivative orders zero the Nyquist mode (its sign is not
    determined by real samples); even orders keep it with multiplier
    (-k^2)^(order/2).

    Parameters
    ----------
    values : array of shape (n,)
        Samples on the uniform grid, n even.
    order : int
        Derivative order, 1 or 2.
    """
    if order not in (1, 2):
        raise InvalidParams(f"derivative order must be 1 or 2, got {order}")
    values = np.asarray(values, dtype=float)
    n = values.size
    spec = np.fft.rfft(values)
    k = np.arange(n // 2 + 1, dtype=float)
    mult = (1j * k) ** order
    if order % 2 == 1:
        mult[-1] = 0.0
    return np.fft.irfft(spec * mult, n)


def _rho(p: np.ndarray) -> np.ndarray:
    """Radius of curvature samples p + p''."""
    return p + spectral_derivative(p, 2)


def curvature_from_support(state: CurveState) -> np.ndarray:
    """Curvature samples kappa = 1/(p + p'').

    Raises
    ------
    ConvexityLost
        If min(p + p'') <= 0, i.e. the samples do not describe a strictly
        convex curve.
    """
    rho = _rho(state.p)
    m = float(rho.min())
    if m <= 0.0 or not np.isfinite(m):
        raise ConvexityLost(
            f"curvature radius min {m:.6g} <= 0 at t={state.t:.6g}",
            min_rho=m,
            t=state.t,
        )
    return 1.0 / rho


def closing_defect(kappa: np.ndarray) -> complex:
    """Closing integral int e^{i theta} / kappa dtheta (trapezoid).

    Vanishes exactly for curvature fields of closed curves; its modulus
    measures how far a candidate field is from closing up.
    """
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.size
    theta = np.arange(n) * (TWO_PI / n)
    vals = np.exp(1j * theta) / kappa
    return complex(np.mean(vals) * TWO_PI)


def _solve_support(rho: np.ndarray) -> np.ndarray:
    """Invert p'' + p = rho in Fourier space, zeroing the k=+-1 modes.

    The k=1 row of the operator is singular; whatever first-harmonic
    content rho carries is non-closure and is projected out, which is
    the Steiner-point gauge choice.
    """
    n = rho.size
    spec = np.fft.rfft(rho)
    k = np.arange(n // 2 + 1, dtype=float)
    denom = 1.0 - k * k
    denom[1] = 1.0  # singular row, overwritten below
    pspec = spec / denom
    pspec[1] = 0.0
    return np.fft.irfft(pspec, n)


def support_from_curvature(
    kappa: np.ndarray, grid: AngleGrid, closing_tol: float = 1e-8
) -> np.ndarray:
    """Reconstruct Steiner-normalized support samples from curvature samples.

    Parameters
    ----------
    kappa : array of shape (n,)
        Strictly positive curvature samples on the grid.
    grid : AngleGrid
    closing_tol : float
        Relative tolerance for the closing defect: the reconstruction is
        refused when |int e^{i theta}/kappa| > closing_tol * L with
        L = int 1/kappa dtheta.

    Raises
    ------
    InvalidParams
        If kappa is not strictly positive or has the wrong length.
    ClosingConditionViolated
        If the closing defect exceeds the tolerance.
    """
    kappa = np.asarray(kappa, dtype=float)
    if kappa.size != grid.n:
        raise InvalidParams(
            f"curvature vector has size {kappa.size}, expected {grid.n}"
        )
    if kappa.min() <= 0.0 or not np.all(np.isfinite(kappa)):
        raise InvalidParams("curvature samples must be strictly positive and finite")
    rho = 1.0 / kappa
    length = integrate(rho)
    defect = closing_defect(kappa)
    if abs(defect) > closing_tol * length:
        raise ClosingConditionViolated(
            f"closing defect {abs(defect):.6g} exceeds {closing_tol:.1g} * L"
            f" = {closing_tol * length:.6g}",
            defect=defect,
        )
    return _solve_support(rho)


def length(state: CurveState) -> float:
    """Perimeter L = int p dtheta (Cauchy's formula)."""
    return integrate(state.p)


def area(state: CurveState) -> float:
    """Enclosed area A = 1/2 int (p^2 - p'^2) dtheta."""
    dp = spectral_derivative(state.p, 1)
    return 0.5 * integrate(state.p * state.p - dp * dp)


def isoperimetric_ratio(L: float, A: float) -> float:
    """L^2 / (4 pi A); equals 1 exactly for circles, > 1 otherwise."""
    if A <= 0.0:
        raise InvalidGeometry(f"area must be positive, got {A:.6g}")
    return L * L / (4.0 * np.pi * A)


def bonnesen_bounds(L: float, A: float, tol: float = 1e-12) -> tuple[float, float]:
    """Bonnesen bracket for the inradius and outradius.

    Returns ((L - sqrt(L^2 - 4 pi A))/(2 pi), (L + sqrt(L^2 - 4 pi A))/(2 pi)).
    The inradius is >= the first value and the outradius <= the second.
    A slightly negative discriminant (roundoff near a circle) is clamped
    to zero; beyond -tol*L^2 it is a genuine inconsistency.
    """
    disc = L * L - 4.0 * np.pi * A
    if disc < -tol * L * L:
        raise InvalidGeometry(
            f"isoperimetric deficit is negative beyond roundoff: {disc:.6g}"
        )
    root = np.sqrt(max(disc, 0.0))
    return ((L - root) / TWO_PI, (L + root) / TWO_PI)


def steiner_normalize(p: np.ndarray) -> np.ndarray:
    """Translate the curve so its Steiner point is at the origin.

    Removes the first circular harmonics of p; every other mode is
    untouched, so the shape (and kappa) is unchanged.
    """
    p = np.asarray(p, dtype=float)
    spec = np.fft.rfft(p)
    spec[1] = 0.0
    return np.fft.irfft(spec, p.size)


def first_harmonic_amplitude(p: np.ndarray) -> float:
    """Modulus of the (normalized) first Fourier mode of p, for gauge checks."""
    p = np.asarray(p, dtype=float)
    spec = np.fft.rfft(p)
    return 2.0 * abs(spec[1]) / p.size


def reconstruct_curve(state: CurveState) -> np.ndarray:
    """Boundary points X(theta) = p*nu + p'*nu_perp, shape (n, 2).

    nu = (cos theta, sin theta) is the outward normal; traversal in theta
    is counterclockwise (dX/dtheta = rho * nu_perp with rho > 0), so the
    polygon is positively oriented and closes by periodicity.
    """
    theta = state.grid.theta
    dp = spectral_derivative(state.p, 1)
    c, s = np.cos(theta), np.sin(theta)
    x = state.p * c - dp * s
    y = state.p * s + dp * c
    return np.column_stack([x, y])


def summarize(state: CurveState) -> GeometricSummary:
    """Scalar geometry report for one state."""
    kappa = curvature_from_support(state)
    L = length(state)
    A = area(state)
    rin, rout = bonnesen_bounds(L, A)
    return GeometricSummary(
        length=L,
        area=A,
        isoperimetric_ratio=isoperimetric_ratio(L, A),
        inradius_lower=rin,
        outradius_upper=rout,
        kappa_min=float(kappa.min()),
        kappa_max=float(kappa.max()),
    )


def validate_state(state: CurveState, harmonic_tol: float = 1e-10) -> None:
    """Check the state invariants: p > 0, strict convexity, Steiner gauge.

    Raises
    ------
    InvalidGeometry
        If p is not strictly positive (origin outside the curve) or the
        first harmonics of p exceed harmonic_tol * max|p|.
    ConvexityLost
        If min(p + p'') <= 0.
    """
    p = state.p
    if not np.all(np.isfinite(p)):
        raise InvalidGeometry("support samples must be finite")
    if p.min() <= 0.0:
        raise InvalidGeometry(
            f"support function must be strictly positive, min = {p.min():.6g}"
        )
    curvature_from_support(state)
    amp = first_harmonic_amplitude(p)
    bound = harmonic_tol * float(np.abs(p).max())
    if amp > bound:
        raise InvalidGeometry(
            f"first harmonic amplitude {amp:.3g} exceeds Steiner gauge"
            f" tolerance {bound:.3g}"
        )
