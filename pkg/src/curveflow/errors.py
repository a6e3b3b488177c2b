"""Exception types shared across the package.

Every error raised by curveflow derives from CurveFlowError so callers can
catch the whole family with one clause.  Numerical failure modes carry the
offending quantity as an attribute where that helps post-mortems.
"""


class CurveFlowError(Exception):
    """Base class for all curveflow errors."""


class InvalidParams(CurveFlowError):
    """A constructor or operation received parameters outside its contract."""


class InvalidGeometry(CurveFlowError):
    """A geometric quantity is inconsistent (e.g. L^2 < 4*pi*A beyond roundoff)."""


class NotConvex(CurveFlowError):
    """An initial curve failed the convexity check at construction.

    Attributes
    ----------
    min_rho : float
        Minimum of the curvature radius p + p'' that triggered the failure.
    """

    def __init__(self, message, min_rho=None):
        super().__init__(message)
        self.min_rho = min_rho


class ConvexityLost(CurveFlowError):
    """The evolving curve stopped being strictly convex (min(p + p'') <= 0)."""

    def __init__(self, message, min_rho=None, t=None):
        super().__init__(message)
        self.min_rho = min_rho
        self.t = t


class ClosingConditionViolated(CurveFlowError):
    """A curvature field does not close up: int e^{i theta}/kappa dtheta != 0.

    Attributes
    ----------
    defect : complex
        Value of the closing integral.
    """

    def __init__(self, message, defect=None):
        super().__init__(message)
        self.defect = defect


class NumericalBlowup(CurveFlowError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class EvalDomain(CurveFlowError):
    """A speed function was evaluated outside its domain or returned NaN."""


class InvalidMonitorParams(CurveFlowError):
    """A pointwise monitor was invoked with an inadmissible offset constant."""


class InsufficientData(CurveFlowError):
    """A statistical fit was requested on too few usable records."""
