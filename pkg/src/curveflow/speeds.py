"""Admissible speed functions F(kappa) and their screening.

The flow accepts any F with an evaluator for (F, F', F'') on u > 0.  The
convergence theory asks for three structural conditions:

    (i)   F'(u) > 0 on (0, inf), and F'(u)*u has a limit as u -> 0+;
    (ii)  F(u) > 0 and F(u) -> +inf as u -> +inf;
    (iii) F'(u)*u^2/F(u) -> +inf as u -> +inf and -> 0 as u -> 0+.

Positivity statements are checked pointwise on a geometric sample ladder
and can genuinely fail; the limit statements can only be screened, so the
corresponding verdicts degrade to "inconclusive" rather than "pass" when
the sampled window gives no clear trend.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EvalDomain, InvalidParams

BUILTIN_KINDS = ("power", "log1p", "exp", "linear_plus_sine", "sq_log_plus_linear")

# Screening thresholds for condition (iii): the ratio F'*u^2/F must exceed
# RATIO_HI at the top of the window and sit below RATIO_LO at the bottom.
RATIO_HI = 10.0
RATIO_LO = 0.1


@dataclass(frozen=True)
class SpeedFunction:
    """A speed F with derivatives, vectorized over positive arrays.

    Attributes
    ----------
    name : str
        Display name, e.g. "power(alpha=0.5)".
    params : tuple of float
        Numeric parameters baked into the evaluator.
    """

    name: str
    params: tuple
    _eval: Callable[[np.ndarray], tuple]

    def evaluate(self, u):
        """Return (F, F', F'') at u; raises EvalDomain for u <= 0 or NaN input."""
        arr = np.asarray(u, dtype=float)
        scalar = arr.ndim == 0
        vals = np.atleast_1d(arr)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            raise EvalDomain(
                f"{self.name}: arguments must be finite and > 0"
            )
        F, Fp, Fpp = self._eval(vals)
        if scalar:
            return float(F[0]), float(Fp[0]), float(Fpp[0])
        return F, Fp, Fpp

    def value(self, u):
        return self.evaluate(u)[0]

    def derivative(self, u):
        return self.evaluate(u)[1]


@dataclass
class ConditionReport:
    """Outcome of screening one speed function on a sample window."""

    speed: str
    u_lo: float
    u_hi: float
    verdicts: dict
    witnesses: dict
    notes: list
    samples: list = field(default_factory=list)

    @property
    def has_fail(self) -> bool:
        return "fail" in self.verdicts.values()

    @property
    def all_pass(self) -> bool:
        return all(v == "pass" for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "speed": self.speed,
            "u_range": [self.u_lo, self.u_hi],
            "verdicts": dict(self.verdicts),
            "witnesses": {k: dict(v) for k, v in self.witnesses.items()},
            "notes": list(self.notes),
            "samples": [list(row) for row in self.samples],
        }


def make_builtin(kind: str, params=()) -> SpeedFunction:
    """Construct one of the admissible builtin speeds.

    Kinds: "power" (F = u^alpha, params = [alpha > 0]), "log1p"
    (F = ln(1+u)), "exp" (F = e^u), "linear_plus_sine" (F = 2u + sin u),
    "sq_log_plus_linear" (F = u^2 ln u + u).  Only "power" takes a
    parameter.
    """
    params = tuple(float(x) for x in params)
    if kind == "power":
        if len(params) != 1:
            raise InvalidParams("power takes exactly one parameter alpha")
        alpha = params[0]
        if alpha <= 0.0:
            raise InvalidParams(f"power exponent must be positive, got {alpha:g}")

        def ev(u, a=alpha):
            F = u**a
            Fp = a * u ** (a - 1.0)
            Fpp = a * (a - 1.0) * u ** (a - 2.0)
            return F, Fp, Fpp

        return SpeedFunction(f"power(alpha={alpha:g})", params, ev)

    if params:
        raise InvalidParams(f"{kind} takes no parameters")

    if kind == "log1p":

        def ev(u):
            w = 1.0 + u
            return np.log1p(u), 1.0 / w, -1.0 / (w * w)

        return SpeedFunction("log1p", (), ev)

    if kind == "exp":

        def ev(u):
            with np.errstate(over="ignore"):
                e = np.exp(u)
            return e, e.copy(), e.copy()

        return SpeedFunction("exp", (), ev)

    if kind == "linear_plus_sine":

        def ev(u):
            return 2.0 * u + np.sin(u), 2.0 + np.cos(u), -np.sin(u)

        return SpeedFunction("linear_plus_sine", (), ev)

    if kind == "sq_log_plus_linear":

        def ev(u):
            lg = np.log(u)
            return u * u * lg + u, 2.0 * u * lg + u + 1.0, 2.0 * lg + 3.0

        return SpeedFunction("sq_log_plus_linear", (), ev)

    raise InvalidParams(
        f"unknown builtin kind {kind!r}; expected one of {BUILTIN_KINDS}"
    )


def blowup_inverse() -> SpeedFunction:
    """Inadmissible exemplar F(u) = -1/u (negative speed; fails condition ii)."""

    def ev(u):
        return -1.0 / u, 1.0 / (u * u), -2.0 / (u * u * u)

    return SpeedFunction("neg_inverse", (), ev)


def blowup_linear() -> SpeedFunction:
    """Inadmissible exemplar F(u) = -u (fails i and ii; anti-parabolic flow)."""

    def ev(u):
        return -u, -np.ones_like(u), np.zeros_like(u)

    return SpeedFunction("neg_linear", (), ev)


def _loglog_slope(u: np.ndarray, g: np.ndarray):
    """Least-squares slope of ln g vs ln u; None when g is not positive."""
    if u.size < 3 or np.any(g <= 0.0) or not np.all(np.isfinite(g)):
        return None
    return float(np.polyfit(np.log(u), np.log(g), 1)[0])


def check_conditions(
    f: SpeedFunction,
    u_lo: float = 1e-3,
    u_hi: float = 1e3,
    n_samples: int = 33,
    hi_threshold: float = RATIO_HI,
    lo_threshold: float = RATIO_LO,
) -> ConditionReport:
    """Screen conditions (i)-(iii) on a geometric ladder in [u_lo, u_hi].

    Positivity failures of F or F' give "fail" with a witness sample.
    Condition (iii) passes only when the ratio F'*u^2/F clears both
    thresholds and trends monotonically (in the log-log least-squares
    sense over the outermost samples) toward its limits; otherwise it is
    "inconclusive".  Limits themselves are not decidable from samples.
    """
    if not (0.0 < u_lo < u_hi):
        raise InvalidParams(f"need 0 < u_lo < u_hi, got [{u_lo:g}, {u_hi:g}]")
    if n_samples < 7:
        raise InvalidParams("need at least 7 samples for trend screening")

    u = np.geomspace(u_lo, u_hi, n_samples)
    try:
        F, Fp, Fpp = f.evaluate(u)
    except EvalDomain:
        raise
    except Exception as exc:  # evaluator fault inside the window
        raise EvalDomain(f"{f.name}: evaluator fault on [{u_lo:g}, {u_hi:g}]: {exc}")
    if np.any(np.isnan(F)) or np.any(np.isnan(Fp)) or np.any(np.isnan(Fpp)):
        raise EvalDomain(f"{f.name}: evaluator returned NaN inside the window")

    notes = []
    if np.any(np.isinf(F)) or np.any(np.isinf(Fp)):
        notes.append(
            "evaluator overflowed to +-inf at the top of the window;"
            " affected samples excluded from the ratio trend"
        )

    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        ratio = Fp * u * u / F
    samples = [
        (float(ui), float(Fi), float(Fpi), float(Fpi * ui), float(ri))
        for ui, Fi, Fpi, ri in zip(u, F, Fp, ratio)
    ]

    verdicts = {}
    witnesses = {}

    # (i): F' > 0 pointwise. The limit clause (F'*u has a limit at 0+) is
    # recorded via the F'*u column but not screened.
    bad = np.where(Fp <= 0.0)[0]
    if bad.size:
        j = int(bad[0])
        verdicts["i"] = "fail"
        witnesses["i"] = {"u": float(u[j]), "F_prime": float(Fp[j])}
    else:
        verdicts["i"] = "pass"

    # (ii): F > 0 pointwise.
    bad = np.where(F <= 0.0)[0]
    if bad.size:
        j = int(bad[0])
        verdicts["ii"] = "fail"
        witnesses["ii"] = {"u": float(u[j]), "F": float(F[j])}
    else:
        verdicts["ii"] = "pass"

    # (iii): threshold + trend screening of F'*u^2/F.
    finite = np.isfinite(ratio)
    uf, gf = u[finite], ratio[finite]
    verdict = "inconclusive"
    if uf.size >= 7 and verdicts["i"] == "pass" and verdicts["ii"] == "pass":
        top = _loglog_slope(uf[-5:], gf[-5:])
        bot = _loglog_slope(uf[:5], gf[:5])
        if (
            gf[-1] > hi_threshold
            and gf[0] < lo_threshold
            and top is not None
            and top > 0.0
            and bot is not None
            and bot > 0.0
        ):
            verdict = "pass"
        else:
            notes.append(
                f"ratio window [{gf[0]:.3g}, {gf[-1]:.3g}] vs thresholds"
                f" (<{lo_threshold:g}, >{hi_threshold:g}); trend not decisive"
            )
    else:
        notes.append("ratio not screenable (positivity failed or too few samples)")
    verdicts["iii"] = verdict

    return ConditionReport(
        speed=f.name,
        u_lo=u_lo,
        u_hi=u_hi,
        verdicts=verdicts,
        witnesses=witnesses,
        notes=notes,
        samples=samples,
    )


def finite_difference_check(f: SpeedFunction, u: float, h: float) -> tuple:
    """Relative error of central differences against the evaluator's F', F''.

    Requires u - 2h > 0 so the whole stencil stays in the domain.
    """
    u = float(u)
    h = float(h)
    if h <= 0.0 or u - 2.0 * h <= 0.0:
        raise InvalidParams(f"need 0 < h and u - 2h > 0, got u={u:g}, h={h:g}")
    Fm, _, _ = f.evaluate(u - h)
    F0, Fp, Fpp = f.evaluate(u)
    Fp_fd = (f.evaluate(u + h)[0] - Fm) / (2.0 * h)
    Fpp_fd = (f.evaluate(u + h)[0] - 2.0 * F0 + Fm) / (h * h)
    err1 = abs(Fp_fd - Fp) / max(abs(Fp), 1e-300)
    err2 = abs(Fpp_fd - Fpp) / max(abs(Fpp), 1e-300)
    return err1, err2
