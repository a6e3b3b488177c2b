"""Time integration of the length-preserving curvature flow.

The curve moves with normal speed F(kappa) - lambda(t) where
lambda(t) = (1/2pi) int F(kappa) dtheta; the mean subtraction makes the
perimeter an exact invariant of the semi-discrete system (and RK4
preserves linear invariants, so L drifts only by roundoff).  Two
equivalent formulations are integrated with classical RK4 over the method
of lines:

    support:    dp/dt     = lambda - F(kappa),  kappa = 1/(p + p'')
    curvature:  dkappa/dt = kappa^2 (F' kappa'' + F'' kappa'^2 + F - lambda)

lambda is recomputed at every Runge-Kutta stage.  The support step
re-applies the Steiner normalization afterwards (the nonlinearity slowly
translates the curve; the shape is unaffected).  The curvature step
reconstructs p by the spectral solve, which projects out whatever
first-harmonic content time error has introduced into 1/kappa; the
modulus of that non-closure is measured beforehand and reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    DiagnosticsRecord,
    FlowBaseline,
    diagnostics,
    protection_constants,
    wirtinger_gap,
)
from .errors import ConvexityLost, InvalidParams, NumericalBlowup
from .geometry import (
    TWO_PI,
    CurveState,
    _rho,
    _solve_support,
    area,
    closing_defect,
    curvature_from_support,
    isoperimetric_ratio,
    length,
    spectral_derivative,
    steiner_normalize,
    validate_state,
)
from .speeds import SpeedFunction

FORMULATIONS = ("support", "curvature")


@dataclass(frozen=True)
class FlowConfig:
    """Discretization and stopping policy for one run."""

    n: int = 128
    formulation: str = "support"
    cfl_safety: float = 0.2
    t_max: float = 50.0
    convergence_tol: float = 1e-8
    record_every: int = 50
    snapshot_every: int = 0  # 0 disables state snapshots

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise InvalidParams(
                f"formulation must be one of {FORMULATIONS}, got {self.formulation!r}"
            )
        if not 0.0 < self.cfl_safety <= 1.0:
            raise InvalidParams(f"cfl_safety must be in (0, 1], got {self.cfl_safety}")
        if self.t_max <= 0.0:
            raise InvalidParams(f"t_max must be positive, got {self.t_max}")
        if self.convergence_tol <= 0.0:
            raise InvalidParams("convergence_tol must be positive")
        if self.record_every < 1:
            raise InvalidParams("record_every must be >= 1")
        if self.snapshot_every < 0:
            raise InvalidParams("snapshot_every must be >= 0")
        if self.n < 8 or self.n % 2 != 0:
            raise InvalidParams(f"grid size must be even and >= 8, got {self.n}")


@dataclass(frozen=True)
class StepResult:
    """One accepted RK4 step.

    lambda_value is the nonlocal term at the step's start time (stage 1).
    closing_defect is the pre-projection defect modulus of the evolved
    curvature field; None in the support formulation.
    """

    state: CurveState
    dt_used: float
    lambda_value: float
    closing_defect: float | None = None


@dataclass(frozen=True)
class RunOutcome:
    """Terminal status of a run: Converged, TimedOut, or Failed(reason)."""

    status: str
    reason: str | None = None
    detail: str = ""
    failed_state: CurveState | None = None

    @property
    def converged(self) -> bool:
        return self.status == "Converged"


@dataclass
class RunExtremes:
    """Worst observed values of the monitored invariants over one run.

    Violation-style fields are clamped at zero, so a clean run reports
    zeros; slack/margin minima are reported as seen.
    """

    max_length_drift_rel: float = 0.0
    max_area_dip_rel: float = 0.0
    max_iso_rise: float = 0.0
    min_bonnesen_slack: float = math.inf
    min_wirtinger_slack_rel: float = math.inf
    min_barrier_margin: float = math.inf
    min_andrews_slack: float = math.inf
    lambda_min: float = math.inf
    lambda_max: float = -math.inf
    kappa_min_seen: float = math.inf
    kappa_max_seen: float = -math.inf

    def to_dict(self) -> dict:
        return {
            "max_length_drift_rel": self.max_length_drift_rel,
            "max_area_dip_rel": self.max_area_dip_rel,
            "max_iso_rise": self.max_iso_rise,
            "min_bonnesen_slack": self.min_bonnesen_slack,
            "min_wirtinger_slack_rel": self.min_wirtinger_slack_rel,
            "min_barrier_margin": self.min_barrier_margin,
            "min_andrews_slack": self.min_andrews_slack,
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "kappa_min_seen": self.kappa_min_seen,
            "kappa_max_seen": self.kappa_max_seen,
        }


@dataclass
class TrajectoryLog:
    """Diagnostics records (plus optional snapshots) accumulated by run()."""

    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (t, p) pairs
    extremes: RunExtremes = field(default_factory=RunExtremes)
    length0: float = 0.0
    step_count: int = 0
    delta: float = 0.0
    Delta: float = 0.0
    r0: float = 0.0
    T1: float = 0.0
    delta_support_fraction: float = 0.0
    delta_shrinking_circle: float = 0.0


def average_speed(kappa: np.ndarray, f: SpeedFunction) -> float:
    """Nonlocal term lambda = (1/2pi) int F(kappa) dtheta (trapezoid mean)."""
    F = f.evaluate(np.asarray(kappa, dtype=float))[0]
    return float(np.mean(F))


def _rhs_support(p: np.ndarray, f: SpeedFunction, t: float):
    rho = _rho(p)
    m = float(rho.min())
    if not math.isfinite(m):
        raise NumericalBlowup(f"non-finite stage values near t={t:.6g}", t=t)
    if m <= 0.0:
        raise ConvexityLost(
            f"stage curvature radius min {m:.6g} <= 0 near t={t:.6g}", min_rho=m, t=t
        )
    kappa = 1.0 / rho
    F = f.evaluate(kappa)[0]
    lam = float(np.mean(F))
    return lam - F, lam


def _rhs_curvature(kappa: np.ndarray, f: SpeedFunction, t: float):
    m = float(kappa.min())
    if not math.isfinite(m):
        raise NumericalBlowup(f"non-finite stage values near t={t:.6g}", t=t)
    if m <= 0.0:
        raise ConvexityLost(
            f"stage curvature min {m:.6g} <= 0 near t={t:.6g}", min_rho=None, t=t
        )
    F, Fp, Fpp = f.evaluate(kappa)
    lam = float(np.mean(F))
    ktt = spectral_derivative(kappa, 2)
    kt = spectral_derivative(kappa, 1)
    return kappa * kappa * (Fp * ktt + Fpp * kt * kt + F - lam), lam


def rhs_support(state: CurveState, f: SpeedFunction) -> np.ndarray:
    """Support velocity lambda - F(kappa) on the grid."""
    return _rhs_support(state.p, f, state.t)[0]


def rhs_curvature(kappa: np.ndarray, f: SpeedFunction) -> np.ndarray:
    """Curvature velocity kappa^2 (F' kappa'' + F'' kappa'^2 + F - lambda)."""
    return _rhs_curvature(np.asarray(kappa, dtype=float), f, math.nan)[0]


def rhs_F_monitor(state: CurveState, f: SpeedFunction) -> np.ndarray:
    """Velocity of the speed field itself: F' kappa^2 (F_tt + F - lambda).

    Equals F'(kappa) * rhs_curvature pointwise (chain rule); kept as an
    independent formula so the identity is a cross-check, not a tautology.
    """
    kappa = curvature_from_support(state)
    F, Fp, _ = f.evaluate(kappa)
    lam = float(np.mean(F))
    Ftt = spectral_derivative(F, 2)
    return Fp * kappa * kappa * (Ftt + F - lam)


def _cfl_from_kappa(kappa: np.ndarray, f: SpeedFunction, safety: float, n: int) -> float:
    Fp = f.evaluate(kappa)[1]
    coef = kappa * kappa * Fp
    den = float(coef.max())
    if den <= 0.0:
        # inadmissible F' <= 0: size the step by the magnitude so the run
        # can proceed to its (expected) failure instead of dividing by zero
        den = float(np.abs(coef).max())
    den = max(den, 1e-300)
    dtheta = TWO_PI / n
    return safety * dtheta * dtheta / (2.0 * den)


def cfl_dt(state: CurveState, f: SpeedFunction, safety: float = 0.2) -> float:
    """Parabolic step bound safety * dtheta^2 / (2 max(kappa^2 F')).

    Doubling n quarters the step; stiffer speed/curvature strictly
    shrinks it.
    """
    if not 0.0 < safety <= 1.0:
        raise InvalidParams(f"safety must be in (0, 1], got {safety}")
    kappa = curvature_from_support(state)
    return _cfl_from_kappa(kappa, f, safety, state.grid.n)


def _rk4(y: np.ndarray, rhs, dt: float):
    k1, lam = rhs(y)
    k2, _ = rhs(y + (0.5 * dt) * k1)
    k3, _ = rhs(y + (0.5 * dt) * k2)
    k4, _ = rhs(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), lam


def step(
    state: CurveState,
    f: SpeedFunction,
    dt: float,
    formulation: str = "support",
) -> StepResult:
    """One classical RK4 step of length dt.

    Raises ConvexityLost if any stage (or the result, in the curvature
    formulation) stops being strictly convex, and NumericalBlowup if
    non-finite values appear.
    """
    if dt <= 0.0 or not math.isfinite(dt):
        raise InvalidParams(f"dt must be positive and finite, got {dt}")
    if formulation == "support":
        pn, lam = _rk4(state.p, lambda q: _rhs_support(q, f, state.t), dt)
        if not np.all(np.isfinite(pn)):
            raise NumericalBlowup(
                f"non-finite support values after step at t={state.t:.6g}", t=state.t
            )
        pn = steiner_normalize(pn)
        return StepResult(
            state=CurveState(state.grid, pn, state.t + dt),
            dt_used=dt,
            lambda_value=lam,
            closing_defect=None,
        )
    if formulation == "curvature":
        kappa = curvature_from_support(state)
        kn, lam = _rk4(kappa, lambda q: _rhs_curvature(q, f, state.t), dt)
        if not np.all(np.isfinite(kn)):
            raise NumericalBlowup(
                f"non-finite curvature values after step at t={state.t:.6g}",
                t=state.t,
            )
        m = float(kn.min())
        if m <= 0.0:
            raise ConvexityLost(
                f"curvature min {m:.6g} <= 0 after step at t={state.t:.6g}",
                min_rho=None,
                t=state.t,
            )
        defect = abs(closing_defect(kn))
        pn = _solve_support(1.0 / kn)
        return StepResult(
            state=CurveState(state.grid, pn, state.t + dt),
            dt_used=dt,
            lambda_value=lam,
            closing_defect=defect,
        )
    raise InvalidParams(f"formulation must be one of {FORMULATIONS}, got {formulation!r}")


def _update_extremes(
    ext: RunExtremes,
    prev: DiagnosticsRecord | None,
    rec: DiagnosticsRecord,
    state: CurveState,
    f: SpeedFunction,
    L0: float,
    A0: float,
) -> None:
    ext.max_length_drift_rel = max(ext.max_length_drift_rel, abs(rec.L - L0) / L0)
    if prev is not None:
        ext.max_area_dip_rel = max(ext.max_area_dip_rel, (prev.A - rec.A) / A0)
        ext.max_iso_rise = max(ext.max_iso_rise, rec.I - prev.I)
    ext.min_bonnesen_slack = min(ext.min_bonnesen_slack, rec.bonnesen_slack)
    lhs, rhs_ = wirtinger_gap(state, f)
    ext.min_wirtinger_slack_rel = min(
        ext.min_wirtinger_slack_rel, (rhs_ - lhs) / max(rhs_, 1e-300)
    )
    ext.min_barrier_margin = min(ext.min_barrier_margin, rec.kappa_min - rec.barrier_f)
    ext.min_andrews_slack = min(ext.min_andrews_slack, rec.andrews_slack)
    ext.lambda_min = min(ext.lambda_min, rec.lambda_)
    ext.lambda_max = max(ext.lambda_max, rec.lambda_)
    ext.kappa_min_seen = min(ext.kappa_min_seen, rec.kappa_min)
    ext.kappa_max_seen = max(ext.kappa_max_seen, rec.kappa_max)


def run(initial: CurveState, f: SpeedFunction, config: FlowConfig):
    """Integrate until convergence to the circle, the time limit, or failure.

    Returns (final_state, TrajectoryLog, RunOutcome).  Flow failures
    (ConvexityLost, NumericalBlowup) are captured in the outcome with the
    last good state attached; errors in the caller's inputs are raised.
    """
    validate_state(initial)
    if initial.grid.n != config.n:
        raise InvalidParams(
            f"config grid size {config.n} != initial state grid {initial.grid.n}"
        )

    state = initial
    kappa = curvature_from_support(state)
    L0 = length(state)
    kb = TWO_PI / L0
    A0 = area(state)
    I0 = isoperimetric_ratio(L0, A0)
    r0, T1 = protection_constants(L0, I0, f)
    delta_support = 0.25 * float(state.p.min())
    delta_shrink = r0 / 4.0
    delta = min(delta_support, delta_shrink)
    Delta = L0

    baseline = FlowBaseline(
        length0=L0, kappa0_min=float(kappa.min()), kappa_max_seen=float(kappa.max())
    )
    log = TrajectoryLog(
        length0=L0,
        delta=delta,
        Delta=Delta,
        r0=r0,
        T1=T1,
        delta_support_fraction=delta_support,
        delta_shrinking_circle=delta_shrink,
    )

    rec = diagnostics(state, f, delta, Delta, baseline)
    log.records.append(rec)
    _update_extremes(log.extremes, None, rec, state, f, L0, A0)
    if config.snapshot_every:
        log.snapshots.append((state.t, np.array(state.p)))

    t_edge = config.t_max - 1e-12 * max(1.0, config.t_max)
    defect_mod = None
    outcome = None
    dt_floor = None

    while True:
        try:
            kappa = curvature_from_support(state)
        except ConvexityLost as exc:
            outcome = RunOutcome(
                "Failed", reason="ConvexityLost", detail=str(exc), failed_state=state
            )
            break
        baseline.kappa_max_seen = max(baseline.kappa_max_seen, float(kappa.max()))
        if float(np.max(np.abs(kappa - kb))) < config.convergence_tol:
            outcome = RunOutcome("Converged")
            break
        if state.t >= t_edge:
            outcome = RunOutcome("TimedOut")
            break
        dt_cfl = _cfl_from_kappa(kappa, f, config.cfl_safety, config.n)
        if dt_floor is None:
            dt_floor = 1e-12 * dt_cfl
        # a CFL step collapsing by 12 orders (or below time resolution)
        # means the stiffness diverged: curvature blow-up, not progress
        if dt_cfl < dt_floor or state.t + dt_cfl == state.t:
            outcome = RunOutcome(
                "Failed",
                reason="NumericalBlowup",
                detail=(
                    f"time step collapsed to {dt_cfl:.3g} at t={state.t:.6g} "
                    f"(max curvature {float(kappa.max()):.3g})"
                ),
                failed_state=state,
            )
            break
        dt = min(dt_cfl, config.t_max - state.t)
        try:
            sres = step(state, f, dt, config.formulation)
        except (ConvexityLost, NumericalBlowup) as exc:
            outcome = RunOutcome(
                "Failed",
                reason=type(exc).__name__,
                detail=str(exc),
                failed_state=state,
            )
            break
        state = sres.state
        if config.formulation == "curvature":
            defect_mod = sres.closing_defect
        log.step_count += 1
        if log.step_count % config.record_every == 0:
            rec = diagnostics(
                state, f, delta, Delta, baseline, closing_defect_mod=defect_mod
            )
            _update_extremes(log.extremes, log.records[-1], rec, state, f, L0, A0)
            log.records.append(rec)
        if config.snapshot_every and log.step_count % config.snapshot_every == 0:
            log.snapshots.append((state.t, np.array(state.p)))

    # always close the log with the terminal state (when it is still readable)
    if not log.records or log.records[-1].t != state.t:
        try:
            rec = diagnostics(
                state, f, delta, Delta, baseline, closing_defect_mod=defect_mod
            )
            _update_extremes(log.extremes, log.records[-1], rec, state, f, L0, A0)
            log.records.append(rec)
            if config.snapshot_every:
                log.snapshots.append((state.t, np.array(state.p)))
        except ConvexityLost:
            pass

    return state, log, outcome
