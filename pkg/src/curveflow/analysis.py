"""Diagnostics records and theory monitors for flow runs.

Each record is one row of scalar functionals of the evolving curve; the
CSV/JSON schema is fixed (CSV_COLUMNS).  The monitors mirror the a-priori
bounds of the convergence theory: a decreasing curvature barrier, Bonnesen
radius bounds, pointwise curvature protection ratios, the Wirtinger
inequality for the speed field, and the exponential decay of the speed's
gradient energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData, InvalidMonitorParams, InvalidParams
from .geometry import (
    TWO_PI,
    CurveState,
    area,
    bonnesen_bounds,
    closing_defect,
    curvature_from_support,
    integrate,
    isoperimetric_ratio,
    length,
    spectral_derivative,
)
from .speeds import SpeedFunction

# Wire format: one diagnostics row. Column order is fixed.
CSV_COLUMNS = (
    "t",
    "L",
    "A",
    "I",
    "lambda",
    "kappa_min",
    "kappa_max",
    "speed_sup",
    "grad_energy",
    "kappa_deviation",
    "closing_defect_mod",
    "bonnesen_slack",
    "andrews_slack",
    "phi_max",
    "psi_min",
    "barrier_f",
)


@dataclass
class FlowBaseline:
    """Run-level reference values the per-record diagnostics depend on.

    kappa_max_seen is the running maximum of kappa over the whole run so
    far; diagnostics() updates it before evaluating the barrier, matching
    the construction of the barrier on [0, t].
    """

    length0: float
    kappa0_min: float
    kappa_max_seen: float


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One scalar snapshot of the flow; field names follow CSV_COLUMNS."""

    t: float
    L: float
    A: float
    I: float
    lambda_: float
    kappa_min: float
    kappa_max: float
    speed_sup: float
    grad_energy: float
    kappa_deviation: float
    closing_defect_mod: float
    bonnesen_slack: float
    andrews_slack: float
    phi_max: float
    psi_min: float
    barrier_f: float

    def to_dict(self) -> dict:
        d = {}
        for col in CSV_COLUMNS:
            attr = "lambda_" if col == "lambda" else col
            d[col] = getattr(self, attr)
        return d

    def to_csv_row(self) -> str:
        return ",".join(f"{v:.17g}" for v in (self.to_dict()[c] for c in CSV_COLUMNS))

    @classmethod
    def from_dict(cls, d: dict) -> "DiagnosticsRecord":
        kwargs = {("lambda_" if c == "lambda" else c): float(d[c]) for c in CSV_COLUMNS}
        return cls(**kwargs)


def write_diagnostics_csv(records, path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(rec.to_csv_row() + "\n")


def read_diagnostics_csv(path) -> list:
    records = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise InvalidParams(f"unexpected diagnostics header: {header}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            vals = line.split(",")
            records.append(
                DiagnosticsRecord.from_dict(dict(zip(CSV_COLUMNS, vals)))
            )
    return records


def barrier_f(t: float, kappa0_min: float, F_of_max: float) -> float:
    """Decreasing lower barrier for the minimum curvature.

    f(t) = (kappa0_min/2) / ((F_of_max * kappa0_min/2) * t + 1); it starts
    at half the initial minimum curvature and satisfies f' = -F_of_max*f^2,
    so kappa_min(t) >= f(t) along the flow (F_of_max evaluated at the
    running curvature maximum).  Returns -inf when the denominator is not
    positive, which can only happen for inadmissible speeds with F < 0
    (no information in that case).
    """
    if t < 0.0:
        raise InvalidParams(f"time must be nonnegative, got {t:g}")
    if kappa0_min <= 0.0:
        raise InvalidParams(f"kappa0_min must be positive, got {kappa0_min:g}")
    a = 0.5 * kappa0_min
    denom = F_of_max * a * t + 1.0
    if denom <= 0.0:
        return -math.inf
    return a / denom


def protection_constants(L: float, I0: float, f: SpeedFunction) -> tuple:
    """Shrinking-circle radius r0 and its protection horizon T1.

    r0 = (L/2pi) / (sqrt(I0) + sqrt(I0 - 1))^2 is the radius of a circle
    that stays inside the initial curve; T1 = r0 / (2 F(2/r0)) is how long
    a barrier circle of that radius survives under speed F.
    """
    if L <= 0.0:
        raise InvalidParams(f"length must be positive, got {L:g}")
    if I0 < 1.0 - 1e-12:
        raise InvalidParams(f"isoperimetric ratio must be >= 1, got {I0:.12g}")
    I0 = max(I0, 1.0)
    r0 = (L / TWO_PI) / (math.sqrt(I0) + math.sqrt(I0 - 1.0)) ** 2
    T1 = r0 / (2.0 * f.value(2.0 / r0))
    return r0, T1


def monitor_phi(state: CurveState, f: SpeedFunction, delta: float) -> float:
    """Curvature-protection ratio max F(kappa)/(p - delta).

    Requires 0 < delta < min p.  Gauge-dependent: p is measured from the
    current origin, so normalize before comparing values across states.
    """
    pmin = float(state.p.min())
    if not 0.0 < delta < pmin:
        raise InvalidMonitorParams(
            f"need 0 < delta < min p = {pmin:.6g}, got delta = {delta:.6g}"
        )
    kappa = curvature_from_support(state)
    F = f.evaluate(kappa)[0]
    return float(np.max(F / (state.p - delta)))


def monitor_psi(state: CurveState, f: SpeedFunction, Delta: float) -> float:
    """Lower curvature-protection ratio min F(kappa)/(Delta - p).

    Requires Delta >= 2 max p (the perimeter always qualifies).
    """
    pmax = float(state.p.max())
    if Delta < 2.0 * pmax:
        raise InvalidMonitorParams(
            f"need Delta >= 2 max p = {2 * pmax:.6g}, got Delta = {Delta:.6g}"
        )
    kappa = curvature_from_support(state)
    F = f.evaluate(kappa)[0]
    return float(np.min(F / (Delta - state.p)))


def wirtinger_gap(state: CurveState, f: SpeedFunction) -> tuple:
    """(int (F - lambda)^2 dtheta, int F_theta^2 dtheta).

    The first integral never exceeds the second for a mean-zero periodic
    field, which is the engine of the speed-decay estimate.
    """
    kappa = curvature_from_support(state)
    F = f.evaluate(kappa)[0]
    lam = float(np.mean(F))
    lhs = integrate((F - lam) ** 2)
    rhs = integrate(spectral_derivative(F, 1) ** 2)
    return lhs, rhs


def andrews_slack(state: CurveState, f: SpeedFunction) -> float:
    """dA/dt = -int F/kappa dtheta + (L/2pi) int F dtheta (>= 0 for F' > 0)."""
    kappa = curvature_from_support(state)
    F = f.evaluate(kappa)[0]
    L = length(state)
    return -integrate(F / kappa) + (L / TWO_PI) * integrate(F)


def diagnostics(
    state: CurveState,
    f: SpeedFunction,
    delta: float,
    Delta: float,
    baseline: FlowBaseline,
    closing_defect_mod=None,
) -> DiagnosticsRecord:
    """Full scalar snapshot of one state.

    closing_defect_mod overrides the measured defect (the curvature
    formulation reports its pre-projection drift through this hook); when
    None it is computed from the state's own curvature field.  Monitor
    failures (offset constants out of range) record +inf rather than
    aborting a run: they are findings, not flow errors.
    """
    kappa = curvature_from_support(state)
    baseline.kappa_max_seen = max(baseline.kappa_max_seen, float(kappa.max()))
    L = length(state)
    A = area(state)
    F = f.evaluate(kappa)[0]
    lam = float(np.mean(F))
    speed_sup = float(np.max(np.abs(F - lam)))
    grad_energy = integrate(spectral_derivative(F, 1) ** 2)
    kappa_dev = float(np.max(np.abs(kappa - TWO_PI / baseline.length0)))
    if closing_defect_mod is None:
        closing_defect_mod = abs(closing_defect(kappa))
    rin, rout = bonnesen_bounds(L, A)
    slack = min(r * L - A - np.pi * r * r for r in (rin, rout))
    andrews = -integrate(F / kappa) + (L / TWO_PI) * integrate(F)
    try:
        phi = monitor_phi(state, f, delta)
    except InvalidMonitorParams:
        phi = math.inf
    try:
        psi = monitor_psi(state, f, Delta)
    except InvalidMonitorParams:
        psi = math.inf
    barrier = barrier_f(state.t, baseline.kappa0_min, f.value(baseline.kappa_max_seen))
    return DiagnosticsRecord(
        t=state.t,
        L=L,
        A=A,
        I=isoperimetric_ratio(L, A),
        lambda_=lam,
        kappa_min=float(kappa.min()),
        kappa_max=float(kappa.max()),
        speed_sup=speed_sup,
        grad_energy=grad_energy,
        kappa_deviation=kappa_dev,
        closing_defect_mod=float(closing_defect_mod),
        bonnesen_slack=float(slack),
        andrews_slack=andrews,
        phi_max=phi,
        psi_min=psi,
        barrier_f=barrier,
    )


@dataclass(frozen=True)
class DecayFit:
    """Exponential fit of the speed decay from the gradient-energy tail.

    fitted_rate is the decay rate of the speed amplitude |F - lambda|,
    i.e. half the negated log-slope of grad_energy = int F_theta^2 (the
    energy is quadratic in the amplitude, so it decays at twice the rate;
    the k=2 linearization about the circle gives amplitude rate
    3 F'(kb) kb^2 with kb = 2pi/L).
    """

    t_window: tuple
    n_points: int
    fitted_rate: float
    r_squared: float
    theory_lower_rate: float
    linearized_rate: float

    def to_dict(self) -> dict:
        return {
            "t_window": list(self.t_window),
            "n_points": self.n_points,
            "fitted_rate": self.fitted_rate,
            "r_squared": self.r_squared,
            "theory_lower_rate": self.theory_lower_rate,
            "linearized_rate": self.linearized_rate,
        }


def linearized_rates(f: SpeedFunction, L: float) -> tuple:
    """(theory_lower_rate, linearized_rate) about the circle of perimeter L.

    theory_lower_rate = F'(kb) kb^2 with kb = 2pi/L is the guaranteed
    floor for the energy's log-decay; the slowest shape mode (k = 2)
    decays in amplitude at 3x that value.
    """
    if L <= 0.0:
        raise InvalidParams(f"length must be positive, got {L:g}")
    kb = TWO_PI / L
    lower = f.derivative(kb) * kb * kb
    return lower, 3.0 * lower


def fit_decay_rate(log, f: SpeedFunction, tail_fraction: float = 0.3) -> DecayFit:
    """Least-squares exponential fit over the late-time diagnostics tail.

    The window is the final tail_fraction of records whose grad_energy has
    dropped below 1e-2 of its initial value (past the nonlinear
    transient).  Requires at least 10 usable records in the window.
    """
    if not 0.0 < tail_fraction <= 1.0:
        raise InvalidParams(f"tail_fraction must be in (0, 1], got {tail_fraction:g}")
    records = list(log.records)
    if not records:
        raise InsufficientData("log has no records")
    E0 = records[0].grad_energy
    tail = [
        r
        for r in records
        if r.grad_energy < 1e-2 * E0 and r.grad_energy > 1e-300
    ]
    start = int(round(len(tail) * (1.0 - tail_fraction)))
    tail = tail[start:]
    if len(tail) < 10:
        raise InsufficientData(
            f"only {len(tail)} usable records in the decay tail; need >= 10"
        )
    t = np.array([r.t for r in tail])
    lnE = np.log([r.grad_energy for r in tail])
    if t[-1] <= t[0]:
        raise InsufficientData("decay tail has no time extent")
    slope, intercept = np.polyfit(t, lnE, 1)
    resid = lnE - (slope * t + intercept)
    ss_tot = float(np.sum((lnE - lnE.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    lower, linearized = linearized_rates(f, log.length0)
    return DecayFit(
        t_window=(float(t[0]), float(t[-1])),
        n_points=len(tail),
        fitted_rate=-0.5 * float(slope),
        r_squared=r2,
        theory_lower_rate=float(lower),
        linearized_rate=float(linearized),
    )


def phi_ceiling(
    f: SpeedFunction,
    delta: float,
    phi_initial: float,
    u_lo: float = 1e-3,
    u_hi: float = 1e3,
    n_samples: int = 257,
) -> tuple:
    """(u0_proxy, ceiling) for the phi monitor's theoretical bound.

    u0_proxy is the first ladder point where F'*u^2/F exceeds 2/delta (a
    sampled stand-in for the threshold the theory defines through limits);
    the ceiling is max(phi_initial, F(max(2/delta, u0_proxy))/delta).
    Returns (None, None) when the ladder never crosses the threshold.
    """
    if delta <= 0.0:
        raise InvalidMonitorParams(f"delta must be positive, got {delta:g}")
    u = np.geomspace(u_lo, u_hi, n_samples)
    F, Fp, _ = f.evaluate(u)
    with np.errstate(invalid="ignore", over="ignore"):
        ratio = Fp * u * u / F
    thresh = 2.0 / delta
    hits = np.where(np.isfinite(ratio) & (ratio > thresh))[0]
    if hits.size == 0:
        return None, None
    u0 = float(u[hits[0]])
    ceiling = max(phi_initial, f.value(max(thresh, u0)) / delta)
    return u0, float(ceiling)
