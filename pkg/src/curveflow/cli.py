"""Command-line front end: run, sweep, check-speed, oracle.

Configs are JSON; diagnostics go to CSV with a fixed header and
17-significant-digit floats; reports go to JSON.  Exit codes: run returns
0/2/3 for Converged/TimedOut/Failed and 1 for config errors; check-speed
returns 0 (all pass), 4 (any fail), 5 (inconclusive only); sweep returns
0 when the whole grid executed and 1 for config errors; oracle returns 0
or 1.  CURVEFLOW_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import (
    CSV_COLUMNS,
    fit_decay_rate,
    linearized_rates,
    phi_ceiling,
    write_diagnostics_csv,
)
from .errors import (
    ConvexityLost,
    CurveFlowError,
    InsufficientData,
    InvalidParams,
    NotConvex,
)
from .flow import FlowConfig, RunOutcome, TrajectoryLog, run
from .geometry import (
    TWO_PI,
    AngleGrid,
    CurveState,
    area,
    curvature_from_support,
    steiner_normalize,
    summarize,
    validate_state,
)
from .speeds import (
    BUILTIN_KINDS,
    SpeedFunction,
    blowup_inverse,
    blowup_linear,
    check_conditions,
    make_builtin,
)

SPEED_KINDS = BUILTIN_KINDS + ("neg_inverse", "neg_linear")
CURVE_KINDS = ("circle", "ellipse", "fourier")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_TIMEOUT = 2
EXIT_FAILED = 3
EXIT_SPEED_FAIL = 4
EXIT_SPEED_INCONCLUSIVE = 5


def make_speed(kind: str, params=()) -> SpeedFunction:
    """Speed registry: the five admissible builtins plus two negative controls."""
    if kind in BUILTIN_KINDS:
        return make_builtin(kind, params)
    if kind == "neg_inverse":
        if params:
            raise InvalidParams("neg_inverse takes no parameters")
        return blowup_inverse()
    if kind == "neg_linear":
        if params:
            raise InvalidParams("neg_linear takes no parameters")
        return blowup_linear()
    raise InvalidParams(f"unknown speed kind {kind!r}; expected one of {SPEED_KINDS}")


def build_initial(kind: str, params: dict, n: int, seed=None) -> CurveState:
    """Construct a validated, Steiner-normalized initial curve.

    Kinds: "circle" {r}, "ellipse" {a, b}, "fourier" {a0, modes:[[k, eps,
    phase], ...]} or {a0, random: {k_max, roughness}} (seeded).  The
    fourier modes must have k >= 2; sufficient convexity is
    sum eps_k (k^2 - 1) < a0, and the built curve is verified numerically.
    """
    grid = AngleGrid(n)
    theta = grid.theta
    params = dict(params)

    if kind == "circle":
        r = float(params.pop("r"))
        if params:
            raise InvalidParams(f"circle: unexpected params {sorted(params)}")
        if r <= 0.0:
            raise InvalidParams(f"circle radius must be positive, got {r:g}")
        p = np.full(n, r)
    elif kind == "ellipse":
        a = float(params.pop("a"))
        b = float(params.pop("b"))
        if params:
            raise InvalidParams(f"ellipse: unexpected params {sorted(params)}")
        if a <= 0.0 or b <= 0.0:
            raise InvalidParams(f"ellipse semi-axes must be positive, got {a:g}, {b:g}")
        p = np.sqrt(a * a * np.cos(theta) ** 2 + b * b * np.sin(theta) ** 2)
    elif kind == "fourier":
        a0 = float(params.pop("a0"))
        if a0 <= 0.0:
            raise InvalidParams(f"fourier a0 must be positive, got {a0:g}")
        modes = params.pop("modes", None)
        random_spec = params.pop("random", None)
        if params:
            raise InvalidParams(f"fourier: unexpected params {sorted(params)}")
        if (modes is None) == (random_spec is None):
            raise InvalidParams("fourier needs exactly one of 'modes' or 'random'")
        if random_spec is not None:
            k_max = int(random_spec.get("k_max", 6))
            roughness = float(random_spec.get("roughness", 0.3))
            if k_max < 2 or k_max >= n // 2:
                raise InvalidParams(f"random k_max must be in [2, n/2), got {k_max}")
            if not 0.0 < roughness < 1.0:
                raise InvalidParams(f"roughness must be in (0, 1), got {roughness:g}")
            rng = np.random.default_rng(seed)
            ks = np.arange(2, k_max + 1)
            raw = rng.uniform(0.3, 1.0, size=ks.size)
            phases = rng.uniform(0.0, TWO_PI, size=ks.size)
            scale = roughness * a0 / float(np.sum(raw * (ks * ks - 1)))
            modes = [
                [int(k), float(scale * w), float(ph)]
                for k, w, ph in zip(ks, raw, phases)
            ]
        p = np.full(n, a0)
        for row in modes:
            if len(row) not in (2, 3):
                raise InvalidParams(f"fourier mode must be [k, eps(, phase)]: {row}")
            k = int(row[0])
            eps = float(row[1])
            phase = float(row[2]) if len(row) == 3 else 0.0
            if k < 2:
                raise InvalidParams(f"fourier modes need k >= 2, got k = {k}")
            if k >= n // 2:
                raise InvalidParams(f"mode k = {k} is not resolvable on n = {n}")
            if eps < 0.0:
                raise InvalidParams(f"mode amplitude must be >= 0, got {eps:g}")
            p = p + eps * np.cos(k * theta + phase)
    else:
        raise InvalidParams(
            f"unknown curve kind {kind!r}; expected one of {CURVE_KINDS}"
        )

    state = CurveState(grid, steiner_normalize(p), 0.0)
    try:
        validate_state(state)
    except ConvexityLost as exc:
        raise NotConvex(
            f"initial {kind} curve is not strictly convex: {exc}",
            min_rho=exc.min_rho,
        ) from exc
    return state


def curve_id(kind: str, params: dict) -> str:
    inner = ",".join(f"{k}={params[k]}" for k in sorted(params))
    return f"{kind}({inner})"


@dataclass
class ExperimentConfig:
    """Parsed run configuration."""

    curve_kind: str
    curve_params: dict
    speed_kind: str
    speed_params: tuple
    flow: FlowConfig
    outputs: dict = field(default_factory=dict)
    seed: int | None = None
    enforce_conditions: bool = True

    @classmethod
    def from_dict(cls, cfg: dict) -> "ExperimentConfig":
        try:
            curve = cfg["initial_curve"]
            speed = cfg["speed"]
        except KeyError as exc:
            raise InvalidParams(f"config missing section {exc}")
        known = {
            "initial_curve",
            "speed",
            "flow",
            "outputs",
            "seed",
            "enforce_conditions",
        }
        extra = set(cfg) - known
        if extra:
            raise InvalidParams(f"unknown config keys: {sorted(extra)}")
        try:
            flow = FlowConfig(**cfg.get("flow", {}))
        except TypeError as exc:
            raise InvalidParams(f"bad flow section: {exc}")
        return cls(
            curve_kind=str(curve.get("kind", "")),
            curve_params=dict(curve.get("params", {})),
            speed_kind=str(speed.get("kind", "")),
            speed_params=tuple(speed.get("params", ())),
            flow=flow,
            outputs=dict(cfg.get("outputs", {})),
            seed=cfg.get("seed"),
            enforce_conditions=bool(cfg.get("enforce_conditions", True)),
        )


@dataclass
class RunReport:
    """Serializable summary of one run."""

    outcome: RunOutcome
    wall_time_s: float
    step_count: int
    speed_name: str
    initial_id: str
    final_kappa_deviation: float
    summary_initial: dict
    summary_final: dict | None
    violations: dict
    protection: dict
    lambda0: float
    decay_fit: dict | None
    condition_report: dict
    n_records: int

    def to_dict(self) -> dict:
        return {
            "outcome": {
                "status": self.outcome.status,
                "reason": self.outcome.reason,
                "detail": self.outcome.detail,
            },
            "wall_time_s": self.wall_time_s,
            "step_count": self.step_count,
            "speed": self.speed_name,
            "initial_curve": self.initial_id,
            "final_kappa_deviation": self.final_kappa_deviation,
            "initial_summary": self.summary_initial,
            "final_summary": self.summary_final,
            "violations": self.violations,
            "protection": self.protection,
            "lambda0": self.lambda0,
            "decay_fit": self.decay_fit,
            "condition_report": self.condition_report,
            "n_records": self.n_records,
        }


def _summary_dict(state: CurveState) -> dict:
    s = summarize(state)
    return {
        "length": s.length,
        "area": s.area,
        "isoperimetric_ratio": s.isoperimetric_ratio,
        "inradius_lower": s.inradius_lower,
        "outradius_upper": s.outradius_upper,
        "kappa_min": s.kappa_min,
        "kappa_max": s.kappa_max,
    }


def execute_run(config: ExperimentConfig):
    """Build, screen, run; returns (report, log, exit_code).

    With enforcement on, a speed whose condition screening has a hard
    fail is refused (outcome Failed/InadmissibleSpeed) before any
    stepping.
    """
    f = make_speed(config.speed_kind, config.speed_params)
    initial = build_initial(
        config.curve_kind, config.curve_params, config.flow.n, config.seed
    )
    initial_id = curve_id(config.curve_kind, config.curve_params)
    cond = check_conditions(f)

    if config.enforce_conditions and cond.has_fail:
        outcome = RunOutcome(
            "Failed",
            reason="InadmissibleSpeed",
            detail=f"{f.name} fails conditions "
            + ",".join(k for k, v in cond.verdicts.items() if v == "fail"),
        )
        report = RunReport(
            outcome=outcome,
            wall_time_s=0.0,
            step_count=0,
            speed_name=f.name,
            initial_id=initial_id,
            final_kappa_deviation=math.nan,
            summary_initial=_summary_dict(initial),
            summary_final=None,
            violations={},
            protection={},
            lambda0=math.nan,
            decay_fit=None,
            condition_report=cond.to_dict(),
            n_records=0,
        )
        return report, TrajectoryLog(), EXIT_FAILED

    t0 = time.perf_counter()
    final, log, outcome = run(initial, f, config.flow)
    wall = time.perf_counter() - t0

    try:
        kappa = curvature_from_support(final)
        final_dev = float(np.max(np.abs(kappa - TWO_PI / log.length0)))
        summary_final = _summary_dict(final)
    except ConvexityLost:
        final_dev = math.nan
        summary_final = None

    try:
        fit = fit_decay_rate(log, f).to_dict()
    except InsufficientData:
        fit = None

    phi0 = log.records[0].phi_max if log.records else math.nan
    u0_proxy, ceiling = phi_ceiling(f, log.delta, phi0)
    protection = {
        "r0": log.r0,
        "T1": log.T1,
        "delta_used": log.delta,
        "delta_support_fraction": log.delta_support_fraction,
        "delta_shrinking_circle": log.delta_shrinking_circle,
        "Delta": log.Delta,
        "u0_proxy": u0_proxy,
        "phi_ceiling": ceiling,
        "phi_initial_max": phi0,
    }

    report = RunReport(
        outcome=outcome,
        wall_time_s=wall,
        step_count=log.step_count,
        speed_name=f.name,
        initial_id=initial_id,
        final_kappa_deviation=final_dev,
        summary_initial=_summary_dict(initial),
        summary_final=summary_final,
        violations=log.extremes.to_dict(),
        protection=protection,
        lambda0=log.records[0].lambda_ if log.records else math.nan,
        decay_fit=fit,
        condition_report=cond.to_dict(),
        n_records=len(log.records),
    )
    code = {
        "Converged": EXIT_OK,
        "TimedOut": EXIT_TIMEOUT,
        "Failed": EXIT_FAILED,
    }[outcome.status]
    return report, log, code


def _write_outputs(report: RunReport, log: TrajectoryLog, outputs: dict) -> None:
    csv_path = outputs.get("diagnostics_csv")
    if csv_path:
        write_diagnostics_csv(log.records, csv_path)
    snap_path = outputs.get("snapshots_json")
    if snap_path:
        payload = {
            "snapshots": [
                {"t": float(t), "p": np.asarray(p, dtype=float).tolist()}
                for t, p in log.snapshots
            ]
        }
        with open(snap_path, "w") as fh:
            json.dump(payload, fh)
    report_path = outputs.get("report_json")
    if report_path:
        with open(report_path, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)


def cmd_run(config_path: str) -> int:
    try:
        with open(config_path) as fh:
            cfg = json.load(fh)
        config = ExperimentConfig.from_dict(cfg)
        report, log, code = execute_run(config)
        _write_outputs(report, log, config.outputs)
    except (OSError, json.JSONDecodeError, CurveFlowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(
        f"{report.initial_id} under {report.speed_name}: {report.outcome.status}"
        + (f" ({report.outcome.reason})" if report.outcome.reason else "")
        + f" after {report.step_count} steps, {report.wall_time_s:.2f}s"
    )
    return code


def _sweep_cell(args):
    curve_spec, speed_spec, flow_cfg, seed, enforce, out_dir, tag = args
    config = ExperimentConfig(
        curve_kind=curve_spec.get("kind", ""),
        curve_params=dict(curve_spec.get("params", {})),
        speed_kind=speed_spec.get("kind", ""),
        speed_params=tuple(speed_spec.get("params", ())),
        flow=flow_cfg,
        outputs={},
        seed=seed,
        enforce_conditions=enforce,
    )
    try:
        report, log, _ = execute_run(config)
        if out_dir:
            path = os.path.join(out_dir, f"{tag}_report.json")
            with open(path, "w") as fh:
                json.dump(report.to_dict(), fh, indent=2)
        fit = report.decay_fit or {}
        return {
            "initial_id": report.initial_id,
            "speed_id": report.speed_name,
            "outcome": report.outcome.status
            + (f":{report.outcome.reason}" if report.outcome.reason else ""),
            "final_kappa_deviation": report.final_kappa_deviation,
            "fitted_rate": fit.get("fitted_rate", math.nan),
            "theory_lower_rate": fit.get("theory_lower_rate", math.nan),
            "max_length_drift_rel": report.violations.get(
                "max_length_drift_rel", math.nan
            ),
        }
    except CurveFlowError as exc:
        return {
            "initial_id": curve_id(
                curve_spec.get("kind", "?"), curve_spec.get("params", {})
            ),
            "speed_id": str(speed_spec.get("kind", "?")),
            "outcome": f"Error:{type(exc).__name__}",
            "final_kappa_deviation": math.nan,
            "fitted_rate": math.nan,
            "theory_lower_rate": math.nan,
            "max_length_drift_rel": math.nan,
        }


def sweep_workers(n_cells: int) -> int:
    env = os.environ.get("CURVEFLOW_THREADS", "")
    try:
        cap = int(env) if env else (os.cpu_count() or 1)
    except ValueError:
        raise InvalidParams(f"CURVEFLOW_THREADS must be an integer, got {env!r}")
    return max(1, min(cap, n_cells))


AGGREGATE_COLUMNS = (
    "initial_id",
    "speed_id",
    "outcome",
    "final_kappa_deviation",
    "fitted_rate",
    "theory_lower_rate",
    "max_length_drift_rel",
)


def cmd_sweep(config_path: str) -> int:
    try:
        with open(config_path) as fh:
            cfg = json.load(fh)
        curves = cfg.get("initial_curves", [])
        speeds = cfg.get("speeds", [])
        if not curves or not speeds:
            raise InvalidParams("sweep grid is empty")
        flow_cfg = FlowConfig(**cfg.get("flow", {}))
        seed = cfg.get("seed")
        enforce = bool(cfg.get("enforce_conditions", True))
        out_dir = cfg.get("outputs", {}).get("dir", ".")
        os.makedirs(out_dir, exist_ok=True)

        cells = []
        for i, cspec in enumerate(curves):
            for j, sspec in enumerate(speeds):
                cells.append(
                    (cspec, sspec, flow_cfg, seed, enforce, out_dir, f"cell_{i:03d}_{j:03d}")
                )
        workers = sweep_workers(len(cells))
        if workers == 1:
            rows = [_sweep_cell(c) for c in cells]
        else:
            with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(_sweep_cell, cells))

        agg = os.path.join(out_dir, "aggregate.csv")
        with open(agg, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(AGGREGATE_COLUMNS)
            for row in rows:
                writer.writerow(
                    f"{row[col]:.17g}" if isinstance(row[col], float) else str(row[col])
                    for col in AGGREGATE_COLUMNS
                )
    except (OSError, json.JSONDecodeError, TypeError, CurveFlowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"sweep: {len(rows)} cells -> {agg}")
    return EXIT_OK


def parse_speed_spec(spec: str) -> SpeedFunction:
    """Parse 'kind' or 'kind:p1,p2' into a speed function."""
    parts = spec.split(":")
    kind = parts[0]
    params = ()
    if len(parts) == 2 and parts[1]:
        params = tuple(float(x) for x in parts[1].split(","))
    elif len(parts) > 2:
        raise InvalidParams(f"bad speed spec {spec!r}")
    return make_speed(kind, params)


def cmd_check_speed(spec: str, u_lo=None, u_hi=None, n_samples=None) -> int:
    try:
        kwargs = {}
        if spec.startswith("builtin:"):
            f = parse_speed_spec(spec[len("builtin:") :])
        elif os.path.exists(spec):
            with open(spec) as fh:
                d = json.load(fh)
            f = make_speed(d.get("kind", ""), tuple(d.get("params", ())))
            if "u_range" in d:
                kwargs["u_lo"], kwargs["u_hi"] = map(float, d["u_range"])
            if "n_samples" in d:
                kwargs["n_samples"] = int(d["n_samples"])
        else:
            f = parse_speed_spec(spec)
        if u_lo is not None:
            kwargs["u_lo"] = u_lo
        if u_hi is not None:
            kwargs["u_hi"] = u_hi
        if n_samples is not None:
            kwargs["n_samples"] = n_samples
        report = check_conditions(f, **kwargs)
    except (OSError, json.JSONDecodeError, CurveFlowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(report.to_dict(), indent=2))
    if report.has_fail:
        return EXIT_SPEED_FAIL
    if not report.all_pass:
        return EXIT_SPEED_INCONCLUSIVE
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        if args.kind == "linearized_rate":
            if not args.speed or args.length is None:
                raise InvalidParams("linearized_rate needs --speed and --length")
            f = parse_speed_spec(args.speed)
            lower, linearized = linearized_rates(f, args.length)
            out = {
                "kappa_bar": TWO_PI / args.length,
                "theory_lower_rate": lower,
                "linearized_rate": linearized,
            }
        elif args.kind == "quadrature":
            n = args.n
            theta = np.arange(n) * (TWO_PI / n)
            if args.target == "lambda":
                if not args.speed:
                    raise InvalidParams("quadrature of lambda needs --speed")
                c = args.cos2_amplitude
                if not 0.0 <= c < 1.0:
                    raise InvalidParams(f"cos2 amplitude must be in [0, 1), got {c:g}")
                f = parse_speed_spec(args.speed)
                kappa = 1.0 / (1.0 - c * np.cos(2.0 * theta))
                value = float(np.mean(f.evaluate(kappa)[0]))
            elif args.target in ("perimeter", "area"):
                if not args.ellipse:
                    raise InvalidParams(f"quadrature of {args.target} needs --ellipse a,b")
                a, b = (float(x) for x in args.ellipse.split(","))
                p = np.sqrt(a * a * np.cos(theta) ** 2 + b * b * np.sin(theta) ** 2)
                if args.target == "perimeter":
                    value = float(np.mean(p) * TWO_PI)
                else:
                    grid = AngleGrid(n)
                    value = area(CurveState(grid, steiner_normalize(p), 0.0))
            else:
                raise InvalidParams(f"unknown quadrature target {args.target!r}")
            out = {"target": args.target, "n": n, "value": value}
        else:
            raise InvalidParams(f"unknown oracle kind {args.kind!r}")
    except (ValueError, CurveFlowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(out, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="curveflow",
        description="Length-preserving curvature flow of convex plane curves",
    )
    ap.add_argument("--version", action="version", version=f"curveflow {__version__}")
    sub = ap.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="run one experiment from a JSON config")
    p_run.add_argument("config", help="path to the experiment config")

    p_sweep = sub.add_parser("sweep", help="run a grid of experiments")
    p_sweep.add_argument("config", help="path to the sweep config")

    p_chk = sub.add_parser("check-speed", help="screen a speed function")
    p_chk.add_argument("spec", help="'builtin:kind[:params]', 'kind[:params]', or a JSON file")
    p_chk.add_argument("--u-lo", type=float, default=None)
    p_chk.add_argument("--u-hi", type=float, default=None)
    p_chk.add_argument("--n-samples", type=int, default=None)

    p_or = sub.add_parser("oracle", help="independent reference values")
    p_or.add_argument("kind", choices=["linearized_rate", "quadrature"])
    p_or.add_argument("--speed", default=None, help="speed spec, e.g. power:1")
    p_or.add_argument("--length", type=float, default=None)
    p_or.add_argument("--target", default=None, choices=["lambda", "perimeter", "area"])
    p_or.add_argument("--n", type=int, default=4096)
    p_or.add_argument("--cos2-amplitude", type=float, default=0.3)
    p_or.add_argument("--ellipse", default=None, help="semi-axes 'a,b'")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "sweep":
        return cmd_sweep(args.config)
    if args.command == "check-speed":
        return cmd_check_speed(args.spec, args.u_lo, args.u_hi, args.n_samples)
    if args.command == "oracle":
        return cmd_oracle(args)
    ap.print_help()
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
