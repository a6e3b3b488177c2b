"""Command-line front end: configs, subcommands, exit codes, file outputs.

Commands are exercised through main(argv) so argument parsing, dispatch,
and exit codes are all on the tested path.  File outputs land in
tmp_path and are read back with the library parsers.
"""

import csv
import json
import math

import numpy as np
import pytest

from curveflow import (
    CSV_COLUMNS,
    InvalidParams,
    NotConvex,
    first_harmonic_amplitude,
    read_diagnostics_csv,
    validate_state,
)
from curveflow.cli import (
    AGGREGATE_COLUMNS,
    EXIT_CONFIG,
    EXIT_FAILED,
    EXIT_OK,
    EXIT_SPEED_FAIL,
    EXIT_SPEED_INCONCLUSIVE,
    EXIT_TIMEOUT,
    ExperimentConfig,
    build_initial,
    curve_id,
    main,
    make_speed,
    parse_speed_spec,
    sweep_workers,
)

from conftest import (
    ELLIPSE21_PERIMETER,
    LAMBDA_COS2,
    TWO_PI,
    ellipse_support,
)


class TestMakeSpeed:
    def test_builtins_and_exemplars(self):
        assert make_speed("power", (2.0,)).name == "power(alpha=2)"
        assert make_speed("exp").name == "exp"
        assert make_speed("neg_inverse").evaluate(2.0)[0] == pytest.approx(-0.5)
        assert make_speed("neg_linear").evaluate(3.0)[0] == pytest.approx(-3.0)

    def test_unknown_kind(self):
        with pytest.raises(InvalidParams):
            make_speed("cubic")

    def test_exemplars_take_no_params(self):
        with pytest.raises(InvalidParams):
            make_speed("neg_linear", (1.0,))

    def test_spec_parsing(self):
        assert parse_speed_spec("power:0.5").name == "power(alpha=0.5)"
        assert parse_speed_spec("log1p").name == "log1p"
        with pytest.raises(InvalidParams):
            parse_speed_spec("power:1:2")


class TestBuildInitial:
    def test_circle(self):
        st = build_initial("circle", {"r": 2.5}, 64)
        assert np.allclose(st.p, 2.5, rtol=0, atol=1e-14)

    def test_ellipse_matches_formula(self):
        st = build_initial("ellipse", {"a": 2.0, "b": 1.0}, 128)
        # symmetric, so the Steiner shift is a no-op
        assert np.max(np.abs(st.p - ellipse_support(128, 2.0, 1.0))) < 1e-14

    def test_fourier_modes(self):
        st = build_initial("fourier", {"a0": 1.0, "modes": [[2, 0.1], [3, 0.05, 0.7]]}, 128)
        theta = st.grid.theta
        want = 1.0 + 0.1 * np.cos(2 * theta) + 0.05 * np.cos(3 * theta + 0.7)
        assert np.max(np.abs(st.p - want)) < 1e-14

    def test_output_is_gauge_fixed_and_convex(self):
        st = build_initial("fourier", {"a0": 1.0, "random": {"k_max": 8, "roughness": 0.5}}, 128, seed=3)
        assert first_harmonic_amplitude(st.p) < 1e-13
        validate_state(st)

    def test_random_is_seed_deterministic(self):
        spec = {"a0": 1.0, "random": {"k_max": 6, "roughness": 0.4}}
        a = build_initial("fourier", spec, 128, seed=42)
        b = build_initial("fourier", spec, 128, seed=42)
        c = build_initial("fourier", spec, 128, seed=43)
        assert np.array_equal(a.p, b.p)
        assert not np.array_equal(a.p, c.p)

    def test_random_roughness_budget(self):
        # amplitudes are scaled so sum eps_k (k^2 - 1) = roughness * a0,
        # keeping rho = a0 - sum eps_k (k^2 - 1) > 0 with margin
        st = build_initial(
            "fourier", {"a0": 2.0, "random": {"k_max": 6, "roughness": 0.7}}, 128, seed=1
        )
        spec = np.fft.rfft(st.p) / st.grid.n * 2.0
        ks = np.arange(2, 7)
        budget = sum(abs(spec[k]) * (k * k - 1) for k in ks)
        assert budget == pytest.approx(0.7 * 2.0, rel=1e-10)

    def test_nonconvex_fourier_rejected(self):
        with pytest.raises(NotConvex) as exc:
            build_initial("fourier", {"a0": 1.0, "modes": [[2, 0.5]]}, 128)
        assert exc.value.min_rho < 0.0

    @pytest.mark.parametrize(
        "kind,params",
        [
            ("circle", {"r": -1.0}),
            ("circle", {"r": 1.0, "x": 2}),
            ("ellipse", {"a": 0.0, "b": 1.0}),
            ("ellipse", {"a": 1.0}),
            ("fourier", {"a0": -1.0, "modes": []}),
            ("fourier", {"a0": 1.0, "modes": [[1, 0.1]]}),
            ("fourier", {"a0": 1.0, "modes": [[64, 0.1]]}),
            ("fourier", {"a0": 1.0, "modes": [[2, -0.1]]}),
            ("fourier", {"a0": 1.0, "modes": [[2]]}),
            ("fourier", {"a0": 1.0}),
            ("fourier", {"a0": 1.0, "modes": [], "random": {}}),
            ("fourier", {"a0": 1.0, "random": {"k_max": 1}}),
            ("fourier", {"a0": 1.0, "random": {"k_max": 4, "roughness": 1.5}}),
            ("square", {}),
        ],
    )
    def test_rejects_bad_specs(self, kind, params):
        with pytest.raises((InvalidParams, KeyError)):
            build_initial(kind, params, 128)

    def test_curve_id_is_stable(self):
        assert curve_id("ellipse", {"b": 1, "a": 2}) == "ellipse(a=2,b=1)"


class TestExperimentConfig:
    def base(self):
        return {
            "initial_curve": {"kind": "circle", "params": {"r": 1.0}},
            "speed": {"kind": "power", "params": [1.0]},
            "flow": {"n": 64, "t_max": 0.1},
        }

    def test_happy_path(self):
        cfg = ExperimentConfig.from_dict(self.base())
        assert cfg.curve_kind == "circle"
        assert cfg.speed_params == (1.0,)
        assert cfg.flow.n == 64
        assert cfg.enforce_conditions is True
        assert cfg.seed is None

    def test_missing_sections(self):
        with pytest.raises(InvalidParams):
            ExperimentConfig.from_dict({"speed": {"kind": "exp"}})
        with pytest.raises(InvalidParams):
            ExperimentConfig.from_dict({"initial_curve": {"kind": "circle"}})

    def test_unknown_top_level_key(self):
        d = self.base()
        d["solver"] = "rk4"
        with pytest.raises(InvalidParams):
            ExperimentConfig.from_dict(d)

    def test_bad_flow_key(self):
        d = self.base()
        d["flow"]["dt"] = 0.01
        with pytest.raises(InvalidParams):
            ExperimentConfig.from_dict(d)


def write_config(tmp_path, name="run.json", **over):
    cfg = {
        "initial_curve": {"kind": "fourier", "params": {"a0": 1.0, "modes": [[2, 0.05]]}},
        "speed": {"kind": "power", "params": [1.0]},
        "flow": {"n": 64, "t_max": 50.0},
    }
    cfg.update(over)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


class TestRunCommand:
    def test_converged_run_with_outputs(self, tmp_path, capsys):
        outputs = {
            "diagnostics_csv": str(tmp_path / "diag.csv"),
            "snapshots_json": str(tmp_path / "snaps.json"),
            "report_json": str(tmp_path / "report.json"),
        }
        cfg = write_config(tmp_path, outputs=outputs)
        code = main(["run", str(cfg)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "Converged" in out and "fourier" in out

        report = json.loads((tmp_path / "report.json").read_text())
        assert report["outcome"]["status"] == "Converged"
        assert report["final_kappa_deviation"] <= 1e-8
        assert report["violations"]["max_length_drift_rel"] < 1e-10
        assert report["decay_fit"] is not None
        assert report["decay_fit"]["fitted_rate"] >= report["decay_fit"]["theory_lower_rate"]
        assert report["protection"]["r0"] > 0.0
        verdicts = report["condition_report"]["verdicts"]
        assert all(v == "pass" for v in verdicts.values())
        assert report["n_records"] >= 2

        recs = read_diagnostics_csv(tmp_path / "diag.csv")
        assert len(recs) == report["n_records"]
        assert recs[0].t == 0.0
        assert recs[-1].grad_energy < recs[0].grad_energy

        first = (tmp_path / "diag.csv").read_text().splitlines()[0]
        assert first == ",".join(CSV_COLUMNS)

    def test_timed_out_run(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            initial_curve={"kind": "ellipse", "params": {"a": 2.0, "b": 1.0}},
            flow={"n": 64, "t_max": 0.05, "snapshot_every": 10},
            outputs={"snapshots_json": str(tmp_path / "s.json")},
        )
        assert main(["run", str(cfg)]) == EXIT_TIMEOUT
        assert "TimedOut" in capsys.readouterr().out
        snaps = json.loads((tmp_path / "s.json").read_text())["snapshots"]
        assert len(snaps) >= 2
        assert snaps[0]["t"] == 0.0
        assert all(len(s["p"]) == 64 for s in snaps)
        assert all(isinstance(v, float) for v in snaps[0]["p"])

    def test_missing_config_file(self, capsys):
        assert main(["run", "/nonexistent/cfg.json"]) == EXIT_CONFIG
        assert "error:" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["run", str(path)]) == EXIT_CONFIG
        assert "error:" in capsys.readouterr().err

    def test_unknown_speed_is_config_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, speed={"kind": "cubic", "params": []})
        assert main(["run", str(cfg)]) == EXIT_CONFIG
        assert "error:" in capsys.readouterr().err

    def test_nonconvex_initial_is_config_error(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            initial_curve={"kind": "fourier", "params": {"a0": 1.0, "modes": [[2, 0.5]]}},
        )
        assert main(["run", str(cfg)]) == EXIT_CONFIG
        assert "convex" in capsys.readouterr().err

    def test_inadmissible_speed_refused(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            speed={"kind": "neg_linear", "params": []},
            outputs={"report_json": str(tmp_path / "r.json")},
        )
        assert main(["run", str(cfg)]) == EXIT_FAILED
        assert "InadmissibleSpeed" in capsys.readouterr().out
        report = json.loads((tmp_path / "r.json").read_text())
        assert report["outcome"]["reason"] == "InadmissibleSpeed"
        assert report["step_count"] == 0
        assert math.isnan(report["final_kappa_deviation"])

    def test_unenforced_bad_speed_fails_at_runtime(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            speed={"kind": "neg_linear", "params": []},
            enforce_conditions=False,
            flow={"n": 64, "t_max": 1.0},
            outputs={"report_json": str(tmp_path / "r.json")},
        )
        assert main(["run", str(cfg)]) == EXIT_FAILED
        report = json.loads((tmp_path / "r.json").read_text())
        assert report["outcome"]["status"] == "Failed"
        assert report["outcome"]["reason"] in ("ConvexityLost", "NumericalBlowup")
        assert report["step_count"] > 0


class TestCheckSpeedCommand:
    def test_admissible_builtin(self, capsys):
        assert main(["check-speed", "builtin:power:1"]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert set(report["verdicts"]) == {"i", "ii", "iii"}
        assert all(v == "pass" for v in report["verdicts"].values())

    def test_hard_fail_exemplar(self, capsys):
        assert main(["check-speed", "neg_inverse"]) == EXIT_SPEED_FAIL
        report = json.loads(capsys.readouterr().out)
        assert report["verdicts"]["i"] == "pass"
        assert report["verdicts"]["ii"] == "fail"
        assert report["witnesses"]["ii"]

    def test_narrow_window_is_inconclusive(self, capsys):
        code = main(["check-speed", "exp", "--u-lo", "0.5", "--u-hi", "2", "--n-samples", "64"])
        assert code == EXIT_SPEED_INCONCLUSIVE
        verdicts = json.loads(capsys.readouterr().out)["verdicts"]
        assert "fail" not in verdicts.values()
        assert "inconclusive" in verdicts.values()

    def test_json_spec_file(self, tmp_path, capsys):
        spec = tmp_path / "speed.json"
        spec.write_text(json.dumps({"kind": "power", "params": [0.5], "u_range": [1e-4, 1e4], "n_samples": 129}))
        assert main(["check-speed", str(spec)]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["u_range"] == [1e-4, 1e4]
        assert len(report["samples"]) == 129

    def test_bad_spec(self, capsys):
        assert main(["check-speed", "warp:9"]) == EXIT_CONFIG


class TestSweepCommand:
    def sweep_cfg(self, tmp_path, out_name="out"):
        return {
            "initial_curves": [
                {"kind": "circle", "params": {"r": 1.0}},
                {"kind": "fourier", "params": {"a0": 1.0, "modes": [[3, 0.04, 0.5]]}},
            ],
            "speeds": [
                {"kind": "power", "params": [1.0]},
                {"kind": "neg_inverse", "params": []},
            ],
            "flow": {"n": 64, "t_max": 0.02},
            "outputs": {"dir": str(tmp_path / out_name)},
        }

    def run_sweep(self, tmp_path, cfg, name="sweep.json"):
        path = tmp_path / name
        path.write_text(json.dumps(cfg))
        return main(["sweep", str(path)])

    def test_grid_outputs(self, tmp_path, capsys):
        cfg = self.sweep_cfg(tmp_path)
        assert self.run_sweep(tmp_path, cfg) == EXIT_OK
        assert "4 cells" in capsys.readouterr().out
        out = tmp_path / "out"

        with open(out / "aggregate.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == list(AGGREGATE_COLUMNS)
        assert len(rows) == 5
        # ids with commas survive the csv layer
        assert rows[3][0] == "fourier(a0=1.0,modes=[[3, 0.04, 0.5]])"
        by_key = {(r[0], r[1]): r for r in rows[1:]}
        circle_row = by_key[("circle(r=1.0)", "power(alpha=1)")]
        # the circle is already steady: it converges immediately
        assert circle_row[2] == "Converged"
        assert float(circle_row[3]) < 1e-10
        bad = [r for r in rows[1:] if r[1] == "neg_inverse"]
        assert all(r[2] == "Failed:InadmissibleSpeed" for r in bad)
        assert all(math.isnan(float(r[4])) for r in bad)

        for i in range(2):
            for j in range(2):
                cell = json.loads((out / f"cell_{i:03d}_{j:03d}_report.json").read_text())
                assert "outcome" in cell and "condition_report" in cell

    def test_thread_count_does_not_change_bytes(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CURVEFLOW_THREADS", "1")
        self.run_sweep(tmp_path, self.sweep_cfg(tmp_path, "serial"), "s1.json")
        monkeypatch.setenv("CURVEFLOW_THREADS", "4")
        self.run_sweep(tmp_path, self.sweep_cfg(tmp_path, "pooled"), "s4.json")
        a = (tmp_path / "serial" / "aggregate.csv").read_bytes()
        b = (tmp_path / "pooled" / "aggregate.csv").read_bytes()
        assert a == b

    def test_empty_grid(self, tmp_path, capsys):
        cfg = self.sweep_cfg(tmp_path)
        cfg["speeds"] = []
        assert self.run_sweep(tmp_path, cfg) == EXIT_CONFIG
        assert "empty" in capsys.readouterr().err

    def test_garbage_thread_env(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("CURVEFLOW_THREADS", "many")
        assert self.run_sweep(tmp_path, self.sweep_cfg(tmp_path)) == EXIT_CONFIG
        assert "CURVEFLOW_THREADS" in capsys.readouterr().err

    def test_worker_clamping(self, monkeypatch):
        monkeypatch.setenv("CURVEFLOW_THREADS", "3")
        assert sweep_workers(10) == 3
        assert sweep_workers(2) == 2
        monkeypatch.setenv("CURVEFLOW_THREADS", "0")
        assert sweep_workers(10) == 1
        monkeypatch.delenv("CURVEFLOW_THREADS")
        assert 1 <= sweep_workers(10) <= 10


class TestOracleCommand:
    def get_json(self, capsys):
        return json.loads(capsys.readouterr().out)

    def test_linearized_rate(self, capsys):
        code = main(["oracle", "linearized_rate", "--speed", "power:1", "--length", str(TWO_PI)])
        assert code == EXIT_OK
        out = self.get_json(capsys)
        assert out["kappa_bar"] == pytest.approx(1.0, rel=1e-14)
        assert out["theory_lower_rate"] == pytest.approx(1.0, rel=1e-14)
        assert out["linearized_rate"] == pytest.approx(3.0, rel=1e-14)

    def test_quadrature_lambda(self, capsys):
        code = main(["oracle", "quadrature", "--target", "lambda", "--speed", "power:1"])
        assert code == EXIT_OK
        assert self.get_json(capsys)["value"] == pytest.approx(LAMBDA_COS2, rel=1e-12)

    def test_quadrature_perimeter(self, capsys):
        code = main(["oracle", "quadrature", "--target", "perimeter", "--ellipse", "2,1"])
        assert code == EXIT_OK
        assert self.get_json(capsys)["value"] == pytest.approx(ELLIPSE21_PERIMETER, rel=1e-12)

    def test_quadrature_area(self, capsys):
        code = main(["oracle", "quadrature", "--target", "area", "--ellipse", "2,1"])
        assert code == EXIT_OK
        assert self.get_json(capsys)["value"] == pytest.approx(TWO_PI, rel=1e-9)

    def test_missing_speed(self, capsys):
        assert main(["oracle", "quadrature", "--target", "lambda"]) == EXIT_CONFIG
        assert "error" in capsys.readouterr().err

    def test_bad_amplitude(self, capsys):
        code = main(
            ["oracle", "quadrature", "--target", "lambda", "--speed", "exp", "--cos2-amplitude", "1.5"]
        )
        assert code == EXIT_CONFIG

    def test_unknown_target_rejected_by_parser(self):
        with pytest.raises(SystemExit) as exc:
            main(["oracle", "quadrature", "--target", "volume"])
        assert exc.value.code == 2


class TestTopLevel:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "curveflow 0.1.0" in capsys.readouterr().out

    def test_no_command_prints_help(self, capsys):
        assert main([]) == EXIT_CONFIG
        assert "usage" in capsys.readouterr().out.lower()
