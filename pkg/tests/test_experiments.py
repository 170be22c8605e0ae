import json
import math

import pytest

from metriclab.config import Config
from metriclab.errors import ConfigError, SamplingError, ZeroSetError
from metriclab.experiments import REGISTRY, build_config, list_experiments, parse_config, run_experiment
from metriclab.experiments.base import Experiment, Report, RunContext
from metriclab.utils.reports import report_json, row_fields, samples_csv

NAMES = [
    "ball-curvature",
    "chain-annulus",
    "coincidence-scan",
    "curvature-threshold",
    "hermitian-fit",
    "invariance-suite",
    "lu-scan",
    "rep-isometry",
    "rigidity-gap",
]


def _run(**data):
    return run_experiment(build_config(data))


def _verdict(report, name):
    return next(v for v in report.verdicts if v.name == name)


# =====================================================
# REGISTRY AND CONFIG
# =====================================================
def test_registry_lists_every_experiment():
    rows = list_experiments()
    assert [r["name"] for r in rows] == NAMES
    assert all(r["anchor"] and r["spec"] for r in rows)


def test_defaults_are_merged():
    config = build_config({"experiment": "chain-annulus", "grid": {"count": 3}})
    assert config.spec == "annulus:0.3"
    assert config.grid == {"count": 3, "seed": 6, "min_norm": 0.35, "max_norm": 0.95}
    assert config.degree_cap == 400
    assert config.boundary_strip == pytest.approx(0.15 * 0.35)


def test_overrides_win_over_file_values():
    config = build_config({"experiment": "lu-scan", "degree_cap": 12}, degree_cap=16)
    assert config.degree_cap == 16


def test_config_round_trips_through_dict():
    config = build_config({"experiment": "hermitian-fit", "tolerances": {"fit": 1e-6}})
    assert build_config(config.as_dict()) == config


@pytest.mark.parametrize("data", [
    {"experiment": "nope"},
    {"experiment": "lu-scan", "colour": "blue"},
    {"experiment": "lu-scan", "spec": "annulus:1.5"},
    {"experiment": "lu-scan", "degree_cap": 1},
    {"experiment": "lu-scan", "degree_cap": 2.5},
    {"experiment": "lu-scan", "grid": {"count": 0}},
    {"experiment": "lu-scan", "grid": {"count": 4, "spacing": 2}},
    {"experiment": "lu-scan", "fan": {"seed": -1}},
    {"experiment": "lu-scan", "tolerances": {"speed": 1.0}},
    {"experiment": "lu-scan", "tolerances": {"lu": -1.0}},
    {"experiment": "lu-scan", "params": {"unknown": 1}},
    {"experiment": "lu-scan", "boundary_strip": 0},
    {"experiment": "lu-scan", "solver": {"degree": 0}},
])
def test_bad_configs_are_rejected(data):
    with pytest.raises(ConfigError):
        build_config(data)


def test_parse_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        parse_config(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"experiment": "ball-curvature", "grid": {"count": 2}}), encoding="utf-8")
    assert parse_config(good).grid["count"] == 2


# =====================================================
# EXPERIMENT RUNS
# =====================================================
def test_ball_curvature_passes():
    report = _run(experiment="ball-curvature", degree_cap=20,
                  grid={"count": 3, "max_norm": 0.4}, fan={"count": 4})
    assert report.passed
    assert len(report.rows) == 3
    assert report.summary["threshold"] == pytest.approx(-2 / 3)
    assert _verdict(report, "hsc-equals-ball-value").kind == "required"


def test_ball_curvature_fails_at_low_degree_cap():
    report = _run(experiment="ball-curvature", degree_cap=4,
                  grid={"count": 2, "max_norm": 0.4}, fan={"count": 4}, tolerances={"hsc": 1e-6})
    assert not report.passed
    assert report.failed == ["hsc-equals-ball-value"]


def test_rep_isometry_on_ball():
    report = _run(experiment="rep-isometry", degree_cap=30, grid={"count": 3, "max_norm": 0.4})
    assert report.passed
    assert {v.name for v in report.verdicts} == {
        "potential-identity", "pullback-identity", "image-in-weighted-ball",
        "curvature-constant", "implied-dimension", "identity-map",
    }
    assert report.summary["curvature_constant"] == pytest.approx(2 / 3, abs=1e-3)
    assert report.summary["identity_defect"] < 1e-6


def test_rep_isometry_on_disc():
    report = _run(experiment="rep-isometry", spec="disc", degree_cap=60, grid={"count": 3, "max_norm": 0.4})
    assert report.passed
    assert report.summary["curvature_constant"] == pytest.approx(1.0, abs=1e-3)
    assert round(report.summary["implied_dimension"]) == 1
    assert _verdict(report, "identity-map").passed


def test_rep_isometry_polydisc_control():
    report = _run(experiment="rep-isometry", spec="polydisc:2", degree_cap=30,
                  grid={"count": 3, "min_norm": 0.4, "max_norm": 0.6})
    assert {v.name for v in report.verdicts} == {"pullback-identity-breaks"}
    control = _verdict(report, "pullback-identity-breaks")
    assert control.kind == "expected-fail"
    assert control.passed
    assert report.summary["pullback_residual"] > 1e-2


def test_lu_scan_on_ball_and_polydisc():
    ball = _run(experiment="lu-scan", spec="ball:2", degree_cap=20,
                grid={"count": 3, "max_norm": 0.4}, fan={"count": 4})
    assert ball.passed
    assert ball.summary["lu_estimate"] == pytest.approx(1 / math.sqrt(3), abs=1e-6)

    poly = _run(experiment="lu-scan", degree_cap=20, grid={"count": 3, "max_norm": 0.4}, fan={"count": 4})
    assert poly.passed
    assert poly.summary["lu_estimate"] == pytest.approx(1 / math.sqrt(2), abs=1e-9)
    assert poly.summary["polydisc_discrepancy"]["quoted"] == pytest.approx(2.0)
    assert len(poly.rows) == 12


def test_lu_scan_on_ball_by_optimization():
    report = _run(experiment="lu-scan", spec="ball:2", degree_cap=20, grid={"count": 2, "max_norm": 0.4},
                  fan={"count": 2}, solver={"degree": 2, "samples": 256}, params={"exact": False},
                  tolerances={"defect": 2e-2})
    assert report.passed
    assert _verdict(report, "lu-matches-model").tolerance == pytest.approx(1e-2)
    assert 1 / math.sqrt(3) - 1e-2 <= report.summary["lu_estimate"] <= 1 / math.sqrt(3) + 1e-6


def test_hermitian_fit_ball_and_polydisc_control():
    ball = _run(experiment="hermitian-fit", grid={"count": 2, "max_norm": 0.5}, fan={"count": 16})
    assert ball.passed
    assert ball.summary["kahler_residual"] < 1e-4

    poly = _run(experiment="hermitian-fit", spec="polydisc:2", grid={"count": 2, "max_norm": 0.5},
                fan={"count": 16}, params={"kahler": False})
    control = _verdict(poly, "hermitian-fit-fails")
    assert control.kind == "expected-fail"
    assert control.passed


def test_coincidence_scan_on_ball():
    report = _run(experiment="coincidence-scan", spec="ball:2", fan={"count": 8}, params={"point": [0.9, 0]})
    assert report.passed
    assert report.summary["fraction_coincident"] == pytest.approx(1.0)
    assert report.summary["tangential_fraction"] == pytest.approx(1 / 8)


def test_coincidence_scan_on_ellipsoid_near_boundary():
    report = _run(experiment="coincidence-scan", fan={"count": 3})
    assert report.passed
    assert _verdict(report, "coincidence-observed").kind == "required"
    assert report.summary["fraction_coincident"] > 0.0


def test_curvature_threshold_on_disc_strip():
    report = _run(experiment="curvature-threshold", spec="disc", degree_cap=400,
                  grid={"count": 2}, fan={"count": 2})
    verdict = _verdict(report, "min-hsc-below-lu-threshold")
    assert verdict.kind == "conditional"
    assert verdict.passed
    assert report.summary["lu_estimate"] == pytest.approx(1 / math.sqrt(2))


def test_rigidity_gap_on_disc():
    report = _run(experiment="rigidity-gap", spec="disc", degree_cap=60,
                  grid={"count": 2, "min_norm": 0.1, "max_norm": 0.5}, tolerances={"disc": 1e-3, "covariance": 1e-5})
    assert report.passed
    assert {v.name for v in report.verdicts} == {"gap-vanishes-on-disc", "gap-scales-inverse-square"}


def test_chain_annulus_rows_have_chain_columns():
    report = _run(experiment="chain-annulus", degree_cap=80,
                  grid={"count": 2, "min_norm": 0.5, "max_norm": 0.7})
    assert row_fields(report.rows) == [
        "index", "z0_re", "z0_im", "half_B", "lambda_sq", "cbeta_sq", "cB_sq",
        "margin1", "margin2", "margin3", "hsc", "residuals", "error",
    ]
    assert _verdict(report, "chain-ordering").passed


def test_chain_annulus_default_run():
    report = _run(experiment="chain-annulus")
    assert len(report.rows) == 40
    assert report.diagnostics.get("failed_rows", 0) == 0
    assert _verdict(report, "chain-ordering").passed
    assert _verdict(report, "poincare-above-log-capacity").passed


def test_invariance_suite_passes_on_ball():
    report = _run(experiment="invariance-suite")
    assert report.passed
    assert set(report.summary) >= {
        "hsc-rotation", "hsc-unitary", "hsc-dilation", "bergman-dilation", "carath-homogeneity",
        "kobayashi-homogeneity", "bergman-homogeneity", "bergman-oracle", "bracket",
    }


def test_invariance_suite_on_annulus_checks_capacity():
    report = _run(experiment="invariance-suite", spec="annulus:0.5", degree_cap=40,
                  grid={"count": 2, "min_norm": 0.6, "max_norm": 0.9})
    assert _verdict(report, "capacity-rotation").passed
    assert _verdict(report, "hsc-rotation").passed
    assert _verdict(report, "hsc-dilation").passed
    assert _verdict(report, "bergman-dilation").passed
    assert _verdict(report, "kobayashi-homogeneity").passed
    assert "hsc-unitary" not in report.summary


def test_sampling_failure_escapes_as_numerical_error():
    with pytest.raises(SamplingError):
        _run(experiment="ball-curvature", degree_cap=4, grid={"count": 3, "min_norm": 0.999999})


# =====================================================
# ROW ISOLATION AND REPORTS
# =====================================================
def _flaky_rows(ctx: RunContext):
    def row(i):
        if i == 1:
            raise ZeroSetError("kernel vanishes")
        return {"value": float(i)}

    ctx.report.rows = [ctx.isolated(row, i, i) for i in range(3)]
    ctx.verdict("values-present", True, tolerance=0.0)


def test_failed_rows_are_isolated(monkeypatch):
    monkeypatch.setitem(
        REGISTRY,
        "flaky",
        Experiment("flaky", "rows", {"spec": "disc", "degree_cap": 4, "grid": {"count": 3}}, _flaky_rows),
    )
    report = run_experiment(build_config({"experiment": "flaky"}))
    assert [r["error"] for r in report.rows] == ["", "ZeroSetError: kernel vanishes", ""]
    assert report.diagnostics["failed_rows"] == 1
    assert report.failed == ["rows-evaluated"]
    csv_text = samples_csv(report.rows)
    assert csv_text.splitlines()[0] == "index,value,error"
    assert csv_text.splitlines()[2] == "1,,ZeroSetError: kernel vanishes"


def test_report_json_is_deterministic():
    config = build_config({"experiment": "ball-curvature", "degree_cap": 10,
                           "grid": {"count": 2, "max_norm": 0.3}, "fan": {"count": 2}})
    first = report_json(run_experiment(config))
    second = report_json(run_experiment(config))
    assert first == second
    assert "wall_clock_seconds" not in json.loads(first)


def test_report_timing_is_opt_in(monkeypatch):
    monkeypatch.setenv("METRICLAB_REPORT_TIMING", "1")
    Config.reload()
    report = _run(experiment="ball-curvature", degree_cap=10, grid={"count": 1, "max_norm": 0.3}, fan={"count": 2})
    assert "wall_clock_seconds" in json.loads(report_json(report))


def test_empty_rows_give_header_only_csv():
    assert samples_csv([]) == "index\n"


def test_non_finite_values_are_strings_in_json():
    config = build_config({"experiment": "ball-curvature"})
    report = Report(config, rows=[{"index": 0, "value": math.nan}], summary={"worst": math.inf})
    payload = json.loads(report_json(report))
    assert payload["rows"][0]["value"] == "nan"
    assert payload["summary"]["worst"] == "inf"
