import json

from click.testing import CliRunner

from metriclab.commands import EXIT_ASSERTION, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PASS, cli

SMALL_BALL = {
    "experiment": "ball-curvature",
    "degree_cap": 12,
    "grid": {"count": 2, "max_norm": 0.3},
    "fan": {"count": 2},
}


def _write(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_run_writes_report_files(tmp_path):
    config = _write(tmp_path / "ball.json", SMALL_BALL)
    out = tmp_path / "out"
    result = CliRunner().invoke(cli, ["run", "ball-curvature", "--config", config, "--out", str(out)])
    assert result.exit_code == EXIT_PASS, result.output
    assert "All assertions passed." in result.output
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["tool"] == "metriclab"
    assert report["passed"] is True
    header = (out / "samples.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header.startswith("index,z0_re,z0_im")
    assert header.endswith(",error")
    assert not (out / "report.pdf").exists()


def test_run_defaults_to_configured_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("METRICLAB_OUTPUT_DIR", str(tmp_path / "reports"))
    config = _write(tmp_path / "ball.json", SMALL_BALL)
    result = CliRunner().invoke(cli, ["run", "ball-curvature", "--config", config])
    assert result.exit_code == EXIT_PASS, result.output
    assert (tmp_path / "reports" / "ball-curvature" / "report.json").exists()


def test_pdf_is_byte_identical_across_runs(tmp_path):
    config = _write(tmp_path / "ball.json", SMALL_BALL)
    runner = CliRunner()
    for name in ("a", "b"):
        result = runner.invoke(cli, ["run", "ball-curvature", "--config", config, "--out", str(tmp_path / name), "--pdf"])
        assert result.exit_code == EXIT_PASS, result.output
    first = (tmp_path / "a" / "report.pdf").read_bytes()
    assert first.startswith(b"%PDF")
    assert first == (tmp_path / "b" / "report.pdf").read_bytes()
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_seed_and_degree_cap_overrides(tmp_path):
    config = _write(tmp_path / "ball.json", SMALL_BALL)
    out = tmp_path / "out"
    result = CliRunner().invoke(
        cli, ["run", "ball-curvature", "--config", config, "--out", str(out), "--seed", "5", "--degree-cap", "16"]
    )
    assert result.exit_code == EXIT_PASS, result.output
    saved = json.loads((out / "report.json").read_text(encoding="utf-8"))["config"]
    assert saved["grid"]["seed"] == 5
    assert saved["fan"]["seed"] == 5
    assert saved["degree_cap"] == 16


def test_failed_assertion_exit_code(tmp_path):
    config = _write(tmp_path / "ball.json", {**SMALL_BALL, "degree_cap": 4, "grid": {"count": 2, "max_norm": 0.4},
                                             "tolerances": {"hsc": 1e-6}})
    result = CliRunner().invoke(cli, ["run", "ball-curvature", "--config", config, "--out", str(tmp_path / "out")])
    assert result.exit_code == EXIT_ASSERTION
    assert "hsc-equals-ball-value" in result.output
    assert (tmp_path / "out" / "report.json").exists()


def test_config_errors_exit_two(tmp_path):
    runner = CliRunner()
    assert runner.invoke(cli, ["run", "no-such-experiment"]).exit_code == EXIT_CONFIG

    bad = _write(tmp_path / "bad.json", {**SMALL_BALL, "spec": "annulus:1.5"})
    result = runner.invoke(cli, ["run", "ball-curvature", "--config", bad])
    assert result.exit_code == EXIT_CONFIG
    assert "Config error" in result.output

    other = _write(tmp_path / "other.json", {"experiment": "lu-scan"})
    assert runner.invoke(cli, ["run", "ball-curvature", "--config", other]).exit_code == EXIT_CONFIG

    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    assert runner.invoke(cli, ["run", "ball-curvature", "--config", str(broken)]).exit_code == EXIT_CONFIG


def test_point_outside_domain_is_a_config_error(tmp_path):
    config = _write(tmp_path / "scan.json", {"experiment": "coincidence-scan", "spec": "ball:2",
                                             "params": {"point": [1.5, 0]}})
    result = CliRunner().invoke(cli, ["run", "coincidence-scan", "--config", config, "--out", str(tmp_path / "o")])
    assert result.exit_code == EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path):
    config = _write(tmp_path / "ball.json", {**SMALL_BALL, "degree_cap": 4,
                                             "grid": {"count": 3, "min_norm": 0.999999}})
    result = CliRunner().invoke(cli, ["run", "ball-curvature", "--config", config, "--out", str(tmp_path / "out")])
    assert result.exit_code == EXIT_NUMERICAL
    assert "SamplingError" in result.output


def test_invalid_environment_exits_two():
    result = CliRunner().invoke(cli, ["list"], env={"METRICLAB_WORKERS": "0"})
    assert result.exit_code == EXIT_CONFIG
    assert "METRICLAB_WORKERS" in result.output


def test_list_commands():
    runner = CliRunner()
    plain = runner.invoke(cli, ["list"])
    assert plain.exit_code == 0
    assert "chain-annulus" in plain.output
    rows = json.loads(runner.invoke(cli, ["list", "--json"]).output)
    assert len(rows) == 9
    assert {"name", "anchor", "spec", "summary"} <= set(rows[0])


def test_cache_clear_command(tmp_path):
    runner = CliRunner()
    config = _write(tmp_path / "ball.json", SMALL_BALL)
    runner.invoke(cli, ["run", "ball-curvature", "--config", config, "--out", str(tmp_path / "out")])
    result = runner.invoke(cli, ["cache", "clear"])
    assert result.exit_code == 0
    assert result.output.startswith("Removed 1 cached series")
    assert runner.invoke(cli, ["cache", "clear"]).output.startswith("Removed 0 cached series")
