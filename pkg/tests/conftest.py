# tests/conftest.py
import pytest

from metriclab import cache
from metriclab.bergman import build_kernel_series
from metriclab.config import Config
from metriclab.domains import parse_spec


@pytest.fixture(autouse=True)
def isolated_env(tmp_path, monkeypatch):
    """Every test gets its own cache directory and output directory."""
    monkeypatch.setenv("METRICLAB_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setenv("METRICLAB_OUTPUT_DIR", str(tmp_path / "reports"))
    monkeypatch.delenv("METRICLAB_REPORT_TIMING", raising=False)
    monkeypatch.delenv("METRICLAB_WORKERS", raising=False)
    Config.reload()
    yield
    cache.dispose()
    monkeypatch.undo()
    Config.reload()


@pytest.fixture(scope="session")
def series_for():
    built = {}

    def get(text: str, degree_cap: int):
        key = (text, degree_cap)
        if key not in built:
            built[key] = build_kernel_series(parse_spec(text), degree_cap)
        return built[key]

    return get
