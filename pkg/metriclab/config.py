# metriclab/config.py
import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()


def _env_flag(name: str, default: bool = False) -> bool:
    raw = os.environ.get(name)
    if raw is None:
        return default
    return raw.strip().lower() in {"1", "true", "yes", "on"}


def _env_float(name: str, default: float) -> float:
    raw = (os.environ.get(name) or "").strip()
    if not raw:
        return default
    try:
        return float(raw)
    except ValueError:
        return float("nan")


def _env_int(name: str, default: int) -> int:
    raw = (os.environ.get(name) or "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        return -1


def _settings() -> dict:
    return {
        "APP_ENV": (os.environ.get("METRICLAB_ENV") or "development").strip().lower(),
        "CACHE_DIR": os.environ.get("METRICLAB_CACHE_DIR") or str(Path.home() / ".cache" / "metriclab"),
        "CACHE_ENABLED": _env_flag("METRICLAB_CACHE_ENABLED", default=True),
        "OUTPUT_DIR": os.environ.get("METRICLAB_OUTPUT_DIR", "reports"),
        "DEGREE_CAP": _env_int("METRICLAB_DEGREE_CAP", 14),
        "WORKERS": _env_int("METRICLAB_WORKERS", 1),
        "LOG_LEVEL": (os.environ.get("METRICLAB_LOG_LEVEL") or "INFO").strip().upper(),
        "REPORT_TIMING": _env_flag("METRICLAB_REPORT_TIMING", default=False),
        "QUAD_RELTOL": _env_float("METRICLAB_QUAD_RELTOL", 1e-10),
        "QUAD_ABSTOL": _env_float("METRICLAB_QUAD_ABSTOL", 1e-14),
        "SOLVER_MAXITER": _env_int("METRICLAB_SOLVER_MAXITER", 500),
        "SOLVER_FTOL": _env_float("METRICLAB_SOLVER_FTOL", 1e-12),
        "CERT_TOL": _env_float("METRICLAB_CERT_TOL", 1e-3),
        "CERT_MAX_CELLS": _env_int("METRICLAB_CERT_MAX_CELLS", 2_000_000),
        "GREEN_TRUNCATION": _env_int("METRICLAB_GREEN_TRUNCATION", 32),
        "GREEN_TOL": _env_float("METRICLAB_GREEN_TOL", 1e-10),
        "NEAR_BOUNDARY": _env_float("METRICLAB_NEAR_BOUNDARY", 0.2),
    }


class Config:
    APP_ENV: str
    CACHE_DIR: str
    CACHE_ENABLED: bool
    OUTPUT_DIR: str

    # Library default; experiments carry their own truncation.
    DEGREE_CAP: int
    WORKERS: int
    LOG_LEVEL: str
    REPORT_TIMING: bool

    QUAD_RELTOL: float
    QUAD_ABSTOL: float

    SOLVER_MAXITER: int
    SOLVER_FTOL: float
    # Relative slack the boundary certification aims for, and its cell budget.
    CERT_TOL: float
    CERT_MAX_CELLS: int

    GREEN_TRUNCATION: int
    GREEN_TOL: float

    # Fraction of the inradius under which a point counts as near the boundary.
    NEAR_BOUNDARY: float

    @classmethod
    def reload(cls):
        """Re-read the environment (tests and the CLI call this after changing it)."""
        for name, value in _settings().items():
            setattr(cls, name, value)
        return cls

    @classmethod
    def validate(cls):
        bad = []
        if cls.DEGREE_CAP < 2:
            bad.append("METRICLAB_DEGREE_CAP")
        if cls.WORKERS < 1:
            bad.append("METRICLAB_WORKERS")
        if cls.LOG_LEVEL not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            bad.append("METRICLAB_LOG_LEVEL")
        for name, value in (
            ("METRICLAB_QUAD_RELTOL", cls.QUAD_RELTOL),
            ("METRICLAB_QUAD_ABSTOL", cls.QUAD_ABSTOL),
            ("METRICLAB_SOLVER_FTOL", cls.SOLVER_FTOL),
            ("METRICLAB_GREEN_TOL", cls.GREEN_TOL),
        ):
            if not value > 0:
                bad.append(name)
        if cls.SOLVER_MAXITER < 1:
            bad.append("METRICLAB_SOLVER_MAXITER")
        if not 0 < cls.CERT_TOL < 1:
            bad.append("METRICLAB_CERT_TOL")
        if cls.CERT_MAX_CELLS < 1000:
            bad.append("METRICLAB_CERT_MAX_CELLS")
        if cls.GREEN_TRUNCATION < 4:
            bad.append("METRICLAB_GREEN_TRUNCATION")
        if not 0 < cls.NEAR_BOUNDARY <= 1:
            bad.append("METRICLAB_NEAR_BOUNDARY")
        if bad:
            bad_csv = ", ".join(bad)
            raise RuntimeError(f"Invalid metriclab environment variables: {bad_csv}")


Config.reload()
