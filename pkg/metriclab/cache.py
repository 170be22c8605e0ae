# metriclab/cache.py
"""SQLite-backed cache of kernel series keyed by (canonical spec, degree cap)."""
import json
import logging
from pathlib import Path

from sqlalchemy import create_engine, delete, select
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session

from .bergman import KernelSeries, build_kernel_series
from .config import Config
from .domains import DomainSpec
from .errors import MetricLabError
from .models import Base, KernelSeriesRecord

logger = logging.getLogger(__name__)

CACHE_FILE = "kernels.sqlite"

_engines: dict[str, Engine] = {}


def _engine() -> Engine:
    path = Path(Config.CACHE_DIR).expanduser() / CACHE_FILE
    key = str(path)
    engine = _engines.get(key)
    if engine is None:
        path.parent.mkdir(parents=True, exist_ok=True)
        engine = create_engine(f"sqlite:///{path}", future=True)
        Base.metadata.create_all(engine)
        _engines[key] = engine
    return engine


def get_or_build(spec: DomainSpec, degree_cap: int) -> KernelSeries:
    """Cached series if present and valid, otherwise build and store it."""
    if not Config.CACHE_ENABLED:
        return build_kernel_series(spec, degree_cap)

    key = spec.canonical
    with Session(_engine()) as session:
        record = session.scalars(
            select(KernelSeriesRecord).filter_by(spec_text=key, degree_cap=int(degree_cap))
        ).first()
        if record is not None:
            try:
                series = KernelSeries.from_json(record.payload_json)
                if series.spec == spec and series.degree_cap == int(degree_cap):
                    logger.debug("Kernel cache hit for %s D=%s", key, degree_cap)
                    return series
                logger.warning("Kernel cache entry for %s D=%s has a mismatched key; rebuilding", key, degree_cap)
            except (ValueError, KeyError, TypeError, json.JSONDecodeError, MetricLabError) as e:
                logger.warning("Corrupt kernel cache entry for %s D=%s (%s); rebuilding", key, degree_cap, e)
            session.delete(record)
            session.commit()

        logger.info("Kernel cache miss for %s D=%s", key, degree_cap)
        series = build_kernel_series(spec, degree_cap)
        session.add(KernelSeriesRecord(spec_text=key, degree_cap=int(degree_cap), payload_json=series.to_json()))
        session.commit()
        return series


def clear() -> int:
    """Delete every cached series; returns the number of rows removed."""
    with Session(_engine()) as session:
        removed = session.execute(delete(KernelSeriesRecord)).rowcount or 0
        session.commit()
    logger.info("Cleared %s cached kernel series from %s", removed, Config.CACHE_DIR)
    return int(removed)


def dispose():
    for engine in _engines.values():
        engine.dispose()
    _engines.clear()
