from pathlib import Path

import numpy as np
from sqlalchemy import select, update
from sqlalchemy.orm import Session

from metriclab import cache
from metriclab.config import Config
from metriclab.domains import parse_spec
from metriclab.models import KernelSeriesRecord


def _records():
    with Session(cache._engine()) as session:
        return session.scalars(select(KernelSeriesRecord)).all()


def test_series_is_stored_once():
    spec = parse_spec("ball:2")
    first = cache.get_or_build(spec, 6)
    second = cache.get_or_build(spec, 6)
    np.testing.assert_array_equal(first.log_norm, second.log_norm)
    rows = _records()
    assert len(rows) == 1
    assert rows[0].spec_text == "ball:2"
    assert rows[0].degree_cap == 6


def test_degree_caps_are_separate_entries():
    spec = parse_spec("disc")
    cache.get_or_build(spec, 4)
    cache.get_or_build(spec, 8)
    assert sorted(r.degree_cap for r in _records()) == [4, 8]


def test_corrupt_entry_is_rebuilt():
    spec = parse_spec("annulus:0.5")
    good = cache.get_or_build(spec, 5)
    with Session(cache._engine()) as session:
        session.execute(update(KernelSeriesRecord).values(payload_json="{broken"))
        session.commit()
    rebuilt = cache.get_or_build(spec, 5)
    np.testing.assert_array_equal(rebuilt.exponents, good.exponents)
    rows = _records()
    assert len(rows) == 1
    assert rows[0].payload_json.startswith('{"spec":"annulus:0.5"')


def test_mismatched_entry_is_rebuilt():
    disc = parse_spec("disc")
    other = cache.get_or_build(parse_spec("ball:2"), 4).to_json()
    cache.get_or_build(disc, 4)
    with Session(cache._engine()) as session:
        session.execute(update(KernelSeriesRecord).where(KernelSeriesRecord.spec_text == "disc").values(payload_json=other))
        session.commit()
    assert cache.get_or_build(disc, 4).spec == disc


def test_clear_counts_rows():
    cache.get_or_build(parse_spec("disc"), 4)
    cache.get_or_build(parse_spec("disc"), 5)
    assert cache.clear() == 2
    assert cache.clear() == 0


def test_disabled_cache_never_touches_disk(monkeypatch):
    monkeypatch.setenv("METRICLAB_CACHE_ENABLED", "0")
    Config.reload()
    series = cache.get_or_build(parse_spec("disc"), 4)
    assert len(series) == 5
    assert not (Path(Config.CACHE_DIR) / cache.CACHE_FILE).exists()
