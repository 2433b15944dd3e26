"""Shared test fixtures and the acceptance summary hook."""

from __future__ import annotations

import datetime as dt
import math
import pathlib
import sys

import numpy as np
import pytest

SRC = pathlib.Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from bondlab.calendar import TradingCalendar, weekday_calendar
from bondlab.market_data import DailyBar
from bondlab.sentiment import DailyPoint, DailySentimentSeries

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> pathlib.Path:
    return FIXTURES


@pytest.fixture()
def calendar_2023() -> TradingCalendar:
    return weekday_calendar(dt.date(2023, 1, 2), dt.date(2023, 12, 29))


def make_bars(
    prices,
    instrument_id: str = "UKT10Y",
    start: dt.date = dt.date(2023, 1, 2),
    trade_count: int = 10,
) -> list[DailyBar]:
    """Bars on consecutive weekdays with log returns prefilled."""
    cal = weekday_calendar(start, start + dt.timedelta(days=int(len(prices) * 7 / 5) + 14))
    days = cal.days[: len(prices)]
    bars = []
    for i, (day, price) in enumerate(zip(days, prices)):
        ret = None if i == 0 else math.log(prices[i] / prices[i - 1])
        bars.append(DailyBar(instrument_id, day, float(price), ret, trade_count))
    return bars


def make_series(
    scores,
    model_id: str = "m",
    topic=None,
    start: dt.date = dt.date(2023, 1, 2),
    article_count: int = 1,
) -> DailySentimentSeries:
    cal = weekday_calendar(start, start + dt.timedelta(days=int(len(scores) * 7 / 5) + 14))
    days = cal.days[: len(scores)]
    points = [DailyPoint(day, float(s), article_count) for day, s in zip(days, scores)]
    return DailySentimentSeries(model_id=model_id, topic=topic, points=points)


def rng_scores(n: int, seed: int = 0) -> np.ndarray:
    return np.clip(np.random.default_rng(seed).normal(0.0, 0.4, n), -0.98, 0.98)


# --- acceptance summary -----------------------------------------------------
# test_acceptance.py holds one test per top-level guarantee; print a stable
# one-line verdict for each after the run so the result is readable without
# scrolling the full -v listing.

_ACCEPTANCE_PREFIX = "tests/test_acceptance.py::"
_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    nodeid = report.nodeid.replace("\\", "/")
    if _ACCEPTANCE_PREFIX not in nodeid:
        return
    name = nodeid.split("::", 1)[1]
    if report.when == "call":
        _acceptance_results[name] = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and (report.failed or report.skipped):
        _acceptance_results[name] = "SKIP" if report.skipped else "ERROR"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance summary")
    for name, verdict in _acceptance_results.items():
        terminalreporter.write_line(f"{verdict}: {name}")
