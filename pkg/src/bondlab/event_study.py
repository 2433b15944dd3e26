"""Alignment of daily sentiment with bond returns: smoothed correlations
and next-day directional accuracy against a coin-flip baseline.
"""
from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .calendar import TradingCalendar
from .errors import DegenerateSeriesError, InsufficientDataError, MissingInputError, SchemaError
from .market_data import DailyBar
from .sentiment import DailySentimentSeries
from .stats import exact_binomial_pvalue, pearson

logger = logging.getLogger(__name__)

GRID_CSV_HEADER = ["topic", "instrument", "model", "r", "n", "reason"]
ACCURACY_CSV_HEADER = ["topic", "model", "accuracy", "n_events", "p_value"]

MIN_CORRELATION_POINTS = 3

REASON_INSUFFICIENT = "insufficient_points"
REASON_ZERO_VARIANCE = "zero_variance"


@dataclass(frozen=True)
class AlignedPair:
    """One trading date joining sentiment with the instrument's returns.

    ``return_next`` is None on the final bar of the instrument series,
    which excludes the pair from next-day analyses.
    """

    date: dt.date
    sentiment: float
    return_same: float
    return_next: float | None
    shock_sign: int


@dataclass(frozen=True)
class CorrelationCell:
    """Pearson r over smoothed series, or absent with a reason code."""

    r: float | None
    n: int
    reason: str | None = None


@dataclass(frozen=True)
class GridRow:
    topic: str
    instrument: str
    model: str
    cell: CorrelationCell


@dataclass(frozen=True)
class DirectionalAccuracy:
    accuracy: float
    n_events: int
    p_value: float
    n_excluded: int


@dataclass(frozen=True)
class AccuracyRow:
    topic: str
    model: str
    result: DirectionalAccuracy


def align(
    series: DailySentimentSeries,
    bars: Sequence[DailyBar],
    calendar: TradingCalendar,
) -> list[AlignedPair]:
    """Inner-join a sentiment series with one instrument's daily bars.

    Only dates carrying a same-day return participate (an instrument's
    first bar has no return and is skipped).  ``return_next`` comes from
    the instrument's next bar, not the next calendar day, so gap days do
    not drop events.
    """
    if not series.points or not bars:
        raise InsufficientDataError("align requires nonempty sentiment and bar series")
    bar_dates = [bar.date for bar in bars]
    for a, b in zip(bar_dates, bar_dates[1:]):
        if b <= a:
            raise SchemaError("bars must be strictly increasing in date")
    return_by_date = {bar.date: bar.log_return for bar in bars}
    next_return: dict[dt.date, float | None] = {}
    for current, nxt in zip(bars, bars[1:]):
        next_return[current.date] = nxt.log_return
    next_return[bars[-1].date] = None

    pairs: list[AlignedPair] = []
    for point, flag in zip(series.points, series.shock_flags):
        same = return_by_date.get(point.date)
        if same is None:
            continue
        if point.date not in calendar:
            raise SchemaError(f"joined date {point.date} outside the trading calendar")
        pairs.append(AlignedPair(
            date=point.date,
            sentiment=point.score,
            return_same=same,
            return_next=next_return.get(point.date),
            shock_sign=flag,
        ))
    if not pairs:
        raise InsufficientDataError(
            "no overlapping dates: sentiment spans "
            f"{series.points[0].date}..{series.points[-1].date}, bars span "
            f"{bar_dates[0]}..{bar_dates[-1]}"
        )
    return pairs


def _trailing_means(values: Sequence[float], window: int) -> list[float | None]:
    """Trailing rolling mean; None until a full window is available."""
    out: list[float | None] = []
    for i in range(len(values)):
        if i < window - 1:
            out.append(None)
        else:
            out.append(math.fsum(values[i - window + 1: i + 1]) / window)
    return out


def rolling_correlation(
    pairs: Sequence[AlignedPair],
    window_days: int = 7,
    shocks_only: bool = False,
) -> CorrelationCell:
    """Correlate trailing-mean-smoothed sentiment with smoothed same-day
    returns.

    Both series are smoothed with a ``window_days`` trading-day trailing
    mean before the Pearson computation; the first ``window_days - 1``
    dates have no full window and are dropped.  With ``shocks_only`` the
    correlation is restricted to flagged dates.  Fewer than three usable
    points, or zero variance in either smoothed series, yields an absent
    cell with a reason code rather than an error.
    """
    if window_days < 2:
        raise ValueError(f"window_days must be >= 2, got {window_days}")
    sentiment = _trailing_means([p.sentiment for p in pairs], window_days)
    returns = _trailing_means([p.return_same for p in pairs], window_days)
    xs: list[float] = []
    ys: list[float] = []
    for pair, s, r in zip(pairs, sentiment, returns):
        if s is None or r is None:
            continue
        if shocks_only and pair.shock_sign == 0:
            continue
        xs.append(s)
        ys.append(r)
    if len(xs) < MIN_CORRELATION_POINTS:
        return CorrelationCell(r=None, n=len(xs), reason=REASON_INSUFFICIENT)
    try:
        return CorrelationCell(r=pearson(xs, ys), n=len(xs))
    except DegenerateSeriesError:
        return CorrelationCell(r=None, n=len(xs), reason=REASON_ZERO_VARIANCE)


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def directional_accuracy(
    pairs: Sequence[AlignedPair],
    shocks_only: bool = True,
) -> DirectionalAccuracy:
    """Fraction of events where the sentiment sign called the next-day
    return direction, with an exact two-sided binomial p-value vs 0.5.

    Events with a missing next-day return, a zero return, or zero
    sentiment are excluded and counted, so
    ``n_events + n_excluded == total candidate events``.
    """
    candidates = [p for p in pairs if not shocks_only or p.shock_sign != 0]
    used = [
        p for p in candidates
        if p.return_next is not None and p.return_next != 0.0 and p.sentiment != 0.0
    ]
    excluded = len(candidates) - len(used)
    if not used:
        raise InsufficientDataError(
            f"no usable events ({len(candidates)} candidates, all excluded)"
        )
    correct = sum(1 for p in used if _sign(p.sentiment) == _sign(p.return_next))
    return DirectionalAccuracy(
        accuracy=correct / len(used),
        n_events=len(used),
        p_value=exact_binomial_pvalue(correct, len(used)),
        n_excluded=excluded,
    )


# ---------------------------------------------------------------------------
# Table builders over many (model, topic, instrument) combinations
# ---------------------------------------------------------------------------

def correlation_grid(
    series_list: Sequence[DailySentimentSeries],
    bars_map: Mapping[str, Sequence[DailyBar]],
    calendar: TradingCalendar,
    *,
    window_days: int = 7,
    shocks_only: bool = True,
) -> list[GridRow]:
    """One grid row per (sentiment series, instrument) combination."""
    rows: list[GridRow] = []
    for series in series_list:
        for instrument_id in sorted(bars_map):
            try:
                pairs = align(series, bars_map[instrument_id], calendar)
            except InsufficientDataError as exc:
                logger.warning("skipping %s/%s on %s: %s", series.model_id,
                               series.topic, instrument_id, exc)
                cell = CorrelationCell(r=None, n=0, reason=REASON_INSUFFICIENT)
                rows.append(GridRow(series.topic, instrument_id,
                                    series.model_id, cell))
                continue
            cell = rolling_correlation(pairs, window_days=window_days,
                                       shocks_only=shocks_only)
            rows.append(GridRow(series.topic, instrument_id, series.model_id, cell))
    return rows


def accuracy_table(
    series_list: Sequence[DailySentimentSeries],
    bars_map: Mapping[str, Sequence[DailyBar]],
    calendar: TradingCalendar,
    *,
    shocks_only: bool = True,
) -> list[AccuracyRow]:
    """Directional accuracy per (model, topic), events pooled across
    instruments.

    Combinations with zero usable events are skipped with a warning rather
    than failing the whole table.
    """
    rows: list[AccuracyRow] = []
    for series in series_list:
        pooled: list[AlignedPair] = []
        for instrument_id in sorted(bars_map):
            try:
                pooled.extend(align(series, bars_map[instrument_id], calendar))
            except InsufficientDataError:
                continue
        try:
            result = directional_accuracy(pooled, shocks_only=shocks_only)
        except InsufficientDataError as exc:
            logger.warning("no accuracy row for %s/%s: %s",
                           series.model_id, series.topic, exc)
            continue
        rows.append(AccuracyRow(series.topic, series.model_id, result))
    return rows


def write_grid_csv(rows: Sequence[GridRow], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ordered = sorted(rows, key=lambda r: (r.topic, r.instrument, r.model))
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GRID_CSV_HEADER)
        for row in ordered:
            writer.writerow([
                row.topic, row.instrument, row.model,
                "" if row.cell.r is None else repr(row.cell.r),
                row.cell.n,
                row.cell.reason or "",
            ])


def read_grid_csv(path: str | Path) -> list[GridRow]:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"grid file not found: {path}")
    rows = []
    with path.open(newline="") as fh:
        for record in csv.DictReader(fh):
            rows.append(GridRow(
                topic=record["topic"],
                instrument=record["instrument"],
                model=record["model"],
                cell=CorrelationCell(
                    r=float(record["r"]) if record["r"] else None,
                    n=int(record["n"]),
                    reason=record.get("reason") or None,
                ),
            ))
    return rows


def write_accuracy_csv(rows: Sequence[AccuracyRow], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ordered = sorted(rows, key=lambda r: (r.topic, r.model))
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ACCURACY_CSV_HEADER)
        for row in ordered:
            writer.writerow([
                row.topic, row.model,
                repr(row.result.accuracy),
                row.result.n_events,
                repr(row.result.p_value),
            ])


def read_accuracy_csv(path: str | Path) -> list[AccuracyRow]:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"accuracy file not found: {path}")
    rows = []
    with path.open(newline="") as fh:
        for record in csv.DictReader(fh):
            rows.append(AccuracyRow(
                topic=record["topic"],
                model=record["model"],
                result=DirectionalAccuracy(
                    accuracy=float(record["accuracy"]),
                    n_events=int(record["n_events"]),
                    p_value=float(record["p_value"]),
                    n_excluded=0,
                ),
            ))
    return rows
