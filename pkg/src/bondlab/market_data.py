"""Bond trade ingestion, daily percent-of-par bars, and liquidity filtering.

Trade CSV schema: header ``instrument_id,timestamp,price,volume`` with RFC 3339
timestamps and an optional (possibly empty) volume column.  Daily bars export
as ``instrument_id,date,price,log_return,trade_count`` with log_return empty
on each instrument's first bar.
"""
from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .calendar import TradingCalendar
from .errors import DataQualityError, MissingInputError

logger = logging.getLogger(__name__)

TRADE_HEADER = ["instrument_id", "timestamp", "price", "volume"]
BAR_HEADER = ["instrument_id", "date", "price", "log_return", "trade_count"]

# Fatal-ingest threshold: more than this fraction of data rows malformed.
MALFORMED_FRACTION_LIMIT = 0.10


@dataclass(frozen=True)
class TradeRecord:
    """One bond trade: percent-of-par price at a UTC timestamp."""

    instrument_id: str
    timestamp: dt.datetime
    price: float
    volume: float | None = None


@dataclass(frozen=True)
class DailyBar:
    """Per-(instrument, trading day) aggregate price and log return."""

    instrument_id: str
    date: dt.date
    price: float
    log_return: float | None
    trade_count: int


@dataclass
class IngestResult:
    """Parsed trades plus per-row diagnostics for everything rejected."""

    records: list[TradeRecord]
    malformed: list[tuple[int, str]]  # (file line number, reason)
    total_rows: int

    @property
    def malformed_fraction(self) -> float:
        return len(self.malformed) / self.total_rows if self.total_rows else 0.0


def _parse_timestamp(raw: str) -> dt.datetime | None:
    try:
        ts = dt.datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        return None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=dt.timezone.utc)
    return ts.astimezone(dt.timezone.utc)


def ingest_trades(source: str | Path, calendar: TradingCalendar) -> IngestResult:
    """Read a trade CSV, validating every row against the record invariants.

    Malformed rows (bad timestamp, nonpositive price, negative volume, empty
    instrument id, or a date past the calendar end) are counted and reported,
    never silently dropped.  Raises ``MissingInputError`` for an unreadable
    file and ``DataQualityError`` when more than 10% of rows are malformed or
    no valid row remains.  Records come back sorted by
    (instrument_id, timestamp).
    """
    source = Path(source)
    if not source.is_file():
        raise MissingInputError(f"trade file not found: {source}")

    records: list[TradeRecord] = []
    malformed: list[tuple[int, str]] = []
    total = 0
    with source.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataQualityError(f"{source}: zero valid rows (empty file)")
        if [h.strip() for h in header] != TRADE_HEADER:
            raise DataQualityError(
                f"{source}: bad header {header!r}, expected {TRADE_HEADER}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            total += 1
            if len(row) != 4:
                malformed.append((lineno, f"expected 4 fields, got {len(row)}"))
                continue
            instrument_id, raw_ts, raw_price, raw_volume = (c.strip() for c in row)
            if not instrument_id:
                malformed.append((lineno, "empty instrument_id"))
                continue
            ts = _parse_timestamp(raw_ts)
            if ts is None:
                malformed.append((lineno, f"unparseable timestamp {raw_ts!r}"))
                continue
            try:
                price = float(raw_price)
            except ValueError:
                malformed.append((lineno, f"unparseable price {raw_price!r}"))
                continue
            if not math.isfinite(price) or price <= 0.0:
                malformed.append((lineno, f"price must be > 0, got {raw_price}"))
                continue
            volume: float | None = None
            if raw_volume:
                try:
                    volume = float(raw_volume)
                except ValueError:
                    malformed.append((lineno, f"unparseable volume {raw_volume!r}"))
                    continue
                if not math.isfinite(volume) or volume < 0.0:
                    malformed.append((lineno, f"volume must be >= 0, got {raw_volume}"))
                    continue
            if ts.date() > calendar.last:
                malformed.append(
                    (lineno, f"trade date {ts.date()} is past the calendar end "
                             f"({calendar.last}); no trading day to assign")
                )
                continue
            records.append(TradeRecord(instrument_id, ts, price, volume))

    result = IngestResult(
        records=sorted(records, key=lambda r: (r.instrument_id, r.timestamp)),
        malformed=malformed,
        total_rows=total,
    )
    if total == 0 or not result.records:
        raise DataQualityError(f"{source}: zero valid rows", details=malformed)
    if result.malformed_fraction > MALFORMED_FRACTION_LIMIT:
        lines = ", ".join(str(ln) for ln, _ in malformed[:20])
        raise DataQualityError(
            f"{source}: {len(malformed)}/{total} rows malformed "
            f"(> {MALFORMED_FRACTION_LIMIT:.0%}); first bad lines: {lines}",
            details=malformed,
        )
    return result


def daily_aggregate(
    trades: Iterable[TradeRecord],
    calendar: TradingCalendar | None = None,
) -> list[DailyBar]:
    """Aggregate trades to one bar per (instrument, trading day).

    Daily price is the volume-weighted mean of trade prices; trades without a
    positive volume fall out of the weighting, and a day with no positive
    volume at all falls back to the simple mean.  Trades on non-trading days
    are assigned to the next day in ``calendar`` (no calendar: the raw UTC
    date is the trading date).  Log returns chain between consecutive emitted
    bars per instrument.

    Sums go through ``math.fsum``, so the output is bit-identical under any
    permutation of the input trades.
    """
    groups: dict[tuple[str, dt.date], list[TradeRecord]] = {}
    for trade in trades:
        day = trade.timestamp.date()
        if calendar is not None:
            assigned = calendar.next_on_or_after(day)
            if assigned is None:
                raise DataQualityError(
                    f"trade on {day} is past the calendar end ({calendar.last})"
                )
            day = assigned
        groups.setdefault((trade.instrument_id, day), []).append(trade)

    bars: list[DailyBar] = []
    prev_price: dict[str, float] = {}
    for instrument_id, day in sorted(groups):
        bucket = groups[(instrument_id, day)]
        weighted = [(t.price, t.volume) for t in bucket
                    if t.volume is not None and t.volume > 0.0]
        if weighted:
            price = (math.fsum(p * v for p, v in weighted)
                     / math.fsum(v for _, v in weighted))
        else:
            price = math.fsum(t.price for t in bucket) / len(bucket)
        log_return = None
        if instrument_id in prev_price:
            log_return = math.log(price / prev_price[instrument_id])
        prev_price[instrument_id] = price
        bars.append(DailyBar(instrument_id, day, price, log_return, len(bucket)))
    return bars


def liquidity_filter(
    bars: Iterable[DailyBar],
    min_trades_per_day: int = 5,
    top_n: int = 10,
) -> list[str]:
    """Pick the ``top_n`` most traded instruments with adequate daily depth.

    Qualification: median daily trade_count >= ``min_trades_per_day``.
    Ranking: total trade_count descending, ties broken by lexicographic
    instrument_id.  Returns an empty list (with a warning) when nothing
    qualifies.
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    counts: dict[str, list[int]] = {}
    for bar in bars:
        counts.setdefault(bar.instrument_id, []).append(bar.trade_count)

    qualified: list[tuple[int, str]] = []
    for instrument_id, daily in counts.items():
        if _median(daily) >= min_trades_per_day:
            qualified.append((sum(daily), instrument_id))
    if not qualified:
        logger.warning(
            "liquidity_filter: no instrument has median daily trades >= %d",
            min_trades_per_day,
        )
        return []
    qualified.sort(key=lambda item: (-item[0], item[1]))
    return [instrument_id for _, instrument_id in qualified[:top_n]]


def _median(values: Sequence[int]) -> float:
    xs = sorted(values)
    n = len(xs)
    mid = n // 2
    return float(xs[mid]) if n % 2 else (xs[mid - 1] + xs[mid]) / 2.0


def write_daily_bars_csv(bars: Iterable[DailyBar], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BAR_HEADER)
        for bar in bars:
            writer.writerow([
                bar.instrument_id,
                bar.date.isoformat(),
                repr(bar.price),
                "" if bar.log_return is None else repr(bar.log_return),
                bar.trade_count,
            ])


def read_daily_bars_csv(path: str | Path) -> list[DailyBar]:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"daily bars file not found: {path}")
    bars: list[DailyBar] = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            bars.append(DailyBar(
                instrument_id=row["instrument_id"],
                date=dt.date.fromisoformat(row["date"]),
                price=float(row["price"]),
                log_return=float(row["log_return"]) if row["log_return"] else None,
                trade_count=int(row["trade_count"]),
            ))
    return bars


def bars_by_instrument(bars: Iterable[DailyBar]) -> dict[str, list[DailyBar]]:
    """Group bars per instrument, each series sorted by date."""
    grouped: dict[str, list[DailyBar]] = {}
    for bar in bars:
        grouped.setdefault(bar.instrument_id, []).append(bar)
    for series in grouped.values():
        series.sort(key=lambda b: b.date)
    return grouped
