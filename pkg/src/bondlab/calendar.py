"""Trading-day calendar: membership tests and next-trading-day alignment."""
from __future__ import annotations

import datetime as dt
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import MissingInputError, SchemaError


@dataclass(frozen=True)
class TradingCalendar:
    """Sorted, de-duplicated set of trading dates."""

    days: tuple[dt.date, ...]
    _set: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.days:
            raise SchemaError("trading calendar is empty")
        if any(b <= a for a, b in zip(self.days, self.days[1:])):
            raise SchemaError("trading calendar dates must be strictly increasing")
        object.__setattr__(self, "_set", frozenset(self.days))

    @classmethod
    def from_dates(cls, dates: Iterable[dt.date]) -> "TradingCalendar":
        return cls(days=tuple(sorted(set(dates))))

    @classmethod
    def from_file(cls, path: str | Path) -> "TradingCalendar":
        """Load a calendar file: one ISO date per line, blank lines ignored."""
        path = Path(path)
        if not path.is_file():
            raise MissingInputError(f"calendar file not found: {path}")
        days = []
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                days.append(dt.date.fromisoformat(line))
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: bad calendar date {line!r}") from exc
        return cls.from_dates(days)

    def __contains__(self, day: dt.date) -> bool:
        return day in self._set

    def __iter__(self) -> Iterator[dt.date]:
        return iter(self.days)

    def __len__(self) -> int:
        return len(self.days)

    @property
    def first(self) -> dt.date:
        return self.days[0]

    @property
    def last(self) -> dt.date:
        return self.days[-1]

    def next_on_or_after(self, day: dt.date) -> dt.date | None:
        """First trading day >= ``day``, or None past the calendar end."""
        i = bisect_left(self.days, day)
        return self.days[i] if i < len(self.days) else None

    def next_after(self, day: dt.date) -> dt.date | None:
        """First trading day strictly after ``day``, or None past the end."""
        i = bisect_right(self.days, day)
        return self.days[i] if i < len(self.days) else None


def weekday_calendar(start: dt.date, end: dt.date) -> TradingCalendar:
    """Monday-to-Friday calendar over [start, end], inclusive."""
    days = []
    day = start
    one = dt.timedelta(days=1)
    while day <= end:
        if day.weekday() < 5:
            days.append(day)
        day += one
    return TradingCalendar(days=tuple(days))
