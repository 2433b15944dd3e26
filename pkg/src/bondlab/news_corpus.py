"""News-article cleaning and chronological partitioning.

Input records are JSON-lines objects with ``title``, ``date``, ``topic`` and
``text`` fields.  Cleaning strips markup, drops duplicates / blocklisted
topics / short bodies, and aligns publication dates to the trading calendar.
"""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .calendar import TradingCalendar
from .errors import MissingInputError, SchemaError

logger = logging.getLogger(__name__)

MIN_BODY_CHARS = 500

_TAG_RE = re.compile(r"<[^<>]*>")
_WS_RE = re.compile(r"\s+")
_PUNCT_RE = re.compile(r"[^\w\s]", re.UNICODE)


@dataclass(frozen=True)
class Article:
    """A cleaned news article aligned to a trading date."""

    article_id: str
    title: str
    published: dt.date
    topic: str
    body: str
    aligned_date: dt.date


@dataclass
class CleaningReport:
    """Removal counts per reason, for the plain-text / CSV cleaning summary."""

    input_total: int = 0
    kept: int = 0
    removed_unparseable_date: int = 0
    removed_blocklisted_topic: int = 0
    removed_short_body: int = 0
    removed_duplicate: int = 0
    removed_beyond_calendar: int = 0
    removed_missing_fields: int = 0
    blocklist: tuple[str, ...] = field(default_factory=tuple)

    def rows(self) -> list[tuple[str, int]]:
        return [
            ("input_total", self.input_total),
            ("kept", self.kept),
            ("removed_missing_fields", self.removed_missing_fields),
            ("removed_unparseable_date", self.removed_unparseable_date),
            ("removed_blocklisted_topic", self.removed_blocklisted_topic),
            ("removed_short_body", self.removed_short_body),
            ("removed_beyond_calendar", self.removed_beyond_calendar),
            ("removed_duplicate", self.removed_duplicate),
        ]

    def as_text(self) -> str:
        lines = ["article cleaning report", "-----------------------"]
        lines += [f"{name:<28s} {count:d}" for name, count in self.rows()]
        if self.blocklist:
            lines.append(f"topic blocklist: {', '.join(self.blocklist)}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["reason", "count"])
            writer.writerows(self.rows())


def strip_markup(text: str) -> str:
    """Remove tags and collapse whitespace; a fixed point of itself."""
    prev = None
    while prev != text:
        prev = text
        text = _TAG_RE.sub(" ", text)
    return _WS_RE.sub(" ", text).strip()


def normalize_title(title: str) -> str:
    """Dedup key: lowercase, punctuation stripped, whitespace collapsed."""
    lowered = _PUNCT_RE.sub(" ", title.lower())
    return _WS_RE.sub(" ", lowered).strip()


def article_id_for(title: str) -> str:
    """Stable article key derived from the normalized title."""
    return hashlib.sha1(normalize_title(title).encode("utf-8")).hexdigest()[:16]


def _parse_date(raw: object) -> dt.date | None:
    if isinstance(raw, dt.date):
        return raw
    if not isinstance(raw, str):
        return None
    text = raw.strip()
    for candidate in (text, text[:10]):
        try:
            return dt.date.fromisoformat(candidate)
        except ValueError:
            continue
    return None


def clean_corpus(
    raw: Iterable[Mapping],
    topic_blocklist: set[str],
    calendar: TradingCalendar,
) -> tuple[list[Article], CleaningReport]:
    """Apply the corpus filtering rules and emit a per-reason removal report.

    Order of checks per record: required fields, date parse, topic blocklist,
    markup strip + minimum body length, calendar alignment.  Duplicate titles
    (same normalized title) are resolved afterwards, keeping the earliest
    publication.  Output is sorted by (aligned_date, article_id).
    """
    report = CleaningReport(blocklist=tuple(sorted(topic_blocklist)))
    survivors: list[Article] = []
    for record in raw:
        report.input_total += 1
        title = record.get("title")
        body = record.get("text")
        if not title or body is None:
            report.removed_missing_fields += 1
            continue
        published = _parse_date(record.get("date"))
        if published is None:
            report.removed_unparseable_date += 1
            continue
        topic = str(record.get("topic", "")).strip()
        if topic in topic_blocklist:
            report.removed_blocklisted_topic += 1
            continue
        cleaned = strip_markup(str(body))
        if len(cleaned) < MIN_BODY_CHARS:
            report.removed_short_body += 1
            continue
        aligned = calendar.next_on_or_after(published)
        if aligned is None:
            report.removed_beyond_calendar += 1
            continue
        survivors.append(Article(
            article_id=article_id_for(str(title)),
            title=str(title).strip(),
            published=published,
            topic=topic,
            body=cleaned,
            aligned_date=aligned,
        ))

    # Dedup on normalized title, keeping the earliest publication
    # (first occurrence wins ties).
    best: dict[str, Article] = {}
    for article in survivors:
        held = best.get(article.article_id)
        if held is None:
            best[article.article_id] = article
        else:
            report.removed_duplicate += 1
            if article.published < held.published:
                best[article.article_id] = article
    kept = sorted(best.values(), key=lambda a: (a.aligned_date, a.article_id))
    report.kept = len(kept)
    return kept, report


@dataclass
class SplitCorpus:
    """Chronological partitions by aligned date."""

    train: list[Article]
    validation: list[Article]
    test: list[Article]
    evaluation: list[Article]

    def __iter__(self):
        return iter((self.train, self.validation, self.test, self.evaluation))


def chronological_split(
    articles: Sequence[Article],
    boundaries: Sequence[dt.date],
) -> SplitCorpus:
    """Partition by aligned_date into half-open intervals.

    ``boundaries`` is three strictly increasing dates (b1, b2, b3) giving
    train [-inf, b1), validation [b1, b2), test [b2, b3) and evaluation
    [b3, +inf); a date exactly on a boundary lands in the later partition.
    """
    if len(boundaries) != 3:
        raise ValueError(f"expected 3 boundary dates, got {len(boundaries)}")
    b1, b2, b3 = boundaries
    if not b1 < b2 < b3:
        raise ValueError(f"boundaries must be strictly increasing: {boundaries}")
    split = SplitCorpus([], [], [], [])
    for article in articles:
        day = article.aligned_date
        if day < b1:
            split.train.append(article)
        elif day < b2:
            split.validation.append(article)
        elif day < b3:
            split.test.append(article)
        else:
            split.evaluation.append(article)
    for name, part in zip(("train", "validation", "test", "evaluation"), split):
        if not part:
            logger.warning("chronological_split: %s partition is empty", name)
    return split


def read_articles_jsonl(path: str | Path) -> list[dict]:
    """Raw article records from a JSON-lines file."""
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"article file not found: {path}")
    records = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: bad JSON: {exc}") from exc
    return records


def write_corpus_jsonl(articles: Iterable[Article], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for a in articles:
            fh.write(json.dumps({
                "article_id": a.article_id,
                "title": a.title,
                "date": a.published.isoformat(),
                "topic": a.topic,
                "text": a.body,
                "aligned_date": a.aligned_date.isoformat(),
            }, sort_keys=True) + "\n")


def read_corpus_jsonl(path: str | Path) -> list[Article]:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"corpus file not found: {path}")
    articles = []
    for record in read_articles_jsonl(path):
        try:
            articles.append(Article(
                article_id=record["article_id"],
                title=record["title"],
                published=dt.date.fromisoformat(record["date"]),
                topic=record["topic"],
                body=record["text"],
                aligned_date=dt.date.fromisoformat(record["aligned_date"]),
            ))
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"{path}: bad corpus record: {exc}") from exc
    return articles
