"""Sentiment scoring: class probabilities to continuous scores, daily
aggregation, class binning / balancing, and shock detection.

The continuous score is the normalized difference (p_pos - p_neg) over
(p_pos + p_neg), which drops the neutral class and keeps the score in
[-1, 1].  Chunked articles are scored by averaging class probabilities
across chunks before the transform (per-chunk score averaging is available
as a mode switch).
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    InsufficientDataError,
    MissingInputError,
    SchemaError,
)

PROBABILITY_TOLERANCE = 1e-6
SERIES_CSV_HEADER = ["model_id", "topic", "date", "score", "article_count", "shock"]
POOLED_TOPIC = "__pooled__"

CHUNK_MODES = ("prob_mean", "ndi_mean")
CLASSES = ("negative", "neutral", "positive")


@dataclass(frozen=True)
class ChunkProbabilities:
    """Three-class probabilities for one chunk of one article."""

    article_id: str
    model_id: str
    chunk_index: int
    p_negative: float
    p_neutral: float
    p_positive: float

    def validate(self) -> None:
        for name in ("p_negative", "p_neutral", "p_positive"):
            p = getattr(self, name)
            if not (isinstance(p, (int, float)) and math.isfinite(p) and 0.0 <= p <= 1.0):
                raise SchemaError(
                    f"article {self.article_id} chunk {self.chunk_index}: "
                    f"{name}={p!r} outside [0, 1]"
                )
        total = self.p_negative + self.p_neutral + self.p_positive
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise SchemaError(
                f"article {self.article_id} chunk {self.chunk_index}: "
                f"probabilities sum to {total!r}, not 1"
            )
        if self.chunk_index < 0:
            raise SchemaError(
                f"article {self.article_id}: negative chunk_index {self.chunk_index}"
            )


@dataclass(frozen=True)
class SentimentRecord:
    """Article-level continuous score for one model."""

    article_id: str
    model_id: str
    score: float
    aligned_date: dt.date | None = None
    topic: str | None = None
    degenerate: bool = False


@dataclass(frozen=True)
class DailyPoint:
    date: dt.date
    score: float
    article_count: int


@dataclass
class DailySentimentSeries:
    """Per-(model, topic) daily mean scores with optional shock flags.

    ``shock_flags[i]`` is -1/0/+1 for ``points[i]``; all zero until
    :func:`detect_shocks` runs.
    """

    model_id: str
    topic: str
    points: list[DailyPoint]
    shock_flags: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.shock_flags:
            self.shock_flags = [0] * len(self.points)
        if len(self.shock_flags) != len(self.points):
            raise SchemaError("shock_flags length must match points")
        for a, b in zip(self.points, self.points[1:]):
            if b.date <= a.date:
                raise SchemaError("series dates must be strictly increasing")

    def scores(self) -> list[float]:
        return [p.score for p in self.points]

    def shock_sign(self, date: dt.date) -> int:
        for point, flag in zip(self.points, self.shock_flags):
            if point.date == date:
                return flag
        return 0


def ndi_with_flag(p_positive: float, p_negative: float) -> tuple[float, bool]:
    """Normalized difference score plus a degenerate-input flag.

    The flag marks the pure-neutral case p_pos + p_neg = 0, where the ratio
    is undefined and the score is fixed at 0 by symmetry.
    """
    if p_positive < 0.0 or p_negative < 0.0:
        raise ValueError(
            f"probabilities must be nonnegative: ({p_positive}, {p_negative})"
        )
    total = p_positive + p_negative
    if total == 0.0:
        return 0.0, True
    return (p_positive - p_negative) / total, False


def ndi(p_positive: float, p_negative: float) -> float:
    """Normalized difference score in [-1, 1]; 0 on pure-neutral input."""
    return ndi_with_flag(p_positive, p_negative)[0]


def aggregate_chunks(
    chunks: Sequence[ChunkProbabilities],
    *,
    mode: str = "prob_mean",
    aligned_date: dt.date | None = None,
    topic: str | None = None,
) -> SentimentRecord:
    """Collapse an article's chunk probabilities into one SentimentRecord.

    ``prob_mean`` (default) averages the class probabilities across chunks
    and scores the averaged distribution; ``ndi_mean`` averages per-chunk
    scores instead.  Chunk indices must be dense from 0.
    """
    if mode not in CHUNK_MODES:
        raise ValueError(f"mode must be one of {CHUNK_MODES}, got {mode!r}")
    if not chunks:
        raise InsufficientDataError("aggregate_chunks requires at least one chunk")
    article_id = chunks[0].article_id
    model_id = chunks[0].model_id
    for chunk in chunks:
        chunk.validate()
        if chunk.article_id != article_id or chunk.model_id != model_id:
            raise SchemaError(
                f"mixed article/model in chunk group: {article_id}/{model_id} "
                f"vs {chunk.article_id}/{chunk.model_id}"
            )
    seen = sorted(c.chunk_index for c in chunks)
    for expected, actual in enumerate(seen):
        if actual != expected:
            raise SchemaError(
                f"article {article_id}: missing chunk index {expected} "
                f"(got indices {seen})"
            )

    n = len(chunks)
    if mode == "prob_mean":
        p_pos = math.fsum(c.p_positive for c in chunks) / n
        p_neg = math.fsum(c.p_negative for c in chunks) / n
        score, degenerate = ndi_with_flag(p_pos, p_neg)
    else:
        parts = [ndi_with_flag(c.p_positive, c.p_negative) for c in chunks]
        score = math.fsum(s for s, _ in parts) / n
        degenerate = all(flag for _, flag in parts)
    return SentimentRecord(
        article_id=article_id,
        model_id=model_id,
        score=score,
        aligned_date=aligned_date,
        topic=topic,
        degenerate=degenerate,
    )


def bin_label(score: float, threshold: float = 0.1) -> str:
    """Map a continuous score to negative/neutral/positive.

    Boundary scores (|score| == threshold) are neutral.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    if not -1.0 <= score <= 1.0:
        raise ValueError(f"score outside [-1, 1]: {score}")
    if score < -threshold:
        return "negative"
    if score > threshold:
        return "positive"
    return "neutral"


def stratified_undersample(
    labelled: Sequence[tuple[str, str]],
    seed: int,
) -> list[tuple[str, str]]:
    """Downsample every class to the minority-class count.

    Seeded uniform sampling without replacement; output preserves the input
    order of the selected items, so the result is deterministic given
    (input order, seed).  Raises when any of the three classes is empty.
    """
    by_class: dict[str, list[int]] = {cls: [] for cls in CLASSES}
    for index, (article_id, cls) in enumerate(labelled):
        if cls not in by_class:
            raise SchemaError(f"unknown class {cls!r} for article {article_id!r}")
        by_class[cls].append(index)
    counts = {cls: len(ids) for cls, ids in by_class.items()}
    empty = [cls for cls, count in counts.items() if count == 0]
    if empty:
        raise InsufficientDataError(
            f"cannot balance: empty class(es) {empty}; counts {counts}"
        )
    target = min(counts.values())
    rng = random.Random(seed)
    keep: set[int] = set()
    for cls in CLASSES:
        keep.update(rng.sample(by_class[cls], target))
    return [labelled[i] for i in sorted(keep)]


def daily_series(
    records: Iterable[SentimentRecord],
    model_id: str,
    topic: str | None,
) -> DailySentimentSeries:
    """Daily arithmetic-mean score series for one (model, topic).

    ``topic=None`` pools every topic for the model (series topic becomes
    ``__pooled__``).  Records without an aligned date are skipped.
    """
    buckets: dict[dt.date, list[float]] = {}
    for record in records:
        if record.model_id != model_id or record.aligned_date is None:
            continue
        if topic is not None and record.topic != topic:
            continue
        buckets.setdefault(record.aligned_date, []).append(record.score)
    points = [
        DailyPoint(date=day, score=math.fsum(scores) / len(scores),
                   article_count=len(scores))
        for day, scores in sorted(buckets.items())
    ]
    return DailySentimentSeries(
        model_id=model_id,
        topic=topic if topic is not None else POOLED_TOPIC,
        points=points,
    )


MIN_SHOCK_POINTS = 10


def shock_thresholds(scores: Sequence[float], percentile: float) -> tuple[float, float]:
    """(lower, upper) score thresholds for the given tail percentile."""
    from .stats import percentile as pct

    return pct(scores, percentile), pct(scores, 100.0 - percentile)


def detect_shocks(
    series: DailySentimentSeries,
    percentile: float = 10.0,
) -> DailySentimentSeries:
    """Flag days in the top / bottom tail of the series' own score
    distribution.

    A day is a positive shock iff its score >= the (100 - percentile)-th
    percentile and a negative shock iff <= the percentile-th percentile
    (linear-interpolation estimates).  When the two thresholds coincide
    (e.g. a constant series) nothing is flagged.
    """
    if not 0.0 < percentile < 50.0:
        raise ValueError(f"percentile must be in (0, 50), got {percentile}")
    if len(series.points) < MIN_SHOCK_POINTS:
        raise InsufficientDataError(
            f"detect_shocks needs >= {MIN_SHOCK_POINTS} points, "
            f"got {len(series.points)}"
        )
    lower, upper = shock_thresholds(series.scores(), percentile)
    return replace(series, shock_flags=_flags(series.scores(), lower, upper))


def detect_shocks_pooled(
    series_list: Sequence[DailySentimentSeries],
    percentile: float = 10.0,
) -> list[DailySentimentSeries]:
    """Like :func:`detect_shocks`, with thresholds from all series pooled."""
    if not 0.0 < percentile < 50.0:
        raise ValueError(f"percentile must be in (0, 50), got {percentile}")
    pooled = [s for series in series_list for s in series.scores()]
    if len(pooled) < MIN_SHOCK_POINTS:
        raise InsufficientDataError(
            f"pooled shock detection needs >= {MIN_SHOCK_POINTS} points, "
            f"got {len(pooled)}"
        )
    lower, upper = shock_thresholds(pooled, percentile)
    return [replace(s, shock_flags=_flags(s.scores(), lower, upper))
            for s in series_list]


def _flags(scores: Sequence[float], lower: float, upper: float) -> list[int]:
    if lower == upper:
        return [0] * len(scores)
    return [1 if s >= upper else (-1 if s <= lower else 0) for s in scores]


# ---------------------------------------------------------------------------
# Wire formats
# ---------------------------------------------------------------------------

def load_chunk_probabilities(path: str | Path) -> list[ChunkProbabilities]:
    """Parse and validate the probability JSON-lines format."""
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"probability file not found: {path}")
    chunks: list[ChunkProbabilities] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            chunk = ChunkProbabilities(
                article_id=str(record["article_id"]),
                model_id=str(record["model_id"]),
                chunk_index=int(record["chunk_index"]),
                p_negative=float(record["p_negative"]),
                p_neutral=float(record["p_neutral"]),
                p_positive=float(record["p_positive"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{path}:{lineno}: bad probability record: {exc}") from exc
        try:
            chunk.validate()
        except SchemaError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc
        chunks.append(chunk)
    return chunks


def load_continuous_labels(path: str | Path, model_id: str) -> list[SentimentRecord]:
    """Parse the continuous-label JSON-lines format ({article_id, score})."""
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"label file not found: {path}")
    records: list[SentimentRecord] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            score = float(record["score"])
            article_id = str(record["article_id"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{path}:{lineno}: bad label record: {exc}") from exc
        if not -1.0 <= score <= 1.0:
            raise SchemaError(f"{path}:{lineno}: score {score} outside [-1, 1]")
        records.append(SentimentRecord(article_id=article_id, model_id=model_id,
                                       score=score))
    return records


def score_articles(
    chunks: Iterable[ChunkProbabilities],
    corpus_index: Mapping[str, object],
    *,
    mode: str = "prob_mean",
) -> list[SentimentRecord]:
    """Aggregate a chunk stream to one record per (article, model).

    ``corpus_index`` maps article_id to the cleaned Article supplying the
    aligned date and topic; chunks without a corpus entry are rejected.
    """
    groups: dict[tuple[str, str], list[ChunkProbabilities]] = {}
    for chunk in chunks:
        groups.setdefault((chunk.model_id, chunk.article_id), []).append(chunk)
    records: list[SentimentRecord] = []
    for (model_id, article_id), group in sorted(groups.items()):
        article = corpus_index.get(article_id)
        if article is None:
            raise SchemaError(
                f"probability stream references article {article_id!r} "
                f"not present in the cleaned corpus"
            )
        group.sort(key=lambda c: c.chunk_index)
        records.append(aggregate_chunks(
            group,
            mode=mode,
            aligned_date=article.aligned_date,
            topic=article.topic,
        ))
    return records


def attach_metadata(
    records: Iterable[SentimentRecord],
    corpus_index: Mapping[str, object],
) -> list[SentimentRecord]:
    """Fill aligned_date/topic on records parsed from label files."""
    out = []
    for record in records:
        article = corpus_index.get(record.article_id)
        if article is None:
            raise SchemaError(
                f"label stream references article {record.article_id!r} "
                f"not present in the cleaned corpus"
            )
        out.append(replace(record, aligned_date=article.aligned_date,
                           topic=article.topic))
    return out


def write_records_jsonl(records: Iterable[SentimentRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for r in sorted(records, key=lambda r: (r.model_id, r.article_id)):
            fh.write(json.dumps({
                "article_id": r.article_id,
                "model_id": r.model_id,
                "score": r.score,
                "aligned_date": r.aligned_date.isoformat() if r.aligned_date else None,
                "topic": r.topic,
                "degenerate": r.degenerate,
            }, sort_keys=True) + "\n")


def read_records_jsonl(path: str | Path) -> list[SentimentRecord]:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"score file not found: {path}")
    records = []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        records.append(SentimentRecord(
            article_id=record["article_id"],
            model_id=record["model_id"],
            score=float(record["score"]),
            aligned_date=(dt.date.fromisoformat(record["aligned_date"])
                          if record.get("aligned_date") else None),
            topic=record.get("topic"),
            degenerate=bool(record.get("degenerate", False)),
        ))
    return records


def write_daily_series_csv(
    series_list: Iterable[DailySentimentSeries],
    path: str | Path,
) -> None:
    """Export: model_id,topic,date,score,article_count,shock per row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ordered = sorted(series_list, key=lambda s: (s.model_id, s.topic))
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_CSV_HEADER)
        for series in ordered:
            for point, flag in zip(series.points, series.shock_flags):
                writer.writerow([
                    series.model_id, series.topic, point.date.isoformat(),
                    repr(point.score), point.article_count, flag,
                ])


def read_daily_series_csv(path: str | Path) -> list[DailySentimentSeries]:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"daily series file not found: {path}")
    rows: dict[tuple[str, str], list[tuple[DailyPoint, int]]] = {}
    with path.open(newline="") as fh:
        for record in csv.DictReader(fh):
            key = (record["model_id"], record["topic"])
            point = DailyPoint(
                date=dt.date.fromisoformat(record["date"]),
                score=float(record["score"]),
                article_count=int(record["article_count"]),
            )
            rows.setdefault(key, []).append((point, int(record["shock"])))
    series_list = []
    for (model_id, topic), entries in sorted(rows.items()):
        entries.sort(key=lambda e: e[0].date)
        series_list.append(DailySentimentSeries(
            model_id=model_id,
            topic=topic,
            points=[p for p, _ in entries],
            shock_flags=[f for _, f in entries],
        ))
    return series_list
