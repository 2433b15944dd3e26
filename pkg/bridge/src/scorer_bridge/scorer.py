"""Run a sentiment scorer over chunked articles.

The only scorer that ships is :class:`StubScorer` — it emits a fixed,
deterministic probability triple so the whole bridge (chunking, record
layout, file writing, downstream ingestion) is testable with no network
and no model weights.  Real checkpoints plug in behind the same
batch-scoring callable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .chunking import Chunk, chunk_article
from .errors import CheckpointError, InferenceError, SchemaError

logger = logging.getLogger(__name__)

ProbabilityTriple = tuple[float, float, float]
# One inference call scores a batch of chunks, in order.
BatchScorer = Callable[[Sequence[Chunk]], Sequence[ProbabilityTriple]]

STUB_CHECKPOINT_PREFIX = "stub:"
_SIMPLEX_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ScorerSpec:
    """Which model scores the chunks, and how they are cut."""

    model_id: str
    checkpoint: str
    max_tokens_per_chunk: int = 512
    batch_size: int = 8

    def __post_init__(self) -> None:
        if not self.model_id:
            raise ValueError("model_id must be non-empty")
        if self.max_tokens_per_chunk <= 0:
            raise ValueError(
                f"max_tokens_per_chunk must be > 0, got {self.max_tokens_per_chunk}"
            )
        if self.batch_size <= 0:
            raise ValueError(f"batch_size must be > 0, got {self.batch_size}")


class StubScorer:
    """Fixed-triple scorer for offline runs and contract tests."""

    def __init__(self, probabilities: ProbabilityTriple = (0.2, 0.5, 0.3)) -> None:
        total = math.fsum(probabilities)
        if abs(total - 1.0) > _SIMPLEX_TOLERANCE or min(probabilities) < 0.0:
            raise ValueError(f"not a probability triple: {probabilities}")
        self.probabilities = tuple(float(p) for p in probabilities)

    def __call__(self, batch: Sequence[Chunk]) -> list[ProbabilityTriple]:
        return [self.probabilities] * len(batch)


def load_scorer(spec: ScorerSpec) -> BatchScorer:
    """Resolve ``spec.checkpoint`` to a batch-scoring callable.

    ``stub:fixed`` (or bare ``stub:``) loads the default stub;
    ``stub:NEG,NEU,POS`` pins the emitted triple.  Anything else is a
    real model reference this package does not serve, so it fails
    fatally rather than guessing.
    """
    if spec.checkpoint.startswith(STUB_CHECKPOINT_PREFIX):
        body = spec.checkpoint[len(STUB_CHECKPOINT_PREFIX):]
        if not body or body == "fixed":
            return StubScorer()
        try:
            parts = tuple(float(p) for p in body.split(","))
            if len(parts) != 3:
                raise ValueError(f"expected 3 probabilities, got {len(parts)}")
            return StubScorer(parts)
        except ValueError as exc:
            raise CheckpointError(
                f"bad stub checkpoint {spec.checkpoint!r}: {exc}"
            ) from exc
    raise CheckpointError(
        f"cannot load checkpoint {spec.checkpoint!r}: this package serves no "
        f"model runtimes (use a 'stub:' checkpoint for offline output)"
    )


def _score_article(
    article_id: str, text: str, spec: ScorerSpec, scorer: BatchScorer
) -> list[dict]:
    chunks = chunk_article(article_id, text, spec.max_tokens_per_chunk)
    records: list[dict] = []
    for start in range(0, len(chunks), spec.batch_size):
        batch = chunks[start:start + spec.batch_size]
        triples = scorer(batch)
        if len(triples) != len(batch):
            raise InferenceError(
                f"scorer returned {len(triples)} triples for a batch of {len(batch)}"
            )
        for chunk, triple in zip(batch, triples):
            p_neg, p_neu, p_pos = (float(p) for p in triple)
            total = p_neg + p_neu + p_pos
            if not all(math.isfinite(p) and p >= 0.0 for p in (p_neg, p_neu, p_pos)) \
                    or abs(total - 1.0) > _SIMPLEX_TOLERANCE:
                raise InferenceError(
                    f"chunk {chunk.index}: bad probability triple {triple!r}"
                )
            records.append({
                "article_id": article_id,
                "model_id": spec.model_id,
                "chunk_index": chunk.index,
                "p_negative": p_neg,
                "p_neutral": p_neu,
                "p_positive": p_pos,
            })
    return records


def chunk_and_score(
    articles: Iterable[Mapping[str, object]],
    spec: ScorerSpec,
    scorer: BatchScorer | None = None,
) -> Iterator[dict]:
    """Yield probability records for every chunk of every article.

    ``articles`` are cleaned-corpus records (``article_id`` + ``text``).
    Output dicts are exactly the downstream probability JSON-lines
    schema: an article either appears with all its chunks or — after a
    scoring failure, which is logged — not at all.
    """
    if scorer is None:
        scorer = load_scorer(spec)
    for article in articles:
        try:
            article_id = str(article["article_id"])
        except KeyError as exc:
            raise SchemaError(f"article record without article_id: {article!r}") from exc
        try:
            yield from _score_article(article_id, str(article.get("text", "")),
                                      spec, scorer)
        except (InferenceError, SchemaError) as exc:
            logger.warning("skipping article %s: %s", article_id, exc)
