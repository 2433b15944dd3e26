"""JSON-lines input/output.

Output files are append-only with article-level idempotency: a rerun
skips articles that already have records in the target file, so a
partially completed run can simply be repeated.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Iterator

from .errors import MissingInputError, SchemaError
from .labeling import LabelOutcome, LabelResult

logger = logging.getLogger(__name__)


def read_corpus_jsonl(path: str | Path) -> list[dict]:
    """Cleaned-corpus records; each line must carry an article_id."""
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"corpus file not found: {path}")
    records: list[dict] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(),
                                  start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: bad JSON: {exc}") from exc
        if not isinstance(record, dict) or "article_id" not in record:
            raise SchemaError(f"{path}:{lineno}: record without article_id")
        records.append(record)
    return records


def _existing_ids(path: Path, key: str = "article_id") -> set[str]:
    """Article ids already present in a JSON-lines output file."""
    if not path.is_file():
        return set()
    ids: set[str] = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        try:
            ids.add(str(json.loads(line)[key]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise SchemaError(f"cannot resume onto corrupt file {path}: {exc}") from exc
    return ids


def scored_article_ids(path: str | Path) -> set[str]:
    return _existing_ids(Path(path))


def labelled_article_ids(path: str | Path) -> set[str]:
    return _existing_ids(Path(path))


def append_probabilities(records: Iterable[dict], path: str | Path) -> int:
    """Append chunk-probability records, skipping already-scored articles.

    Returns the number of records written.  Records of one article are
    assumed contiguous (as ``chunk_and_score`` yields them).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    done = _existing_ids(path)
    skipped: set[str] = set()
    written = 0
    with path.open("a", encoding="utf-8") as fh:
        for record in records:
            article_id = str(record["article_id"])
            if article_id in done:
                skipped.add(article_id)
                continue
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            written += 1
    if skipped:
        logger.info("skipped %d already-scored articles", len(skipped))
    return written


def append_labels(
    outcomes: Iterable[LabelOutcome],
    path: str | Path,
    failures_path: str | Path,
) -> tuple[int, int]:
    """Append successes to ``path`` and failures to ``failures_path``.

    Successful labels are idempotent per article; failures are an audit
    trail and always appended.  Returns (labelled, failed) counts.
    """
    path = Path(path)
    failures_path = Path(failures_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    failures_path.parent.mkdir(parents=True, exist_ok=True)
    done = _existing_ids(path)
    labelled = failed = 0
    with path.open("a", encoding="utf-8") as ok, \
            failures_path.open("a", encoding="utf-8") as bad:
        for outcome in outcomes:
            if isinstance(outcome, LabelResult):
                if outcome.article_id in done:
                    continue
                ok.write(json.dumps(asdict(outcome), sort_keys=True) + "\n")
                labelled += 1
            else:
                bad.write(json.dumps(asdict(outcome), sort_keys=True) + "\n")
                failed += 1
    return labelled, failed


def iter_not_yet(records: list[dict], done: set[str]) -> Iterator[dict]:
    """Corpus records whose article_id is not in ``done``."""
    for record in records:
        if str(record["article_id"]) not in done:
            yield record
