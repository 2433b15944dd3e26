"""Contract gate: the bridge's output feeds the analysis pipeline.

One test per bridge-level guarantee, printed as PASS/FAIL lines by the
conftest summary hook.  These tests import the ``bondlab`` package as
the consuming side of the file contract; install it first
(``pip install --no-build-isolation -e ..`` from the bridge directory).
"""

from __future__ import annotations

import math
from collections import defaultdict

from bondlab import news_corpus, sentiment

from scorer_bridge.chunking import chunk_article, total_tokens
from scorer_bridge.errors import RateLimitError
from scorer_bridge.files import append_probabilities
from scorer_bridge.labeling import (
    EndpointConfig,
    LabelFailure,
    LabelRequest,
    LabelResult,
    label_articles,
)
from scorer_bridge.scorer import ScorerSpec, chunk_and_score

from conftest import FIXTURES

LIMIT = 512


def test_stub_scorer_output_round_trips_through_the_pipeline(tmp_path):
    """Offline `score` output loads downstream with zero errors, and
    every article's chunk count is ceil(consumed tokens / 512)."""
    spec = ScorerSpec(model_id="stub", checkpoint="stub:fixed",
                      max_tokens_per_chunk=LIMIT)
    articles = news_corpus.read_articles_jsonl(FIXTURES / "articles_50.jsonl")
    assert len(articles) == 50

    out = tmp_path / "probs.jsonl"
    written = append_probabilities(chunk_and_score(articles, spec), out)
    assert written > 50  # several articles span multiple chunks

    # The consuming side parses and validates every record.
    loaded = sentiment.load_chunk_probabilities(out)
    assert len(loaded) == written

    # Chunk counts follow the ceiling rule on the scorer's token
    # consumption (the 512 limit includes each chunk's two markers).
    per_article = defaultdict(list)
    for chunk in loaded:
        per_article[chunk.article_id].append(chunk)
    assert len(per_article) == 50
    for record in articles:
        article_id = str(record["article_id"])
        chunks = chunk_article(article_id, str(record["text"]), LIMIT)
        expected = math.ceil(total_tokens(chunks) / LIMIT)
        assert len(per_article[article_id]) == expected, article_id
        indices = sorted(c.chunk_index for c in per_article[article_id])
        assert indices == list(range(expected)), article_id

    # Full ingestion: per-article aggregation accepts the stream.
    corpus_index = {a.article_id: a
                    for a in news_corpus.read_corpus_jsonl(
                        FIXTURES / "articles_50.jsonl")}
    scored = sentiment.score_articles(loaded, corpus_index)
    assert len(scored) == 50
    assert all(-1.0 <= r.score <= 1.0 for r in scored)


def test_label_request_examples_against_mock_endpoint():
    """The three canonical endpoint behaviours: a bare float is
    accepted, a chatty reply is retried, out-of-range exhausts the
    budget into a failure record."""
    scripts = {
        "plain": ["0.2"],
        "chatty": ["prices will rise, 0.5", "0.5"],
        "oob": ["1.5", "1.5", "1.5", "1.5"],
    }
    queues = {k: list(v) for k, v in scripts.items()}

    def mock_endpoint(payload):
        queue = queues[payload["input"]]
        if not queue:
            raise RateLimitError("script exhausted")
        return queue.pop(0)

    template = LabelRequest(article_id="", prompt_id="bond_analyst_v1",
                            body="", retry_budget=3)
    endpoint = EndpointConfig(url="mock://", model="nano")
    outcomes = list(label_articles(
        [{"article_id": name, "text": name} for name in scripts],
        template, endpoint, mock_endpoint,
        sleep=lambda s: None,
    ))

    plain, chatty, oob = outcomes
    assert isinstance(plain, LabelResult)
    assert plain.score == 0.2 and plain.attempts == 1

    assert isinstance(chatty, LabelResult)
    assert chatty.score == 0.5 and chatty.attempts == 2

    assert isinstance(oob, LabelFailure)
    assert oob.attempts == 4
    assert "outside [-1, 1]" in oob.error
