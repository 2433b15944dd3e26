"""Drive an LLM endpoint to produce continuous sentiment labels.

Every seam with the outside world is injectable — the transport that
performs one request, the sleep used for backoff, the jitter RNG and
the clock — so the retry/backoff/parse behaviour is testable offline
against scripted responses.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import random
import re
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, Mapping, Union

from .errors import (
    AuthError,
    LabelParseError,
    RateLimitError,
    TransportError,
)
from .prompts import PROMPT_IDS, load_prompt, prompt_sha256

logger = logging.getLogger(__name__)

# One labelling call: payload in, raw response text out.  Raises
# AuthError / RateLimitError / TransportError.
Transport = Callable[[Mapping[str, str]], str]

# A response must be one bare float, nothing else.
_BARE_FLOAT = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)")


@dataclass(frozen=True)
class LabelRequest:
    """Template for labelling calls; article fields are filled per item."""

    article_id: str
    prompt_id: str
    body: str
    retry_budget: int = 3

    def __post_init__(self) -> None:
        if self.prompt_id not in PROMPT_IDS:
            raise ValueError(
                f"unknown prompt id {self.prompt_id!r}; known: {PROMPT_IDS}"
            )
        if self.retry_budget < 0:
            raise ValueError(f"retry_budget must be >= 0, got {self.retry_budget}")


@dataclass(frozen=True)
class EndpointConfig:
    """Where labelling requests go and how hard to back off."""

    url: str
    model: str
    backoff_base: float = 0.5
    backoff_cap: float = 30.0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.backoff_base <= 0 or self.backoff_cap < self.backoff_base:
            raise ValueError(
                f"need 0 < backoff_base <= backoff_cap, got "
                f"{self.backoff_base}, {self.backoff_cap}"
            )


@dataclass(frozen=True)
class LabelResult:
    article_id: str
    score: float
    prompt_id: str
    prompt_sha256: str
    attempts: int
    labelled_at: str


@dataclass(frozen=True)
class LabelFailure:
    article_id: str
    error: str
    attempts: int
    failed_at: str


LabelOutcome = Union[LabelResult, LabelFailure]


def parse_label(response: str) -> float:
    """The response as a float in [-1, 1], or :class:`LabelParseError`."""
    text = response.strip()
    if not _BARE_FLOAT.fullmatch(text):
        raise LabelParseError(f"not a bare float: {response!r}")
    value = float(text)
    if not -1.0 <= value <= 1.0:
        raise LabelParseError(f"{value} outside [-1, 1]")
    return value


def _utc_now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _backoff_delay(
    attempt: int, endpoint: EndpointConfig, rng: random.Random
) -> float:
    """Jittered exponential delay for the attempt-th retry (0-based)."""
    base = min(endpoint.backoff_cap, endpoint.backoff_base * 2.0 ** attempt)
    return base * (0.5 + rng.random())


def _label_one(
    request: LabelRequest,
    prompt_text: str,
    prompt_hash: str,
    endpoint: EndpointConfig,
    transport: Transport,
    sleep: Callable[[float], None],
    rng: random.Random,
    now: Callable[[], str],
) -> LabelOutcome:
    payload = {
        "model": endpoint.model,
        "system": prompt_text,
        "input": request.body,
    }
    last_error = "unlabelled"
    attempts = 0
    for attempt in range(request.retry_budget + 1):
        attempts = attempt + 1
        try:
            response = transport(payload)
        except RateLimitError as exc:
            last_error = f"rate limited: {exc}"
            sleep(_backoff_delay(attempt, endpoint, rng))
            continue
        except TransportError as exc:
            last_error = f"transport: {exc}"
            sleep(_backoff_delay(attempt, endpoint, rng))
            continue
        try:
            score = parse_label(response)
        except LabelParseError as exc:
            # The endpoint answered but broke the output contract; ask
            # again immediately — this is not congestion.
            last_error = str(exc)
            logger.info("article %s attempt %d: %s", request.article_id,
                        attempts, exc)
            continue
        return LabelResult(
            article_id=request.article_id,
            score=score,
            prompt_id=request.prompt_id,
            prompt_sha256=prompt_hash,
            attempts=attempts,
            labelled_at=now(),
        )
    logger.warning("article %s failed after %d attempts: %s",
                   request.article_id, attempts, last_error)
    return LabelFailure(
        article_id=request.article_id,
        error=last_error,
        attempts=attempts,
        failed_at=now(),
    )


def label_articles(
    articles: Iterable[Mapping[str, object]],
    template: LabelRequest,
    endpoint: EndpointConfig,
    transport: Transport,
    *,
    sleep: Callable[[float], None] = time.sleep,
    rng: random.Random | None = None,
    now: Callable[[], str] = _utc_now,
) -> Iterator[LabelOutcome]:
    """Label cleaned-corpus records, yielding outcomes in input order.

    Auth failures abort the run (they will not fix themselves); every
    other error is retried up to the template's budget, after which a
    :class:`LabelFailure` is recorded and the stream continues.
    ``endpoint.workers`` bounds how many requests are in flight.
    """
    rng = rng if rng is not None else random.Random()
    prompt_text = load_prompt(template.prompt_id)
    prompt_hash = prompt_sha256(prompt_text)
    requests = (
        replace(template, article_id=str(a["article_id"]), body=str(a.get("text", "")))
        for a in articles
    )

    def work(request: LabelRequest) -> LabelOutcome:
        return _label_one(request, prompt_text, prompt_hash, endpoint,
                          transport, sleep, rng, now)

    if endpoint.workers == 1:
        for request in requests:
            yield work(request)
        return
    with ThreadPoolExecutor(max_workers=endpoint.workers) as pool:
        yield from pool.map(work, requests)


def build_transport(endpoint: EndpointConfig, api_key: str) -> Transport:
    """HTTP transport: POST the payload as JSON, return the reply text.

    Expects the endpoint to answer ``{"output": "<text>"}``; HTTP 401/403
    map to :class:`AuthError`, 429 to :class:`RateLimitError`, anything
    else unhealthy to :class:`TransportError`.
    """

    def send(payload: Mapping[str, str]) -> str:
        request = urllib.request.Request(
            endpoint.url,
            data=json.dumps(dict(payload)).encode("utf-8"),
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {api_key}",
            },
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=30) as reply:
                body = reply.read().decode("utf-8")
        except urllib.error.HTTPError as exc:
            if exc.code in (401, 403):
                raise AuthError(f"endpoint rejected credentials: {exc.code}") from exc
            if exc.code == 429:
                raise RateLimitError(f"rate limited: {exc.code}") from exc
            raise TransportError(f"HTTP {exc.code}") from exc
        except urllib.error.URLError as exc:
            raise TransportError(str(exc.reason)) from exc
        try:
            return str(json.loads(body)["output"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise TransportError(f"malformed endpoint reply: {body[:120]!r}") from exc

    return send
