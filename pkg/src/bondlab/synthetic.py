"""Seeded synthetic fixture generator: a latent daily "optimism" factor
drives news sentiment and, with the opposite sign, next-day bond returns.

The bond-aware model observes the latent factor through article-level
noise with the sign already translated into price direction, so its
scores positively predict next-day returns; a permuted baseline carries
the same marginal distribution with the article assignment shuffled,
destroying the alignment.  The generator emits raw wire-format inputs
(trade CSV, calendar, article JSONL, probability JSONL) so the whole
pipeline can run end-to-end offline.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .calendar import TradingCalendar, weekday_calendar
from .market_data import TRADE_HEADER
from .news_corpus import article_id_for
from .sentiment import ChunkProbabilities

SIGNAL_MODEL = "signal"
PERMUTED_MODEL = "permuted"


@dataclass(frozen=True)
class SyntheticConfig:
    seed: int = 7
    n_days: int = 500
    start_date: dt.date = dt.date(2023, 1, 2)
    instruments: tuple[str, ...] = ("UKT2Y", "UKT10Y", "UKT30Y")
    topics: tuple[str, ...] = ("gilts", "inflation")
    # Latent optimism factor z: AR(1).
    rho: float = 0.8
    latent_sigma: float = 0.3
    # Next-day log return: kappa*(ln 100 - ln p) - beta_i * z + noise.
    kappa: float = 0.05
    beta: float = 0.012
    beta_spread: float = 0.15          # per-instrument multiplier range ±
    return_noise: float = 0.0008
    # News stream.
    articles_per_day: tuple[int, int] = (2, 6)
    missing_day_fraction: float = 0.05
    weekend_article_fraction: float = 0.08
    sentiment_obs_noise: float = 0.15
    topic_noise: float = 0.05
    chunk_noise: float = 0.05
    multi_chunk_fraction: float = 0.12
    neutral_share: tuple[float, float] = (0.10, 0.30)
    # Trades.
    trades_per_day: tuple[int, int] = (5, 12)
    intraday_noise: float = 0.0004
    skip_day_fraction: float = 0.01
    weekend_trade_fraction: float = 0.02
    # Deliberate dirt for the cleaning/ingest paths.
    short_body_fraction: float = 0.02
    bad_date_fraction: float = 0.01
    blocked_topic: str = "football"
    blocked_topic_fraction: float = 0.02
    malformed_trade_rows: int = 3


@dataclass
class SyntheticBundle:
    """Everything the generator produced, raw and ground-truth."""

    config: SyntheticConfig
    calendar: TradingCalendar
    latent: np.ndarray                       # z per trading day
    day_prices: dict[str, np.ndarray]        # mid price per trading day
    trade_rows: list[list[str]]              # raw CSV rows (may be dirty)
    articles: list[dict]                     # raw JSONL records (may be dirty)
    signal_chunks: list[ChunkProbabilities]
    permuted_chunks: list[ChunkProbabilities]
    clean_article_ids: list[str] = field(default_factory=list)


_BODY_SENTENCES = (
    "Gilt desks spent the session weighing the latest auction cover ratios "
    "against a backdrop of shifting rate expectations.",
    "Dealers reported two-way flow across the curve, with the long end "
    "seeing the heaviest turnover into the close.",
    "Index-linked issues outperformed nominals as breakeven rates drifted "
    "through the afternoon fixing window.",
    "The debt management office's remit commentary drew attention to "
    "supply concentration in the belly of the curve.",
    "Swap spreads tightened modestly while repo specialness in the "
    "cheapest-to-deliver issue kept futures basis traders busy.",
    "Pension fund rebalancing flows were cited by several desks as the "
    "marginal driver of duration demand this week.",
    "Money markets continued to reprice the path of policy, dragging the "
    "front end of the sovereign curve with them.",
    "Cross-market relative value versus bunds and treasuries remained the "
    "dominant theme for fast-money accounts.",
)


def _article_body(rng: np.random.Generator, serial: int) -> str:
    """Deterministic filler body comfortably past the length floor."""
    order = rng.permutation(len(_BODY_SENTENCES))
    sentences = [_BODY_SENTENCES[i] for i in order[:6]]
    sentences.append(
        f"Desk note {serial}: positioning surveys suggest conviction remains "
        "light, and liquidity conditions were described as adequate but "
        "headline-sensitive by several market makers."
    )
    return " ".join(sentences)


def _probability_triple(score: float, neutral: float) -> tuple[float, float, float]:
    """(p_neg, p_neu, p_pos) whose normalized difference is exactly
    ``score`` given the neutral share."""
    p_pos = (1.0 - neutral) * (1.0 + score) / 2.0
    p_neg = (1.0 - neutral) * (1.0 - score) / 2.0
    return p_neg, neutral, p_pos


def _chunks_for_article(
    article_id: str,
    model_id: str,
    base_score: float,
    n_chunks: int,
    neutral: float,
    rng: np.random.Generator,
    chunk_noise: float,
) -> list[ChunkProbabilities]:
    chunks = []
    for index in range(n_chunks):
        s = float(np.clip(base_score + rng.normal(0.0, chunk_noise), -0.98, 0.98))
        p_neg, p_neu, p_pos = _probability_triple(s, neutral)
        chunks.append(ChunkProbabilities(
            article_id=article_id,
            model_id=model_id,
            chunk_index=index,
            p_negative=p_neg,
            p_neutral=p_neu,
            p_positive=p_pos,
        ))
    return chunks


def generate(config: SyntheticConfig = SyntheticConfig()) -> SyntheticBundle:
    """Build the full bundle deterministically from the config seed."""
    streams = np.random.SeedSequence(config.seed).spawn(8)
    latent_rng, price_rng, article_rng, chunk_rng, perm_rng, trade_rng, \
        dirt_rng, perm_chunk_rng = [np.random.default_rng(s) for s in streams]

    approx_span = int(math.ceil(config.n_days * 7 / 5)) + 14
    wide = weekday_calendar(config.start_date,
                            config.start_date + dt.timedelta(days=approx_span))
    days = list(wide)[: config.n_days]
    calendar = TradingCalendar.from_dates(days)
    n = len(days)

    # Latent optimism factor (one market-wide stream).
    z = np.zeros(n)
    stationary_sigma = config.latent_sigma / math.sqrt(1.0 - config.rho**2)
    z[0] = latent_rng.normal(0.0, stationary_sigma)
    for t in range(1, n):
        z[t] = config.rho * z[t - 1] + latent_rng.normal(0.0, config.latent_sigma)

    # Prices: optimism pushes bond prices DOWN the next day.
    day_prices: dict[str, np.ndarray] = {}
    for k, instrument in enumerate(config.instruments):
        beta_i = config.beta * (1.0 + config.beta_spread * (k - 1))
        prices = np.zeros(n)
        prices[0] = 100.0 + price_rng.normal(0.0, 0.5)
        for t in range(n - 1):
            reversion = config.kappa * (math.log(100.0) - math.log(prices[t]))
            ret = reversion - beta_i * z[t] \
                + price_rng.normal(0.0, config.return_noise)
            prices[t + 1] = prices[t] * math.exp(ret)
        day_prices[instrument] = prices

    # Articles: sentiment observes -z (bond-price direction) with noise.
    articles: list[dict] = []
    clean_ids: list[str] = []
    signal_chunks: list[ChunkProbabilities] = []
    clean_records: list[tuple[str, float]] = []   # (article_id, base score)
    topic_noise_by_day = {
        topic: article_rng.normal(0.0, config.topic_noise, n)
        for topic in config.topics
    }
    serial = 0
    for t, day in enumerate(days):
        if article_rng.random() < config.missing_day_fraction:
            continue
        count = int(article_rng.integers(config.articles_per_day[0],
                                         config.articles_per_day[1] + 1))
        for _ in range(count):
            serial += 1
            topic = config.topics[int(article_rng.integers(len(config.topics)))]
            published = day
            if article_rng.random() < config.weekend_article_fraction:
                # Back-date onto the preceding weekend; aligns forward to
                # this trading day unless that weekend precedes day one.
                back = int(article_rng.integers(1, 3))
                candidate = day - dt.timedelta(days=back)
                if candidate.weekday() >= 5 and candidate > days[0]:
                    published = candidate
            title = f"Session wrap {serial}: {topic} desk notes for {published.isoformat()}"
            body = _article_body(article_rng, serial)
            record = {
                "title": title,
                "date": published.isoformat(),
                "topic": topic,
                "text": body,
            }

            dirty = False
            roll = dirt_rng.random()
            if roll < config.short_body_fraction:
                record["text"] = "Too short to score."
                dirty = True
            elif roll < config.short_body_fraction + config.bad_date_fraction:
                record["date"] = "not-a-date"
                dirty = True
            elif roll < (config.short_body_fraction + config.bad_date_fraction
                         + config.blocked_topic_fraction):
                record["topic"] = config.blocked_topic
                dirty = True
            articles.append(record)
            if dirty:
                continue

            article_id = article_id_for(title)
            base = math.tanh(-(z[t] + topic_noise_by_day[topic][t]))
            base = float(np.clip(base + article_rng.normal(0.0, config.sentiment_obs_noise),
                                 -0.98, 0.98))
            clean_ids.append(article_id)
            clean_records.append((article_id, base))
            n_chunks = 1
            if chunk_rng.random() < config.multi_chunk_fraction:
                n_chunks = int(chunk_rng.integers(2, 4))
            neutral = float(chunk_rng.uniform(*config.neutral_share))
            signal_chunks.extend(_chunks_for_article(
                article_id, SIGNAL_MODEL, base, n_chunks, neutral,
                chunk_rng, config.chunk_noise))

    # Permuted baseline: same marginal score distribution, shuffled
    # article assignment.
    permutation = perm_rng.permutation(len(clean_records))
    permuted_chunks: list[ChunkProbabilities] = []
    for (article_id, _), source_index in zip(clean_records, permutation):
        base = clean_records[source_index][1]
        n_chunks = 1
        if perm_chunk_rng.random() < config.multi_chunk_fraction:
            n_chunks = int(perm_chunk_rng.integers(2, 4))
        neutral = float(perm_chunk_rng.uniform(*config.neutral_share))
        permuted_chunks.extend(_chunks_for_article(
            article_id, PERMUTED_MODEL, base, n_chunks, neutral,
            perm_chunk_rng, config.chunk_noise))

    # Trades around each day's mid price.
    trade_rows: list[list[str]] = []
    for instrument in config.instruments:
        prices = day_prices[instrument]
        for t, day in enumerate(days):
            if trade_rng.random() < config.skip_day_fraction:
                continue
            count = int(trade_rng.integers(config.trades_per_day[0],
                                           config.trades_per_day[1] + 1))
            minutes = np.sort(trade_rng.integers(0, 450, count))
            trade_day = day
            if trade_rng.random() < config.weekend_trade_fraction and t > 0:
                saturday = day - dt.timedelta(days=day.weekday() + 2)
                if saturday > days[0]:
                    trade_day = saturday
            for minute in minutes:
                stamp = dt.datetime.combine(
                    trade_day, dt.time(9, 0), tzinfo=dt.timezone.utc
                ) + dt.timedelta(minutes=int(minute))
                price = prices[t] * math.exp(
                    trade_rng.normal(0.0, config.intraday_noise))
                volume = float(np.round(np.exp(trade_rng.normal(13.0, 1.0)), 2))
                trade_rows.append([
                    instrument,
                    stamp.isoformat().replace("+00:00", "Z"),
                    repr(float(price)),
                    repr(volume),
                ])
    for k in range(config.malformed_trade_rows):
        trade_rows.append(["UKT2Y", "2023-99-99T09:00:00Z", "100.0", "1.0"]
                          if k % 2 == 0 else
                          ["UKT10Y", "2023-06-01T10:00:00Z", "-5.0", "1.0"])

    return SyntheticBundle(
        config=config,
        calendar=calendar,
        latent=z,
        day_prices=day_prices,
        trade_rows=trade_rows,
        articles=articles,
        signal_chunks=signal_chunks,
        permuted_chunks=permuted_chunks,
        clean_article_ids=clean_ids,
    )


# ---------------------------------------------------------------------------
# Fixture emission
# ---------------------------------------------------------------------------

def write_bundle(bundle: SyntheticBundle, directory: str | Path) -> dict[str, Path]:
    """Write raw wire-format inputs; returns the paths keyed by role."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "trades": directory / "trades.csv",
        "calendar": directory / "calendar.txt",
        "articles": directory / "articles.jsonl",
        "probabilities_signal": directory / "probs_signal.jsonl",
        "probabilities_permuted": directory / "probs_permuted.jsonl",
    }
    with paths["trades"].open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRADE_HEADER)
        writer.writerows(bundle.trade_rows)
    paths["calendar"].write_text(
        "".join(f"{day.isoformat()}\n" for day in bundle.calendar))
    with paths["articles"].open("w") as fh:
        for record in bundle.articles:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    for key, chunks in (("probabilities_signal", bundle.signal_chunks),
                        ("probabilities_permuted", bundle.permuted_chunks)):
        with paths[key].open("w") as fh:
            for chunk in chunks:
                fh.write(json.dumps({
                    "article_id": chunk.article_id,
                    "model_id": chunk.model_id,
                    "chunk_index": chunk.chunk_index,
                    "p_negative": chunk.p_negative,
                    "p_neutral": chunk.p_neutral,
                    "p_positive": chunk.p_positive,
                }, sort_keys=True) + "\n")
    return paths


def permuted_daily_shuffle(values: Sequence[float], seed: int) -> list[float]:
    """Seeded shuffle helper for building null-baseline series in tests."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(values))
    return [values[i] for i in order]
