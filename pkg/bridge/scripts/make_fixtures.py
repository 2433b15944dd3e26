#!/usr/bin/env python3
"""Regenerate fixtures/articles_50.jsonl (deterministic, seeded).

Fifty cleaned-corpus records whose body lengths bracket the chunking
boundaries: single-token bodies, bodies exactly at one-chunk capacity,
one token over it, multi-chunk bodies, and a spread of ordinary sizes.
"""

from __future__ import annotations

import datetime as dt
import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures" / "articles_50.jsonl"

WORDS = (
    "gilt yield auction coupon duration curve spread issuance treasury "
    "budget deficit inflation index swap rate hike cut pause statement "
    "minutes vote supply demand tender syndication maturity benchmark "
    "linker nominal real basis point rally selloff haven flows repo"
).split()

TOPICS = ("gilts", "inflation", "rates", "auctions")

# Body token counts that pin the chunk-count arithmetic: at a
# 512-token chunk limit a chunk holds 510 body tokens.
BOUNDARY_COUNTS = (1, 5, 509, 510, 511, 512, 1020, 1021, 1022, 1200)


def body_of(n_words: int, rng: random.Random) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(n_words))


def main() -> None:
    rng = random.Random(2024)
    counts = list(BOUNDARY_COUNTS)
    while len(counts) < 50:
        counts.append(rng.randint(20, 2600))
    start = dt.date(2024, 1, 2)
    records = []
    for i, n_words in enumerate(counts):
        day = start + dt.timedelta(days=i)
        records.append({
            "article_id": f"fx{i:04d}",
            "title": f"Fixture article {i}",
            "date": day.isoformat(),
            "topic": TOPICS[i % len(TOPICS)],
            "text": body_of(n_words, rng),
            "aligned_date": day.isoformat(),
        })
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with OUT.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"wrote {len(records)} articles -> {OUT}")


if __name__ == "__main__":
    main()
