"""Deterministic word-level tokenizer.

Stands in for a subword vocabulary: real checkpoints bring their own
tokenizer, but the chunking contract (fill up to the limit, count the
special markers against it) only needs *a* stable token stream.  Words
and punctuation runs are separate tokens; whitespace never is.
"""

from __future__ import annotations

import re

# Sequence-level markers, one pair per chunk.  They count toward the
# chunk token limit.
CLS = "[CLS]"
SEP = "[SEP]"
SPECIAL_TOKENS_PER_CHUNK = 2

_TOKEN = re.compile(r"\w+|[^\w\s]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Body tokens for ``text`` (no special markers)."""
    return _TOKEN.findall(text)


def count_tokens(text: str) -> int:
    return len(tokenize(text))
