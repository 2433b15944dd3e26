"""Split article bodies into scorer-sized chunks.

The token limit counts the two special markers every chunk carries, so
a chunk holds at most ``limit - 2`` body tokens.  Chunks are filled
greedily: every chunk except the last is exactly full.  That makes the
article's total consumed-token count ``limit * (n - 1) + last`` with
``last <= limit``, so the chunk count always equals
``ceil(total_tokens / limit)``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SchemaError
from .tokens import SPECIAL_TOKENS_PER_CHUNK, tokenize


@dataclass(frozen=True)
class Chunk:
    """One scorer input: a slice of an article's body tokens."""

    article_id: str
    index: int
    body_tokens: tuple[str, ...]

    @property
    def token_count(self) -> int:
        """Tokens this chunk costs the scorer, special markers included."""
        return len(self.body_tokens) + SPECIAL_TOKENS_PER_CHUNK

    @property
    def text(self) -> str:
        return " ".join(self.body_tokens)


def chunk_article(article_id: str, body: str, limit: int = 512) -> list[Chunk]:
    """Greedy chunking of ``body`` at ``limit`` tokens per chunk."""
    if limit <= SPECIAL_TOKENS_PER_CHUNK:
        raise ValueError(
            f"limit must exceed the {SPECIAL_TOKENS_PER_CHUNK} special tokens, "
            f"got {limit}"
        )
    tokens = tokenize(body)
    if not tokens:
        raise SchemaError(f"article {article_id!r} has no tokens")
    capacity = limit - SPECIAL_TOKENS_PER_CHUNK
    return [
        Chunk(article_id, i, tuple(tokens[start:start + capacity]))
        for i, start in enumerate(range(0, len(tokens), capacity))
    ]


def total_tokens(chunks: list[Chunk]) -> int:
    """Tokens the scorer consumes for an article across all its chunks."""
    return sum(c.token_count for c in chunks)
