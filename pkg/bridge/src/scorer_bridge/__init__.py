"""Bridge between raw article text and the analysis pipeline's inputs.

Chunks cleaned articles at a scorer's token limit, emits chunk-level
probability files, and drives a labelling endpoint with the shipped
prompt fixtures — all testable offline via the stub scorer and an
injected transport.
"""

from .chunking import Chunk, chunk_article, total_tokens
from .errors import (
    AuthError,
    BridgeError,
    CheckpointError,
    InferenceError,
    LabelParseError,
    MissingInputError,
    RateLimitError,
    SchemaError,
    TransportError,
)
from .labeling import (
    EndpointConfig,
    LabelFailure,
    LabelRequest,
    LabelResult,
    build_transport,
    label_articles,
    parse_label,
)
from .prompts import PROMPT_IDS, load_prompt, prompt_path, prompt_sha256
from .scorer import ScorerSpec, StubScorer, chunk_and_score, load_scorer
from .tokens import count_tokens, tokenize

__version__ = "0.1.0"

__all__ = [
    "AuthError",
    "BridgeError",
    "CheckpointError",
    "Chunk",
    "EndpointConfig",
    "InferenceError",
    "LabelFailure",
    "LabelParseError",
    "LabelRequest",
    "LabelResult",
    "MissingInputError",
    "PROMPT_IDS",
    "RateLimitError",
    "SchemaError",
    "ScorerSpec",
    "StubScorer",
    "TransportError",
    "build_transport",
    "chunk_and_score",
    "chunk_article",
    "count_tokens",
    "label_articles",
    "load_prompt",
    "load_scorer",
    "parse_label",
    "prompt_path",
    "prompt_sha256",
    "tokenize",
    "total_tokens",
]
