"""Labelling prompt fixtures.

Prompts are versioned files under ``prompts/``; a label file records
the prompt id *and* the SHA-256 of the prompt bytes, so every label is
traceable to the exact instruction text that produced it.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

from .errors import MissingInputError

PROMPT_IDS = ("bond_analyst_v1", "instruct_v1")
_PROMPTS_DIR = Path(__file__).resolve().parent.parent.parent / "prompts"


def prompts_dir() -> Path:
    return _PROMPTS_DIR


def prompt_path(prompt_id: str, directory: Path | None = None) -> Path:
    if prompt_id not in PROMPT_IDS:
        raise ValueError(f"unknown prompt id {prompt_id!r}; known: {PROMPT_IDS}")
    return (directory or _PROMPTS_DIR) / f"{prompt_id}.txt"


def load_prompt(prompt_id: str, directory: Path | None = None) -> str:
    path = prompt_path(prompt_id, directory)
    if not path.is_file():
        raise MissingInputError(f"prompt fixture not found: {path}")
    return path.read_text(encoding="utf-8")


def prompt_sha256(prompt_text: str) -> str:
    return hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()
