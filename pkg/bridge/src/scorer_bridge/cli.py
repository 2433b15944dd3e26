"""Command-line front end: ``score`` and ``label``.

Exit codes: 0 success; 2 missing input file, prompt, or credential;
3 input schema error; 4 endpoint auth failure; 5 checkpoint load
failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import (
    AuthError,
    CheckpointError,
    MissingInputError,
    SchemaError,
)
from .files import (
    append_labels,
    append_probabilities,
    iter_not_yet,
    labelled_article_ids,
    read_corpus_jsonl,
    scored_article_ids,
)
from .labeling import EndpointConfig, LabelRequest, build_transport, label_articles
from .prompts import PROMPT_IDS
from .scorer import ScorerSpec, chunk_and_score, load_scorer

logger = logging.getLogger(__name__)

API_KEY_ENV = "SCORER_BRIDGE_API_KEY"

EXIT_OK = 0
EXIT_MISSING_INPUT = 2
EXIT_SCHEMA = 3
EXIT_AUTH = 4
EXIT_CHECKPOINT = 5


def cmd_score(args: argparse.Namespace) -> int:
    spec = ScorerSpec(
        model_id=args.model,
        checkpoint=args.checkpoint,
        max_tokens_per_chunk=args.limit,
        batch_size=args.batch_size,
    )
    scorer = load_scorer(spec)
    corpus = read_corpus_jsonl(args.infile)
    pending = iter_not_yet(corpus, scored_article_ids(args.outfile))
    written = append_probabilities(chunk_and_score(pending, spec, scorer),
                                   args.outfile)
    print(f"score: {written} chunk records -> {args.outfile}")
    return EXIT_OK


def cmd_label(args: argparse.Namespace) -> int:
    api_key = os.environ.get(API_KEY_ENV, "")
    if not api_key:
        raise MissingInputError(f"set {API_KEY_ENV} to call the endpoint")
    template = LabelRequest(article_id="", prompt_id=args.prompt, body="",
                            retry_budget=args.retries)
    endpoint = EndpointConfig(url=args.endpoint, model=args.model,
                              workers=args.workers)
    transport = build_transport(endpoint, api_key)
    corpus = read_corpus_jsonl(args.infile)
    pending = iter_not_yet(corpus, labelled_article_ids(args.outfile))
    failures_path = args.failures or f"{args.outfile}.failures.jsonl"
    labelled, failed = append_labels(
        label_articles(pending, template, endpoint, transport),
        args.outfile,
        failures_path,
    )
    print(f"label: {labelled} labelled, {failed} failed -> {args.outfile}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scorer-bridge",
        description="Produce sentiment probability and label files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    score = sub.add_parser("score", help="chunk articles and emit probabilities")
    score.add_argument("--model", required=True, help="model_id stamped on records")
    score.add_argument("--in", dest="infile", required=True,
                       help="cleaned-corpus JSON-lines")
    score.add_argument("--out", dest="outfile", required=True,
                       help="probability JSON-lines (appended)")
    score.add_argument("--checkpoint", default="stub:fixed",
                       help="checkpoint reference (default offline stub)")
    score.add_argument("--limit", type=int, default=512,
                       help="tokens per chunk, special markers included")
    score.add_argument("--batch-size", type=int, default=8)
    score.set_defaults(func=cmd_score)

    label = sub.add_parser("label", help="label articles via an LLM endpoint")
    label.add_argument("--prompt", required=True, choices=PROMPT_IDS)
    label.add_argument("--in", dest="infile", required=True,
                       help="cleaned-corpus JSON-lines")
    label.add_argument("--out", dest="outfile", required=True,
                       help="label JSON-lines (appended)")
    label.add_argument("--endpoint", required=True, help="endpoint URL")
    label.add_argument("--model", default="gpt-4.1-nano",
                       help="model name sent to the endpoint")
    label.add_argument("--retries", type=int, default=3)
    label.add_argument("--workers", type=int, default=1)
    label.add_argument("--failures", default=None,
                       help="failure records (default OUT.failures.jsonl)")
    label.set_defaults(func=cmd_label)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except AuthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_AUTH
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT


if __name__ == "__main__":
    raise SystemExit(main())
