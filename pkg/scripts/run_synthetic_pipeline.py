#!/usr/bin/env python3
"""Generate a full-size synthetic desk and run every pipeline stage on it.

This is the end-to-end demo: it writes a fresh bundle into a scratch
directory, builds a config for it, then walks ingest -> score-aggregate ->
events -> forecast -> dm -> report exactly as the CLI would.  Expect a few
minutes of LSTM training in the forecast stage.
"""

from __future__ import annotations

import argparse
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from bondlab.cli import main as bondlab_main
from bondlab.synthetic import SyntheticConfig, generate, write_bundle

CONFIG_TEMPLATE = """\
workers = {workers}

[paths]
trades = "trades.csv"
calendar = "calendar.txt"
articles = "articles.jsonl"
out = "out"

[models]
signal = "probs_signal.jsonl"
permuted = "probs_permuted.jsonl"

[corpus]
topic_blocklist = ["football"]

[forecast]
seed = {seed}
budget = {budget}
max_epochs = 150
patience = 20

[forecast.space]
hidden_size = [8, 32]
num_layers = [1, 2]
dropout = [0.0, 0.3]
learning_rate = [1e-3, 2e-2]
weight_decay = [1e-7, 1e-3]
history_length = [5, 20]
"""


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dir", type=pathlib.Path, default=pathlib.Path("synthetic_run"))
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--days", type=int, default=500)
    parser.add_argument("--budget", type=int, default=8)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    args.dir.mkdir(parents=True, exist_ok=True)
    print(f"generating {args.days} trading days (seed {args.seed}) ...")
    bundle = generate(SyntheticConfig(seed=args.seed, n_days=args.days))
    write_bundle(bundle, args.dir)
    config_path = args.dir / "config.toml"
    config_path.write_text(
        CONFIG_TEMPLATE.format(seed=args.seed, budget=args.budget, workers=args.workers)
    )

    for command in ("ingest", "score-aggregate", "events", "forecast", "dm", "report"):
        start = time.time()
        code = bondlab_main([command, "--config", str(config_path)])
        print(f"{command}: exit {code} ({time.time() - start:.1f}s)")
        if code != 0:
            return code
    print(f"artifacts in {args.dir / 'out'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
