#!/usr/bin/env python3
"""Regenerate the committed fixtures/ bundle.

The fixtures are a small synthetic desk: 160 trading days, three gilts, two
news topics, plus the usual dirt (malformed trade rows, short bodies, a
blocked topic).  Everything is seeded, so reruns are byte-identical and the
files can live in git.
"""

from __future__ import annotations

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from bondlab.synthetic import SyntheticConfig, generate, write_bundle

FIXTURE_CONFIG = SyntheticConfig(seed=11, n_days=160)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        type=pathlib.Path,
        default=pathlib.Path(__file__).resolve().parent.parent / "fixtures",
        help="directory to write the bundle into (default: fixtures/)",
    )
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    bundle = generate(FIXTURE_CONFIG)
    paths = write_bundle(bundle, args.out)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
