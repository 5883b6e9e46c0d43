#!/usr/bin/env python3
"""Build a synthetic KG + seed corpus + ready-to-run mock config.

The resulting directory can be fed straight to the CLI:

    python3 scripts/make_fixtures.py --out demo
    kgqagen generate -c demo/config.ini
"""

import argparse
from pathlib import Path

from kgqagen.synthetic import write_fixture_tree


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("demo"))
    parser.add_argument("--entities", type=int, default=60)
    parser.add_argument("--triples", type=int, default=200)
    parser.add_argument("--docs", type=int, default=20)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    paths = write_fixture_tree(
        args.out,
        n_entities=args.entities,
        n_triples=args.triples,
        n_docs=args.docs,
        seed=args.seed,
    )
    for name, path in paths.items():
        print(f"{name}: {path}")


if __name__ == "__main__":
    main()
