"""Command-line interface.

Subcommands cover corpus import, the full generate run, dynamic variant
regeneration from the subgraph cache, cross-variant consistency reports,
offline re-verification of a variant's grounding, and per-variant summary
statistics. Exit codes: 0 success, 1 usage or configuration problem,
2 runtime failure.
"""

from __future__ import annotations

import json
import logging
import random
import sys
from pathlib import Path

import click

from .config import ConfigError, load_config
from .dataset_io import read_split, reverify_record
from .kg_store import NTriplesSyntaxError
from .pipeline import (
    CacheMissingError,
    RunResult,
    run_consistency,
    run_generate,
    run_variant,
    variant_summary,
)
from .seed_linker import SPLITS, SeedDocument, check_split_integrity, write_corpus

logger = logging.getLogger(__name__)


def _overrides(pairs: tuple[str, ...]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise click.UsageError(f"--set expects section.key=value, got {pair!r}")
        out[key.strip()] = value.strip()
    return out


def _echo_result(result: RunResult) -> None:
    counts = result.counts
    click.echo(f"variant {result.variant_id}:")
    click.echo(
        f"  docs: {counts.input_docs} in, {counts.emitted_docs} emitted, "
        + ", ".join(f"{k}={v}" for k, v in counts.dropped.items() if v)
    )
    click.echo(
        f"  candidates: {counts.candidates} generated, {counts.verified} verified, "
        f"{counts.accepted} accepted"
    )
    for path in result.files:
        click.echo(f"  wrote {path}")
    click.echo(f"  wrote {result.manifest_path}")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def cli(verbose: bool) -> None:
    """Generate KG-grounded QA datasets and analyze their consistency."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command("import-corpus")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--text-key", default="text", show_default=True)
@click.option("--id-key", default="doc_id", show_default=True)
@click.option("--split-key", default=None, help="Input key holding the split name.")
@click.option("--default-split", default=None, type=click.Choice(SPLITS))
@click.option(
    "--split-ratios",
    default="0.8,0.1,0.1",
    show_default=True,
    help="train,validation,test ratios used when no split key is given.",
)
@click.option("--seed", default=0, show_default=True, help="Shuffle seed for ratio splits.")
def import_corpus(
    input_path: str,
    output_path: str,
    text_key: str,
    id_key: str,
    split_key: str | None,
    default_split: str | None,
    split_ratios: str,
    seed: int,
) -> None:
    """Convert a JSONL text collection into the corpus exchange format."""
    split_alias = {"val": "validation", "valid": "validation", "dev": "validation"}
    rows = []
    with open(input_path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                text = row[text_key]
                doc_id = str(row[id_key])
            except (json.JSONDecodeError, KeyError) as exc:
                raise click.UsageError(f"{input_path}:{line_no}: {exc}")
            split = None
            if split_key is not None:
                raw_split = str(row.get(split_key, "")).strip().casefold()
                split = split_alias.get(raw_split, raw_split)
                if split not in SPLITS:
                    raise click.UsageError(
                        f"{input_path}:{line_no}: unknown split {raw_split!r}"
                    )
            rows.append((doc_id, text, split))

    if split_key is None and default_split is None:
        try:
            ratios = tuple(float(x) for x in split_ratios.split(","))
            assert len(ratios) == 3 and all(r >= 0 for r in ratios) and sum(ratios) > 0
        except (ValueError, AssertionError):
            raise click.UsageError(f"bad --split-ratios {split_ratios!r}")
        order = list(range(len(rows)))
        random.Random(seed).shuffle(order)
        total = sum(ratios)
        n_train = int(len(rows) * ratios[0] / total)
        n_val = int(len(rows) * ratios[1] / total)
        assigned: dict[int, str] = {}
        for rank, idx in enumerate(order):
            if rank < n_train:
                assigned[idx] = "train"
            elif rank < n_train + n_val:
                assigned[idx] = "validation"
            else:
                assigned[idx] = "test"
        rows = [(d, t, assigned[i]) for i, (d, t, _) in enumerate(rows)]
    else:
        rows = [(d, t, s or default_split or "train") for d, t, s in rows]

    docs = [SeedDocument(doc_id, text, split) for doc_id, text, split in rows]
    check_split_integrity(docs)
    out = Path(output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        count = write_corpus(docs, fh)
    click.echo(f"imported {count} documents into {out}")


_CONFIG_OPTION = click.option(
    "-c", "--config", "config_path", default=None, type=click.Path(), help="INI config file."
)
_SET_OPTION = click.option(
    "--set", "set_pairs", multiple=True, metavar="SECTION.KEY=VALUE", help="Override any key."
)


@cli.command()
@_CONFIG_OPTION
@_SET_OPTION
@click.option("--reorder-seed", default=None, type=int)
@click.option("--temperature", default=None, type=float)
@click.option("--variant-id", default=None)
@click.option("--output-dir", default=None, type=click.Path())
@click.option("--workers", default=None, type=int)
def generate(
    config_path: str | None,
    set_pairs: tuple[str, ...],
    reorder_seed: int | None,
    temperature: float | None,
    variant_id: str | None,
    output_dir: str | None,
    workers: int | None,
) -> None:
    """Run the full pipeline over the seed corpus."""
    overrides = _overrides(set_pairs)
    if reorder_seed is not None:
        overrides["generation.reorder_seed"] = str(reorder_seed)
    if temperature is not None:
        overrides["generation.temperature"] = str(temperature)
    if output_dir is not None:
        overrides["paths.output_dir"] = output_dir
    if workers is not None:
        overrides["run.workers"] = str(workers)
    config = load_config(config_path, overrides=overrides)
    result = run_generate(config, variant_id=variant_id)
    _echo_result(result)


@cli.command()
@_CONFIG_OPTION
@_SET_OPTION
@click.option("--reorder-seed", required=True, type=int, help="New reordering seed R.")
@click.option("--temperature", default=None, type=float, help="New temperature T.")
@click.option("--variant-id", default=None)
@click.option("--output-dir", default=None, type=click.Path())
def variant(
    config_path: str | None,
    set_pairs: tuple[str, ...],
    reorder_seed: int,
    temperature: float | None,
    variant_id: str | None,
    output_dir: str | None,
) -> None:
    """Regenerate QA pairs from cached subgraphs under a new (R, T)."""
    overrides = _overrides(set_pairs)
    if output_dir is not None:
        overrides["paths.output_dir"] = output_dir
    config = load_config(config_path, overrides=overrides)
    result = run_variant(config, reorder_seed, temperature, variant_id=variant_id)
    _echo_result(result)


@cli.command()
@_CONFIG_OPTION
@click.option("--output-dir", default=None, type=click.Path())
@click.argument("variant_ids", nargs=-1)
def consistency(
    config_path: str | None, output_dir: str | None, variant_ids: tuple[str, ...]
) -> None:
    """Pairwise consistency report across two or more variants."""
    if len(variant_ids) < 2:
        raise click.UsageError("need at least two variant ids")
    out_dir = _resolve_output_dir(config_path, output_dir)
    _, table = run_consistency(out_dir, variant_ids)
    click.echo(table, nl=False)
    click.echo(f"wrote {out_dir / 'consistency.json'} and {out_dir / 'consistency.txt'}")


@cli.command()
@_CONFIG_OPTION
@click.option("--output-dir", default=None, type=click.Path())
@click.argument("variant_id")
def verify(config_path: str | None, output_dir: str | None, variant_id: str) -> None:
    """Re-run the grounding check over an existing variant's records."""
    out_dir = _resolve_output_dir(config_path, output_dir)
    paths = sorted(out_dir.glob(f"{variant_id}.*.jsonl"))
    if not paths:
        raise click.UsageError(f"no dataset files for variant {variant_id!r} in {out_dir}")
    total = failed = 0
    for path in paths:
        for record in read_split(path):
            total += 1
            if not reverify_record(record):
                failed += 1
                click.echo(f"FAIL {record.id} ({path.name})")
    click.echo(f"verified {total - failed}/{total} records")


@cli.command()
@_CONFIG_OPTION
@click.option("--output-dir", default=None, type=click.Path())
@click.argument("variant_id")
def stats(config_path: str | None, output_dir: str | None, variant_id: str) -> None:
    """Topic distribution and size summary for one variant."""
    out_dir = _resolve_output_dir(config_path, output_dir)
    summary = variant_summary(out_dir, variant_id)
    click.echo(json.dumps(summary, indent=2))


def _resolve_output_dir(config_path: str | None, output_dir: str | None) -> Path:
    if output_dir is not None:
        return Path(output_dir)
    config = load_config(config_path)
    return config.output_dir


def main(argv: list[str] | None = None) -> int:
    """Run the CLI with explicit exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return 1
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 1
    except NTriplesSyntaxError as exc:
        click.echo(f"KG parse error: {exc}", err=True)
        return 2
    except (CacheMissingError, FileNotFoundError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except click.Abort:
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary: anything else is a runtime failure
        logger.exception("fatal error")
        click.echo(f"fatal: {exc}", err=True)
        return 2
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
