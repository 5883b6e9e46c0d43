"""End-to-end orchestration: link, extract, generate, verify, judge, write.

Documents flow through the stages independently, so a worker pool can
process them in parallel against the shared read-only KG; the gateway's
rate limiter is the only global throttle. Results are re-sorted into
corpus order before writing, which keeps mock-mode runs byte-identical
regardless of worker count. Subgraphs are cached after the generate run so
dynamic variants (new reorder seed and temperature) skip all graph work.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from . import prompts
from .config import PipelineConfig
from .dataset_io import (
    DatasetRecord,
    DatasetVariant,
    assemble_record,
    read_split,
    write_manifest,
    write_split,
)
from .judge import run_panel
from .kg_store import parse_ntriples
from .llm_gateway import LlmGateway, MockProvider, OpenAiCompatProvider, ProviderError
from .qa_gen import GenerationConfig, GenerationParseError, QaCandidate, generate_qa
from .seed_linker import SPLITS, DictionaryLinker, SeedDocument, read_corpus
from .stats import (
    KeywordTopicLabeler,
    RunComparison,
    TopicLabeler,
    compare_runs,
    format_comparison_table,
    topic_distribution,
)
from .subgraph import (
    EmptySeedsError,
    SeedSubgraph,
    SubgraphTooLargeError,
    SubgraphTooSmallError,
    build_seed_subgraph,
    subgraph_from_payload,
    subgraph_to_payload,
)
from .verifier import build_reference_maps, verify_path

logger = logging.getLogger(__name__)

CACHE_DIR = "cache"
CACHE_FILE = "subgraphs.jsonl"
CACHE_META = "cache_meta.json"

DROP_REASONS = (
    "no_seeds",
    "subgraph_too_small",
    "subgraph_too_large",
    "generation_failed",
    "empty_generation",
    "no_accepted_candidates",
    "internal_error",
)


class CacheMissingError(RuntimeError):
    """No subgraph cache found; a generate run must happen first."""


@dataclass
class StageCounts:
    input_docs: int = 0
    emitted_docs: int = 0
    dropped: dict[str, int] = field(default_factory=lambda: dict.fromkeys(DROP_REASONS, 0))
    candidates: int = 0
    verified: int = 0
    accepted: int = 0
    label_fallbacks: int = 0

    def check_balance(self) -> None:
        total = self.emitted_docs + sum(self.dropped.values())
        assert total == self.input_docs, (
            f"stage accounting broken: {total} != {self.input_docs}"
        )

    def as_dict(self) -> dict:
        return {
            "input_docs": self.input_docs,
            "emitted_docs": self.emitted_docs,
            "dropped": dict(self.dropped),
            "candidates": self.candidates,
            "verified": self.verified,
            "accepted": self.accepted,
            "label_fallbacks": self.label_fallbacks,
        }


@dataclass
class RunResult:
    variant_id: str
    files: list[Path]
    manifest_path: Path
    counts: StageCounts


def build_gateway(config: PipelineConfig, *, api_key: str | None = None) -> LlmGateway:
    p = config.provider
    if p.mode == "mock":
        # the limiter protects remote APIs; an in-process mock needs none
        return LlmGateway(MockProvider(), max_attempts=p.max_attempts,
                          backoff_seconds=p.backoff_seconds, requests_per_minute=6e6)
    import os

    key = api_key if api_key is not None else os.environ.get(p.api_key_env)
    provider = OpenAiCompatProvider(p.base_url, key, timeout_seconds=p.timeout_seconds)
    return LlmGateway(
        provider,
        max_attempts=p.max_attempts,
        backoff_seconds=p.backoff_seconds,
        requests_per_minute=p.requests_per_minute,
        burst=p.burst,
    )


def default_variant_id(reorder_seed: int, temperature: float) -> str:
    return f"r{reorder_seed}-t{temperature:g}"


def _config_hash(config: PipelineConfig) -> str:
    """Digest of every knob that shapes generated content."""
    relevant = {
        "generator_model": config.generation.model,
        "temperature": config.generation.temperature,
        "reorder_seed": config.generation.reorder_seed,
        "max_pairs": config.generation.max_pairs_per_subgraph,
        "judge_models": list(config.judging.models),
        "judge_temperature": config.judging.temperature,
        "min_component_triples": config.subgraph.min_component_triples,
        "max_subgraph_triples": config.subgraph.max_subgraph_triples,
    }
    return hashlib.sha256(json.dumps(relevant, sort_keys=True).encode("utf-8")).hexdigest()


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- per-document work ---------------------------------------------------------


@dataclass
class DocOutcome:
    doc: SeedDocument
    sub: SeedSubgraph | None = None
    records: list[DatasetRecord] = field(default_factory=list)
    drop_reason: str | None = None
    candidates: int = 0
    verified: int = 0
    accepted: int = 0
    label_fallbacks: int = 0


def _generate_for_subgraph(
    outcome: DocOutcome,
    sub: SeedSubgraph,
    gen_cfg: GenerationConfig,
    gateway: LlmGateway,
    config: PipelineConfig,
    variant_id: str,
) -> None:
    """QA generation, verification, judging, and assembly for one subgraph."""
    batch = None
    for attempt in (1, 2):
        try:
            batch = generate_qa(
                sub,
                gen_cfg,
                gateway,
                max_pairs=config.generation.max_pairs_per_subgraph,
                max_output_tokens=config.generation.max_output_tokens,
            )
            break
        except GenerationParseError as exc:
            logger.warning("generation parse failure (attempt %d): %s", attempt, exc)
        except ProviderError as exc:
            logger.warning("provider failure for doc %s: %s", sub.doc_id, exc)
            break
    if batch is None:
        outcome.drop_reason = "generation_failed"
        return
    if not batch.candidates:
        outcome.drop_reason = "empty_generation"
        return
    outcome.candidates = len(batch.candidates)

    maps = build_reference_maps(sub)
    for candidate in batch.candidates:
        verification = verify_path(candidate, sub, maps)
        if not verification.verified:
            continue
        outcome.verified += 1
        decision = run_panel(
            candidate, gateway, config.judging.models, temperature=config.judging.temperature
        )
        if not decision.accepted:
            continue
        outcome.accepted += 1
        notes: dict = {}
        record = assemble_record(
            candidate,
            sub,
            verification,
            decision,
            variant_id=variant_id,
            maps=maps,
            notes=notes,
        )
        if notes.get("label_fallback"):
            outcome.label_fallbacks += 1
        outcome.records.append(record)
    if not outcome.records:
        outcome.drop_reason = "no_accepted_candidates"


def _process_document(
    doc: SeedDocument,
    linker: DictionaryLinker,
    kg,
    gen_cfg: GenerationConfig,
    gateway: LlmGateway,
    config: PipelineConfig,
    variant_id: str,
) -> DocOutcome:
    outcome = DocOutcome(doc)
    try:
        seeds = linker.link(doc)
        sub = build_seed_subgraph(kg, seeds, config.subgraph)
    except EmptySeedsError:
        outcome.drop_reason = "no_seeds"
        return outcome
    except SubgraphTooSmallError:
        outcome.drop_reason = "subgraph_too_small"
        return outcome
    except SubgraphTooLargeError:
        outcome.drop_reason = "subgraph_too_large"
        return outcome
    except Exception:  # per-document errors never abort the run
        logger.exception("unexpected failure processing doc %s; skipping", doc.doc_id)
        outcome.drop_reason = "internal_error"
        return outcome
    outcome.sub = sub
    try:
        _generate_for_subgraph(outcome, sub, gen_cfg, gateway, config, variant_id)
    except Exception:
        logger.exception("unexpected failure generating for doc %s; skipping", doc.doc_id)
        outcome.records.clear()
        outcome.drop_reason = "internal_error"
    return outcome


def _finalize(
    outcomes: Sequence[DocOutcome],
    config: PipelineConfig,
    variant_id: str,
    extra_manifest: dict,
) -> RunResult:
    counts = StageCounts(input_docs=len(outcomes))
    by_split: dict[str, list[DatasetRecord]] = {s: [] for s in SPLITS}
    for outcome in outcomes:
        counts.candidates += outcome.candidates
        counts.verified += outcome.verified
        counts.accepted += outcome.accepted
        counts.label_fallbacks += outcome.label_fallbacks
        if outcome.drop_reason is not None:
            counts.dropped[outcome.drop_reason] += 1
            continue
        counts.emitted_docs += 1
        by_split[outcome.doc.split_tag].extend(outcome.records)
    counts.check_balance()

    files = []
    split_counts = {}
    for split in SPLITS:
        records = sorted(by_split[split], key=lambda r: r.id)
        split_counts[split] = len(records)
        if not records:
            continue
        variant = DatasetVariant(
            variant_id=variant_id,
            base_split=split,
            reorder_seed=config.generation.reorder_seed,
            temperature=config.generation.temperature,
            records=records,
        )
        files.append(write_split(variant, config.output_dir))

    manifest = {
        "variant_id": variant_id,
        "reorder_seed": config.generation.reorder_seed,
        "temperature": config.generation.temperature,
        "generator_model": config.generation.model,
        "judge_models": list(config.judging.models),
        "split_counts": split_counts,
        "stage_counts": counts.as_dict(),
        "config_hash": _config_hash(config),
        "prompt_hashes": {
            "generation": prompts.prompt_hash(prompts.P1_GENERATION),
            "question_judge": prompts.prompt_hash(prompts.P2_QUESTION),
            "answer_judge": prompts.prompt_hash(prompts.P3_ANSWER),
        },
    }
    manifest.update(extra_manifest)
    manifest_path = write_manifest(config.output_dir, variant_id, manifest)
    if counts.emitted_docs == 0:
        logger.warning(
            "variant %s is empty: no document produced an accepted QA pair", variant_id
        )
    return RunResult(variant_id, files, manifest_path, counts)


def run_generate(config: PipelineConfig, *, variant_id: str | None = None) -> RunResult:
    """Full pipeline over the corpus; also writes the subgraph cache."""
    config.validate()
    variant_id = variant_id or default_variant_id(
        config.generation.reorder_seed, config.generation.temperature
    )
    kg = parse_ntriples(config.kg_path, on_error=config.kg_on_error)
    if config.labels_path is not None:
        kg.load_labels(config.labels_path)
    kg.build_label_index()
    kg_hash = file_sha256(config.kg_path)

    docs = read_corpus(config.corpus_path)
    linker = DictionaryLinker(kg, config.linker)
    gateway = build_gateway(config)
    gen_cfg = GenerationConfig(
        temperature=config.generation.temperature,
        reorder_seed=config.generation.reorder_seed,
        model_id=config.generation.model,
    )

    def work(doc: SeedDocument) -> DocOutcome:
        return _process_document(doc, linker, kg, gen_cfg, gateway, config, variant_id)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(work, docs))
    else:
        outcomes = [work(doc) for doc in docs]

    _write_cache(config.output_dir, outcomes, kg_hash, config)
    return _finalize(outcomes, config, variant_id, {"kg_hash": kg_hash})


def _write_cache(
    out_dir: Path, outcomes: Sequence[DocOutcome], kg_hash: str, config: PipelineConfig
) -> None:
    cache_dir = Path(out_dir) / CACHE_DIR
    cache_dir.mkdir(parents=True, exist_ok=True)
    with open(cache_dir / CACHE_FILE, "w", encoding="utf-8") as fh:
        for outcome in outcomes:
            if outcome.sub is None:
                continue
            payload = subgraph_to_payload(outcome.sub, outcome.doc.split_tag)
            fh.write(json.dumps(payload, ensure_ascii=False) + "\n")
    meta = {
        "kg_hash": kg_hash,
        "subgraph_config": {
            "min_component_triples": config.subgraph.min_component_triples,
            "max_subgraph_triples": config.subgraph.max_subgraph_triples,
        },
    }
    with open(cache_dir / CACHE_META, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def load_cached_subgraphs(out_dir: str | Path) -> list[tuple[SeedSubgraph, str]]:
    cache_path = Path(out_dir) / CACHE_DIR / CACHE_FILE
    if not cache_path.exists():
        raise CacheMissingError(
            f"no subgraph cache at {cache_path}; run the generate stage first"
        )
    subs = []
    with open(cache_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                subs.append(subgraph_from_payload(json.loads(line)))
    return subs


def load_cache_meta(out_dir: str | Path) -> dict:
    meta_path = Path(out_dir) / CACHE_DIR / CACHE_META
    if not meta_path.exists():
        return {}
    return json.loads(meta_path.read_text(encoding="utf-8"))


def run_variant(
    config: PipelineConfig,
    reorder_seed: int,
    temperature: float | None = None,
    *,
    variant_id: str | None = None,
) -> RunResult:
    """Regenerate QA pairs from cached subgraphs under a new (R, T)."""
    temperature = temperature if temperature is not None else config.generation.temperature
    config = copy.copy(config)
    config.generation = replace(
        config.generation, reorder_seed=reorder_seed, temperature=temperature
    )
    variant_id = variant_id or default_variant_id(reorder_seed, temperature)

    cached = load_cached_subgraphs(config.output_dir)
    gateway = build_gateway(config)
    gen_cfg = GenerationConfig(
        temperature=temperature, reorder_seed=reorder_seed, model_id=config.generation.model
    )

    def work(item: tuple[SeedSubgraph, str]) -> DocOutcome:
        sub, split = item
        doc = SeedDocument(sub.doc_id, "(cached)", split)
        outcome = DocOutcome(doc, sub=sub)
        try:
            _generate_for_subgraph(outcome, sub, gen_cfg, gateway, config, variant_id)
        except Exception:
            logger.exception("unexpected failure generating for doc %s; skipping", sub.doc_id)
            outcome.records.clear()
            outcome.drop_reason = "internal_error"
        return outcome

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(work, cached))
    else:
        outcomes = [work(item) for item in cached]
    extra = {"regenerated_from_cache": True}
    meta = load_cache_meta(config.output_dir)
    if "kg_hash" in meta:
        extra["kg_hash"] = meta["kg_hash"]
    return _finalize(outcomes, config, variant_id, extra)


# -- consistency reporting ------------------------------------------------------


def load_variant_candidates(out_dir: str | Path, variant_id: str) -> list[QaCandidate]:
    """Read a variant's records back as comparable QA items.

    Records carry no document id, so the subgraph fingerprint (stable across
    variants, which share cached subgraphs) serves as the alignment key.
    """
    paths = sorted(Path(out_dir).glob(f"{variant_id}.*.jsonl"))
    if not paths:
        raise FileNotFoundError(f"no dataset files for variant {variant_id!r} in {out_dir}")
    placeholder = GenerationConfig(temperature=0.0, reorder_seed=0, model_id="loaded")
    items = []
    for path in paths:
        for record in read_split(path):
            fingerprint = hashlib.sha256(
                json.dumps(record.subgraph).encode("utf-8")
            ).hexdigest()[:16]
            items.append(
                QaCandidate(
                    question=record.question,
                    answer=record.answer_readable,
                    supporting_path=record.supporting_facts,
                    doc_id=fingerprint,
                    config=placeholder,
                )
            )
    return items


def run_consistency(
    out_dir: str | Path,
    variant_ids: Sequence[str],
    labeler: TopicLabeler | None = None,
) -> tuple[list[RunComparison], str]:
    """All pairwise comparisons; returns the rows and the rendered table."""
    if len(variant_ids) < 2:
        raise ValueError("need at least two variants to compare")
    labeler = labeler or KeywordTopicLabeler()
    loaded = {vid: load_variant_candidates(out_dir, vid) for vid in variant_ids}
    rows = []
    for i in range(len(variant_ids)):
        for j in range(i + 1, len(variant_ids)):
            va, vb = variant_ids[i], variant_ids[j]
            rows.append(compare_runs(loaded[va], loaded[vb], labeler, run_a=va, run_b=vb))
    table = format_comparison_table(rows)
    out = Path(out_dir)
    with open(out / "consistency.json", "w", encoding="utf-8") as fh:
        json.dump([r.to_json_dict() for r in rows], fh, indent=2)
        fh.write("\n")
    (out / "consistency.txt").write_text(table, encoding="utf-8")
    return rows, table


def variant_summary(out_dir: str | Path, variant_id: str) -> dict:
    """Topic distribution and basic size statistics for one variant."""
    items = load_variant_candidates(out_dir, variant_id)
    labeler = KeywordTopicLabeler()
    dist = topic_distribution([c.question for c in items], labeler)
    paths = sorted(Path(out_dir).glob(f"{variant_id}.*.jsonl"))
    sizes = []
    for path in paths:
        for record in read_split(path):
            sizes.append(record.subgraph_size)
    return {
        "variant_id": variant_id,
        "records": len(items),
        "topics": dict(zip(dist.labels, dist.counts)),
        "mean_subgraph_size": (sum(sizes) / len(sizes)) if sizes else 0.0,
        "files": [p.name for p in paths],
    }
