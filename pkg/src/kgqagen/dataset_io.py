"""Dataset record assembly and split file output.

Records carry the full attribute schema: question/answer in entity-name,
readable, and URI forms, the supporting facts in both label and URI
representations (pairwise aligned), the grounding subgraph dump, and every
judge's four flags with rationales. Output is newline-delimited JSON with
a stable field order; record ids are content-addressed so regenerated
variants can be diffed across runs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from .judge import PanelDecision
from .kg_store import local_name, readable_entity, readable_predicate
from .qa_gen import QaCandidate
from .stats import normalize_question
from .subgraph import SeedSubgraph, subgraph_dump
from .verifier import ReferenceMaps, VerificationOutcome, build_reference_maps, _norm

BASE_FIELDS = (
    "id",
    "question",
    "answer",
    "answer_readable",
    "answer_uri",
    "supporting_facts",
    "supporting_facts_uri",
    "subgraph",
    "subgraph_size",
)

JUDGE_FIELD_KINDS = ("logical_structure", "redundancy", "answer_support", "answer_adequacy")


def judge_field_names(n_judges: int) -> list[str]:
    """Per-judge flag/reasoning field names, judge index 1-based in panel order."""
    names = []
    for kind in JUDGE_FIELD_KINDS:
        for n in range(1, n_judges + 1):
            names.append(f"{kind}_flag_{n}")
            names.append(f"{kind}_reasoning_{n}")
    return names


def record_field_names(n_judges: int) -> list[str]:
    return list(BASE_FIELDS) + judge_field_names(n_judges)


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    question: str
    answer: str
    answer_readable: str
    answer_uri: str
    supporting_facts: tuple[tuple[str, str, str], ...]
    supporting_facts_uri: tuple[tuple[str, str, str], ...]
    subgraph: tuple[tuple[str, str, str], ...]
    subgraph_size: int
    judge_fields: dict[str, bool | str] = field(default_factory=dict)

    @property
    def n_judges(self) -> int:
        return sum(1 for k in self.judge_fields if k.startswith("logical_structure_flag_"))

    def to_json_dict(self) -> dict:
        out: dict = {
            "id": self.id,
            "question": self.question,
            "answer": self.answer,
            "answer_readable": self.answer_readable,
            "answer_uri": self.answer_uri,
            "supporting_facts": [list(t) for t in self.supporting_facts],
            "supporting_facts_uri": [list(t) for t in self.supporting_facts_uri],
            "subgraph": [list(t) for t in self.subgraph],
            "subgraph_size": self.subgraph_size,
        }
        for name in judge_field_names(self.n_judges):
            out[name] = self.judge_fields[name]
        return out

    @classmethod
    def from_json_dict(cls, row: dict) -> "DatasetRecord":
        judge_fields = {k: v for k, v in row.items() if k not in BASE_FIELDS}
        n_judges = sum(1 for k in judge_fields if k.startswith("logical_structure_flag_"))
        expected = set(judge_field_names(n_judges))
        if set(judge_fields) != expected:
            missing = sorted(expected - set(judge_fields))
            extra = sorted(set(judge_fields) - expected)
            raise ValueError(f"judge fields inconsistent (missing={missing}, extra={extra})")
        return cls(
            id=row["id"],
            question=row["question"],
            answer=row["answer"],
            answer_readable=row["answer_readable"],
            answer_uri=row["answer_uri"],
            supporting_facts=tuple(tuple(t) for t in row["supporting_facts"]),
            supporting_facts_uri=tuple(tuple(t) for t in row["supporting_facts_uri"]),
            subgraph=tuple(tuple(t) for t in row["subgraph"]),
            subgraph_size=row["subgraph_size"],
            judge_fields=judge_fields,
        )


@dataclass
class DatasetVariant:
    variant_id: str
    base_split: str
    reorder_seed: int
    temperature: float
    records: list[DatasetRecord] = field(default_factory=list)


def record_id(doc_id: str, question: str, variant_id: str) -> str:
    h = hashlib.sha256()
    for part in (doc_id, normalize_question(question), variant_id):
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()[:16]


def assemble_record(
    c: QaCandidate,
    sub: SeedSubgraph,
    outcome: VerificationOutcome,
    decision: PanelDecision,
    *,
    variant_id: str,
    maps: ReferenceMaps | None = None,
    notes: dict | None = None,
) -> DatasetRecord:
    """Build the dataset record for a verified, panel-accepted candidate.

    ``notes``, when given, receives assembly diagnostics: whether the answer
    resolved to a subgraph entity and whether any readable form fell back to
    an IRI local name for lack of a label.
    """
    if not outcome.verified:
        raise ValueError("cannot assemble a record for an unverified candidate")
    if not decision.accepted:
        raise ValueError("cannot assemble a record for a rejected candidate")
    if maps is None:
        maps = build_reference_maps(sub)

    label_fallback = False
    facts: list[tuple[str, str, str]] = []
    facts_uri: list[tuple[str, str, str]] = []
    for s, p, o in c.supporting_path:
        subj = maps.entities[_norm(s)]
        pred = maps.predicates[_norm(p)]
        obj = maps.entities[_norm(o)]
        label_fallback = label_fallback or subj.label is None or obj.label is None
        facts.append((readable_entity(subj), readable_predicate(pred), readable_entity(obj)))
        facts_uri.append((subj.iri, pred.iri, obj.iri))

    answer_entity = maps.entities.get(_norm(c.answer))
    if answer_entity is not None:
        answer = local_name(answer_entity.iri)
        answer_readable = readable_entity(answer_entity)
        answer_uri = answer_entity.iri
        label_fallback = label_fallback or answer_entity.label is None
    else:
        # answer did not resolve to a subgraph entity; keep the generated text
        answer = c.answer
        answer_readable = c.answer
        answer_uri = ""

    judge_values: dict[str, bool | str] = {}
    for n, outcome_n in enumerate(decision.verdicts, start=1):
        q, a = outcome_n.question, outcome_n.answer
        assert q is not None and a is not None  # accepted implies both present
        judge_values[f"logical_structure_flag_{n}"] = q.logical_structure_flag
        judge_values[f"logical_structure_reasoning_{n}"] = q.logical_structure_reasoning
        judge_values[f"redundancy_flag_{n}"] = q.redundancy_flag
        judge_values[f"redundancy_reasoning_{n}"] = q.redundancy_reasoning
        judge_values[f"answer_support_flag_{n}"] = a.answer_support_flag
        judge_values[f"answer_support_reasoning_{n}"] = a.answer_support_reasoning
        judge_values[f"answer_adequacy_flag_{n}"] = a.answer_adequacy_flag
        judge_values[f"answer_adequacy_reasoning_{n}"] = a.answer_adequacy_reasoning

    dump = tuple(tuple(row) for row in subgraph_dump(sub))
    if notes is not None:
        notes["answer_resolved"] = answer_entity is not None
        notes["label_fallback"] = label_fallback
    return DatasetRecord(
        id=record_id(c.doc_id, c.question, variant_id),
        question=c.question,
        answer=answer,
        answer_readable=answer_readable,
        answer_uri=answer_uri,
        supporting_facts=tuple(facts),
        supporting_facts_uri=tuple(facts_uri),
        subgraph=dump,
        subgraph_size=len(dump),
        judge_fields=judge_values,
    )


def write_split(variant: DatasetVariant, out_dir: str | Path) -> Path:
    """Write ``{variant_id}.{split}.jsonl``, one record per line, UTF-8."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{variant.variant_id}.{variant.base_split}.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for record in variant.records:
            fh.write(json.dumps(record.to_json_dict(), ensure_ascii=False) + "\n")
    return path


def read_split(path: str | Path) -> list[DatasetRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(DatasetRecord.from_json_dict(json.loads(line)))
    return records


def write_manifest(out_dir: str | Path, variant_id: str, manifest: dict) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{variant_id}.manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    return path


def reverify_record(record: DatasetRecord) -> bool:
    """Offline grounding re-check: supporting URI triples must appear in the
    stored subgraph dump with matching direction."""
    stored = {tuple(t) for t in record.subgraph}
    return all(tuple(t) in stored for t in record.supporting_facts_uri)
