"""QA pair generation from a seed subgraph.

The subgraph's triples are put in canonical sorted order, shuffled with a
seeded Fisher-Yates permutation (the reordering seed R is one of the two
dynamic-generation knobs, temperature T being the other), serialized as
one ``(subject, predicate, object)`` line per triple, and substituted into
the generation prompt. The structured response is parsed into candidates;
any malformed candidate rejects the whole batch.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass

from . import prompts
from .jsontools import coerce_bool, loads_lenient
from .kg_store import Triple, readable_entity, readable_object, readable_predicate
from .llm_gateway import ChatRequest, LlmGateway
from .subgraph import SeedSubgraph

logger = logging.getLogger(__name__)

GENERATOR_SYSTEM_PROMPT = "Respond only with a single JSON object."


class GenerationParseError(ValueError):
    """The model response could not be parsed into a valid batch."""


@dataclass(frozen=True)
class GenerationConfig:
    temperature: float
    reorder_seed: int
    model_id: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")


@dataclass(frozen=True)
class QaCandidate:
    question: str
    answer: str
    supporting_path: tuple[tuple[str, str, str], ...]
    doc_id: str
    config: GenerationConfig


@dataclass(frozen=True)
class GenerationBatch:
    doc_id: str
    candidates: tuple[QaCandidate, ...]
    valid_flag: bool
    raw_response: str


def reorder(sub: SeedSubgraph, seed: int) -> list[Triple]:
    """Seeded permutation of the subgraph's triples.

    Shuffles the canonical sorted order, so the permutation depends only on
    (triple set, seed), never on set iteration order.
    """
    ordered = sub.sorted_triples()
    random.Random(seed).shuffle(ordered)
    return ordered


def serialize_triples(ordered: list[Triple]) -> str:
    """One ``(subject, predicate, object)`` line per triple.

    Human-readable labels are used where present, humanized IRI local names
    otherwise; literal objects render as their lexical form.
    """
    return "\n".join(
        f"({readable_entity(t.subject)}, {readable_predicate(t.predicate)}, "
        f"{readable_object(t.object)})"
        for t in ordered
    )


def build_generation_prompt(sub: SeedSubgraph, cfg: GenerationConfig) -> str:
    triples_str = serialize_triples(reorder(sub, cfg.reorder_seed))
    return prompts.fill(prompts.load_prompt(prompts.P1_GENERATION), triples_str=triples_str)


def parse_generation_response(
    text: str, doc_id: str, cfg: GenerationConfig, *, max_pairs: int = 20
) -> GenerationBatch:
    try:
        payload = loads_lenient(text)
    except ValueError as exc:
        raise GenerationParseError(f"doc {doc_id!r}: {exc}") from exc
    if not isinstance(payload, dict):
        raise GenerationParseError(f"doc {doc_id!r}: response is not a JSON object")

    try:
        valid = coerce_bool(payload.get("valid_qa_pairs"))
    except ValueError as exc:
        raise GenerationParseError(f"doc {doc_id!r}: bad valid_qa_pairs: {exc}") from exc
    if not valid:
        return GenerationBatch(doc_id, (), False, text)

    raw_pairs = payload.get("qa_pairs")
    if not isinstance(raw_pairs, list):
        raise GenerationParseError(f"doc {doc_id!r}: qa_pairs missing or not a list")

    candidates = []
    for i, item in enumerate(raw_pairs):
        try:
            candidates.append(_parse_candidate(item, doc_id, cfg))
        except (KeyError, TypeError, ValueError) as exc:
            raise GenerationParseError(f"doc {doc_id!r}: qa_pairs[{i}]: {exc}") from exc

    declared = payload.get("number_of_qa_pairs")
    if declared != len(candidates):
        logger.warning(
            "doc %s: number_of_qa_pairs says %r but %d pairs parsed; using the parsed count",
            doc_id,
            declared,
            len(candidates),
        )
    if len(candidates) > max_pairs:
        logger.warning(
            "doc %s: %d pairs exceeds the ceiling of %d, truncating",
            doc_id,
            len(candidates),
            max_pairs,
        )
        candidates = candidates[:max_pairs]
    return GenerationBatch(doc_id, tuple(candidates), True, text)


def _parse_candidate(item: dict, doc_id: str, cfg: GenerationConfig) -> QaCandidate:
    question = item["question"]
    answer = item["answer"]
    if not isinstance(question, str) or not question.strip():
        raise ValueError("question must be a non-empty string")
    if not isinstance(answer, str) or not answer.strip():
        raise ValueError("answer must be a non-empty string")
    raw_path = item["supporting_path"]
    if not isinstance(raw_path, list) or not raw_path:
        raise ValueError("supporting_path must be a non-empty list")
    path = []
    for hop in raw_path:
        s, p, o = hop["subject"], hop["predicate"], hop["object"]
        if not all(isinstance(x, str) and x.strip() for x in (s, p, o)):
            raise ValueError("supporting_path terms must be non-empty strings")
        path.append((s, p, o))
    return QaCandidate(question, answer, tuple(path), doc_id, cfg)


def generate_qa(
    sub: SeedSubgraph,
    cfg: GenerationConfig,
    gateway: LlmGateway,
    *,
    max_pairs: int = 20,
    max_output_tokens: int = 4096,
) -> GenerationBatch:
    """Prompt the generator model for QA pairs grounded in the subgraph."""
    req = ChatRequest(
        system_prompt=GENERATOR_SYSTEM_PROMPT,
        user_prompt=build_generation_prompt(sub, cfg),
        temperature=cfg.temperature,
        max_output_tokens=max_output_tokens,
        model_id=cfg.model_id,
    )
    response = gateway.complete(req)
    return parse_generation_response(response.text, sub.doc_id, cfg, max_pairs=max_pairs)
