"""Structural grounding check for generated QA candidates.

A candidate passes only if every triple of its supporting path, after
label normalization, is a member of the subgraph's triple set with
matching direction, and every referenced endpoint is an entity of the
subgraph. Normalization is deliberately limited to case folding and
whitespace collapsing: anything fuzzier would readmit the hallucinations
this check exists to remove.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .kg_store import EntityId, PredicateId, readable_entity, readable_predicate
from .qa_gen import QaCandidate
from .subgraph import SeedSubgraph

logger = logging.getLogger(__name__)

UNKNOWN_SUBJECT = "unknown_subject"
UNKNOWN_PREDICATE = "unknown_predicate"
UNKNOWN_OBJECT = "unknown_object"
TRIPLE_ABSENT = "triple_absent"


@dataclass(frozen=True, slots=True)
class PathFailure:
    position: int
    reason: str


@dataclass(frozen=True)
class VerificationOutcome:
    candidate: QaCandidate
    verified: bool
    failures: tuple[PathFailure, ...]


def _norm(text: str) -> str:
    return " ".join(text.split()).casefold()


@dataclass(frozen=True)
class ReferenceMaps:
    """Rendered-name lookup tables local to one subgraph."""

    entities: dict[str, EntityId]
    predicates: dict[str, PredicateId]
    triple_ids: frozenset[tuple[int, int, int]]


def build_reference_maps(sub: SeedSubgraph) -> ReferenceMaps:
    """Invert the serialization rendering back to subgraph terms.

    Both the label and the humanized local name of each entity are mapped,
    since a model may echo either; name collisions resolve to the smallest
    entity id, matching the tie-break used everywhere else.
    """
    entities: dict[str, EntityId] = {}
    for ent in sorted(sub.entities, key=lambda e: e.id):
        for alias in (readable_entity(ent), ent.label or ""):
            key = _norm(alias)
            if key and key not in entities:
                entities[key] = ent
    predicates: dict[str, PredicateId] = {}
    for pred in sorted(sub.predicates, key=lambda p: p.id):
        key = _norm(readable_predicate(pred))
        if key and key not in predicates:
            predicates[key] = pred
    triple_ids = frozenset(
        (t.subject.id, t.predicate.id, t.object.id)  # type: ignore[union-attr]
        for t in sub.triples
    )
    return ReferenceMaps(entities, predicates, triple_ids)


def verify_path(
    c: QaCandidate, sub: SeedSubgraph, maps: ReferenceMaps | None = None
) -> VerificationOutcome:
    """Direction-sensitive membership test of the supporting path.

    (h, p, t) matches only a stored (h, p, t), never the reversed triple.
    Failure is a value, not an error; each bad hop is recorded with its
    position and reason.
    """
    if maps is None:
        maps = build_reference_maps(sub)
    failures: list[PathFailure] = []
    terminal: EntityId | None = None
    for position, (s, p, o) in enumerate(c.supporting_path):
        subject = maps.entities.get(_norm(s))
        predicate = maps.predicates.get(_norm(p))
        obj = maps.entities.get(_norm(o))
        if subject is None:
            failures.append(PathFailure(position, UNKNOWN_SUBJECT))
        if predicate is None:
            failures.append(PathFailure(position, UNKNOWN_PREDICATE))
        if obj is None:
            failures.append(PathFailure(position, UNKNOWN_OBJECT))
        if subject is not None and predicate is not None and obj is not None:
            if (subject.id, predicate.id, obj.id) not in maps.triple_ids:
                failures.append(PathFailure(position, TRIPLE_ABSENT))
            terminal = obj
    verified = not failures
    if verified and terminal is not None:
        answer_entity = maps.entities.get(_norm(c.answer))
        if answer_entity is None or answer_entity.id != terminal.id:
            # advisory only: answer text not matching the path terminal is
            # suspicious but not a grounding failure
            logger.warning(
                "doc %s: answer %r does not match path terminal %r",
                c.doc_id,
                c.answer,
                readable_entity(terminal),
            )
    return VerificationOutcome(c, verified, tuple(failures))
