"""Indexed in-memory RDF triple store over N-Triples input.

Entities and predicates are interned as dense integers so the adjacency
indexes can be list-backed, which keeps multi-million-triple graphs cheap
to query. Literal objects live in a side table and are flagged on the
triple, because downstream connectivity work only traverses entity-entity
edges. Parsing is streaming: memory grows with distinct terms and triples,
not with input size. A store is meant to be fully built (parse, labels,
label index) and then treated as immutable, which makes concurrent reads
from worker threads safe.
"""

from __future__ import annotations

import io
import logging
import re
import urllib.parse
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator

logger = logging.getLogger(__name__)


class NTriplesSyntaxError(ValueError):
    """Malformed statement encountered while parsing in fail-fast mode."""

    def __init__(self, line_no: int, line: str, message: str = "malformed N-Triples statement"):
        super().__init__(f"line {line_no}: {message}: {line[:120]!r}")
        self.line_no = line_no
        self.line = line


class UnknownEntityError(LookupError):
    """An entity handle or IRI does not resolve in this store."""


@dataclass(frozen=True, slots=True)
class EntityId:
    """Interned entity: dense handle, canonical IRI, optional label."""

    id: int
    iri: str
    label: str | None = None


@dataclass(frozen=True, slots=True)
class PredicateId:
    """Interned predicate: dense handle plus canonical IRI."""

    id: int
    iri: str


@dataclass(frozen=True, slots=True)
class Literal:
    """Literal object value: lexical form plus optional datatype or language tag."""

    lexical: str
    datatype: str | None = None
    lang: str | None = None


@dataclass(frozen=True, slots=True)
class Triple:
    subject: EntityId
    predicate: PredicateId
    object: EntityId | Literal

    @property
    def is_entity_triple(self) -> bool:
        return isinstance(self.object, EntityId)

    def key(self) -> tuple[str, str, str]:
        """Ordering key on serialized terms, independent of interning order."""
        return (self.subject.iri, self.predicate.iri, object_sort_key(self.object))


def object_sort_key(obj: EntityId | Literal) -> str:
    if isinstance(obj, EntityId):
        return obj.iri
    return _render_literal_nt(obj)


def local_name(iri: str) -> str:
    """Tail segment of an IRI (after the last '#' or '/'), percent-decoded."""
    tail = re.split(r"[#/]", iri)[-1]
    return urllib.parse.unquote(tail) if tail else iri


def humanize(name: str) -> str:
    """Turn an IRI local name into display text (underscores become spaces)."""
    return name.replace("_", " ").strip()


def readable_entity(entity: EntityId) -> str:
    """Display name for an entity: its label if present, humanized local name otherwise."""
    if entity.label:
        return entity.label
    return humanize(local_name(entity.iri))


def readable_predicate(predicate: PredicateId) -> str:
    return humanize(local_name(predicate.iri))


def readable_object(obj: EntityId | Literal) -> str:
    if isinstance(obj, EntityId):
        return readable_entity(obj)
    return obj.lexical


def normalize_label(text: str) -> str:
    """Casefolded, whitespace-collapsed form used for label lookups."""
    return " ".join(text.split()).casefold()


_IRI = r"<([^<>\s]*)>"
_BNODE = r"(_:[A-Za-z0-9][A-Za-z0-9._\-]*)"
_LITERAL = r'"((?:[^"\\]|\\.)*)"(?:\^\^<([^<>\s]*)>|@([A-Za-z][A-Za-z0-9\-]*))?'
_STATEMENT_RE = re.compile(
    rf"^(?:{_IRI}|{_BNODE})\s+{_IRI}\s+(?:{_IRI}|{_BNODE}|{_LITERAL})\s*\.$"
)

_ESCAPE_RE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|(.))")
_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


def _unescape(s: str) -> str:
    if "\\" not in s:
        return s

    def repl(m: re.Match) -> str:
        u4, u8, c = m.groups()
        if u4:
            return chr(int(u4, 16))
        if u8:
            return chr(int(u8, 16))
        return _ESCAPES.get(c, c)

    return _ESCAPE_RE.sub(repl, s)


def _escape(s: str) -> str:
    return (
        s.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )


def _render_term(iri: str) -> str:
    # blank nodes are kept as opaque identifiers and serialized bare
    return iri if iri.startswith("_:") else f"<{iri}>"


def _render_literal_nt(lit: Literal) -> str:
    base = f'"{_escape(lit.lexical)}"'
    if lit.datatype:
        return f"{base}^^<{lit.datatype}>"
    if lit.lang:
        return f"{base}@{lit.lang}"
    return base


class KnowledgeGraph:
    """Interned, index-backed triple set with entity/label resolution."""

    def __init__(self) -> None:
        self._entities: list[EntityId] = []
        self._entity_ids: dict[str, int] = {}
        self._predicates: list[PredicateId] = []
        self._predicate_ids: dict[str, int] = {}
        self._literals: list[Literal] = []
        self._literal_ids: dict[tuple[str, str | None, str | None], int] = {}
        # object term encoding: even = 2 * entity id, odd = 2 * literal id + 1
        self._triples: list[tuple[int, int, int]] = []
        self._seen: set[tuple[int, int, int]] = set()
        self._by_subject: list[list[int]] = []
        self._by_object: list[list[int]] = []
        self._label_index: dict[str, int] | None = None
        self.skipped_lines = 0
        self.duplicate_count = 0

    # -- interning ---------------------------------------------------------

    def _intern_entity(self, iri: str) -> int:
        idx = self._entity_ids.get(iri)
        if idx is None:
            idx = len(self._entities)
            self._entity_ids[iri] = idx
            self._entities.append(EntityId(idx, iri))
            self._by_subject.append([])
            self._by_object.append([])
        return idx

    def _intern_predicate(self, iri: str) -> int:
        idx = self._predicate_ids.get(iri)
        if idx is None:
            idx = len(self._predicates)
            self._predicate_ids[iri] = idx
            self._predicates.append(PredicateId(idx, iri))
        return idx

    def _intern_literal(self, lexical: str, datatype: str | None, lang: str | None) -> int:
        key = (lexical, datatype, lang)
        idx = self._literal_ids.get(key)
        if idx is None:
            idx = len(self._literals)
            self._literal_ids[key] = idx
            self._literals.append(Literal(lexical, datatype, lang))
        return idx

    def _add_triple(self, s_id: int, p_id: int, obj_term: int) -> bool:
        row = (s_id, p_id, obj_term)
        if row in self._seen:
            self.duplicate_count += 1
            return False
        self._seen.add(row)
        pos = len(self._triples)
        self._triples.append(row)
        self._by_subject[s_id].append(pos)
        if not obj_term & 1:
            self._by_object[obj_term >> 1].append(pos)
        return True

    # -- views -------------------------------------------------------------

    @property
    def n_entities(self) -> int:
        return len(self._entities)

    @property
    def n_predicates(self) -> int:
        return len(self._predicates)

    @property
    def n_triples(self) -> int:
        return len(self._triples)

    @property
    def label_index_enabled(self) -> bool:
        return self._label_index is not None

    def entity(self, entity_id: int) -> EntityId:
        try:
            return self._entities[entity_id]
        except IndexError:
            raise UnknownEntityError(f"no entity with id {entity_id}") from None

    def predicate(self, predicate_id: int) -> PredicateId:
        return self._predicates[predicate_id]

    def entities(self) -> Iterator[EntityId]:
        return iter(self._entities)

    def predicates(self) -> Iterator[PredicateId]:
        return iter(self._predicates)

    def triple_at(self, pos: int) -> Triple:
        s, p, o = self._triples[pos]
        obj: EntityId | Literal
        obj = self._literals[o >> 1] if o & 1 else self._entities[o >> 1]
        return Triple(self._entities[s], self._predicates[p], obj)

    def iter_triples(self) -> Iterator[Triple]:
        for pos in range(len(self._triples)):
            yield self.triple_at(pos)

    # -- lookups -----------------------------------------------------------

    def _check_entity(self, v: EntityId | int) -> int:
        if isinstance(v, EntityId):
            if 0 <= v.id < len(self._entities) and self._entities[v.id].iri == v.iri:
                return v.id
            raise UnknownEntityError(f"entity {v.iri!r} does not belong to this store")
        if isinstance(v, int) and 0 <= v < len(self._entities):
            return v
        raise UnknownEntityError(f"no entity with id {v!r}")

    def degree(self, v: EntityId | int) -> int:
        idx = self._check_entity(v)
        return len(self._by_subject[idx]) + len(self._by_object[idx])

    def neighbors(self, v: EntityId | int) -> set[Triple]:
        """All triples with v as subject or (entity-valued) object."""
        idx = self._check_entity(v)
        positions = set(self._by_subject[idx])
        positions.update(self._by_object[idx])
        return {self.triple_at(pos) for pos in positions}

    def incident_positions(self, v: EntityId | int) -> list[int]:
        """Triple positions touching v, deduplicated; cheaper than neighbors()."""
        idx = self._check_entity(v)
        subj = self._by_subject[idx]
        obj = self._by_object[idx]
        if not obj:
            return list(subj)
        merged = set(subj)
        merged.update(obj)
        return sorted(merged)

    def resolve(self, iri_or_label: str) -> EntityId | None:
        """Exact IRI match first; label match only when the label index is enabled."""
        idx = self._entity_ids.get(iri_or_label)
        if idx is not None:
            return self._entities[idx]
        if self._label_index is not None:
            idx = self._label_index.get(normalize_label(iri_or_label))
            if idx is not None:
                return self._entities[idx]
        return None

    # -- labels ------------------------------------------------------------

    def attach_labels(self, pairs: Iterable[tuple[str, str]]) -> int:
        """Attach labels to entities by IRI. Returns the number attached.

        Unknown IRIs are ignored (label files routinely cover more of the
        source KG than a given dump does). Must be called before the store
        is shared across threads.
        """
        attached = 0
        for iri, label in pairs:
            idx = self._entity_ids.get(iri)
            if idx is None:
                continue
            old = self._entities[idx]
            self._entities[idx] = EntityId(old.id, old.iri, label)
            attached += 1
        self._label_index = None
        return attached

    def load_labels(self, source: str | Path | IO[str]) -> int:
        """Load a tab-separated ``iri<TAB>label`` side file."""

        def rows(fh: IO[str]) -> Iterator[tuple[str, str]]:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                iri, _, label = line.partition("\t")
                if label:
                    yield iri, label

        if hasattr(source, "read"):
            return self.attach_labels(rows(source))  # type: ignore[arg-type]
        with open(source, "r", encoding="utf-8") as fh:
            return self.attach_labels(rows(fh))

    def build_label_index(self) -> None:
        """Index normalized labels; collisions resolve to the smallest entity id."""
        index: dict[str, int] = {}
        for ent in self._entities:
            if not ent.label:
                continue
            key = normalize_label(ent.label)
            if key and (key not in index or ent.id < index[key]):
                index[key] = ent.id
        self._label_index = index

    def labeled_entities(self) -> Iterator[EntityId]:
        for ent in self._entities:
            if ent.label:
                yield ent

    # -- output and checks ---------------------------------------------------

    def dump_ntriples(self, sink: IO[str]) -> None:
        for s, p, o in self._triples:
            subj = _render_term(self._entities[s].iri)
            pred = f"<{self._predicates[p].iri}>"
            if o & 1:
                obj = _render_literal_nt(self._literals[o >> 1])
            else:
                obj = _render_term(self._entities[o >> 1].iri)
            sink.write(f"{subj} {pred} {obj} .\n")

    def audit(self) -> None:
        """Assert index consistency; intended for tests and debug runs."""
        seen_subject: set[int] = set()
        for eid, bucket in enumerate(self._by_subject):
            for pos in bucket:
                assert self._triples[pos][0] == eid, "subject index points at wrong triple"
                assert pos not in seen_subject, "triple appears twice in subject index"
                seen_subject.add(pos)
        assert len(seen_subject) == len(self._triples), "subject index incomplete"

        seen_object: set[int] = set()
        for eid, bucket in enumerate(self._by_object):
            for pos in bucket:
                obj_term = self._triples[pos][2]
                assert not obj_term & 1, "literal triple in object index"
                assert obj_term >> 1 == eid, "object index points at wrong triple"
                assert pos not in seen_object, "triple appears twice in object index"
                seen_object.add(pos)
        n_entity_objects = sum(1 for _, _, o in self._triples if not o & 1)
        assert len(seen_object) == n_entity_objects, "object index incomplete"

        assert sum(len(b) for b in self._by_subject) == len(self._triples)
        for iri, idx in self._entity_ids.items():
            assert self._entities[idx].iri == iri, "entity interning not bijective"
        for iri, idx in self._predicate_ids.items():
            assert self._predicates[idx].iri == iri, "predicate interning not bijective"


def _open_lines(source: str | Path | bytes | IO) -> tuple[Iterator[str], IO | None]:
    if isinstance(source, bytes):
        return iter(io.StringIO(source.decode("utf-8"))), None
    if isinstance(source, (str, Path)):
        fh = open(source, "r", encoding="utf-8")
        return iter(fh), fh
    if isinstance(source, io.TextIOBase):
        return iter(source), None
    if hasattr(source, "read"):
        return iter(io.TextIOWrapper(source, encoding="utf-8")), None
    # already an iterable of text lines
    return iter(source), None


def parse_ntriples(source: str | Path | bytes | IO, *, on_error: str = "skip") -> KnowledgeGraph:
    """Parse newline-delimited N-Triples statements into an indexed store.

    ``on_error`` is either ``"skip"`` (count and warn about malformed lines,
    the default) or ``"fail"`` (raise :class:`NTriplesSyntaxError` with the
    offending line number). Duplicate statements are dropped.
    """
    if on_error not in ("skip", "fail"):
        raise ValueError(f"on_error must be 'skip' or 'fail', got {on_error!r}")
    kg = KnowledgeGraph()
    lines, owned = _open_lines(source)
    match = _STATEMENT_RE.match
    intern_entity = kg._intern_entity
    intern_predicate = kg._intern_predicate
    intern_literal = kg._intern_literal
    add = kg._add_triple
    try:
        for line_no, raw in enumerate(lines, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            m = match(line)
            if m is None:
                if on_error == "fail":
                    raise NTriplesSyntaxError(line_no, line)
                kg.skipped_lines += 1
                if kg.skipped_lines <= 5:
                    logger.debug("skipping malformed line %d: %r", line_no, line[:120])
                continue
            s_iri, s_bnode, p_iri, o_iri, o_bnode, o_lex, o_dt, o_lang = m.groups()
            s_id = intern_entity(_unescape(s_iri) if s_iri is not None else s_bnode)
            p_id = intern_predicate(_unescape(p_iri))
            if o_lex is not None:
                lit_id = intern_literal(_unescape(o_lex), o_dt, o_lang)
                add(s_id, p_id, (lit_id << 1) | 1)
            else:
                o_id = intern_entity(_unescape(o_iri) if o_iri is not None else o_bnode)
                add(s_id, p_id, o_id << 1)
    finally:
        if owned is not None:
            owned.close()
    if kg.skipped_lines:
        logger.warning(
            "parse finished with %d malformed line(s) skipped (%d triples kept)",
            kg.skipped_lines,
            kg.n_triples,
        )
    return kg
