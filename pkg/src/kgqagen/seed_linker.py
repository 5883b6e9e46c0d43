"""Dictionary-based entity linking of seed texts against KG labels.

The default linker is a deterministic longest-match gazetteer: KG labels
are tokenized, and the text is scanned left to right taking the longest
label that matches at each position. Matches are token-boundary aware, so
a label never fires inside a longer word. An external NER/linker can be
substituted through the :class:`EntityLinker` protocol.
"""

from __future__ import annotations

import json
import logging
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Protocol

from .kg_store import EntityId, KnowledgeGraph

logger = logging.getLogger(__name__)

SPLITS = ("train", "validation", "test")


class LabelIndexMissingError(RuntimeError):
    """The KG has no label index; linking needs one."""


@dataclass(frozen=True, slots=True)
class SeedDocument:
    doc_id: str
    text: str
    split_tag: str = "train"

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("seed document text must be non-empty")
        if self.split_tag not in SPLITS:
            raise ValueError(f"split_tag must be one of {SPLITS}, got {self.split_tag!r}")


@dataclass(frozen=True, slots=True)
class Mention:
    start: int
    end: int
    surface: str
    entity: EntityId


@dataclass(frozen=True)
class SeedEntitySet:
    doc_id: str
    mentions: tuple[Mention, ...]
    entities: frozenset[EntityId]
    detected_total: int


@dataclass(frozen=True)
class LinkerConfig:
    strip_diacritics: bool = False
    max_mentions: int | None = None


class EntityLinker(Protocol):
    def link(self, doc: SeedDocument) -> SeedEntitySet: ...


_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def _fold(token: str, strip_diacritics: bool) -> str:
    token = token.casefold()
    if strip_diacritics:
        decomposed = unicodedata.normalize("NFKD", token)
        token = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return token


def _tokenize(text: str, strip_diacritics: bool) -> list[tuple[int, int, str]]:
    return [
        (m.start(), m.end(), _fold(m.group(), strip_diacritics))
        for m in _TOKEN_RE.finditer(text)
    ]


class DictionaryLinker:
    """Longest-match gazetteer over the labels of one knowledge graph."""

    def __init__(self, kg: KnowledgeGraph, config: LinkerConfig | None = None):
        if not kg.label_index_enabled:
            raise LabelIndexMissingError(
                "knowledge graph label index is not built; call build_label_index() first"
            )
        self._kg = kg
        self._config = config or LinkerConfig()
        self._dictionary: dict[tuple[str, ...], EntityId] = {}
        self._max_tokens = 0
        for ent in kg.labeled_entities():
            tokens = tuple(
                norm for _, _, norm in _tokenize(ent.label, self._config.strip_diacritics)
            )
            if not tokens:
                continue
            held = self._dictionary.get(tokens)
            if held is None or ent.id < held.id:
                self._dictionary[tokens] = ent
            self._max_tokens = max(self._max_tokens, len(tokens))

    def link(self, doc: SeedDocument) -> SeedEntitySet:
        tokens = _tokenize(doc.text, self._config.strip_diacritics)
        mentions: list[Mention] = []
        cap = self._config.max_mentions
        i = 0
        n = len(tokens)
        while i < n:
            matched_len = 0
            matched_entity: EntityId | None = None
            upper = min(self._max_tokens, n - i)
            for width in range(upper, 0, -1):
                candidate = tuple(norm for _, _, norm in tokens[i : i + width])
                entity = self._dictionary.get(candidate)
                if entity is not None:
                    matched_len = width
                    matched_entity = entity
                    break
            if matched_entity is not None:
                start = tokens[i][0]
                end = tokens[i + matched_len - 1][1]
                mentions.append(Mention(start, end, doc.text[start:end], matched_entity))
                i += matched_len
                if cap is not None and len(mentions) >= cap:
                    logger.debug("mention cap %d reached for doc %s", cap, doc.doc_id)
                    break
            else:
                i += 1
        return SeedEntitySet(
            doc_id=doc.doc_id,
            mentions=tuple(mentions),
            entities=frozenset(m.entity for m in mentions),
            detected_total=len(mentions),
        )


def link_entities(
    doc: SeedDocument, kg: KnowledgeGraph, config: LinkerConfig | None = None
) -> SeedEntitySet:
    """One-shot linking. Batch callers should keep one DictionaryLinker around."""
    return DictionaryLinker(kg, config).link(doc)


# -- corpus exchange format -------------------------------------------------
# One JSON object per line with keys doc_id, text, split.


def read_corpus(source: str | Path | IO[str]) -> list[SeedDocument]:
    def parse_lines(fh: Iterable[str]) -> Iterator[SeedDocument]:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                yield SeedDocument(row["doc_id"], row["text"], row["split"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"corpus line {line_no}: {exc}") from exc

    if hasattr(source, "read"):
        docs = list(parse_lines(source))  # type: ignore[arg-type]
    else:
        with open(source, "r", encoding="utf-8") as fh:
            docs = list(parse_lines(fh))
    check_split_integrity(docs)
    return docs


def write_corpus(docs: Iterable[SeedDocument], sink: IO[str]) -> int:
    count = 0
    for doc in docs:
        sink.write(
            json.dumps(
                {"doc_id": doc.doc_id, "text": doc.text, "split": doc.split_tag},
                ensure_ascii=False,
            )
            + "\n"
        )
        count += 1
    return count


def check_split_integrity(docs: Iterable[SeedDocument]) -> None:
    """No doc_id may appear twice (in particular not in two splits)."""
    seen: dict[str, str] = {}
    for doc in docs:
        prior = seen.get(doc.doc_id)
        if prior is not None:
            raise ValueError(
                f"doc_id {doc.doc_id!r} appears more than once (splits {prior} and {doc.split_tag})"
            )
        seen[doc.doc_id] = doc.split_tag
