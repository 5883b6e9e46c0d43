"""Synthetic KG and seed-corpus generation.

Lets the pipeline run end to end without a real KG dump: entities get
unique two-word pseudo-labels, the triple set is a random spanning tree
plus extra random edges (so subgraph extraction has real work to do), and
seed documents are filler sentences that mention a handful of entity
labels. Everything is seeded and deterministic.
"""

from __future__ import annotations

import random
from pathlib import Path

_CONSONANTS = "bdfglmnprstvz"
_VOWELS = "aeiou"
_SYLLABLES = [c + v for c in _CONSONANTS for v in _VOWELS]

PREDICATE_NAMES = (
    "member_of",
    "located_in",
    "works_with",
    "founded_by",
    "part_of",
    "influenced",
    "adjacent_to",
    "led_by",
    "produced",
    "studied_at",
    "allied_with",
    "derived_from",
)

ENTITY_NS = "http://example.org/entity/"
PREDICATE_NS = "http://example.org/prop/"
YEAR_TYPE = "http://www.w3.org/2001/XMLSchema#gYear"


def _pseudo_word(rng: random.Random) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 3)))


def make_labels(n: int, seed: int = 0) -> list[str]:
    """Unique two-word display labels, e.g. 'Zorin Maleth'."""
    rng = random.Random(seed)
    labels: list[str] = []
    seen: set[str] = set()
    while len(labels) < n:
        label = f"{_pseudo_word(rng).title()} {_pseudo_word(rng).title()}"
        if label not in seen:
            seen.add(label)
            labels.append(label)
    return labels


def entity_iri(label: str) -> str:
    return ENTITY_NS + label.replace(" ", "_")


def make_kg(
    n_entities: int,
    n_triples: int,
    *,
    seed: int = 0,
    literal_fraction: float = 0.05,
    labels: list[str] | None = None,
) -> tuple[list[str], list[tuple[str, str]], list[tuple[int, int]]]:
    """N-Triples statements, (iri, label) pairs, and entity-entity edge list.

    The first n_entities - 1 triples form a random spanning tree so the
    graph is connected; the rest are uniform random edges. A fraction of
    statements carry literal objects (years) to exercise literal handling.
    """
    if n_entities < 2:
        raise ValueError("need at least two entities")
    rng = random.Random(seed)
    labels = labels if labels is not None else make_labels(n_entities, seed)
    iris = [entity_iri(label) for label in labels]
    predicates = [PREDICATE_NS + name for name in PREDICATE_NAMES]

    lines: list[str] = []
    edges: list[tuple[int, int]] = []
    for i in range(1, n_entities):
        j = rng.randrange(i)
        pred = rng.choice(predicates)
        lines.append(f"<{iris[i]}> <{pred}> <{iris[j]}> .")
        edges.append((i, j))
    while len(lines) < n_triples:
        if rng.random() < literal_fraction:
            subj = rng.randrange(n_entities)
            year = rng.randint(1800, 2024)
            pred = PREDICATE_NS + "established_in"
            lines.append(f'<{iris[subj]}> <{pred}> "{year}"^^<{YEAR_TYPE}> .')
            continue
        a = rng.randrange(n_entities)
        b = rng.randrange(n_entities)
        if a == b:
            continue
        pred = rng.choice(predicates)
        lines.append(f"<{iris[a]}> <{pred}> <{iris[b]}> .")
        edges.append((a, b))
    return lines, list(zip(iris, labels)), edges


def make_kg_lines(
    n_entities: int,
    n_triples: int,
    *,
    seed: int = 0,
    literal_fraction: float = 0.05,
    labels: list[str] | None = None,
) -> tuple[list[str], list[tuple[str, str]]]:
    lines, label_pairs, _ = make_kg(
        n_entities, n_triples, seed=seed, literal_fraction=literal_fraction, labels=labels
    )
    return lines, label_pairs


_SENTENCE_PATTERNS = (
    "Reports describe how {a} collaborated closely with {b} during the expansion.",
    "The history of {a} is tied to {b} through a series of regional agreements.",
    "{a} grew alongside {b}, and chroniclers often mention both together.",
    "Archives connect {a} with {b} over several decades of shared projects.",
)


def _walk_sample(rng: random.Random, adjacency: list[list[int]], k: int) -> list[int]:
    """Distinct entities collected along a random walk; mirrors how a seed
    text mentions topically related entities rather than arbitrary ones."""
    current = rng.randrange(len(adjacency))
    collected = [current]
    seen = {current}
    for _ in range(6 * k):
        if len(collected) >= k or not adjacency[current]:
            break
        current = rng.choice(adjacency[current])
        if current not in seen:
            seen.add(current)
            collected.append(current)
    return collected


def make_corpus_rows(
    labels: list[str],
    n_docs: int,
    *,
    seed: int = 0,
    mentions_range: tuple[int, int] = (3, 8),
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    edges: list[tuple[int, int]] | None = None,
) -> list[dict]:
    """Corpus-format rows (doc_id, text, split) mentioning known labels.

    With ``edges`` given, each document's mentions are drawn by a random
    walk so they are graph-local; otherwise they are sampled uniformly.
    """
    rng = random.Random(seed)
    lo, hi = mentions_range
    adjacency: list[list[int]] | None = None
    if edges is not None:
        adjacency = [[] for _ in labels]
        for a, b in edges:
            adjacency[a].append(b)
            adjacency[b].append(a)
    rows = []
    n_train = int(n_docs * split_ratios[0])
    n_val = int(n_docs * split_ratios[1])
    for i in range(n_docs):
        k = rng.randint(lo, min(hi, len(labels)))
        if adjacency is not None:
            mention_labels = [labels[idx] for idx in _walk_sample(rng, adjacency, k)]
        else:
            mention_labels = rng.sample(labels, k)
        sentences = []
        for j in range(0, len(mention_labels) - 1, 2):
            pattern = rng.choice(_SENTENCE_PATTERNS)
            sentences.append(pattern.format(a=mention_labels[j], b=mention_labels[j + 1]))
        if len(mention_labels) % 2:
            sentences.append(f"Later accounts focus on {mention_labels[-1]} alone.")
        if i < n_train:
            split = "train"
        elif i < n_train + n_val:
            split = "validation"
        else:
            split = "test"
        rows.append({"doc_id": f"doc-{i:05d}", "text": " ".join(sentences), "split": split})
    return rows


def write_fixture_tree(
    out_dir: str | Path,
    *,
    n_entities: int = 60,
    n_triples: int = 200,
    n_docs: int = 20,
    seed: int = 7,
) -> dict[str, Path]:
    """Write kg.nt, labels.tsv, corpus.jsonl, and a ready-to-run mock config."""
    import json

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines, label_pairs = make_kg_lines(n_entities, n_triples, seed=seed)
    kg_path = out / "kg.nt"
    kg_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    labels_path = out / "labels.tsv"
    labels_path.write_text(
        "".join(f"{iri}\t{label}\n" for iri, label in label_pairs), encoding="utf-8"
    )
    corpus_path = out / "corpus.jsonl"
    rows = make_corpus_rows([label for _, label in label_pairs], n_docs, seed=seed + 1)
    corpus_path.write_text(
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8"
    )
    config_path = out / "config.ini"
    config_path.write_text(
        f"""[paths]
kg = {kg_path}
labels = {labels_path}
corpus = {corpus_path}
output_dir = {out / 'out'}

[provider]
mode = mock

[generation]
model = mock-generator
temperature = 0.8
reorder_seed = 1

[judging]
models = mock-judge-a, mock-judge-b, mock-judge-c

[subgraph]
min_component_triples = 2
max_subgraph_triples = 200
""",
        encoding="utf-8",
    )
    return {
        "kg": kg_path,
        "labels": labels_path,
        "corpus": corpus_path,
        "config": config_path,
    }
