"""Compact connected subgraph extraction around seed entities.

Three stages: one-hop neighborhood expansion of the seed set, a unit-weight
Steiner tree approximation (Mehlhorn's construction) over the expanded
graph with the seeds as terminals, and selection of the largest connected
component of the resulting forest. Connectivity is always computed on the
undirected entity-entity graph; triple direction is preserved in the
output. Every tie is broken deterministically so identical inputs yield
identical subgraphs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .kg_store import EntityId, KnowledgeGraph, PredicateId, Triple, object_sort_key
from .seed_linker import DictionaryLinker, SeedDocument, SeedEntitySet


class EmptySeedsError(ValueError):
    """The document has no linkable seed entities."""


class SubgraphTooSmallError(ValueError):
    """No component of the Steiner result meets the minimum size threshold."""


class SubgraphTooLargeError(ValueError):
    """The selected subgraph exceeds the configured triple cap."""


@dataclass(frozen=True)
class SubgraphConfig:
    # 1-triple graphs cannot support multi-hop questions, hence the floor
    min_component_triples: int = 3
    max_subgraph_triples: int = 200


@dataclass(frozen=True)
class ExpandedGraph:
    triples: frozenset[Triple]
    entities: frozenset[EntityId]
    predicates: frozenset[PredicateId]
    seeds: SeedEntitySet
    literal_annotations: frozenset[Triple]


@dataclass(frozen=True)
class SteinerResult:
    tree_triples: frozenset[Triple]
    components: tuple[frozenset[Triple], ...]
    terminals_covered: frozenset[EntityId]


@dataclass(frozen=True)
class SeedSubgraph:
    doc_id: str
    triples: frozenset[Triple]
    entities: frozenset[EntityId]
    predicates: frozenset[PredicateId]
    seeds_retained: frozenset[EntityId]

    @property
    def size(self) -> int:
        return len(self.triples)

    def sorted_triples(self) -> list[Triple]:
        return sorted(self.triples, key=Triple.key)


def expand_one_hop(kg: KnowledgeGraph, seeds: SeedEntitySet) -> ExpandedGraph:
    """Union of all triples incident to any seed entity.

    Entity-entity triples form the expansion proper; literal-valued triples
    of the seeds are carried as side annotations and excluded from all
    connectivity computations.
    """
    if not seeds.entities:
        raise EmptySeedsError(f"document {seeds.doc_id!r} has no seed entities")
    entity_triples: set[Triple] = set()
    literal_triples: set[Triple] = set()
    for seed in sorted(seeds.entities, key=lambda e: e.id):
        for pos in kg.incident_positions(seed):
            triple = kg.triple_at(pos)
            if triple.is_entity_triple:
                entity_triples.add(triple)
            else:
                literal_triples.add(triple)
    entities: set[EntityId] = set()
    predicates: set[PredicateId] = set()
    for t in entity_triples:
        entities.add(t.subject)
        entities.add(t.object)  # type: ignore[arg-type]
        predicates.add(t.predicate)
    return ExpandedGraph(
        triples=frozenset(entity_triples),
        entities=frozenset(entities),
        predicates=frozenset(predicates),
        seeds=seeds,
        literal_annotations=frozenset(literal_triples),
    )


def _edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _connectivity(
    triples: Iterable[Triple],
) -> tuple[dict[int, list[int]], dict[tuple[int, int], Triple]]:
    """Collapse directed multi-edges into one undirected edge per entity pair.

    The representative triple for a pair is the one with the smallest
    (predicate IRI, subject IRI, object IRI) key, so repeated runs pick the
    same stored triple. Self-loops never contribute connectivity.
    """
    representative: dict[tuple[int, int], Triple] = {}
    for t in triples:
        u = t.subject.id
        v = t.object.id  # entity triples only
        if u == v:
            continue
        key = _edge_key(u, v)
        held = representative.get(key)
        if held is None or (t.predicate.iri, t.key()) < (held.predicate.iri, held.key()):
            representative[key] = t
    adjacency: dict[int, set[int]] = {}
    for u, v in representative:
        adjacency.setdefault(u, set()).add(v)
        adjacency.setdefault(v, set()).add(u)
    return {u: sorted(vs) for u, vs in adjacency.items()}, representative


def _components(adjacency: dict[int, list[int]]) -> list[list[int]]:
    seen: set[int] = set()
    out: list[list[int]] = []
    for start in sorted(adjacency):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    comp.append(v)
                    queue.append(v)
        out.append(comp)
    return out


class _UnionFind:
    def __init__(self, items: Iterable[int]):
        self._parent = {x: x for x in items}

    def find(self, x: int) -> int:
        parent = self._parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self._parent[max(ra, rb)] = min(ra, rb)
        return True


def _mehlhorn_component(
    adjacency: dict[int, list[int]], terminals: list[int]
) -> set[tuple[int, int]]:
    """Unit-weight Mehlhorn construction for one connected component.

    Multi-source BFS partitions the component into terminal Voronoi regions;
    boundary edges induce a terminal-graph whose MST is expanded back to
    original edges; a spanning tree of the expansion is pruned of
    non-terminal leaves. Edge count is within 2*(1 - 1/len(terminals)) of
    the optimum.
    """
    terminals = sorted(terminals)
    dist: dict[int, int] = {}
    base: dict[int, int] = {}
    parent: dict[int, int | None] = {}
    queue: deque[int] = deque()
    for t in terminals:
        dist[t] = 0
        base[t] = t
        parent[t] = None
        queue.append(t)
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                base[v] = base[u]
                parent[v] = u
                queue.append(v)

    # cheapest boundary bridge per terminal pair
    bridges: dict[tuple[int, int], tuple[int, int, int]] = {}
    for u in sorted(adjacency):
        bu = base[u]
        for v in adjacency[u]:
            if u < v and bu != base[v]:
                pair = _edge_key(bu, base[v])
                candidate = (dist[u] + 1 + dist[v], u, v)
                if pair not in bridges or candidate < bridges[pair]:
                    bridges[pair] = candidate

    # MST over the terminal graph (Kruskal)
    uf = _UnionFind(terminals)
    chosen: list[tuple[int, int]] = []
    for pair, (weight, u, v) in sorted(bridges.items(), key=lambda kv: (kv[1][0], kv[0])):
        if uf.union(*pair):
            chosen.append((u, v))

    # expand MST edges back to original graph edges
    edges: set[tuple[int, int]] = set()
    for u, v in chosen:
        edges.add(_edge_key(u, v))
        for x in (u, v):
            while parent[x] is not None:
                edges.add(_edge_key(x, parent[x]))  # type: ignore[arg-type]
                x = parent[x]  # type: ignore[assignment]

    # spanning tree of the expansion
    nodes = {n for e in edges for n in e}
    uf2 = _UnionFind(nodes)
    tree = [e for e in sorted(edges) if uf2.union(*e)]

    # prune non-terminal leaves
    term_set = set(terminals)
    tree_adj: dict[int, set[int]] = {}
    for u, v in tree:
        tree_adj.setdefault(u, set()).add(v)
        tree_adj.setdefault(v, set()).add(u)
    leaves = deque(n for n in sorted(tree_adj) if len(tree_adj[n]) == 1 and n not in term_set)
    removed: set[tuple[int, int]] = set()
    while leaves:
        leaf = leaves.popleft()
        if leaf not in tree_adj or len(tree_adj[leaf]) != 1:
            continue
        (peer,) = tree_adj[leaf]
        removed.add(_edge_key(leaf, peer))
        del tree_adj[leaf]
        tree_adj[peer].discard(leaf)
        if len(tree_adj[peer]) == 1 and peer not in term_set:
            leaves.append(peer)
    return {e for e in tree if e not in removed}


def steiner_tree(g: ExpandedGraph) -> SteinerResult:
    """Approximate minimum-triple connected subset spanning the seeds.

    Runs per terminal-containing component of the (undirected, parallel-edge
    collapsed) expansion; components holding a single seed contribute no
    edges. The result is a forest; each returned component is a tree.
    """
    if not g.triples:
        raise ValueError("expanded graph has no entity-entity triples")
    adjacency, representative = _connectivity(g.triples)
    terminal_ids = sorted(e.id for e in g.seeds.entities if e.id in adjacency)
    tree_edges: set[tuple[int, int]] = set()
    for comp in _components(adjacency):
        comp_set = set(comp)
        comp_terms = [t for t in terminal_ids if t in comp_set]
        if len(comp_terms) < 2:
            continue
        comp_adj = {u: adjacency[u] for u in comp}
        tree_edges.update(_mehlhorn_component(comp_adj, comp_terms))

    tree_triples = frozenset(representative[e] for e in tree_edges)
    components = _split_triple_components(tree_triples)
    node_ids = {n for e in tree_edges for n in e}
    covered = frozenset(e for e in g.seeds.entities if e.id in node_ids)
    return SteinerResult(tree_triples, components, covered)


def _split_triple_components(triples: frozenset[Triple]) -> tuple[frozenset[Triple], ...]:
    adjacency: dict[int, set[int]] = {}
    by_edge: dict[tuple[int, int], list[Triple]] = {}
    for t in triples:
        key = _edge_key(t.subject.id, t.object.id)  # type: ignore[union-attr]
        adjacency.setdefault(key[0], set()).add(key[1])
        adjacency.setdefault(key[1], set()).add(key[0])
        by_edge.setdefault(key, []).append(t)
    out: list[frozenset[Triple]] = []
    seen: set[int] = set()
    for start in sorted(adjacency):
        if start in seen:
            continue
        nodes = {start}
        queue = deque([start])
        seen.add(start)
        while queue:
            u = queue.popleft()
            for v in adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    nodes.add(v)
                    queue.append(v)
        member_triples = [
            t for key, ts in by_edge.items() if key[0] in nodes for t in ts
        ]
        out.append(frozenset(member_triples))
    # deterministic component order: by smallest entity id inside
    out.sort(key=lambda comp: min(min(t.subject.id, t.object.id) for t in comp))  # type: ignore[union-attr]
    return tuple(out)


def largest_component(
    s: SteinerResult, seeds: SeedEntitySet, *, min_component_triples: int = 3
) -> SeedSubgraph:
    """Pick the component with the most entities.

    Ties break toward the component containing more seed entities, then
    toward the one holding the smallest entity id.
    """
    if not s.components:
        raise SubgraphTooSmallError(
            f"document {seeds.doc_id!r}: Steiner result has no connected components"
        )
    seed_ids = {e.id for e in seeds.entities}

    def score(comp: frozenset[Triple]) -> tuple[int, int, int]:
        nodes = _component_nodes(comp)
        return (len(nodes), len(nodes & seed_ids), -min(nodes))

    winner = max(s.components, key=score)
    if len(winner) < min_component_triples:
        raise SubgraphTooSmallError(
            f"document {seeds.doc_id!r}: largest component has {len(winner)} triple(s), "
            f"below the minimum of {min_component_triples}"
        )
    entities: set[EntityId] = set()
    predicates: set[PredicateId] = set()
    for t in winner:
        entities.add(t.subject)
        entities.add(t.object)  # type: ignore[arg-type]
        predicates.add(t.predicate)
    return SeedSubgraph(
        doc_id=seeds.doc_id,
        triples=winner,
        entities=frozenset(entities),
        predicates=frozenset(predicates),
        seeds_retained=frozenset(e for e in seeds.entities if e in entities),
    )


def _component_nodes(comp: frozenset[Triple]) -> set[int]:
    nodes: set[int] = set()
    for t in comp:
        nodes.add(t.subject.id)
        nodes.add(t.object.id)  # type: ignore[union-attr]
    return nodes


def build_seed_subgraph(
    kg: KnowledgeGraph,
    doc: SeedDocument | SeedEntitySet,
    config: SubgraphConfig | None = None,
    *,
    linker=None,
) -> SeedSubgraph:
    """Linking (when given a document), expansion, Steiner approximation, and
    component selection in one call. Batch callers link upfront and pass the
    SeedEntitySet to amortize the gazetteer build."""
    if isinstance(doc, SeedDocument):
        seeds = (linker or DictionaryLinker(kg)).link(doc)
    else:
        seeds = doc
    config = config or SubgraphConfig()
    expanded = expand_one_hop(kg, seeds)
    if not expanded.triples:
        raise SubgraphTooSmallError(
            f"document {seeds.doc_id!r}: one-hop expansion has no entity-entity triples"
        )
    result = steiner_tree(expanded)
    sub = largest_component(
        result, seeds, min_component_triples=config.min_component_triples
    )
    if sub.size > config.max_subgraph_triples:
        raise SubgraphTooLargeError(
            f"document {seeds.doc_id!r}: subgraph has {sub.size} triples, "
            f"over the cap of {config.max_subgraph_triples}"
        )
    return sub


# -- exchange format ----------------------------------------------------------


def subgraph_dump(sub: SeedSubgraph) -> list[list[str]]:
    """Order-stable triple dump: [subject_iri, predicate_iri, object_iri_or_literal]."""
    rows = [
        [t.subject.iri, t.predicate.iri, object_sort_key(t.object)]
        for t in sub.triples
    ]
    rows.sort()
    return rows


def subgraph_to_payload(sub: SeedSubgraph, split: str) -> dict:
    """JSON-serializable form carrying everything variant regeneration needs."""
    entities = sorted(
        {e for t in sub.triples for e in (t.subject, t.object)},  # type: ignore[misc]
        key=lambda e: e.id,
    )
    predicates = sorted({t.predicate for t in sub.triples}, key=lambda p: p.id)
    return {
        "doc_id": sub.doc_id,
        "split": split,
        "entities": [[e.id, e.iri, e.label] for e in entities],
        "predicates": [[p.id, p.iri] for p in predicates],
        "triples": sorted(
            [t.subject.id, t.predicate.id, t.object.id]  # type: ignore[union-attr]
            for t in sub.triples
        ),
        "seeds": sorted(e.id for e in sub.seeds_retained),
    }


def subgraph_from_payload(payload: dict) -> tuple[SeedSubgraph, str]:
    entities = {row[0]: EntityId(row[0], row[1], row[2]) for row in payload["entities"]}
    predicates = {row[0]: PredicateId(row[0], row[1]) for row in payload["predicates"]}
    triples = frozenset(
        Triple(entities[s], predicates[p], entities[o]) for s, p, o in payload["triples"]
    )
    sub = SeedSubgraph(
        doc_id=payload["doc_id"],
        triples=triples,
        entities=frozenset(entities.values()),
        predicates=frozenset(predicates.values()),
        seeds_retained=frozenset(entities[i] for i in payload["seeds"]),
    )
    return sub, payload["split"]
