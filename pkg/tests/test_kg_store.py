import io
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kgqagen.kg_store import (
    EntityId,
    Literal,
    NTriplesSyntaxError,
    UnknownEntityError,
    humanize,
    local_name,
    parse_ntriples,
    readable_entity,
)

from conftest import E, P, ent, nt, prop


def test_empty_stream():
    kg = parse_ntriples(b"")
    assert kg.n_entities == 0
    assert kg.n_triples == 0
    assert kg.n_predicates == 0


def test_single_statement():
    kg = parse_ntriples(b"<http://x/a> <http://x/p> <http://x/b> .\n")
    assert kg.n_triples == 1
    assert kg.n_entities == 2
    assert kg.n_predicates == 1
    (t,) = list(kg.iter_triples())
    assert t.subject.iri == "http://x/a"
    assert t.predicate.iri == "http://x/p"
    assert t.object.iri == "http://x/b"


def _random_statements(n_lines: int, n_entities: int, seed: int) -> list[str]:
    rng = random.Random(seed)
    names = [f"e{i}" for i in range(n_entities)]
    preds = [f"p{i}" for i in range(5)]
    lines = []
    for _ in range(n_lines):
        s, o = rng.choice(names), rng.choice(names)
        p = rng.choice(preds)
        lines.append(f"<{E}{s}> <{P}{p}> <{E}{o}> .")
    return lines


def test_neighbors_against_line_scan_oracle():
    lines = _random_statements(1000, 50, seed=11)
    kg = parse_ntriples(nt(lines))
    kg.audit()

    # oracle: distinct statements mentioning the entity, straight off the lines
    distinct = sorted(set(lines))
    for i in range(50):
        iri = f"{E}e{i}"
        expected = []
        for line in distinct:
            s, p, o = line[:-2].split(" ")
            if s == f"<{iri}>" or o == f"<{iri}>":
                expected.append((s, p, o))
        entity = kg.resolve(iri)
        assert entity is not None
        got = {
            (f"<{t.subject.iri}>", f"<{t.predicate.iri}>", f"<{t.object.iri}>")
            for t in kg.neighbors(entity)
        }
        assert got == set(expected)


def test_neighbors_match_full_scan_on_100_queries():
    rng = random.Random(8)
    lines = _random_statements(600, 30, seed=3)
    kg = parse_ntriples(nt(lines))
    everything = list(kg.iter_triples())
    for _ in range(100):
        entity = kg.entity(rng.randrange(kg.n_entities))
        got = kg.neighbors(entity)
        scan = {t for t in everything if t.subject == entity or t.object == entity}
        assert got == scan


def test_neighbors_isolated_entity():
    kg = parse_ntriples(nt([f'{ent("Solo")} {prop("year")} "1999" .']))
    solo = kg.resolve(f"{E}Solo")
    # only a literal triple: subject side still returned, no entity neighbors
    triples = kg.neighbors(solo)
    assert len(triples) == 1
    assert not next(iter(triples)).is_entity_triple


def test_neighbors_star_center():
    lines = [f"{ent('Hub')} {prop('spoke')} {ent(f'S{i}')} ." for i in range(5)]
    kg = parse_ntriples(nt(lines))
    hub = kg.resolve(f"{E}Hub")
    assert len(kg.neighbors(hub)) == 5


def test_neighbors_unknown_entity_raises(small_kg):
    with pytest.raises(UnknownEntityError):
        small_kg.neighbors(EntityId(9999, "http://nowhere/x"))
    with pytest.raises(UnknownEntityError):
        small_kg.neighbors(10**9)


def test_duplicate_statements_are_deduplicated():
    line = f"{ent('A')} {prop('p')} {ent('B')} ."
    kg = parse_ntriples(nt([line, line, line]))
    assert kg.n_triples == 1
    assert kg.duplicate_count == 2


def test_malformed_lines_skipped_by_default(caplog):
    data = nt([
        f"{ent('A')} {prop('p')} {ent('B')} .",
        "this is not a triple",
        f"{ent('B')} {prop('p')} {ent('C')} .",
        "<unclosed <oops> .",
    ])
    with caplog.at_level("WARNING"):
        kg = parse_ntriples(data)
    assert kg.n_triples == 2
    assert kg.skipped_lines == 2
    assert any("malformed" in r.message for r in caplog.records)


def test_malformed_line_fails_fast_with_line_number():
    data = nt([f"{ent('A')} {prop('p')} {ent('B')} .", "broken line"])
    with pytest.raises(NTriplesSyntaxError) as err:
        parse_ntriples(data, on_error="fail")
    assert err.value.line_no == 2


def test_bad_on_error_value_rejected():
    with pytest.raises(ValueError):
        parse_ntriples(b"", on_error="explode")


def test_comments_and_blank_lines_ignored():
    data = b"# header\n\n<http://x/a> <http://x/p> <http://x/b> .\n# trailing\n"
    kg = parse_ntriples(data)
    assert kg.n_triples == 1
    assert kg.skipped_lines == 0


def test_literal_forms_parse():
    lines = [
        f'{ent("A")} {prop("name")} "plain" .',
        f'{ent("A")} {prop("name")} "typed"^^<http://www.w3.org/2001/XMLSchema#string> .',
        f'{ent("A")} {prop("name")} "tagged"@en .',
        f'{ent("A")} {prop("name")} "esc \\"quote\\" and \\n newline" .',
        f'{ent("A")} {prop("name")} "unicode \\u00e9" .',
    ]
    kg = parse_ntriples(nt(lines))
    literals = {t.object.lexical: t.object for t in kg.iter_triples()}
    assert literals["typed"].datatype == "http://www.w3.org/2001/XMLSchema#string"
    assert literals["tagged"].lang == "en"
    assert 'esc "quote" and \n newline' in literals
    assert "unicode é" in literals
    assert all(not t.is_entity_triple for t in kg.iter_triples())


def test_blank_nodes_are_opaque_entities():
    kg = parse_ntriples(b"_:b1 <http://x/p> _:b2 .\n")
    assert kg.n_entities == 2
    assert kg.resolve("_:b1") is not None


def test_round_trip_preserves_triple_set():
    lines = _random_statements(300, 25, seed=5) + [
        f'{ent("A")} {prop("note")} "line\\nbreak \\"q\\""@en .',
        f'{ent("B")} {prop("year")} "1988"^^<http://www.w3.org/2001/XMLSchema#gYear> .',
        "_:b1 <http://x/p> _:b2 .",
    ]
    kg = parse_ntriples(nt(lines))
    sink = io.StringIO()
    kg.dump_ntriples(sink)
    reparsed = parse_ntriples(sink.getvalue().encode("utf-8"))
    original = sorted(t.key() for t in kg.iter_triples())
    recovered = sorted(t.key() for t in reparsed.iter_triples())
    assert original == recovered
    reparsed.audit()


def test_resolve_iri_label_and_absence(small_kg):
    assert small_kg.resolve(f"{E}Alba").iri == f"{E}Alba"
    assert small_kg.resolve("Brin").iri == f"{E}Brin"
    assert small_kg.resolve("brin").iri == f"{E}Brin"  # case-insensitive label
    assert small_kg.resolve(f"{E}Nobody") is None
    assert small_kg.resolve("Nobody Known") is None


def test_resolve_label_collision_prefers_smallest_id():
    lines = [
        f"{ent('First')} {prop('p')} {ent('Second')} .",
        f"{ent('Third')} {prop('p')} {ent('First')} .",
    ]
    kg = parse_ntriples(nt(lines))
    kg.attach_labels([
        (f"{E}Second", "Shared Name"),
        (f"{E}Third", "Shared Name"),
    ])
    kg.build_label_index()
    winner = kg.resolve("shared name")
    loser_id = kg.resolve(f"{E}Third").id
    assert winner.id < loser_id
    assert winner.iri == f"{E}Second"


def test_resolve_label_requires_index():
    kg = parse_ntriples(nt([f"{ent('A')} {prop('p')} {ent('B')} ."]))
    kg.attach_labels([(f"{E}A", "Ada")])
    assert kg.resolve("Ada") is None  # index not built yet
    kg.build_label_index()
    assert kg.resolve("Ada").iri == f"{E}A"


def test_label_file_loading(tmp_path, small_kg):
    path = tmp_path / "labels.tsv"
    path.write_text(f"{E}Alba\tAlba Prime\n{E}Unknown\tGhost\n\n", encoding="utf-8")
    attached = small_kg.load_labels(path)
    assert attached == 1
    assert small_kg.resolve(f"{E}Alba").label == "Alba Prime"


def test_index_invariants_random_graphs():
    for seed in range(5):
        lines = _random_statements(2000, 40, seed=seed)
        kg = parse_ntriples(nt(lines))
        kg.audit()
        assert kg.n_triples == len(set(lines))


def test_local_name_and_humanize():
    assert local_name("http://x/path/John_McClane") == "John_McClane"
    assert local_name("http://x/ns#birthPlace") == "birthPlace"
    assert local_name("http://x/a%20b") == "a b"
    assert humanize("John_McClane") == "John McClane"
    assert readable_entity(EntityId(0, "http://x/Die_Hard")) == "Die Hard"
    assert readable_entity(EntityId(0, "http://x/Die_Hard", "Die Hard 2")) == "Die Hard 2"


@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=40))
def test_literal_escaping_round_trips(text):
    lit = Literal(text)
    from kgqagen.kg_store import _render_literal_nt

    rendered = f"<http://x/a> <http://x/p> {_render_literal_nt(lit)} ."
    kg = parse_ntriples(rendered.encode("utf-8"), on_error="fail")
    assert kg.n_triples == 1
    (t,) = list(kg.iter_triples())
    assert t.object.lexical == text
