import json
import logging

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kgqagen.kg_store import EntityId, Literal, PredicateId, Triple
from kgqagen.llm_gateway import FixtureProvider, LlmGateway, ChatRequest, request_key
from kgqagen.qa_gen import (
    GENERATOR_SYSTEM_PROMPT,
    GenerationConfig,
    GenerationParseError,
    build_generation_prompt,
    generate_qa,
    parse_generation_response,
    reorder,
    serialize_triples,
)
from kgqagen.subgraph import SeedSubgraph


def make_sub(triples, doc_id="doc-1"):
    triples = frozenset(triples)
    entities = frozenset(
        e for t in triples for e in (t.subject, t.object) if isinstance(e, EntityId)
    )
    return SeedSubgraph(
        doc_id=doc_id,
        triples=triples,
        entities=entities,
        predicates=frozenset(t.predicate for t in triples),
        seeds_retained=frozenset(),
    )


def chain_sub(n=6):
    ents = [EntityId(i, f"http://x/E{i}", f"Entity {i}") for i in range(n + 1)]
    pred = PredicateId(0, "http://x/linked_to")
    return make_sub(Triple(ents[i], pred, ents[i + 1]) for i in range(n))


CFG = GenerationConfig(temperature=0.8, reorder_seed=1, model_id="m")


# -- reorder -----------------------------------------------------------------


def test_reorder_same_seed_same_order():
    sub = chain_sub()
    assert reorder(sub, 42) == reorder(sub, 42)


def test_reorder_different_seeds_differ():
    sub = chain_sub(8)
    a, b = reorder(sub, 1), reorder(sub, 2)
    assert a != b  # 9! orderings; collision odds are negligible for this fixture
    assert sorted(a, key=Triple.key) == sorted(b, key=Triple.key)


def test_reorder_empty_subgraph():
    assert reorder(make_sub([]), 7) == []


@given(st.integers(min_value=-(2**63), max_value=2**63 - 1), st.integers(2, 9))
def test_reorder_is_a_bijection(seed, n):
    sub = chain_sub(n)
    permuted = reorder(sub, seed)
    assert sorted(permuted, key=Triple.key) == sub.sorted_triples()
    assert len(permuted) == len(sub.triples)


# -- serialization --------------------------------------------------------------


def test_serialize_uses_labels_and_local_names():
    subject = EntityId(0, "http://x/John_McClane")  # no label: humanized local name
    pred = PredicateId(0, "http://x/author")
    obj = EntityId(1, "http://x/X", "X")
    line = serialize_triples([Triple(subject, pred, obj)])
    assert line == "(John McClane, author, X)"


def test_serialize_literal_object():
    subject = EntityId(0, "http://x/Die_Hard", "Die Hard")
    pred = PredicateId(0, "http://x/publication_date")
    lit = Literal("1988", datatype="http://www.w3.org/2001/XMLSchema#gYear")
    line = serialize_triples([Triple(subject, pred, lit)])
    assert line == "(Die Hard, publication date, 1988)"


def test_serialize_empty():
    assert serialize_triples([]) == ""


def test_prompt_contains_serialized_triples():
    sub = chain_sub(3)
    prompt = build_generation_prompt(sub, CFG)
    assert "{triples_str}" not in prompt
    for t in sub.triples:
        assert f"({t.subject.label}, linked to, {t.object.label})" in prompt


# -- response parsing -------------------------------------------------------------


def response_payload(n=2):
    return {
        "valid_qa_pairs": True,
        "number_of_qa_pairs": n,
        "qa_pairs": [
            {
                "question": f"Question {i}?",
                "answer": f"Answer {i}",
                "supporting_path": [
                    {"subject": "A", "predicate": "p", "object": "B"},
                    {"subject": "B", "predicate": "q", "object": "C"},
                ],
            }
            for i in range(n)
        ],
    }


def test_parse_well_formed_response():
    batch = parse_generation_response(json.dumps(response_payload(2)), "d", CFG)
    assert batch.valid_flag
    assert len(batch.candidates) == 2
    c = batch.candidates[0]
    assert c.question == "Question 0?"
    assert c.supporting_path == (("A", "p", "B"), ("B", "q", "C"))
    assert c.doc_id == "d"
    assert c.config == CFG


def test_parse_invalid_flag_yields_empty_batch():
    payload = {"valid_qa_pairs": False, "number_of_qa_pairs": 0, "qa_pairs": []}
    batch = parse_generation_response(json.dumps(payload), "d", CFG)
    assert not batch.valid_flag
    assert batch.candidates == ()


def test_parse_recovers_fenced_json():
    text = "Sure! Here you go:\n```json\n" + json.dumps(response_payload(1)) + "\n```\nDone."
    batch = parse_generation_response(text, "d", CFG)
    assert len(batch.candidates) == 1


def test_parse_corrects_wrong_declared_count(caplog):
    payload = response_payload(2)
    payload["number_of_qa_pairs"] = 7
    with caplog.at_level(logging.WARNING):
        batch = parse_generation_response(json.dumps(payload), "d", CFG)
    assert len(batch.candidates) == 2
    assert any("number_of_qa_pairs" in r.message for r in caplog.records)


def test_parse_truncates_at_ceiling(caplog):
    with caplog.at_level(logging.WARNING):
        batch = parse_generation_response(
            json.dumps(response_payload(6)), "d", CFG, max_pairs=4
        )
    assert len(batch.candidates) == 4


def test_parse_failure_raises():
    with pytest.raises(GenerationParseError):
        parse_generation_response("no json anywhere", "d", CFG)
    with pytest.raises(GenerationParseError):
        parse_generation_response("[1, 2, 3]", "d", CFG)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda p: p["qa_pairs"][0].update(question=""),
        lambda p: p["qa_pairs"][0].update(answer="   "),
        lambda p: p["qa_pairs"][0].update(supporting_path=[]),
        lambda p: p["qa_pairs"][0]["supporting_path"][0].update(subject=""),
        lambda p: p.update(qa_pairs="nope"),
    ],
)
def test_candidate_invariant_violations_reject_whole_batch(mutate):
    payload = response_payload(2)
    mutate(payload)
    with pytest.raises(GenerationParseError):
        parse_generation_response(json.dumps(payload), "d", CFG)


def test_generation_config_validates_temperature():
    with pytest.raises(ValueError):
        GenerationConfig(temperature=2.5, reorder_seed=0, model_id="m")


def test_generate_qa_through_gateway():
    sub = chain_sub(3)
    prompt = build_generation_prompt(sub, CFG)
    request = ChatRequest(GENERATOR_SYSTEM_PROMPT, prompt, CFG.temperature,
                          max_output_tokens=4096, model_id="m")
    provider = FixtureProvider({request_key(request): json.dumps(response_payload(2))})
    gateway = LlmGateway(provider, requests_per_minute=6000)
    batch = generate_qa(sub, CFG, gateway)
    assert len(batch.candidates) == 2
    assert batch.doc_id == sub.doc_id
