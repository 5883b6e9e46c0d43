import itertools
import json

import pytest

from kgqagen.judge import (
    AnswerVerdict,
    JudgeOutcome,
    JudgeUnavailableError,
    QuestionVerdict,
    decide,
    judge_answer,
    judge_question,
    run_panel,
    serialize_supporting_facts,
)
from kgqagen.llm_gateway import FixtureProvider, LlmGateway
from kgqagen.qa_gen import GenerationConfig, QaCandidate

CFG = GenerationConfig(temperature=0.0, reorder_seed=0, model_id="m")
CANDIDATE = QaCandidate(
    "Who mentored the founder of the institute?",
    "Brin",
    (("Alba", "founded", "Institute"), ("Brin", "mentored", "Alba")),
    "doc-1",
    CFG,
)


def gateway_with(default_text: str) -> LlmGateway:
    return LlmGateway(FixtureProvider({}, default=default_text), requests_per_minute=6000)


def question_payload(logical=True, redundant=False):
    return {
        "question": CANDIDATE.question,
        "logical_structure_flag": logical,
        "logical_structure_reasoning": "Grammatically sound.",
        "redundancy_flag": redundant,
        "redundancy_reasoning": "Does not reveal the answer.",
    }


def answer_payload(support=True, adequate=True):
    return {
        "answer_support_flag": support,
        "answer_support_reasoning": "Facts chain to the answer.",
        "answer_adequacy_flag": adequate,
        "answer_adequacy_reasoning": "Directly answers the question.",
    }


# -- single-judge calls -----------------------------------------------------


def test_judge_question_parses_favorable_verdict():
    verdict = judge_question(CANDIDATE, gateway_with(json.dumps(question_payload())), "j1")
    assert verdict.logical_structure_flag is True
    assert verdict.redundancy_flag is False
    assert verdict.judge_id == "j1"
    assert verdict.logical_structure_reasoning


def test_judge_question_flags_redundant_question():
    text = json.dumps(question_payload(redundant=True))
    verdict = judge_question(CANDIDATE, gateway_with(text), "j1")
    assert verdict.redundancy_flag is True


def test_judge_question_accepts_string_booleans():
    payload = question_payload()
    payload["logical_structure_flag"] = "True"
    payload["redundancy_flag"] = "false"
    verdict = judge_question(CANDIDATE, gateway_with(json.dumps(payload)), "j1")
    assert verdict.logical_structure_flag is True
    assert verdict.redundancy_flag is False


@pytest.mark.parametrize(
    "broken",
    [
        "not json at all",
        json.dumps({"logical_structure_flag": True}),  # missing the rest
        json.dumps({**question_payload(), "redundancy_reasoning": ""}),
        json.dumps({**question_payload(), "logical_structure_flag": "maybe"}),
    ],
)
def test_judge_question_malformed_raises_unavailable(broken):
    with pytest.raises(JudgeUnavailableError):
        judge_question(CANDIDATE, gateway_with(broken), "j1")


def test_judge_answer_flags():
    verdict = judge_answer(CANDIDATE, gateway_with(json.dumps(answer_payload())), "j1")
    assert verdict.answer_support_flag is True
    assert verdict.answer_adequacy_flag is True
    unsupported = judge_answer(
        CANDIDATE, gateway_with(json.dumps(answer_payload(support=False))), "j1"
    )
    assert unsupported.answer_support_flag is False
    partial = judge_answer(
        CANDIDATE, gateway_with(json.dumps(answer_payload(adequate=False))), "j1"
    )
    assert partial.answer_adequacy_flag is False


def test_supporting_facts_serialization():
    assert serialize_supporting_facts(CANDIDATE.supporting_path) == (
        "(Alba, founded, Institute)\n(Brin, mentored, Alba)"
    )


# -- panel decision --------------------------------------------------------------


def outcome(judge_id, logical=True, redundant=False, support=True, adequate=True,
            missing_question=False, missing_answer=False):
    q = None if missing_question else QuestionVerdict(logical, "r", redundant, "r", judge_id)
    a = None if missing_answer else AnswerVerdict(support, "r", adequate, "r", judge_id)
    return JudgeOutcome(judge_id, q, a)


def test_unanimous_panel_accepts():
    decision = decide(CANDIDATE, [outcome(f"j{i}") for i in range(3)])
    assert decision.accepted
    assert decision.rejection_causes == ()


def test_single_dissent_rejects():
    outcomes = [outcome("j1"), outcome("j2"), outcome("j3", redundant=True)]
    decision = decide(CANDIDATE, outcomes)
    assert not decision.accepted
    assert decision.rejection_causes == ("j3: redundancy",)


def test_missing_verdict_rejects_conservatively():
    outcomes = [outcome("j1"), outcome("j2", missing_answer=True)]
    decision = decide(CANDIDATE, outcomes)
    assert not decision.accepted
    assert "j2: unavailable" in decision.rejection_causes


def test_short_panel_rejects():
    decision = decide(CANDIDATE, [outcome("j1")], panel_size=3)
    assert not decision.accepted
    assert any("1 of 3" in cause for cause in decision.rejection_causes)


def test_every_rejection_carries_a_cause():
    for flags in itertools.product((True, False), repeat=4):
        logical, redundant, support, adequate = flags
        decision = decide(
            CANDIDATE, [outcome("j", logical, redundant, support, adequate)]
        )
        if not decision.accepted:
            assert decision.rejection_causes


def test_acceptance_equals_conjunction_over_all_flag_matrices():
    """Exhaustive check: every 3-judge x 4-flag matrix (2^12 cases)."""

    def brute_force(matrix):
        return all(
            logical and not redundant and support and adequate
            for logical, redundant, support, adequate in matrix
        )

    mismatches = 0
    for bits in itertools.product((False, True), repeat=12):
        matrix = [bits[i : i + 4] for i in range(0, 12, 4)]
        outcomes = [
            outcome(f"j{k}", logical=m[0], redundant=m[1], support=m[2], adequate=m[3])
            for k, m in enumerate(matrix)
        ]
        decision = decide(CANDIDATE, outcomes)
        if decision.accepted != brute_force(matrix):
            mismatches += 1
    assert mismatches == 0


# -- run_panel ---------------------------------------------------------------------


class RoutingProvider:
    """Answers P2 and P3 prompts differently per judge model."""

    def __init__(self, question_texts, answer_texts):
        self.question_texts = question_texts
        self.answer_texts = answer_texts

    def complete_once(self, req):
        table = (
            self.question_texts
            if "quality and validity of trivia" in req.user_prompt
            else self.answer_texts
        )
        return table[req.model_id], {}


def test_run_panel_accepts_with_favorable_judges():
    provider = RoutingProvider(
        {f"j{i}": json.dumps(question_payload()) for i in range(3)},
        {f"j{i}": json.dumps(answer_payload()) for i in range(3)},
    )
    decision = run_panel(CANDIDATE, LlmGateway(provider, requests_per_minute=6000),
                         ["j0", "j1", "j2"])
    assert decision.accepted
    assert len(decision.verdicts) == 3
    assert [v.judge_id for v in decision.verdicts] == ["j0", "j1", "j2"]


def test_run_panel_drops_candidate_when_one_judge_breaks():
    provider = RoutingProvider(
        {"j0": json.dumps(question_payload()), "j1": "garbage"},
        {"j0": json.dumps(answer_payload()), "j1": json.dumps(answer_payload())},
    )
    decision = run_panel(CANDIDATE, LlmGateway(provider, requests_per_minute=6000),
                         ["j0", "j1"])
    assert not decision.accepted
    assert "j1: unavailable" in decision.rejection_causes
