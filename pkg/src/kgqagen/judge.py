"""LLM-as-a-Judge panel with unanimous acceptance.

Each candidate is scored by every configured judge model on four boolean
criteria: question logical structure, question redundancy, answer support,
and answer adequacy. Acceptance requires every judge to report
logical_structure=True, redundancy=False, answer_support=True, and
answer_adequacy=True; a judge that fails to produce both verdicts rejects
the candidate (fail closed). Rationales are kept for the dataset record
but never gate acceptance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

from . import prompts
from .jsontools import coerce_bool, loads_lenient
from .llm_gateway import ChatRequest, LlmGateway, ProviderError
from .qa_gen import QaCandidate

logger = logging.getLogger(__name__)

JUDGE_SYSTEM_PROMPT = "Respond only with a single JSON object."


class JudgeUnavailableError(RuntimeError):
    """A judge response was missing or unparseable."""


@dataclass(frozen=True)
class QuestionVerdict:
    logical_structure_flag: bool
    logical_structure_reasoning: str
    redundancy_flag: bool
    redundancy_reasoning: str
    judge_id: str


@dataclass(frozen=True)
class AnswerVerdict:
    answer_support_flag: bool
    answer_support_reasoning: str
    answer_adequacy_flag: bool
    answer_adequacy_reasoning: str
    judge_id: str


@dataclass(frozen=True)
class JudgeOutcome:
    judge_id: str
    question: QuestionVerdict | None
    answer: AnswerVerdict | None


@dataclass(frozen=True)
class PanelDecision:
    candidate: QaCandidate
    verdicts: tuple[JudgeOutcome, ...]
    accepted: bool
    rejection_causes: tuple[str, ...]


def _parse_verdict(text: str, keys: tuple[str, str, str, str], judge_id: str) -> dict:
    try:
        payload = loads_lenient(text)
    except ValueError as exc:
        raise JudgeUnavailableError(f"judge {judge_id}: {exc}") from exc
    if not isinstance(payload, dict):
        raise JudgeUnavailableError(f"judge {judge_id}: response is not a JSON object")
    flag_a, reason_a, flag_b, reason_b = keys
    out = {}
    try:
        out[flag_a] = coerce_bool(payload[flag_a])
        out[flag_b] = coerce_bool(payload[flag_b])
    except (KeyError, ValueError) as exc:
        raise JudgeUnavailableError(f"judge {judge_id}: bad flags: {exc}") from exc
    for reason_key in (reason_a, reason_b):
        reason = payload.get(reason_key)
        if not isinstance(reason, str) or not reason.strip():
            raise JudgeUnavailableError(f"judge {judge_id}: missing {reason_key}")
        out[reason_key] = reason
    return out


def judge_question(
    c: QaCandidate, gateway: LlmGateway, judge_model: str, *, temperature: float = 0.0
) -> QuestionVerdict:
    prompt = prompts.fill(prompts.load_prompt(prompts.P2_QUESTION), question=c.question)
    response = gateway.complete(
        ChatRequest(
            system_prompt=JUDGE_SYSTEM_PROMPT,
            user_prompt=prompt,
            temperature=temperature,
            model_id=judge_model,
        )
    )
    fields = _parse_verdict(
        response.text,
        (
            "logical_structure_flag",
            "logical_structure_reasoning",
            "redundancy_flag",
            "redundancy_reasoning",
        ),
        judge_model,
    )
    return QuestionVerdict(judge_id=judge_model, **fields)


def serialize_supporting_facts(path: Sequence[tuple[str, str, str]]) -> str:
    return "\n".join(f"({s}, {p}, {o})" for s, p, o in path)


def judge_answer(
    c: QaCandidate, gateway: LlmGateway, judge_model: str, *, temperature: float = 0.0
) -> AnswerVerdict:
    prompt = prompts.fill(
        prompts.load_prompt(prompts.P3_ANSWER),
        question=c.question,
        answer=c.answer,
        supporting_facts=serialize_supporting_facts(c.supporting_path),
    )
    response = gateway.complete(
        ChatRequest(
            system_prompt=JUDGE_SYSTEM_PROMPT,
            user_prompt=prompt,
            temperature=temperature,
            model_id=judge_model,
        )
    )
    fields = _parse_verdict(
        response.text,
        (
            "answer_support_flag",
            "answer_support_reasoning",
            "answer_adequacy_flag",
            "answer_adequacy_reasoning",
        ),
        judge_model,
    )
    return AnswerVerdict(judge_id=judge_model, **fields)


def decide(
    candidate: QaCandidate,
    outcomes: Sequence[JudgeOutcome],
    *,
    panel_size: int | None = None,
) -> PanelDecision:
    """Unanimity rule over the four flags of every judge.

    Accepted iff every configured judge produced both verdicts and reported
    logical_structure AND NOT redundancy AND answer_support AND
    answer_adequacy. Every rejection records at least one cause.
    """
    expected = panel_size if panel_size is not None else len(outcomes)
    causes: list[str] = []
    if len(outcomes) < expected:
        causes.append(f"only {len(outcomes)} of {expected} judges reported")
    for outcome in outcomes:
        q, a = outcome.question, outcome.answer
        if q is None or a is None:
            causes.append(f"{outcome.judge_id}: unavailable")
            continue
        if not q.logical_structure_flag:
            causes.append(f"{outcome.judge_id}: logical_structure")
        if q.redundancy_flag:
            causes.append(f"{outcome.judge_id}: redundancy")
        if not a.answer_support_flag:
            causes.append(f"{outcome.judge_id}: answer_support")
        if not a.answer_adequacy_flag:
            causes.append(f"{outcome.judge_id}: answer_adequacy")
    return PanelDecision(candidate, tuple(outcomes), not causes, tuple(causes))


def run_panel(
    candidate: QaCandidate,
    gateway: LlmGateway,
    judge_models: Sequence[str],
    *,
    temperature: float = 0.0,
) -> PanelDecision:
    """Collect both verdicts from every judge and apply the unanimity rule."""
    outcomes = []
    for model in judge_models:
        question_verdict: QuestionVerdict | None
        answer_verdict: AnswerVerdict | None
        try:
            question_verdict = judge_question(
                candidate, gateway, model, temperature=temperature
            )
        except (JudgeUnavailableError, ProviderError) as exc:
            logger.warning("question verdict unavailable: %s", exc)
            question_verdict = None
        try:
            answer_verdict = judge_answer(candidate, gateway, model, temperature=temperature)
        except (JudgeUnavailableError, ProviderError) as exc:
            logger.warning("answer verdict unavailable: %s", exc)
            answer_verdict = None
        outcomes.append(JudgeOutcome(model, question_verdict, answer_verdict))
    return decide(candidate, outcomes, panel_size=len(judge_models))
