"""Prompt templates shipped with the package.

Placeholders ({triples_str}, {question}, {answer}, {supporting_facts}) are
substituted verbatim; str.format is deliberately avoided so braces in
substituted content cannot break rendering.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache
from importlib import resources

P1_GENERATION = "p1_generation.txt"
P2_QUESTION = "p2_question.txt"
P3_ANSWER = "p3_answer.txt"


@lru_cache(maxsize=None)
def load_prompt(name: str) -> str:
    return resources.files(__package__).joinpath(name).read_text(encoding="utf-8")


def prompt_hash(name: str) -> str:
    return hashlib.sha256(load_prompt(name).encode("utf-8")).hexdigest()


def fill(template: str, **values: str) -> str:
    for key, value in values.items():
        template = template.replace("{" + key + "}", value)
    return template
