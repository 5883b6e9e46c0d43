"""Lenient JSON recovery for model responses.

Models frequently wrap their JSON in prose or markdown fences. Strict
parsing is tried first; the fallback extracts the first balanced top-level
object, honoring string escapes so braces inside strings do not confuse
the scan.
"""

from __future__ import annotations

import json
from typing import Any


def extract_json_object(text: str) -> str | None:
    """Return the first balanced ``{...}`` block of *text*, or None."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start : i + 1]
        start = text.find("{", start + 1)
    return None


def loads_lenient(text: str) -> Any:
    """json.loads with balanced-block fallback. Raises ValueError on failure."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    block = extract_json_object(text)
    if block is not None:
        try:
            return json.loads(block)
        except json.JSONDecodeError:
            pass
    raise ValueError("no parseable JSON object in response")


def coerce_bool(value: Any) -> bool:
    """Accept real booleans plus the common string/int spellings."""
    if isinstance(value, bool):
        return value
    if isinstance(value, int) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        folded = value.strip().casefold()
        if folded in ("true", "yes", "1"):
            return True
        if folded in ("false", "no", "0"):
            return False
    raise ValueError(f"cannot interpret {value!r} as a boolean")
