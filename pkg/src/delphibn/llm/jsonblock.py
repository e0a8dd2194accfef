"""Pull one JSON value out of free-form model output."""

from __future__ import annotations

import ast
import json
import re
from typing import Any

_FENCE = re.compile(r"```([A-Za-z0-9_+-]*)(.*?)```", re.DOTALL)


class JSONExtractionError(ValueError):
    pass


class NoJSONError(JSONExtractionError):
    pass


class MalformedJSONError(JSONExtractionError):
    def __init__(self, candidate: str, reason: str):
        super().__init__(f"could not parse JSON candidate ({reason}): {candidate[:300]!r}")
        self.candidate = candidate


def _balanced_region(text: str, start: int) -> str | None:
    """The bracket-balanced region opening at ``start``, or None if unclosed."""
    stack = []
    in_str = False
    escaped = False
    pairs = {"[": "]", "{": "}"}
    for i in range(start, len(text)):
        ch = text[i]
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch in pairs:
            stack.append(pairs[ch])
        elif ch in "]}":
            if not stack or stack.pop() != ch:
                return None
            if not stack:
                return text[start : i + 1]
    return None


def _scan(text: str) -> str | None:
    for m in re.finditer(r"[\[{]", text):
        region = _balanced_region(text, m.start())
        if region is not None:
            return region
    return None


def _strip_trailing_commas(text: str) -> str:
    out = []
    in_str = False
    escaped = False
    for i, ch in enumerate(text):
        if in_str:
            out.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch == ",":
            rest = text[i + 1 :].lstrip()
            if rest[:1] in ("]", "}"):
                continue
        out.append(ch)
    return "".join(out)


def _listify(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return [_listify(v) for v in value]
    if isinstance(value, dict):
        return {k: _listify(v) for k, v in value.items()}
    return value


def parse_json_lenient(candidate: str) -> Any:
    """json.loads, then trailing-comma removal, then Python-literal syntax."""
    try:
        return json.loads(candidate)
    except json.JSONDecodeError as exc:
        first_error = str(exc)
    try:
        return json.loads(_strip_trailing_commas(candidate))
    except json.JSONDecodeError:
        pass
    try:
        return _listify(ast.literal_eval(candidate))
    except (ValueError, SyntaxError, MemoryError, RecursionError):
        raise MalformedJSONError(candidate, first_error) from None


def find_json_candidate(reply: str) -> str:
    fences = list(_FENCE.finditer(reply))
    for m in fences:
        if m.group(1).lower() == "json":
            return m.group(2).strip()
    if fences:
        return fences[0].group(2).strip()
    region = _scan(reply)
    if region is None:
        raise NoJSONError("reply contains no JSON block")
    return region


def extract_json_block(reply: str) -> Any:
    """Return the first JSON value found in ``reply``.

    Candidates are tried in this order: the first fenced block labelled
    ``json``, the first fenced block with any label, the first balanced
    top-level ``[...]`` or ``{...}`` region.

    Raises:
        NoJSONError: no candidate region.
        MalformedJSONError: the chosen candidate does not parse.
    """
    return parse_json_lenient(find_json_candidate(reply))
