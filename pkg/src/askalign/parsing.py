"""Helpers for digesting LLM output: fenced JSON, stray quotes, labels."""

from __future__ import annotations

import json
import re

FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)\n\s*```", re.DOTALL)


class LLMOutputError(Exception):
    """An LLM response could not be parsed; carries the raw text."""

    def __init__(self, message: str, raw: str):
        super().__init__(f"{message}: {raw[:300]!r}")
        self.raw = raw


def extract_json(text: str) -> dict:
    """Parse a JSON object from a response that may use markdown fences."""
    candidate = text.strip()
    fence = FENCE_RE.search(candidate)
    if fence:
        candidate = fence.group(1)
    if not candidate.startswith("{"):
        # Fall back to the outermost object if the model added prose around it.
        start, end = candidate.find("{"), candidate.rfind("}")
        if start == -1 or end <= start:
            raise LLMOutputError("no JSON object in response", text)
        candidate = candidate[start:end + 1]
    try:
        parsed = json.loads(candidate)
    except json.JSONDecodeError as exc:
        raise LLMOutputError(f"invalid JSON ({exc.msg})", text) from exc
    if not isinstance(parsed, dict):
        raise LLMOutputError("JSON response is not an object", text)
    return parsed


def strip_wrapping(text: str) -> str:
    """Trim whitespace and one layer of surrounding quotes."""
    out = text.strip()
    for quote in ('"', "'"):
        if len(out) >= 2 and out.startswith(quote) and out.endswith(quote):
            out = out[1:-1].strip()
            break
    return out


def parse_confidence(text: str, low: int = 1, high: int = 5) -> int | None:
    """Extract a 1..5 self-rated confidence from free text, or None."""
    m = re.search(r"confidence\s*[:=]?\s*([0-9]+)", text, re.IGNORECASE)
    if not m:
        m = re.search(r"\b([0-9]+)\s*(?:/\s*5|out of 5)", text)
    if not m:
        return None
    value = int(m.group(1))
    if low <= value <= high:
        return value
    return None


def parse_option_label(text: str, labels: tuple[str, ...] = ("A", "B", "C", "D")) -> str | None:
    """Extract a single option label from a decision response, or None."""
    stripped = strip_wrapping(text)
    m = re.match(r"^[\(\[]?([A-Za-z])[\)\].:]?(\s|$)", stripped)
    if m and m.group(1).upper() in labels:
        return m.group(1).upper()
    m = re.search(r"\b(?:answer|option)\s*(?:is)?\s*[:\-]?\s*[\(\[]?([A-Za-z])[\)\]]?\b",
                  stripped, re.IGNORECASE)
    if m and m.group(1).upper() in labels:
        return m.group(1).upper()
    return None
