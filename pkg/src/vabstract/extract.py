"""Parsing of raw model responses into typed artifacts.

All extractors are substring-preserving: results are exact substrings of the
input, modulo whitespace trimming and the case-folding done for final-word
classification answers.
"""

from __future__ import annotations

import json
import re
from typing import Iterable, List

from .errors import ExtractionError, StructureError, VerilogLeakError

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_FENCE_LINE_RE = re.compile(r"^\s*```[^\n]*$", re.MULTILINE)


def extract_final_word(text: str, vocabulary: Iterable[str]) -> str:
    """Return the last whole-word occurrence of any vocabulary term.

    Matching is case-insensitive and ignores surrounding punctuation and
    markup. Models frequently restate every option before concluding, so the
    final occurrence is taken as the answer.
    """
    vocab = [v.lower() for v in vocabulary]
    if not vocab:
        raise ValueError("vocabulary must be non-empty")
    lowered = text.lower()
    best_pos = -1
    best_term = None
    for term in vocab:
        pattern = re.compile(r"(?<![a-z0-9_])" + re.escape(term)
                             + r"(?![a-z0-9_])")
        for m in pattern.finditer(lowered):
            if m.start() > best_pos:
                best_pos = m.start()
                best_term = term
    if best_term is None:
        raise ExtractionError(
            f"no vocabulary term {sorted(vocab)} found in response",
            raw_text=text)
    return best_term


def extract_json_block(text: str) -> str:
    """Return the first JSON object in the response, as raw text.

    Prefers fenced code blocks that parse as a single JSON object; otherwise
    the largest balanced-brace substring that parses. The result is exactly a
    substring of the input.
    """
    for m in _FENCE_RE.finditer(text):
        candidate = m.group(1).strip()
        if _parses_as_object(candidate):
            return candidate
    best = None
    for candidate in _balanced_brace_spans(text):
        if _parses_as_object(candidate):
            if best is None or len(candidate) > len(best):
                best = candidate
    if best is None:
        raise ExtractionError("no parseable JSON object in response",
                              raw_text=text)
    return best


def _parses_as_object(candidate: str) -> bool:
    try:
        return isinstance(json.loads(candidate), dict)
    except json.JSONDecodeError:
        return False


def _balanced_brace_spans(text: str) -> List[str]:
    spans = []
    stack = []
    for i, ch in enumerate(text):
        if ch == "{":
            stack.append(i)
        elif ch == "}" and stack:
            start = stack.pop()
            # every balanced span is a candidate; a stray unclosed brace
            # earlier in the text must not hide later complete objects
            spans.append(text[start:i + 1])
    return spans


_VERILOG_LEAK_RE = re.compile(r"always\s*@|\bassign\s|\bendmodule\b")
_QUOTED_RE = re.compile(r'"[^"\n]*"')


def extract_pseudocode(text: str) -> List[str]:
    """Return trimmed, non-empty pseudocode lines in order.

    Fenced blocks are preferred over surrounding prose. Responses containing
    real Verilog constructs outside quoted fragments are rejected, since the
    pseudocode stage must not produce code.
    """
    fenced = _FENCE_RE.findall(text)
    body = "\n".join(fenced) if fenced else _FENCE_LINE_RE.sub("", text)
    lines = [line.strip() for line in body.splitlines() if line.strip()]
    if not lines:
        raise ExtractionError("response contains no pseudocode lines",
                              raw_text=text)
    for line in lines:
        unquoted = _QUOTED_RE.sub("", line)
        if _VERILOG_LEAK_RE.search(unquoted):
            raise VerilogLeakError(
                f"pseudocode line contains Verilog: {line!r}", raw_text=text)
    return lines


def extract_verilog_module(text: str, expected_name: str) -> str:
    """Return the module declaration matching ``expected_name``.

    The span runs from the matching ``module`` keyword through its
    ``endmodule``, with code fences stripped. Exactly one module is returned
    even when the response declares several.
    """
    body = _FENCE_LINE_RE.sub("", text)
    decl_re = re.compile(r"\bmodule\s+" + re.escape(expected_name) + r"\b")
    m = decl_re.search(body)
    if m is None:
        raise ExtractionError(
            f"no module named {expected_name!r} in response", raw_text=text)
    depth = 0
    token_re = re.compile(r"\bmodule\b|\bendmodule\b")
    for tok in token_re.finditer(body, m.start()):
        if tok.group() == "module":
            depth += 1
        else:
            depth -= 1
            if depth == 0:
                return body[m.start():tok.end()].strip()
            if depth < 0:
                break
    raise StructureError(
        f"unbalanced module/endmodule around {expected_name!r}", raw_text=text)
