"""Deterministic rendering of every prompt the pipeline issues.

Template wording lives in text assets under ``templates/`` with
``{{placeholder}}`` markers, so the exact prompts are auditable and
diffable. Rendering is a pure function of its inputs: identical inputs
always produce byte-identical text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, Optional

from .errors import CompositionError, TemplateError, UnsupportedStrategyError
from .ir import IntermediateRep, ir_json_text
from .problems import (AbstractionStage, AbstractionTrace, Classification1,
                       Classification2, DesignProblem, Stage, StrategyName)

_PLACEHOLDER_RE = re.compile(r"\{\{([a-z_]+)\}\}")

#: Labels introducing each block of the final composed prompt. Kept here
#: rather than in an asset because block inclusion is conditional.
CLASSIFICATION_LABEL = "Circuit classification:"
IR_LABEL = "Intermediate representation (JSON):"
PSEUDOCODE_LABEL = "Line-by-line pseudocode:"


@dataclass(frozen=True)
class RenderedPrompt:
    stage: Stage
    text: str
    placeholders_filled: Dict[str, str] = field(default_factory=dict, hash=False)


def _load_template(name: str) -> str:
    ref = resources.files("vabstract").joinpath(f"templates/{name}.txt")
    return ref.read_text(encoding="utf-8").rstrip("\n")


def _render(name: str, stage: Stage, values: Dict[str, str],
            sources: Optional[Dict[str, str]] = None) -> RenderedPrompt:
    template = _load_template(name)
    def substitute(m):
        key = m.group(1)
        if key not in values:
            raise TemplateError(f"template {name!r}: no value for "
                                f"placeholder {key!r}")
        return values[key]
    text = _PLACEHOLDER_RE.sub(substitute, template)
    leftover = _PLACEHOLDER_RE.search(text)
    if leftover:
        raise TemplateError(f"template {name!r}: unfilled placeholder "
                            f"{leftover.group(1)!r}")
    return RenderedPrompt(stage=stage, text=text,
                          placeholders_filled=dict(sources or {}))


def problem_text(problem: DesignProblem) -> str:
    """The base prompt: natural-language description then module header."""
    description = problem.description.rstrip()
    header = problem.module_header.strip()
    if header and header in description:
        return description
    return f"{description}\n\n{header}"


def classification_text(c1: Classification1,
                        c2: Optional[Classification2]) -> str:
    if c1 is Classification1.SEQUENTIAL:
        return "sequential (finite-state machine)"
    if c2 is None:
        return "combinational"
    return f"combinational, structure: {c2.value}"


def render_cls1(problem: DesignProblem) -> RenderedPrompt:
    """First classification prompt: combinational vs sequential."""
    if not problem.description.strip():
        raise TemplateError(f"{problem.task_id}: description is empty")
    return _render("cls1", Stage.CLS1,
                   {"description": problem_text(problem)},
                   {"description": problem.task_id})


def render_cls2(problem: DesignProblem,
                c1: Classification1) -> Optional[RenderedPrompt]:
    """Second classification prompt, or None for sequential circuits
    (their structure is always a state machine; no prompt is issued)."""
    if c1 is Classification1.SEQUENTIAL:
        return None
    if not problem.description.strip():
        raise TemplateError(f"{problem.task_id}: description is empty")
    return _render("cls2", Stage.CLS2,
                   {"description": problem_text(problem)},
                   {"description": problem.task_id})


_IR_TEMPLATES = {
    Classification2.FSM_IMPLIED: "ir_fsm",
    Classification2.TRUTH_TABLE: "ir_truth_table",
    Classification2.BOOLEAN_EXPRESSION: "ir_boolean",
    Classification2.KMAP: "ir_kmap",
    Classification2.MUX_MAPPING: "ir_mux",
}


def render_ir(problem: DesignProblem, c1: Classification1,
              c2: Classification2) -> RenderedPrompt:
    """Structure-specific IR prompt. The pipeline must skip this stage
    entirely when the second classification is 'other'."""
    if c2 is Classification2.OTHER:
        raise TemplateError("no IR prompt exists for classification 'other'")
    if c1 is Classification1.SEQUENTIAL and c2 is not Classification2.FSM_IMPLIED:
        raise TemplateError("sequential circuits must use the fsm structure")
    return _render(_IR_TEMPLATES[c2], Stage.IR,
                   {"description": problem_text(problem),
                    "classification": classification_text(c1, c2)},
                   {"description": problem.task_id,
                    "classification": c2.value})


def render_pseudocode(problem: DesignProblem,
                      c1: Optional[Classification1] = None,
                      c2: Optional[Classification2] = None,
                      ir: Optional[IntermediateRep] = None) -> RenderedPrompt:
    """Pseudocode prompt over whichever abstractions are available."""
    if not problem.description.strip():
        raise TemplateError(f"{problem.task_id}: description is empty")
    parts = []
    if c1 is not None:
        parts.append(f"\nCircuit classification: {classification_text(c1, c2)}")
    if ir is not None:
        parts.append(f"\nIntermediate representation (JSON):\n{ir_json_text(ir)}")
    return _render("pseudocode", Stage.PSEUDOCODE,
                   {"description": problem_text(problem),
                    "abstractions": "\n".join(parts)},
                   {"description": problem.task_id})


def render_final(problem: DesignProblem, trace: AbstractionTrace,
                 stages: frozenset) -> RenderedPrompt:
    """Compose the final translation prompt from the trace's artifacts.

    Block order is fixed: base prompt, classification, IR, pseudocode.
    With only the base stage enabled the result is byte-identical to the
    baseline comparison prompt.
    """
    blocks = []
    sources: Dict[str, str] = {}
    if AbstractionStage.BASE in stages:
        blocks.append(problem_text(problem))
        sources["base"] = problem.task_id
    wants_abstractions = bool(stages - {AbstractionStage.BASE})
    if wants_abstractions and trace.c1 is not None:
        blocks.append(f"{CLASSIFICATION_LABEL} "
                      f"{classification_text(trace.c1, trace.c2)}")
        sources["classification"] = trace.c1.value
    if AbstractionStage.IR in stages:
        if trace.ir is None:
            raise CompositionError("ir")
        blocks.append(f"{IR_LABEL}\n{ir_json_text(trace.ir)}")
        sources["ir"] = trace.ir.tag.value
    if AbstractionStage.PSEUDOCODE in stages:
        if trace.pseudocode is None:
            raise CompositionError("pseudocode")
        blocks.append(PSEUDOCODE_LABEL + "\n" + "\n".join(trace.pseudocode))
        sources["pseudocode"] = str(len(trace.pseudocode))
    if not blocks:
        raise CompositionError("base")
    if stages == frozenset({AbstractionStage.BASE}):
        baseline = render_comparison(problem, StrategyName.BASELINE)
        return RenderedPrompt(stage=Stage.FINAL, text=baseline.text,
                              placeholders_filled=sources)
    intro = _load_template("final_intro")
    text = intro + "\n\n" + "\n\n".join(blocks)
    return RenderedPrompt(stage=Stage.FINAL, text=text,
                          placeholders_filled=sources)


_COMPARISON_TEMPLATES = {
    StrategyName.BASELINE: ("baseline", Stage.BASELINE),
    StrategyName.ONE_SHOT: ("one_shot", Stage.ONE_SHOT),
    StrategyName.COT: ("cot_explicit", Stage.COT),
    StrategyName.COT_IMPLICIT: ("cot_implicit", Stage.COT),
}


def render_comparison(problem: DesignProblem,
                      strategy: StrategyName) -> RenderedPrompt:
    """Baseline, one-shot and chain-of-thought comparison prompts."""
    entry = _COMPARISON_TEMPLATES.get(strategy)
    if entry is None:
        raise UnsupportedStrategyError(
            f"strategy {getattr(strategy, 'value', strategy)!r} has no "
            f"comparison prompt")
    name, stage = entry
    return _render(name, stage,
                   {"description": problem_text(problem)},
                   {"description": problem.task_id})
