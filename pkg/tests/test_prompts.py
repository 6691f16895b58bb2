"""Prompt rendering and final-prompt composition, with byte-exact goldens."""

from pathlib import Path

import pytest

from conftest import XOR_IR_JSON
from vabstract import prompts
from vabstract.errors import (CompositionError, TemplateError,
                              UnsupportedStrategyError)
from vabstract.ir import parse_ir
from vabstract.problems import (AbstractionStage, AbstractionTrace,
                                Classification1, Classification2,
                                DesignProblem, Stage, StrategyName)

GOLDENS = Path(__file__).parent / "goldens"

ALL_STAGES = frozenset({AbstractionStage.BASE, AbstractionStage.IR,
                        AbstractionStage.PSEUDOCODE})


def full_trace(problem):
    trace = AbstractionTrace(task_id=problem.task_id, sample_index=0)
    trace.c1 = Classification1.COMBINATIONAL
    trace.c2 = Classification2.TRUTH_TABLE
    trace.ir = parse_ir(XOR_IR_JSON, Classification2.TRUTH_TABLE)
    trace.pseudocode = ["read inputs a and b", "set y to a xor b",
                        "drive output y"]
    return trace


class TestBasicRendering:
    def test_cls1_contains_problem_text(self, xor_problem):
        rendered = prompts.render_cls1(xor_problem)
        assert rendered.stage is Stage.CLS1
        assert xor_problem.description in rendered.text
        assert xor_problem.module_header in rendered.text
        assert "combinational" in rendered.text
        assert "sequential" in rendered.text

    def test_empty_description_rejected(self):
        problem = DesignProblem(
            task_id="e", description="   ",
            module_header="module e(input a, output y);", testbench="t")
        with pytest.raises(TemplateError):
            prompts.render_cls1(problem)

    def test_cls2_offers_the_five_structures(self, xor_problem):
        rendered = prompts.render_cls2(xor_problem,
                                       Classification1.COMBINATIONAL)
        for term in ("truth_table", "boolean_expression", "K-map",
                     "mux_mapping", "other"):
            assert term in rendered.text

    def test_cls2_skipped_for_sequential(self, xor_problem):
        assert prompts.render_cls2(xor_problem,
                                   Classification1.SEQUENTIAL) is None

    def test_ir_prompt_matches_structure(self, counter_problem):
        rendered = prompts.render_ir(counter_problem,
                                     Classification1.SEQUENTIAL,
                                     Classification2.FSM_IMPLIED)
        assert '"states"' in rendered.text
        assert '"transitions"' in rendered.text
        assert '"cond"' in rendered.text

    def test_ir_prompt_for_other_rejected(self, xor_problem):
        with pytest.raises(TemplateError):
            prompts.render_ir(xor_problem, Classification1.COMBINATIONAL,
                              Classification2.OTHER)

    def test_pseudocode_prompt_embeds_available_artifacts(self, xor_problem):
        trace = full_trace(xor_problem)
        rendered = prompts.render_pseudocode(
            xor_problem, trace.c1, trace.c2, trace.ir)
        assert "truth_table" in rendered.text
        assert '"rows"' in rendered.text

    def test_rendering_is_deterministic(self, xor_problem):
        first = prompts.render_cls1(xor_problem).text
        for _ in range(3):
            assert prompts.render_cls1(xor_problem).text == first


class TestFinalComposition:
    def test_block_order_base_classification_ir_pseudocode(self, xor_problem):
        trace = full_trace(xor_problem)
        text = prompts.render_final(xor_problem, trace, ALL_STAGES).text
        positions = [
            text.index(xor_problem.description),
            text.index("Circuit classification:"),
            text.index("Intermediate representation (JSON):"),
            text.index("Line-by-line pseudocode:"),
        ]
        assert positions == sorted(positions)
        assert '"rows"' in text
        assert "set y to a xor b" in text

    def test_base_only_equals_baseline_bytes(self, xor_problem):
        trace = AbstractionTrace(task_id=xor_problem.task_id, sample_index=0)
        final = prompts.render_final(
            xor_problem, trace, frozenset({AbstractionStage.BASE}))
        baseline = prompts.render_comparison(xor_problem,
                                             StrategyName.BASELINE)
        assert final.text == baseline.text

    def test_missing_ir_artifact_raises(self, xor_problem):
        trace = full_trace(xor_problem)
        trace.ir = None
        with pytest.raises(CompositionError) as excinfo:
            prompts.render_final(xor_problem, trace, ALL_STAGES)
        assert excinfo.value.stage == "ir"

    def test_missing_pseudocode_artifact_raises(self, xor_problem):
        trace = full_trace(xor_problem)
        trace.pseudocode = None
        with pytest.raises(CompositionError) as excinfo:
            prompts.render_final(xor_problem, trace, ALL_STAGES)
        assert excinfo.value.stage == "pseudocode"

    def test_classification_included_only_beyond_base(self, xor_problem):
        trace = full_trace(xor_problem)
        base_only = prompts.render_final(
            xor_problem, trace, frozenset({AbstractionStage.BASE}))
        assert "Circuit classification:" not in base_only.text
        with_ir = prompts.render_final(
            xor_problem, trace,
            frozenset({AbstractionStage.BASE, AbstractionStage.IR}))
        assert "Circuit classification:" in with_ir.text
        assert "Line-by-line pseudocode:" not in with_ir.text

    def test_ir_without_base_omits_description(self, xor_problem):
        trace = full_trace(xor_problem)
        text = prompts.render_final(
            xor_problem, trace, frozenset({AbstractionStage.IR})).text
        assert xor_problem.description not in text
        assert '"rows"' in text

    def test_full_prompt_matches_golden_bytes(self, xor_problem):
        trace = full_trace(xor_problem)
        text = prompts.render_final(xor_problem, trace, ALL_STAGES).text
        golden = (GOLDENS / "final_full_prompt.txt").read_text(
            encoding="utf-8")
        assert text == golden

    def test_baseline_prompt_matches_golden_bytes(self, xor_problem):
        text = prompts.render_comparison(xor_problem,
                                         StrategyName.BASELINE).text
        golden = (GOLDENS / "baseline_prompt.txt").read_text(encoding="utf-8")
        assert text == golden


class TestComparisonPrompts:
    def test_baseline_is_description_plus_header(self, xor_problem):
        text = prompts.render_comparison(xor_problem,
                                         StrategyName.BASELINE).text
        assert text == (xor_problem.description + "\n\n"
                        + xor_problem.module_header)

    def test_one_shot_contains_an_exemplar(self, xor_problem):
        text = prompts.render_comparison(xor_problem,
                                         StrategyName.ONE_SHOT).text
        assert "module" in text
        assert xor_problem.description in text

    def test_cot_implicit_forbids_code(self, xor_problem):
        text = prompts.render_comparison(xor_problem,
                                         StrategyName.COT_IMPLICIT).text
        assert "do not write any Verilog" in text

    def test_unsupported_strategy_rejected(self, xor_problem):
        with pytest.raises(UnsupportedStrategyError):
            prompts.render_comparison(xor_problem, StrategyName.ABSTRACTION)

    def test_header_already_in_description_not_duplicated(self):
        header = "module dup(input a, output y);"
        problem = DesignProblem(
            task_id="dup",
            description=f"Pass a through.\n\n{header}",
            module_header=header, testbench="t")
        text = prompts.render_comparison(problem, StrategyName.BASELINE).text
        assert text.count(header) == 1
