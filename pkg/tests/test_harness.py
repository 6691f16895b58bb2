"""Scoring: pass@k, statistics, sample checking, report assembly."""

import itertools
import math
import random
import sys
from fractions import Fraction

import pytest

from conftest import make_counter_problem, make_xor_problem
from vabstract.errors import ReportError, SimulatorMissingError
from vabstract.harness import (SampleOutcome, SimulatorConfig,
                               assemble_candidate, builtin_check_sample,
                               builtin_check_traces, check_sample, mean_sd,
                               pass_at_k, score_run)
from vabstract.problems import (AbstractionTrace, Stage, StageRecord,
                                StrategyConfig)


def enumerate_pass_at_k(n, c, k):
    """Oracle: exhaustive subset enumeration."""
    hits = 0
    total = 0
    for subset in itertools.combinations(range(n), k):
        total += 1
        if any(i < c for i in subset):
            hits += 1
    return hits / total


class TestPassAtK:
    def test_matches_exhaustive_enumeration(self):
        for n in range(1, 11):
            for c in range(0, n + 1):
                for k in range(1, n + 1):
                    expected = enumerate_pass_at_k(n, c, k)
                    assert math.isclose(pass_at_k(n, c, k), expected,
                                        rel_tol=0, abs_tol=1e-12), (n, c, k)

    def test_boundary_values(self):
        assert pass_at_k(10, 0, 5) == 0.0
        assert pass_at_k(10, 10, 1) == 1.0
        assert pass_at_k(5, 3, 3) == 1.0  # n - c < k forces a hit

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            pass_at_k(5, 6, 1)
        with pytest.raises(ValueError):
            pass_at_k(5, 0, 0)
        with pytest.raises(ValueError):
            pass_at_k(5, 0, 6)
        with pytest.raises(ValueError):
            pass_at_k(5, -1, 1)

    def test_no_large_binomials_needed(self):
        # the ratio form stays finite where C(n, k) would overflow floats
        value = pass_at_k(10000, 3, 5000)
        assert 0.0 <= value <= 1.0


class TestMeanSd:
    def test_matches_exact_fraction_reference(self):
        rng = random.Random(7)
        for _ in range(100):
            values = [rng.uniform(-50, 50) for _ in range(rng.randint(2, 12))]
            mean, sd = mean_sd(values)
            fracs = [Fraction(v) for v in values]
            ref_mean = sum(fracs) / len(fracs)
            ref_var = sum((f - ref_mean) ** 2 for f in fracs) / (len(fracs) - 1)
            ref_sd = math.sqrt(float(ref_var))
            assert math.isclose(mean, float(ref_mean), rel_tol=1e-10)
            assert math.isclose(sd, ref_sd, rel_tol=1e-10)

    def test_single_value_has_no_sd(self):
        mean, sd = mean_sd([3.5])
        assert mean == 3.5
        assert sd is None

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            mean_sd([])


class TestAssembleCandidate:
    def test_body_gets_header_prepended(self, xor_problem):
        full = assemble_candidate(xor_problem, "assign y = a ^ b;")
        assert full.startswith("module top_xor(")
        assert full.rstrip().endswith("endmodule")

    def test_complete_module_untouched(self, xor_problem):
        complete = "module top_xor(input a, input b, output y);\nendmodule"
        assert assemble_candidate(xor_problem, complete) == complete


def make_trace(task_id, sample_index, run_index=0, final="module x...",
               outputs=(10,)):
    trace = AbstractionTrace(task_id=task_id, sample_index=sample_index,
                             run_index=run_index)
    for i, out in enumerate(outputs):
        stage = Stage.FINAL if i == len(outputs) - 1 else \
            (Stage.CLS1, Stage.IR, Stage.PSEUDOCODE)[i % 3]
        trace.record(StageRecord(stage=stage, prompt="p", response="r",
                                 model_id="m", input_tokens=5,
                                 output_tokens=out))
    trace.final_verilog = final
    return trace


def outcome_for(trace, compiled=True, functional=True):
    return SampleOutcome(trace.task_id, trace.sample_index, trace.run_index,
                         compiled=compiled,
                         functional=functional and compiled)


class TestScoreRun:
    def test_per_abstraction_token_average(self):
        """Abstraction outputs of 120/90/90 average to 100 per layer."""
        cfg = StrategyConfig(samples_per_problem=1, runs=1)
        trace = make_trace("t", 0, outputs=(120, 90, 90, 40))
        report = score_run([trace], [outcome_for(trace)], cfg, k_values=[1])
        assert report.per_abstraction_tokens == pytest.approx(100.0)
        assert report.avg_output_tokens == pytest.approx(340.0)
        # conservation: stage records sum to the reported totals
        assert trace.total_output_tokens == 340

    def test_pass_rates_averaged_over_problems(self):
        cfg = StrategyConfig(samples_per_problem=2, runs=1)
        traces, outcomes = [], []
        for tid, good in (("a", 2), ("b", 0)):
            for s in range(2):
                trace = make_trace(tid, s)
                traces.append(trace)
                outcomes.append(outcome_for(trace, compiled=True,
                                            functional=s < good))
        report = score_run(traces, outcomes, cfg, k_values=[1, 2])
        # problem a: c=2 of n=2; problem b: c=0
        assert report.functionality_stats[1][0] == pytest.approx(0.5)
        assert report.functionality_stats[2][0] == pytest.approx(0.5)
        assert report.compilation_stats[1][0] == pytest.approx(1.0)

    def test_cross_run_mean_and_sd(self):
        cfg = StrategyConfig(samples_per_problem=1, runs=2)
        traces, outcomes = [], []
        for run, functional in ((0, True), (1, False)):
            trace = make_trace("t", 0, run_index=run)
            traces.append(trace)
            outcomes.append(outcome_for(trace, functional=functional))
        report = score_run(traces, outcomes, cfg, k_values=[1])
        mean, sd = report.functionality_stats[1]
        assert mean == pytest.approx(0.5)
        assert sd == pytest.approx(math.sqrt(0.5))

    def test_single_run_reports_no_sd(self):
        cfg = StrategyConfig(samples_per_problem=1, runs=1)
        trace = make_trace("t", 0)
        report = score_run([trace], [outcome_for(trace)], cfg, k_values=[1])
        assert report.functionality_stats[1][1] is None

    def test_dimension_mismatch_rejected(self):
        cfg = StrategyConfig(samples_per_problem=2, runs=1)
        trace = make_trace("t", 0)
        with pytest.raises(ReportError):
            score_run([trace], [outcome_for(trace)], cfg, k_values=[1])

    def test_missing_outcome_rejected(self):
        cfg = StrategyConfig(samples_per_problem=1, runs=1)
        trace = make_trace("t", 0)
        with pytest.raises(ReportError):
            score_run([trace], [], cfg, k_values=[1])

    def test_bad_k_rejected(self):
        cfg = StrategyConfig(samples_per_problem=1, runs=1)
        trace = make_trace("t", 0)
        with pytest.raises(ReportError):
            score_run([trace], [outcome_for(trace)], cfg, k_values=[2])

    def test_report_serializes(self):
        cfg = StrategyConfig(samples_per_problem=1, runs=1)
        trace = make_trace("t", 0)
        report = score_run([trace], [outcome_for(trace)], cfg, k_values=[1])
        payload = report.to_dict()
        assert payload["functionality"]["1"]["mean"] == 1.0
        assert payload["config"]["n"] == 1

    def test_functional_requires_compiled(self):
        with pytest.raises(ReportError):
            SampleOutcome("t", 0, 0, compiled=False, functional=True)


class TestBuiltinCheck:
    def test_correct_candidate_passes(self):
        problem = make_xor_problem()
        good = ("module top_xor(input a, input b, output y);\n"
                "    assign y = a ^ b;\nendmodule")
        outcome = builtin_check_sample(problem, good)
        assert outcome.compiled and outcome.functional

    def test_wrong_logic_detected(self):
        problem = make_xor_problem()
        wrong = ("module top_xor(input a, input b, output y);\n"
                 "    assign y = a & b;\nendmodule")
        outcome = builtin_check_sample(problem, wrong)
        assert outcome.compiled and not outcome.functional
        assert "output y" in outcome.log_excerpt

    def test_unparseable_candidate_fails_compile(self):
        problem = make_xor_problem()
        outcome = builtin_check_sample(problem, "module top_xor(")
        assert not outcome.compiled

    def test_sequential_equivalence(self):
        problem = make_counter_problem()
        outcome = builtin_check_sample(problem, problem.canonical_solution)
        assert outcome.compiled and outcome.functional

    def test_sequential_divergence_detected(self):
        problem = make_counter_problem()
        wrong = (
            "    reg [3:0] count;\n"
            "    initial count = 4'd1;\n"
            "    always @(posedge clk) begin\n"
            "        if (reset) count <= 4'd1;\n"
            "        else count <= count + 4'd1;\n"  # never wraps
            "    end\n"
            "    assign q = count;\n"
            "endmodule")
        outcome = builtin_check_sample(problem, wrong)
        assert outcome.compiled and not outcome.functional

    def test_traces_without_final_module_fail(self):
        problem = make_xor_problem()
        trace = AbstractionTrace(task_id=problem.task_id, sample_index=0)
        outcomes = builtin_check_traces([problem], [trace])
        assert not outcomes[0].compiled
        assert "no final module" in outcomes[0].log_excerpt


STUB_COMPILER = """\
import pathlib, sys
candidate = pathlib.Path(sys.argv[1]).read_text()
if "assign" not in candidate:
    sys.stderr.write("syntax error\\n")
    sys.exit(1)
pathlib.Path(sys.argv[3]).write_text(candidate)
"""

STUB_RUNNER = """\
import pathlib, sys
built = pathlib.Path(sys.argv[1]).read_text()
if "a ^ b" in built:
    print("Mismatches: 0 in 20 samples")
else:
    print("Mismatches: 7 in 20 samples")
"""


class TestSubprocessHarness:
    def sim_config(self, tmp_path, timeout=30.0):
        compiler = tmp_path / "stub_compile.py"
        runner = tmp_path / "stub_run.py"
        compiler.write_text(STUB_COMPILER, encoding="utf-8")
        runner.write_text(STUB_RUNNER, encoding="utf-8")
        return SimulatorConfig(
            compile_cmd=(f"{sys.executable} {compiler} "
                         "{candidate} {testbench} {out}"),
            run_cmd=f"{sys.executable} {runner} {{out}}",
            timeout_s=timeout)

    def test_functional_candidate(self, tmp_path):
        problem = make_xor_problem()
        outcome = check_sample(problem, "    assign y = a ^ b;\nendmodule",
                               self.sim_config(tmp_path))
        assert outcome.compiled and outcome.functional

    def test_mismatching_candidate(self, tmp_path):
        problem = make_xor_problem()
        outcome = check_sample(problem, "    assign y = a & b;\nendmodule",
                               self.sim_config(tmp_path))
        assert outcome.compiled and not outcome.functional

    def test_compile_failure(self, tmp_path):
        problem = make_xor_problem()
        outcome = check_sample(problem, "nonsense\nendmodule",
                               self.sim_config(tmp_path))
        assert not outcome.compiled
        assert "syntax error" in outcome.log_excerpt

    def test_empty_candidate(self, tmp_path):
        problem = make_xor_problem()
        outcome = check_sample(problem, "   ", self.sim_config(tmp_path))
        assert not outcome.compiled

    def test_run_timeout(self, tmp_path):
        problem = make_xor_problem()
        sim = self.sim_config(tmp_path, timeout=1.0)
        slow = tmp_path / "stub_run.py"
        slow.write_text("import time\ntime.sleep(10)\n", encoding="utf-8")
        outcome = check_sample(problem, "    assign y = a ^ b;\nendmodule",
                               sim)
        assert outcome.timed_out
        assert not outcome.functional

    def test_missing_simulator_aborts(self):
        problem = make_xor_problem()
        sim = SimulatorConfig(compile_cmd="no_such_simulator_binary {out}",
                              run_cmd="also_missing {out}")
        with pytest.raises(SimulatorMissingError):
            check_sample(problem, "    assign y = a ^ b;\nendmodule", sim)
