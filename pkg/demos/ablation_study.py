"""Ablation walkthrough: which abstraction layers earn their tokens.

Runs the same scripted problems under all six stage combinations (base
prompt, pseudocode, intermediate representation, and their unions),
checks every sample with the built-in simulator, and prints one result
row per configuration. Mirrors what the ``vabstract ablate`` command
does, but inline and offline.

Run with: python3 demos/ablation_study.py
"""

from run_pipeline_mock import COUNTER_PROBLEM, SCRIPT, XOR_PROBLEM

from vabstract import (ABLATION_STAGE_SETS, BackendHandle, BackendRegistry,
                       ResponseCache, StrategyConfig, builtin_check_traces,
                       mock_from_script, run_benchmark, score_run)
from vabstract.cli import stage_set_label

# the scripted final answers serve every configuration, so extend the
# script with entries for the comparison-style prompts the smaller stage
# sets produce
EXTRA = [
    {"stage": "baseline", "task_id": "demo_xor",
     "response": SCRIPT[4]["response"]},
    {"stage": "baseline", "task_id": "demo_counter",
     "response": SCRIPT[8]["response"]},
]


def main():
    problems = [XOR_PROBLEM, COUNTER_PROBLEM]
    registry = BackendRegistry.single(
        BackendHandle(mock_from_script(SCRIPT + EXTRA),
                      cache=ResponseCache()))

    print(f"{'configuration':<22} {'comp@1':>8} {'func@1':>8} "
          f"{'tok/abstraction':>16}")
    print("-" * 58)
    for stage_set in ABLATION_STAGE_SETS:
        cfg = StrategyConfig(stages=stage_set, samples_per_problem=1, runs=1)
        traces = run_benchmark(problems, cfg, registry=registry)
        outcomes = builtin_check_traces(problems, traces)
        report = score_run(traces, outcomes, cfg, k_values=[1])
        comp = report.compilation_stats[1][0] * 100
        func = report.functionality_stats[1][0] * 100
        print(f"{stage_set_label(stage_set):<22} {comp:>7.1f}% "
              f"{func:>7.1f}% {report.per_abstraction_tokens:>16.1f}")


if __name__ == "__main__":
    main()
