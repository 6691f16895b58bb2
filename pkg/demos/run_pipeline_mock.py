"""Pipeline walkthrough on a scripted backend.

Drives the staged generation flow end to end for two small design
problems using canned model responses, so the run is fully offline and
deterministic. Prints every stage that executed, the composed final
prompt, and the scored report. The same flow works against a live
OpenAI-compatible endpoint by swapping the backend.

Run with: python3 demos/run_pipeline_mock.py
"""

import json

from vabstract import (AbstractionStage, BackendHandle, BackendRegistry,
                       DesignProblem, ResponseCache, StrategyConfig,
                       builtin_check_traces, mock_from_script, run_benchmark,
                       score_run)

XOR_PROBLEM = DesignProblem(
    task_id="demo_xor",
    description=("Implement a 2-input XOR gate. The output y is 1 when "
                 "exactly one of the inputs a, b is 1."),
    module_header="module top_xor(input a, input b, output y);",
    testbench="// not used by the builtin checker",
    canonical_solution="    assign y = a ^ b;\nendmodule",
)

COUNTER_PROBLEM = DesignProblem(
    task_id="demo_counter",
    description=("Design a decade counter. The 4-bit output q counts from 1 "
                 "through 10 and wraps back to 1. A synchronous active-high "
                 "reset returns the count to 1."),
    module_header="module top_counter(input clk, input reset, output [3:0] q);",
    testbench="// not used by the builtin checker",
    canonical_solution=(
        "    reg [3:0] count;\n"
        "    initial count = 4'd1;\n"
        "    always @(posedge clk) begin\n"
        "        if (reset) count <= 4'd1;\n"
        "        else if (count == 4'd10) count <= 4'd1;\n"
        "        else count <= count + 4'd1;\n"
        "    end\n"
        "    assign q = count;\n"
        "endmodule"),
)

XOR_TABLE = json.dumps({
    "inputs": ["a", "b"], "output": "y",
    "rows": [{"in": "00", "out": "0"}, {"in": "01", "out": "1"},
             {"in": "10", "out": "1"}, {"in": "11", "out": "0"}],
}, indent=1)


def counter_fsm_json():
    transitions = []
    for i in range(1, 11):
        nxt = "S1" if i == 10 else f"S{i + 1}"
        transitions.append({"from": f"S{i}", "to": "S1", "cond": "reset"})
        transitions.append({"from": f"S{i}", "to": nxt, "cond": "!reset"})
    return json.dumps({
        "states": [f"S{i}" for i in range(1, 11)],
        "transitions": transitions,
        "outputs": [{"state": f"S{i}", "signal": "q", "value": i}
                    for i in range(1, 11)],
    }, indent=1)


SCRIPT = [
    {"stage": "cls1", "task_id": "demo_xor",
     "response": "The gate holds no state. Final answer: combinational"},
    {"stage": "cls2", "task_id": "demo_xor",
     "response": "Four rows cover it. Final answer: truth_table"},
    {"stage": "ir", "task_id": "demo_xor",
     "response": "```json\n" + XOR_TABLE + "\n```"},
    {"stage": "pseudocode", "task_id": "demo_xor",
     "response": "```\nread inputs a and b\nset y to a xor b\n```"},
    {"stage": "final", "task_id": "demo_xor",
     "response": ("```verilog\nmodule top_xor(input a, input b, output y);\n"
                  "    assign y = a ^ b;\nendmodule\n```")},
    {"stage": "cls1", "task_id": "demo_counter",
     "response": "It advances on clock edges. Final answer: sequential"},
    {"stage": "ir", "task_id": "demo_counter",
     "response": "```json\n" + counter_fsm_json() + "\n```"},
    {"stage": "pseudocode", "task_id": "demo_counter",
     "response": ("```\nstart counting from one\nadvance by one each tick\n"
                  "wrap to one after ten\nreset returns to one\n```")},
    {"stage": "final", "task_id": "demo_counter",
     "response": "```verilog\nmodule top_counter(input clk, input reset, "
                 "output [3:0] q);\n" + COUNTER_PROBLEM.canonical_solution +
                 "\n```"},
]


def main():
    problems = [XOR_PROBLEM, COUNTER_PROBLEM]
    cfg = StrategyConfig(
        stages=frozenset({AbstractionStage.BASE, AbstractionStage.IR,
                          AbstractionStage.PSEUDOCODE}),
        samples_per_problem=1, runs=1)
    registry = BackendRegistry.single(
        BackendHandle(mock_from_script(SCRIPT), cache=ResponseCache()))

    traces = run_benchmark(problems, cfg, registry=registry)

    for trace in traces:
        print("=" * 60)
        print(f"{trace.task_id}: stages " +
              " -> ".join(s.value for s in trace.stages_run()))
        print(f"  classification: {trace.c1.value if trace.c1 else '-'}"
              f" / {trace.c2.value if trace.c2 else '-'}")
        print(f"  tokens: {trace.total_input_tokens} in, "
              f"{trace.total_output_tokens} out")

    print("=" * 60)
    print("final prompt sent for", traces[0].task_id)
    print("-" * 60)
    print(traces[0].stage_records[-1].prompt)
    print("-" * 60)

    outcomes = builtin_check_traces(problems, traces)
    report = score_run(traces, outcomes, cfg, k_values=[1])
    print()
    for line in report.summary_lines():
        print(line)


if __name__ == "__main__":
    main()
