"""Shared fixtures: small design problems and scripted backend responses."""

import json

import pytest

from vabstract import (BackendHandle, BackendRegistry, ResponseCache,
                       mock_from_script)
from vabstract.problems import DesignProblem


XOR_IR_JSON = json.dumps({
    "inputs": ["a", "b"],
    "output": "y",
    "rows": [
        {"in": "00", "out": "0"},
        {"in": "01", "out": "1"},
        {"in": "10", "out": "1"},
        {"in": "11", "out": "0"},
    ],
}, indent=1)

COUNTER_STATES = [f"S{i}" for i in range(1, 11)]


def counter_fsm_dict():
    """Ten-state one-hot counter: q counts 1..10 and wraps, reset returns
    to S1 synchronously."""
    transitions = []
    for i in range(1, 11):
        nxt = "S1" if i == 10 else f"S{i + 1}"
        transitions.append({"from": f"S{i}", "to": "S1", "cond": "reset"})
        transitions.append({"from": f"S{i}", "to": nxt, "cond": "!reset"})
    outputs = [{"state": f"S{i}", "signal": "q", "value": i}
               for i in range(1, 11)]
    return {"states": COUNTER_STATES, "transitions": transitions,
            "outputs": outputs}


COUNTER_IR_JSON = json.dumps(counter_fsm_dict(), indent=1)


def make_xor_problem():
    return DesignProblem(
        task_id="fixture_xor",
        description=("Implement a 2-input XOR gate. The output y is 1 when "
                     "exactly one of the inputs a, b is 1."),
        module_header="module top_xor(input a, input b, output y);",
        testbench="// testbench placeholder",
        canonical_solution="    assign y = a ^ b;\nendmodule",
    )


def make_counter_problem():
    return DesignProblem(
        task_id="fixture_counter",
        description=("Design a decade counter. The 4-bit output q counts "
                     "from 1 through 10 and wraps back to 1. A synchronous "
                     "active-high reset returns the count to 1."),
        module_header=("module top_counter(input clk, input reset, "
                       "output [3:0] q);"),
        testbench="// testbench placeholder",
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


def make_adder_problem():
    """A problem whose structure classification lands on 'other'."""
    return DesignProblem(
        task_id="fixture_adder",
        description=("Implement an 8-bit adder. The output s is the sum of "
                     "the inputs a and b, discarding the carry out."),
        module_header=("module top_adder(input [7:0] a, input [7:0] b, "
                       "output [7:0] s);"),
        testbench="// testbench placeholder",
        canonical_solution="    assign s = a + b;\nendmodule",
    )


XOR_FINAL = ("```verilog\n"
             "module top_xor(input a, input b, output y);\n"
             "    assign y = a ^ b;\n"
             "endmodule\n"
             "```")

COUNTER_FINAL = ("```verilog\n"
                 "module top_counter(input clk, input reset, output [3:0] q);\n"
                 "    reg [3:0] count;\n"
                 "    initial count = 4'd1;\n"
                 "    always @(posedge clk) begin\n"
                 "        if (reset) count <= 4'd1;\n"
                 "        else if (count == 4'd10) count <= 4'd1;\n"
                 "        else count <= count + 4'd1;\n"
                 "    end\n"
                 "    assign q = count;\n"
                 "endmodule\n"
                 "```")

ADDER_FINAL = ("```verilog\n"
               "module top_adder(input [7:0] a, input [7:0] b, "
               "output [7:0] s);\n"
               "    assign s = a + b;\n"
               "endmodule\n"
               "```")


def full_mock_script():
    """Script entries covering every stage of the three fixture problems."""
    return [
        {"stage": "cls1", "task_id": "fixture_xor",
         "response": "The gate holds no state. Final answer: combinational"},
        {"stage": "cls2", "task_id": "fixture_xor",
         "response": "A small table covers it. Final answer: truth_table"},
        {"stage": "ir", "task_id": "fixture_xor",
         "response": "```json\n" + XOR_IR_JSON + "\n```"},
        {"stage": "pseudocode", "task_id": "fixture_xor",
         "response": ("```\nread inputs a and b\nset y to a xor b\n"
                      "drive output y\n```")},
        {"stage": "final", "task_id": "fixture_xor", "response": XOR_FINAL},
        {"stage": "baseline", "task_id": "fixture_xor",
         "response": XOR_FINAL},
        {"stage": "one_shot", "task_id": "fixture_xor",
         "response": XOR_FINAL},
        {"stage": "cot", "task_id": "fixture_xor",
         "response": ("First note y must be high for exactly one high "
                      "input, the exclusive-or function.\n" + XOR_FINAL)},

        {"stage": "cls1", "task_id": "fixture_counter",
         "response": "It counts across clock cycles. Final answer: sequential"},
        {"stage": "ir", "task_id": "fixture_counter",
         "response": "```json\n" + COUNTER_IR_JSON + "\n```"},
        {"stage": "pseudocode", "task_id": "fixture_counter",
         "response": ("```\nstart counting from one\non each clock tick "
                      "advance by one\nafter ten wrap back to one\non reset "
                      "return to one\n```")},
        {"stage": "final", "task_id": "fixture_counter",
         "response": COUNTER_FINAL},
        {"stage": "baseline", "task_id": "fixture_counter",
         "response": COUNTER_FINAL},

        {"stage": "cls1", "task_id": "fixture_adder",
         "response": "Pure arithmetic, no clocking. Final answer: combinational"},
        {"stage": "cls2", "task_id": "fixture_adder",
         "response": "Too wide for a table or map. Final answer: other"},
        {"stage": "pseudocode", "task_id": "fixture_adder",
         "response": ("```\nadd the two 8-bit inputs\nkeep the low 8 bits\n"
                      "drive the sum output\n```")},
        {"stage": "final", "task_id": "fixture_adder",
         "response": ADDER_FINAL},
        {"stage": "baseline", "task_id": "fixture_adder",
         "response": ADDER_FINAL},
    ]


def make_registry(script=None, cache=True):
    backend = mock_from_script(script if script is not None
                               else full_mock_script())
    handle = BackendHandle(backend, cache=ResponseCache() if cache else None,
                           sleep=lambda s: None)
    return BackendRegistry.single(handle), backend


@pytest.fixture
def xor_problem():
    return make_xor_problem()


@pytest.fixture
def counter_problem():
    return make_counter_problem()


@pytest.fixture
def adder_problem():
    return make_adder_problem()


@pytest.fixture
def fixture_problems():
    return [make_xor_problem(), make_counter_problem(), make_adder_problem()]


@pytest.fixture
def mock_registry():
    registry, _ = make_registry()
    return registry
