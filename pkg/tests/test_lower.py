"""IR-to-Verilog lowering, verified by simulating the emitted modules."""

import itertools
import json
import random

import pytest

from conftest import counter_fsm_dict
from vabstract.errors import LoweringError
from vabstract.ir import parse_ir
from vabstract.lower import (lower_to_verilog, module_name_of,
                             parse_header_ports)
from vabstract.problems import Classification2
from vabstract.vsim import SimulatedModule


def lower(obj, kind, header):
    return lower_to_verilog(parse_ir(json.dumps(obj), kind), header)


class TestHeaderParsing:
    def test_ansi_header(self):
        ports = parse_header_ports(
            "module m(input clk, input reset, output [3:0] q);")
        assert ports["clk"].direction == "input"
        assert ports["reset"].direction == "input"
        assert ports["q"].direction == "output"
        assert ports["q"].width == 4

    def test_comma_name_lists(self):
        ports = parse_header_ports("module m(input a, b, c, output y);")
        assert sorted(p for p, v in ports.items()
                      if v.direction == "input") == ["a", "b", "c"]

    def test_net_type_keywords(self):
        ports = parse_header_ports(
            "module m(input wire a, output reg [7:0] d, output logic y);")
        assert ports["d"].width == 8
        assert ports["y"].width == 1

    def test_headerless_text_rejected(self):
        with pytest.raises(LoweringError):
            parse_header_ports("nothing here")
        with pytest.raises(LoweringError):
            module_name_of("nothing here")


class TestFsmLowering:
    HEADER = "module counter(input clk, input reset, output [3:0] q);"

    def test_reference_counter_forty_cycles(self):
        """q follows 1..10 wrapping, with synchronous reset back to 1."""
        verilog = lower(counter_fsm_dict(), Classification2.FSM_IMPLIED,
                        self.HEADER)
        mod = SimulatedModule.compile(verilog)
        expected_q = 1
        assert mod.get("q") == expected_q
        reset_plan = {0: 1, 17: 1, 18: 1, 33: 1}
        for cycle in range(40):
            reset = reset_plan.get(cycle, 0)
            mod.set("reset", reset)
            mod.posedge("clk")
            if reset:
                expected_q = 1
            else:
                expected_q = 1 if expected_q == 10 else expected_q + 1
            assert mod.get("q") == expected_q, f"cycle {cycle}"

    def test_free_run_wraps_after_ten(self):
        verilog = lower(counter_fsm_dict(), Classification2.FSM_IMPLIED,
                        self.HEADER)
        mod = SimulatedModule.compile(verilog)
        mod.set("reset", 0)
        seen = []
        for _ in range(20):
            mod.posedge("clk")
            seen.append(mod.get("q"))
        assert seen == [2, 3, 4, 5, 6, 7, 8, 9, 10] + \
            [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 1]

    def test_transition_priority_is_list_order(self):
        # two enabled transitions: the first listed wins
        obj = {"states": ["A", "B", "C"],
               "transitions": [{"from": "A", "to": "B", "cond": "go"},
                               {"from": "A", "to": "C", "cond": "1"}],
               "outputs": [{"state": "A", "signal": "s", "value": 0},
                           {"state": "B", "signal": "s", "value": 1},
                           {"state": "C", "signal": "s", "value": 2}]}
        verilog = lower(obj, Classification2.FSM_IMPLIED,
                        "module p(input clk, input go, output [1:0] s);")
        mod = SimulatedModule.compile(verilog)
        mod.set("go", 1)
        mod.posedge("clk")
        assert mod.get("s") == 1

    def test_clockless_header_rejected(self):
        with pytest.raises(LoweringError):
            lower(counter_fsm_dict(), Classification2.FSM_IMPLIED,
                  "module c(input reset, output [3:0] q);")

    def test_condition_over_unknown_signal_rejected(self):
        obj = {"states": ["A"],
               "transitions": [{"from": "A", "to": "A", "cond": "ghost"}],
               "outputs": []}
        with pytest.raises(LoweringError):
            lower(obj, Classification2.FSM_IMPLIED,
                  "module c(input clk, output y);")

    def test_output_signal_must_exist(self):
        obj = {"states": ["A"], "transitions": [],
               "outputs": [{"state": "A", "signal": "nope", "value": 1}]}
        with pytest.raises(LoweringError):
            lower(obj, Classification2.FSM_IMPLIED,
                  "module c(input clk, output y);")


def random_truth_table(rng, n_inputs, out_width=1):
    names = ["a", "b", "c", "d"][:n_inputs]
    rows = []
    for value in range(2 ** n_inputs):
        bits = format(value, f"0{n_inputs}b")
        out = "".join(rng.choice("01") for _ in range(out_width))
        rows.append({"in": bits, "out": out})
    return {"inputs": names, "output": "y", "rows": rows}


class TestTruthTableLowering:
    def header(self, n_inputs, out_width=1):
        names = ["a", "b", "c", "d"][:n_inputs]
        decls = ", ".join(f"input {n}" for n in names)
        out = "output y" if out_width == 1 else f"output [{out_width - 1}:0] y"
        return f"module tt({decls}, {out});"

    def test_fifty_random_tables_simulate_exactly(self):
        rng = random.Random(99)
        for case in range(50):
            n = rng.choice((2, 3, 4))
            width = rng.choice((1, 1, 2))
            obj = random_truth_table(rng, n, width)
            verilog = lower(obj, Classification2.TRUTH_TABLE,
                            self.header(n, width))
            mod = SimulatedModule.compile(verilog)
            for row in obj["rows"]:
                env = {name: int(bit)
                       for name, bit in zip(obj["inputs"], row["in"])}
                got = mod.eval_combinational(**env)["y"]
                assert got == int(row["out"], 2), f"case {case} row {row}"

    def test_output_width_mismatch_rejected(self):
        obj = random_truth_table(random.Random(0), 2, out_width=2)
        with pytest.raises(LoweringError):
            lower(obj, Classification2.TRUTH_TABLE, self.header(2, 1))

    def test_wide_input_port_rejected(self):
        obj = random_truth_table(random.Random(0), 2)
        with pytest.raises(LoweringError):
            lower(obj, Classification2.TRUTH_TABLE,
                  "module tt(input [1:0] a, input b, output y);")


class TestBooleanLowering:
    def test_equations_become_assigns(self):
        obj = {"inputs": ["a", "b", "c"], "outputs": ["maj", "odd"],
               "expressions": {
                   "maj": "a AND b OR a AND c OR b AND c",
                   "odd": "a XOR b XOR c"}}
        verilog = lower(obj, Classification2.BOOLEAN_EXPRESSION,
                        "module f(input a, input b, input c, "
                        "output maj, output odd);")
        mod = SimulatedModule.compile(verilog)
        for a, b, c in itertools.product((0, 1), repeat=3):
            out = mod.eval_combinational(a=a, b=b, c=c)
            assert out["maj"] == (1 if a + b + c >= 2 else 0)
            assert out["odd"] == (a + b + c) % 2

    def test_wide_output_rejected(self):
        obj = {"inputs": ["a"], "outputs": ["y"], "expressions": {"y": "a"}}
        with pytest.raises(LoweringError):
            lower(obj, Classification2.BOOLEAN_EXPRESSION,
                  "module f(input a, output [1:0] y);")


class TestKmapLowering:
    def test_kmap_lowers_through_minimization(self):
        obj = {"row_vars": ["a"], "col_vars": ["b"],
               "cells": [["0", "1"], ["1", "1"]]}
        verilog = lower(obj, Classification2.KMAP,
                        "module k(input a, input b, output y);")
        mod = SimulatedModule.compile(verilog)
        for a, b in itertools.product((0, 1), repeat=2):
            assert mod.eval_combinational(a=a, b=b)["y"] == (a | b)

    def test_two_output_header_rejected(self):
        obj = {"row_vars": ["a"], "col_vars": ["b"],
               "cells": [["0", "1"], ["1", "1"]]}
        with pytest.raises(LoweringError):
            lower(obj, Classification2.KMAP,
                  "module k(input a, input b, output y, output z);")


class TestMuxLowering:
    def test_mapping_and_default(self):
        obj = {"data_inputs": ["d0", "d1", "d2"],
               "select": {"name": "sel", "width": 2},
               "mapping": {"0": "d0", "1": "d1", "2": "d2", "3": "5"}}
        verilog = lower(obj, Classification2.MUX_MAPPING,
                        "module mx(input [2:0] d0, input [2:0] d1, "
                        "input [2:0] d2, input [1:0] sel, "
                        "output [2:0] y);")
        mod = SimulatedModule.compile(verilog)
        env = {"d0": 1, "d1": 2, "d2": 3}
        assert mod.eval_combinational(sel=0, **env)["y"] == 1
        assert mod.eval_combinational(sel=1, **env)["y"] == 2
        assert mod.eval_combinational(sel=2, **env)["y"] == 3
        assert mod.eval_combinational(sel=3, **env)["y"] == 5

    def test_select_width_mismatch_rejected(self):
        obj = {"data_inputs": ["d0"], "select": {"name": "sel", "width": 2},
               "mapping": {"0": "d0"}}
        with pytest.raises(LoweringError):
            lower(obj, Classification2.MUX_MAPPING,
                  "module mx(input d0, input sel, output y);")


class TestEmission:
    def test_emitted_module_keeps_header_name(self):
        verilog = lower(counter_fsm_dict(), Classification2.FSM_IMPLIED,
                        "module counter(input clk, input reset, "
                        "output [3:0] q);")
        assert verilog.startswith("module counter(")
        assert verilog.rstrip().endswith("endmodule")

    def test_lowering_is_deterministic(self):
        first = lower(counter_fsm_dict(), Classification2.FSM_IMPLIED,
                      "module counter(input clk, input reset, "
                      "output [3:0] q);")
        for _ in range(3):
            again = lower(counter_fsm_dict(), Classification2.FSM_IMPLIED,
                          "module counter(input clk, input reset, "
                          "output [3:0] q);")
            assert again == first
