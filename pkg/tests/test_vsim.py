"""Behavior of the built-in cycle-level Verilog interpreter."""

import pytest

from vabstract.vsim import SimulatedModule, VsimError


def compile_mod(source):
    return SimulatedModule.compile(source)


class TestCombinational:
    def test_continuous_assign(self):
        mod = compile_mod(
            "module g(input a, input b, output y);\n"
            "    assign y = a & b;\n"
            "endmodule\n")
        assert mod.eval_combinational(a=1, b=1) == {"y": 1}
        assert mod.eval_combinational(a=1, b=0) == {"y": 0}

    def test_operator_zoo(self):
        mod = compile_mod(
            "module ops(input [3:0] a, input [3:0] b, output [3:0] s,\n"
            "           output eq, output land, output [3:0] x);\n"
            "    assign s = a + b;\n"
            "    assign eq = a == b;\n"
            "    assign land = a && b;\n"
            "    assign x = a ^ b;\n"
            "endmodule\n")
        out = mod.eval_combinational(a=9, b=9)
        assert out == {"s": 2, "eq": 1, "land": 1, "x": 0}

    def test_ternary_and_concat(self):
        mod = compile_mod(
            "module m(input s, input a, input b, output [1:0] y);\n"
            "    assign y = s ? {a, b} : {b, a};\n"
            "endmodule\n")
        assert mod.eval_combinational(s=1, a=1, b=0)["y"] == 0b10
        assert mod.eval_combinational(s=0, a=1, b=0)["y"] == 0b01

    def test_always_comb_case(self):
        mod = compile_mod(
            "module mux(input [1:0] sel, output [3:0] y);\n"
            "    reg [3:0] y_r;\n"
            "    always @(*) begin\n"
            "        case (sel)\n"
            "            2'd0: y_r = 4'd10;\n"
            "            2'd1: y_r = 4'd11;\n"
            "            default: y_r = 4'd0;\n"
            "        endcase\n"
            "    end\n"
            "    assign y = y_r;\n"
            "endmodule\n")
        assert mod.eval_combinational(sel=0)["y"] == 10
        assert mod.eval_combinational(sel=1)["y"] == 11
        assert mod.eval_combinational(sel=3)["y"] == 0

    def test_bit_select(self):
        mod = compile_mod(
            "module b(input [2:0] v, output y);\n"
            "    assign y = v[2];\n"
            "endmodule\n")
        assert mod.eval_combinational(v=0b100)["y"] == 1
        assert mod.eval_combinational(v=0b011)["y"] == 0

    def test_width_masking(self):
        mod = compile_mod(
            "module w(input [1:0] a, output [1:0] y);\n"
            "    assign y = a + 2'd3;\n"
            "endmodule\n")
        assert mod.eval_combinational(a=3)["y"] == 2  # wraps modulo 4


class TestSequential:
    COUNTER = (
        "module c(input clk, input rst, output [3:0] q);\n"
        "    reg [3:0] count;\n"
        "    initial count = 4'd0;\n"
        "    always @(posedge clk) begin\n"
        "        if (rst) count <= 4'd0;\n"
        "        else count <= count + 4'd1;\n"
        "    end\n"
        "    assign q = count;\n"
        "endmodule\n")

    def test_counter_advances_on_edges(self):
        mod = compile_mod(self.COUNTER)
        mod.set("rst", 0)
        for expected in (1, 2, 3):
            mod.posedge("clk")
            assert mod.get("q") == expected

    def test_synchronous_reset(self):
        mod = compile_mod(self.COUNTER)
        mod.set("rst", 0)
        mod.posedge("clk")
        mod.posedge("clk")
        mod.set("rst", 1)
        mod.posedge("clk")
        assert mod.get("q") == 0

    def test_nonblocking_swap(self):
        mod = compile_mod(
            "module swap(input clk, output a, output b);\n"
            "    reg x; reg y;\n"
            "    initial x = 1;\n"
            "    initial y = 0;\n"
            "    always @(posedge clk) begin\n"
            "        x <= y;\n"
            "        y <= x;\n"
            "    end\n"
            "    assign a = x;\n"
            "    assign b = y;\n"
            "endmodule\n")
        mod.posedge("clk")
        assert (mod.get("a"), mod.get("b")) == (0, 1)
        mod.posedge("clk")
        assert (mod.get("a"), mod.get("b")) == (1, 0)


class TestPortsAndErrors:
    def test_classic_port_declarations(self):
        mod = compile_mod(
            "module old(a, b, y);\n"
            "    input a;\n"
            "    input b;\n"
            "    output y;\n"
            "    assign y = a | b;\n"
            "endmodule\n")
        assert mod.eval_combinational(a=0, b=1)["y"] == 1

    def test_port_lists(self):
        mod = compile_mod(
            "module pl(input a, b, output y);\n"
            "    assign y = a ^ b;\n"
            "endmodule\n")
        assert sorted(mod.inputs()) == ["a", "b"]

    def test_set_non_input_rejected(self):
        mod = compile_mod(
            "module g(input a, output y);\n    assign y = a;\nendmodule\n")
        with pytest.raises(VsimError):
            mod.set("y", 1)

    def test_undeclared_signal_rejected(self):
        with pytest.raises(VsimError):
            compile_mod(
                "module g(input a, output y);\n"
                "    assign y = ghost;\n"
                "endmodule\n").eval_combinational(a=0)

    def test_x_literals_rejected(self):
        with pytest.raises(VsimError):
            compile_mod(
                "module g(input a, output y);\n"
                "    assign y = 1'bx;\n"
                "endmodule\n")

    def test_comments_are_ignored(self):
        mod = compile_mod(
            "module g(input a, output y); // line comment\n"
            "    /* block\n       comment */\n"
            "    assign y = a;\n"
            "endmodule\n")
        assert mod.eval_combinational(a=1)["y"] == 1

    def test_unsettled_loop_detected(self):
        mod_src = ("module loop(input a, output y);\n"
                   "    wire w;\n"
                   "    assign w = ~w;\n"
                   "    assign y = w;\n"
                   "endmodule\n")
        with pytest.raises(VsimError):
            compile_mod(mod_src)
