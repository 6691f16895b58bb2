"""Deterministic lowering of each IR structure to Verilog-2001.

This is the LLM-free oracle path: given a validated IR and a module header,
emit a compilable module implementing exactly the IR's logic. State machines
lower to a one-hot state register with synchronous transitions; truth tables
and MUX mappings to case statements; equations (and minimized K-maps) to
continuous assignments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from . import expr
from .errors import ExpressionError, LoweringError
from .ir import (BooleanEqnsIr, FsmIr, IntermediateRep, KMapIr, MuxIr,
                 TruthTableIr)
from .qm import minimize_kmap


@dataclass(frozen=True)
class Port:
    name: str
    direction: str  # "input" | "output" | "inout"
    width: int      # bit width; 1 for scalar
    msb: int = 0
    lsb: int = 0


_PORT_DECL_RE = re.compile(
    r"\b(input|output|inout)\b"
    r"(?:\s+(?:reg|wire|logic))?"
    r"(?:\s*\[\s*(\d+)\s*:\s*(\d+)\s*\])?"
    r"\s*([A-Za-z_][A-Za-z0-9_$]*"
    r"(?:\s*,\s*(?!input\b|output\b|inout\b)[A-Za-z_][A-Za-z0-9_$]*)*)")


def parse_header_ports(header: str) -> Dict[str, Port]:
    """Extract port names, directions and widths from a module header."""
    ports: Dict[str, Port] = {}
    for m in _PORT_DECL_RE.finditer(header):
        direction, msb, lsb, names = m.groups()
        msb_i = int(msb) if msb is not None else 0
        lsb_i = int(lsb) if lsb is not None else 0
        width = abs(msb_i - lsb_i) + 1
        for name in re.split(r"\s*,\s*", names.strip()):
            ports[name] = Port(name=name, direction=direction, width=width,
                               msb=msb_i, lsb=lsb_i)
    if not ports:
        raise LoweringError("module header declares no ports")
    return ports


def module_name_of(header: str) -> str:
    m = re.search(r"\bmodule\s+([A-Za-z_][A-Za-z0-9_$]*)", header)
    if m is None:
        raise LoweringError("cannot find module name in header")
    return m.group(1)


def _header_text(header: str) -> str:
    """Normalize the header snippet so a body can be appended."""
    text = header.rstrip()
    if text.endswith("endmodule"):
        text = text[:-len("endmodule")].rstrip()
    return text


def _sized(width: int, value: int) -> str:
    return f"{width}'d{value & ((1 << width) - 1)}"


def _require_input(ports: Dict[str, Port], name: str, context: str) -> Port:
    port = ports.get(name)
    if port is None:
        raise LoweringError(f"{context}: signal {name!r} absent from header")
    if port.direction != "input":
        raise LoweringError(f"{context}: signal {name!r} is not an input")
    return port


def _require_output(ports: Dict[str, Port], name: str, context: str) -> Port:
    port = ports.get(name)
    if port is None:
        raise LoweringError(f"{context}: signal {name!r} absent from header")
    if port.direction != "output":
        raise LoweringError(f"{context}: signal {name!r} is not an output")
    return port


def _sole_output(ports: Dict[str, Port], context: str) -> Port:
    outs = [p for p in ports.values() if p.direction == "output"]
    if len(outs) != 1:
        raise LoweringError(
            f"{context}: expected exactly one output port, found {len(outs)}")
    return outs[0]


def _parse_cond(text: str, ports: Dict[str, Port], context: str):
    try:
        node = expr.parse_expr(text)
    except ExpressionError as exc:
        raise LoweringError(f"{context}: {exc}")
    for name in sorted(expr.expr_vars(node)):
        _require_input(ports, name, context)
    return node


def _lower_fsm(fsm: FsmIr, header: str) -> str:
    ports = parse_header_ports(header)
    clk = next((n for n in ("clk", "clock") if n in ports
                and ports[n].direction == "input"), None)
    if clk is None:
        raise LoweringError("fsm lowering requires a 'clk' (or 'clock') input")

    n = len(fsm.states)
    index = {s: i for i, s in enumerate(fsm.states)}
    by_state: Dict[str, List] = {s: [] for s in fsm.states}
    for t in fsm.transitions:
        node = _parse_cond(t.cond, ports, f"transition {t.from_state}->{t.to_state}")
        by_state[t.from_state].append((node, t.to_state))

    out_signals: Dict[str, Dict[str, int]] = {}
    for o in fsm.outputs:
        _require_output(ports, o.signal, "fsm output")
        out_signals.setdefault(o.signal, {})[o.state] = o.value

    def onehot(state: str) -> str:
        return f"{n}'d{1 << index[state]}"

    lines = [
        f"    reg [{n - 1}:0] state;",
        f"    reg [{n - 1}:0] state_next;",
        "",
        f"    initial state = {onehot(fsm.reset_state)};",
        "",
        "    always @(*) begin",
        "        state_next = state;",
    ]
    first = True
    for state in fsm.states:
        guards = by_state[state]
        kw = "if" if first else "else if"
        first = False
        lines.append(f"        {kw} (state[{index[state]}]) begin")
        inner_first = True
        for node, target in guards:
            inner_kw = "if" if inner_first else "else if"
            inner_first = False
            lines.append(f"            {inner_kw} ({expr.to_verilog(node)}) "
                         f"state_next = {onehot(target)};")
        lines.append("        end")
    lines += [
        "    end",
        "",
        f"    always @(posedge {clk}) state <= state_next;",
        "",
    ]
    for signal in sorted(out_signals):
        width = ports[signal].width
        values = out_signals[signal]
        lines.append(f"    reg [{width - 1}:0] {signal}_r;")
        lines.append("    always @(*) begin")
        lines.append(f"        {signal}_r = {_sized(width, 0)};")
        for state in fsm.states:
            if state in values:
                lines.append(f"        if (state[{index[state]}]) {signal}_r = "
                             f"{_sized(width, values[state])};")
        lines.append("    end")
        lines.append(f"    assign {signal} = {signal}_r;")
        lines.append("")
    return "\n".join(lines)


def _lower_truth_table(tt: TruthTableIr, header: str) -> str:
    ports = parse_header_ports(header)
    for name in tt.inputs:
        port = _require_input(ports, name, "truth table input")
        if port.width != 1:
            raise LoweringError(f"truth table input {name!r} must be 1 bit wide")
    out = _require_output(ports, tt.output, "truth table output")
    width = tt.output_width
    if width != out.width:
        raise LoweringError(
            f"truth table output width {width} does not match header "
            f"width {out.width} for {tt.output!r}")
    n = len(tt.inputs)
    sel = "{" + ", ".join(tt.inputs) + "}" if n > 1 else tt.inputs[0]
    lines = [
        f"    reg [{width - 1}:0] {tt.output}_r;",
        "    always @(*) begin",
        f"        case ({sel})",
    ]
    for row in sorted(tt.rows, key=lambda r: r.inputs):
        lines.append(f"            {n}'b{row.inputs}: {tt.output}_r = "
                     f"{width}'b{row.outputs};")
    lines += [
        f"            default: {tt.output}_r = {_sized(width, 0)};",
        "        endcase",
        "    end",
        f"    assign {tt.output} = {tt.output}_r;",
    ]
    return "\n".join(lines)


def _lower_boolean(eqns: BooleanEqnsIr, header: str) -> str:
    ports = parse_header_ports(header)
    for name in eqns.inputs:
        _require_input(ports, name, "equation input")
    lines = []
    for out in eqns.outputs:
        port = _require_output(ports, out, "equation output")
        if port.width != 1:
            raise LoweringError(f"equation output {out!r} must be 1 bit wide")
        try:
            node = expr.parse_expr(eqns.expressions[out])
        except ExpressionError as exc:
            raise LoweringError(f"expression for {out!r}: {exc}")
        lines.append(f"    assign {out} = {expr.to_verilog(node)};")
    return "\n".join(lines)


def _lower_kmap(kmap: KMapIr, header: str) -> str:
    ports = parse_header_ports(header)
    out = _sole_output(ports, "kmap lowering")
    eqns = minimize_kmap(kmap, output_name=out.name)
    return _lower_boolean(eqns, header)


def _lower_mux(mux: MuxIr, header: str) -> str:
    ports = parse_header_ports(header)
    sel = _require_input(ports, mux.select_name, "mux select")
    if sel.width != mux.select_width:
        raise LoweringError(
            f"mux select width {mux.select_width} does not match header "
            f"width {sel.width} for {mux.select_name!r}")
    out = _sole_output(ports, "mux lowering")
    lines = [
        f"    reg [{out.width - 1}:0] {out.name}_r;",
        "    always @(*) begin",
        f"        case ({mux.select_name})",
    ]
    for value in sorted(mux.mapping):
        target = mux.mapping[value]
        if target in ports:
            _require_input(ports, target, "mux data input")
            rhs = target
        else:
            rhs = _sized(out.width, int(str(target), 0))
        lines.append(f"            {_sized(mux.select_width, value)}: "
                     f"{out.name}_r = {rhs};")
    lines += [
        f"            default: {out.name}_r = {_sized(out.width, 0)};",
        "        endcase",
        "    end",
        f"    assign {out.name} = {out.name}_r;",
    ]
    return "\n".join(lines)


def lower_to_verilog(ir: IntermediateRep, header: str) -> str:
    """Emit a complete, compilable Verilog module for the given IR."""
    s = ir.structure
    if isinstance(s, FsmIr):
        body = _lower_fsm(s, header)
    elif isinstance(s, TruthTableIr):
        body = _lower_truth_table(s, header)
    elif isinstance(s, BooleanEqnsIr):
        body = _lower_boolean(s, header)
    elif isinstance(s, KMapIr):
        body = _lower_kmap(s, header)
    elif isinstance(s, MuxIr):
        body = _lower_mux(s, header)
    else:
        raise LoweringError(f"cannot lower {type(s).__name__}")
    return _header_text(header) + "\n" + body + "\nendmodule\n"
