"""Typed intermediate representations of circuit logic.

Five structures are supported: finite-state machines, truth tables, Boolean
equations, Karnaugh maps and MUX mappings. Each can be parsed from the JSON
wire format, validated against its invariants, and serialized back.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

from . import expr
from .errors import ExpressionError, IrSchemaError, IrValidationError
from .problems import Classification1, Classification2

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FsmTransition:
    from_state: str
    to_state: str
    cond: str


@dataclass(frozen=True)
class FsmOutput:
    state: str
    signal: str
    value: int


@dataclass(frozen=True)
class FsmIr:
    """States, guarded transitions and per-state (Moore) outputs."""

    states: Tuple[str, ...]
    transitions: Tuple[FsmTransition, ...]
    outputs: Tuple[FsmOutput, ...]

    def validate(self) -> None:
        violations = []
        if not self.states:
            violations.append("states list is empty")
        seen = set()
        for s in self.states:
            if s in seen:
                violations.append(f"duplicate state {s!r}")
            seen.add(s)
        for t in self.transitions:
            if t.from_state not in seen:
                violations.append(f"undeclared state {t.from_state!r} in transition")
            if t.to_state not in seen:
                violations.append(f"undeclared state {t.to_state!r} in transition")
            try:
                expr.parse_expr(t.cond)
            except ExpressionError as exc:
                violations.append(f"bad transition condition {t.cond!r}: {exc}")
        for o in self.outputs:
            if o.state not in seen:
                violations.append(f"undeclared state {o.state!r} in output")
        if violations:
            raise IrValidationError(violations)

    @property
    def reset_state(self) -> str:
        return self.states[0]


@dataclass(frozen=True)
class TruthRow:
    inputs: str   # bit string, one char per input, MSB first
    outputs: str  # bit string for the output signal


@dataclass(frozen=True)
class TruthTableIr:
    """Exhaustive (or partial, in lenient mode) input/output enumeration."""

    inputs: Tuple[str, ...]
    output: str
    rows: Tuple[TruthRow, ...]

    def validate(self, strict: bool = True) -> None:
        violations = []
        n = len(self.inputs)
        if n == 0:
            violations.append("no input names declared")
        if n > 4:
            violations.append(f"too many inputs ({n} > 4)")
        widths = set()
        seen_vectors = set()
        for row in self.rows:
            if len(row.inputs) != n:
                violations.append(
                    f"row {row.inputs!r} has {len(row.inputs)} bits, expected {n}")
            if set(row.inputs) - {"0", "1"} or set(row.outputs) - {"0", "1"}:
                violations.append(f"row {row.inputs!r} contains non-binary digits")
            if row.inputs in seen_vectors:
                violations.append(f"duplicate input vector {row.inputs!r}")
            seen_vectors.add(row.inputs)
            widths.add(len(row.outputs))
        if len(widths) > 1:
            violations.append("inconsistent output widths across rows")
        if strict and n > 0 and len(self.rows) != 2 ** n:
            violations.append(
                f"incomplete table: {len(self.rows)} rows, expected {2 ** n}")
        if violations:
            raise IrValidationError(violations)

    @property
    def output_width(self) -> int:
        return len(self.rows[0].outputs) if self.rows else 1


@dataclass(frozen=True)
class BooleanEqnsIr:
    """One Boolean expression per output, over the declared inputs."""

    inputs: Tuple[str, ...]
    outputs: Tuple[str, ...]
    expressions: Dict[str, str] = field(default_factory=dict, hash=False)

    def validate(self) -> None:
        violations = []
        declared = set(self.inputs)
        for out in self.outputs:
            if out not in self.expressions:
                violations.append(f"output {out!r} has no expression")
        for out in self.expressions:
            if out not in self.outputs:
                violations.append(f"expression for undeclared output {out!r}")
        for out, text in self.expressions.items():
            try:
                node = expr.parse_expr(text)
            except ExpressionError as exc:
                violations.append(f"expression for {out!r} does not parse: {exc}")
                continue
            for name in sorted(expr.expr_vars(node) - declared):
                violations.append(
                    f"expression for {out!r} references undeclared input {name!r}")
        if violations:
            raise IrValidationError(violations)


@dataclass(frozen=True)
class KMapIr:
    """Complete Karnaugh-map grid over disjoint row and column variables.

    Cell (r, c) holds the function value for the minterm whose row-variable
    bits equal the binary expansion of r (first variable most significant)
    and likewise for c. Cells are '0', '1' or 'X' (don't-care).
    """

    row_vars: Tuple[str, ...]
    col_vars: Tuple[str, ...]
    cells: Tuple[Tuple[str, ...], ...]  # cells[r][c]

    def validate(self) -> None:
        violations = []
        if set(self.row_vars) & set(self.col_vars):
            violations.append("row and column variable sets overlap")
        n_rows = 2 ** len(self.row_vars)
        n_cols = 2 ** len(self.col_vars)
        if len(self.cells) != n_rows:
            violations.append(
                f"grid-size mismatch: {len(self.cells)} rows, expected {n_rows}")
        for r, row in enumerate(self.cells):
            if len(row) != n_cols:
                violations.append(
                    f"grid-size mismatch: row {r} has {len(row)} cells, "
                    f"expected {n_cols}")
            for value in row:
                if value not in ("0", "1", "X"):
                    violations.append(f"illegal cell value {value!r} in row {r}")
        if violations:
            raise IrValidationError(violations)

    @property
    def variables(self) -> Tuple[str, ...]:
        return self.row_vars + self.col_vars


@dataclass(frozen=True)
class MuxIr:
    """Select-driven routing of data inputs (or constants) to the output."""

    data_inputs: Tuple[str, ...]
    select_name: str
    select_width: int
    mapping: Dict[int, str] = field(default_factory=dict, hash=False)

    def validate(self) -> None:
        violations = []
        if self.select_width < 1:
            violations.append(f"select width {self.select_width} < 1")
        limit = 2 ** self.select_width
        declared = set(self.data_inputs)
        for sel, target in self.mapping.items():
            if not 0 <= sel < limit:
                violations.append(f"select value {sel} outside [0, {limit})")
            if target not in declared and not _is_constant(target):
                violations.append(f"mapped input {target!r} is not declared")
        if violations:
            raise IrValidationError(violations)


def _is_constant(text: str) -> bool:
    try:
        int(str(text), 0)
        return True
    except ValueError:
        return False


IrStructure = Union[FsmIr, TruthTableIr, BooleanEqnsIr, KMapIr, MuxIr]

_TAG_TO_TYPE = {
    Classification2.FSM_IMPLIED: FsmIr,
    Classification2.TRUTH_TABLE: TruthTableIr,
    Classification2.BOOLEAN_EXPRESSION: BooleanEqnsIr,
    Classification2.KMAP: KMapIr,
    Classification2.MUX_MAPPING: MuxIr,
}


@dataclass(frozen=True)
class IntermediateRep:
    """Tagged union of the five IR structures."""

    tag: Classification2
    structure: IrStructure

    def __post_init__(self):
        expected = _TAG_TO_TYPE.get(self.tag)
        if expected is None:
            raise IrValidationError([f"classification {self.tag.value!r} has no IR"])
        if not isinstance(self.structure, expected):
            raise IrValidationError(
                [f"structure {type(self.structure).__name__} does not match "
                 f"classification {self.tag.value!r}"])


def _require(obj: Dict[str, Any], key: str, types, context: str):
    if key not in obj:
        raise IrSchemaError(f"{context}: missing required key {key!r}", key=key)
    value = obj[key]
    if not isinstance(value, types):
        raise IrSchemaError(
            f"{context}: key {key!r} has type {type(value).__name__}", key=key)
    return value


def _warn_unknown(obj: Dict[str, Any], known, context: str) -> None:
    for key in obj:
        if key not in known:
            logger.warning("%s: ignoring unknown key %r", context, key)


def _str_list(values, context) -> Tuple[str, ...]:
    out = []
    for v in values:
        if not isinstance(v, str):
            raise IrSchemaError(f"{context}: expected string, got {v!r}")
        out.append(v)
    return tuple(out)


def _bits(value, context) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    if isinstance(value, list):
        return "".join(_bits(v, context) for v in value)
    raise IrSchemaError(f"{context}: cannot interpret {value!r} as bits")


def _parse_fsm(obj: Dict[str, Any]) -> FsmIr:
    _warn_unknown(obj, {"states", "transitions", "outputs"}, "fsm")
    states = _str_list(_require(obj, "states", list, "fsm"), "fsm.states")
    transitions = []
    for i, t in enumerate(_require(obj, "transitions", list, "fsm")):
        if not isinstance(t, dict):
            raise IrSchemaError(f"fsm.transitions[{i}]: not an object")
        ctx = f"fsm.transitions[{i}]"
        _warn_unknown(t, {"from", "to", "cond"}, ctx)
        transitions.append(FsmTransition(
            from_state=_require(t, "from", str, ctx),
            to_state=_require(t, "to", str, ctx),
            cond=_require(t, "cond", str, ctx),
        ))
    outputs = []
    for i, o in enumerate(_require(obj, "outputs", list, "fsm")):
        if not isinstance(o, dict):
            raise IrSchemaError(f"fsm.outputs[{i}]: not an object")
        ctx = f"fsm.outputs[{i}]"
        _warn_unknown(o, {"state", "signal", "value"}, ctx)
        outputs.append(FsmOutput(
            state=_require(o, "state", str, ctx),
            signal=_require(o, "signal", str, ctx),
            value=_require(o, "value", int, ctx),
        ))
    return FsmIr(states=states, transitions=tuple(transitions),
                 outputs=tuple(outputs))


def _parse_truth_table(obj: Dict[str, Any]) -> TruthTableIr:
    _warn_unknown(obj, {"inputs", "output", "rows"}, "truth_table")
    inputs = _str_list(_require(obj, "inputs", list, "truth_table"),
                       "truth_table.inputs")
    output = _require(obj, "output", str, "truth_table")
    rows = []
    for i, row in enumerate(_require(obj, "rows", list, "truth_table")):
        if not isinstance(row, dict):
            raise IrSchemaError(f"truth_table.rows[{i}]: not an object")
        ctx = f"truth_table.rows[{i}]"
        _warn_unknown(row, {"in", "out"}, ctx)
        if "in" not in row:
            raise IrSchemaError(f"{ctx}: missing required key 'in'", key="in")
        if "out" not in row:
            raise IrSchemaError(f"{ctx}: missing required key 'out'", key="out")
        rows.append(TruthRow(inputs=_bits(row["in"], ctx),
                             outputs=_bits(row["out"], ctx)))
    return TruthTableIr(inputs=inputs, output=output, rows=tuple(rows))


def _parse_boolean(obj: Dict[str, Any]) -> BooleanEqnsIr:
    _warn_unknown(obj, {"inputs", "outputs", "expressions"}, "boolean")
    inputs = _str_list(_require(obj, "inputs", list, "boolean"), "boolean.inputs")
    outputs = _str_list(_require(obj, "outputs", list, "boolean"),
                        "boolean.outputs")
    raw = _require(obj, "expressions", dict, "boolean")
    expressions = {}
    for key, value in raw.items():
        if not isinstance(value, str):
            raise IrSchemaError(
                f"boolean.expressions[{key!r}]: expected string expression")
        expressions[key] = value
    return BooleanEqnsIr(inputs=inputs, outputs=outputs, expressions=expressions)


def _parse_kmap(obj: Dict[str, Any]) -> KMapIr:
    _warn_unknown(obj, {"row_vars", "col_vars", "cells"}, "kmap")
    row_vars = _str_list(_require(obj, "row_vars", list, "kmap"), "kmap.row_vars")
    col_vars = _str_list(_require(obj, "col_vars", list, "kmap"), "kmap.col_vars")
    cells = []
    for r, row in enumerate(_require(obj, "cells", list, "kmap")):
        if not isinstance(row, list):
            raise IrSchemaError(f"kmap.cells[{r}]: not a list")
        cells.append(tuple(str(v).upper() for v in row))
    return KMapIr(row_vars=row_vars, col_vars=col_vars, cells=tuple(cells))


def _parse_mux(obj: Dict[str, Any]) -> MuxIr:
    _warn_unknown(obj, {"data_inputs", "select", "mapping"}, "mux")
    data_inputs = _str_list(_require(obj, "data_inputs", list, "mux"),
                            "mux.data_inputs")
    select = _require(obj, "select", dict, "mux")
    _warn_unknown(select, {"name", "width"}, "mux.select")
    name = _require(select, "name", str, "mux.select")
    width = _require(select, "width", int, "mux.select")
    raw = _require(obj, "mapping", dict, "mux")
    mapping: Dict[int, str] = {}
    for key, value in raw.items():
        try:
            sel = int(key, 0) if isinstance(key, str) else int(key)
        except ValueError:
            raise IrSchemaError(f"mux.mapping: key {key!r} is not an integer")
        if sel in mapping:
            raise IrValidationError([f"duplicate select value {sel}"])
        mapping[sel] = str(value)
    # JSON objects cannot carry duplicate keys, so re-check post-conversion
    if len(mapping) != len(raw):
        raise IrValidationError(["duplicate select value after conversion"])
    return MuxIr(data_inputs=data_inputs, select_name=name,
                 select_width=width, mapping=mapping)


_PARSERS = {
    Classification2.FSM_IMPLIED: _parse_fsm,
    Classification2.TRUTH_TABLE: _parse_truth_table,
    Classification2.BOOLEAN_EXPRESSION: _parse_boolean,
    Classification2.KMAP: _parse_kmap,
    Classification2.MUX_MAPPING: _parse_mux,
}


def parse_ir(raw: str, expected: Classification2, strict: bool = True) -> IntermediateRep:
    """Parse and validate JSON text into the IR matching ``expected``.

    ``strict`` controls truth-table completeness: lowering requires all
    2^n rows, pipeline validation tolerates partial tables with a warning.
    """
    parser = _PARSERS.get(expected)
    if parser is None:
        raise IrValidationError(
            [f"classification {expected.value!r} has no IR structure"])
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise IrSchemaError(f"IR is not valid JSON: {exc}")
    if not isinstance(obj, dict):
        raise IrSchemaError("IR top level must be a JSON object")
    structure = parser(obj)
    if isinstance(structure, TruthTableIr):
        try:
            structure.validate(strict=True)
        except IrValidationError:
            if strict:
                raise
            structure.validate(strict=False)
            logger.warning("truth table is incomplete; missing rows read as 0")
    else:
        structure.validate()
    return IntermediateRep(tag=expected, structure=structure)


def serialize_ir(ir: IntermediateRep) -> Dict[str, Any]:
    """Inverse of parse_ir: emit the JSON wire format as a plain dict."""
    s = ir.structure
    if isinstance(s, FsmIr):
        return {
            "states": list(s.states),
            "transitions": [{"from": t.from_state, "to": t.to_state,
                             "cond": t.cond} for t in s.transitions],
            "outputs": [{"state": o.state, "signal": o.signal, "value": o.value}
                        for o in s.outputs],
        }
    if isinstance(s, TruthTableIr):
        return {
            "inputs": list(s.inputs),
            "output": s.output,
            "rows": [{"in": r.inputs, "out": r.outputs} for r in s.rows],
        }
    if isinstance(s, BooleanEqnsIr):
        return {
            "inputs": list(s.inputs),
            "outputs": list(s.outputs),
            "expressions": dict(s.expressions),
        }
    if isinstance(s, KMapIr):
        return {
            "row_vars": list(s.row_vars),
            "col_vars": list(s.col_vars),
            "cells": [list(row) for row in s.cells],
        }
    if isinstance(s, MuxIr):
        return {
            "data_inputs": list(s.data_inputs),
            "select": {"name": s.select_name, "width": s.select_width},
            "mapping": {str(k): v for k, v in sorted(s.mapping.items())},
        }
    raise IrValidationError([f"unknown IR structure {type(s).__name__}"])


def ir_json_text(ir: IntermediateRep) -> str:
    return json.dumps(serialize_ir(ir), indent=2)
