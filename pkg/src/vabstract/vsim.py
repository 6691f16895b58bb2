"""Cycle-level simulator for a restricted synthesizable Verilog subset.

Covers the constructs the IR lowering emits (and simple hand-written
modules): ANSI or classic port declarations, reg/wire declarations, initial
value assignments, continuous assigns, combinational ``always @(*)`` blocks
with if/else and case, and single-clock ``always @(posedge ...)`` blocks
with nonblocking assignment. Two-valued (0/1) semantics; uninitialized
registers read as 0.

This is deliberately independent of the lowering code: it parses the emitted
source text, so tests exercise the generated Verilog itself rather than the
IR it came from.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .errors import VabstractError


class VsimError(VabstractError):
    """Source uses a construct outside the supported subset."""


_COMMENT_RE = re.compile(r"//[^\n]*|/\*.*?\*/", re.DOTALL)

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<sized>\d+\s*'\s*[bdhoBDHO]\s*[0-9a-fA-F_xzXZ?]+)
  | (?P<number>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_$]*)
  | (?P<op><=|==|!=|&&|\|\||[-+{}()\[\]:;,@*?=~!&|^<>])
""", re.VERBOSE)


def _tokenize(text: str) -> List[str]:
    text = _COMMENT_RE.sub(" ", text)
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise VsimError(f"unexpected character {text[pos]!r}")
        if m.lastgroup != "ws":
            tokens.append(re.sub(r"\s+", "", m.group()))
        pos = m.end()
    return tokens


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class ERef:
    name: str


@dataclass(frozen=True)
class EBit:
    name: str
    index: "ExprNode"


@dataclass(frozen=True)
class EConst:
    value: int
    width: Optional[int]


@dataclass(frozen=True)
class EUnary:
    op: str
    operand: "ExprNode"


@dataclass(frozen=True)
class EBinary:
    op: str
    left: "ExprNode"
    right: "ExprNode"


@dataclass(frozen=True)
class ECond:
    cond: "ExprNode"
    then: "ExprNode"
    other: "ExprNode"


@dataclass(frozen=True)
class EConcat:
    parts: Tuple["ExprNode", ...]


ExprNode = Union[ERef, EBit, EConst, EUnary, EBinary, ECond, EConcat]


@dataclass(frozen=True)
class SAssign:
    target: str
    value: ExprNode
    nonblocking: bool


@dataclass(frozen=True)
class SIf:
    cond: ExprNode
    then: "StmtNode"
    other: Optional["StmtNode"]


@dataclass(frozen=True)
class SCase:
    subject: ExprNode
    items: Tuple[Tuple[Tuple[ExprNode, ...], "StmtNode"], ...]
    default: Optional["StmtNode"]


@dataclass(frozen=True)
class SBlock:
    statements: Tuple["StmtNode", ...]


StmtNode = Union[SAssign, SIf, SCase, SBlock]


@dataclass
class AlwaysBlock:
    clocks: Tuple[str, ...]  # empty = combinational (@*)
    body: StmtNode


@dataclass
class ModuleAst:
    name: str
    ports: Dict[str, str]           # name -> direction
    widths: Dict[str, int]
    assigns: List[Tuple[str, ExprNode]] = field(default_factory=list)
    initials: List[Tuple[str, ExprNode]] = field(default_factory=list)
    always: List[AlwaysBlock] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Parser

_SIZED_RE = re.compile(r"(\d+)'([bdhoBDHO])([0-9a-fA-F_xzXZ?]+)")
_BASES = {"b": 2, "d": 10, "h": 16, "o": 8}


def _parse_sized(tok: str) -> Tuple[int, int]:
    m = _SIZED_RE.fullmatch(tok)
    if m is None:
        raise VsimError(f"bad literal {tok!r}")
    width = int(m.group(1))
    digits = m.group(3).replace("_", "")
    if re.search(r"[xzXZ?]", digits):
        raise VsimError(f"x/z literals unsupported: {tok!r}")
    value = int(digits, _BASES[m.group(2).lower()])
    return value & ((1 << width) - 1), width


class _P:
    def __init__(self, tokens: List[str]):
        self.toks = tokens
        self.i = 0

    def peek(self, offset: int = 0) -> Optional[str]:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def take(self, expected: Optional[str] = None) -> str:
        if self.i >= len(self.toks):
            raise VsimError(f"unexpected end of source (wanted {expected!r})")
        tok = self.toks[self.i]
        if expected is not None and tok != expected:
            raise VsimError(f"expected {expected!r}, got {tok!r} "
                            f"near index {self.i}")
        self.i += 1
        return tok

    # -- module structure ---------------------------------------------------

    def parse_module(self) -> ModuleAst:
        self.take("module")
        name = self.take()
        mod = ModuleAst(name=name, ports={}, widths={})
        self.take("(")
        self._parse_port_list(mod)
        self.take(";")
        while self.peek() != "endmodule":
            self._parse_item(mod)
        self.take("endmodule")
        if self.peek() is not None:
            raise VsimError("only a single module per source is supported")
        return mod

    def _parse_range(self) -> Tuple[int, int]:
        self.take("[")
        msb = int(self.take())
        self.take(":")
        lsb = int(self.take())
        self.take("]")
        return msb, lsb

    def _parse_port_list(self, mod: ModuleAst) -> None:
        if self.peek() == ")":
            self.take(")")
            return
        direction = None
        width = 1
        while True:
            tok = self.peek()
            if tok in ("input", "output", "inout"):
                direction = self.take()
                if self.peek() in ("reg", "wire", "logic"):
                    self.take()
                width = 1
                if self.peek() == "[":
                    msb, lsb = self._parse_range()
                    width = abs(msb - lsb) + 1
                tok = self.peek()
            name = self.take()
            if direction is None:
                # classic style: directions declared in the body
                mod.ports[name] = "unknown"
            else:
                mod.ports[name] = direction
                mod.widths[name] = width
            nxt = self.take()
            if nxt == ")":
                return
            if nxt != ",":
                raise VsimError(f"bad port list near {nxt!r}")

    def _parse_item(self, mod: ModuleAst) -> None:
        tok = self.peek()
        if tok in ("input", "output", "inout", "reg", "wire", "integer"):
            self._parse_decl(mod)
        elif tok == "assign":
            self.take()
            target = self.take()
            self.take("=")
            value = self.parse_expr()
            self.take(";")
            mod.assigns.append((target, value))
        elif tok == "initial":
            self.take()
            stmt = self.parse_stmt()
            self._collect_initials(mod, stmt)
        elif tok == "always":
            self.take()
            self.take("@")
            self.take("(")
            clocks: List[str] = []
            if self.peek() == "*":
                self.take()
            else:
                while True:
                    self.take("posedge")
                    clocks.append(self.take())
                    if self.peek() in ("or", ","):
                        self.take()
                        continue
                    break
            self.take(")")
            body = self.parse_stmt()
            mod.always.append(AlwaysBlock(clocks=tuple(clocks), body=body))
        else:
            raise VsimError(f"unsupported module item near {tok!r}")

    def _parse_decl(self, mod: ModuleAst) -> None:
        direction = None
        tok = self.take()
        if tok in ("input", "output", "inout"):
            direction = tok
            if self.peek() in ("reg", "wire", "logic"):
                self.take()
        width = 1
        if self.peek() == "[":
            msb, lsb = self._parse_range()
            width = abs(msb - lsb) + 1
        while True:
            name = self.take()
            mod.widths[name] = width
            if direction is not None:
                mod.ports[name] = direction
            if self.peek() == "=":
                self.take()
                mod.initials.append((name, self.parse_expr()))
            nxt = self.take()
            if nxt == ";":
                return
            if nxt != ",":
                raise VsimError(f"bad declaration near {nxt!r}")

    def _collect_initials(self, mod: ModuleAst, stmt: StmtNode) -> None:
        if isinstance(stmt, SBlock):
            for s in stmt.statements:
                self._collect_initials(mod, s)
        elif isinstance(stmt, SAssign):
            mod.initials.append((stmt.target, stmt.value))
        else:
            raise VsimError("initial blocks support plain assignments only")

    # -- statements ---------------------------------------------------------

    def parse_stmt(self) -> StmtNode:
        tok = self.peek()
        if tok == "begin":
            self.take()
            statements = []
            while self.peek() != "end":
                statements.append(self.parse_stmt())
            self.take("end")
            return SBlock(tuple(statements))
        if tok == "if":
            self.take()
            self.take("(")
            cond = self.parse_expr()
            self.take(")")
            then = self.parse_stmt()
            other = None
            if self.peek() == "else":
                self.take()
                other = self.parse_stmt()
            return SIf(cond, then, other)
        if tok in ("case", "casez", "casex"):
            if tok != "case":
                raise VsimError(f"{tok} is unsupported")
            self.take()
            self.take("(")
            subject = self.parse_expr()
            self.take(")")
            items = []
            default = None
            while self.peek() != "endcase":
                if self.peek() == "default":
                    self.take()
                    if self.peek() == ":":
                        self.take()
                    default = self.parse_stmt()
                    continue
                labels = [self.parse_expr()]
                while self.peek() == ",":
                    self.take()
                    labels.append(self.parse_expr())
                self.take(":")
                items.append((tuple(labels), self.parse_stmt()))
            self.take("endcase")
            return SCase(subject, tuple(items), default)
        # plain assignment
        target = self.take()
        if self.peek() == "[":
            raise VsimError("bit-select on assignment targets is unsupported")
        op = self.take()
        if op not in ("=", "<="):
            raise VsimError(f"expected assignment, got {op!r}")
        value = self.parse_expr()
        self.take(";")
        return SAssign(target, value, nonblocking=(op == "<="))

    # -- expressions --------------------------------------------------------

    def parse_expr(self) -> ExprNode:
        node = self._parse_lor()
        if self.peek() == "?":
            self.take()
            then = self.parse_expr()
            self.take(":")
            other = self.parse_expr()
            return ECond(node, then, other)
        return node

    def _binary_level(self, ops, next_level):
        node = next_level()
        while self.peek() in ops:
            op = self.take()
            node = EBinary(op, node, next_level())
        return node

    def _parse_lor(self):
        return self._binary_level(("||",), self._parse_land)

    def _parse_land(self):
        return self._binary_level(("&&",), self._parse_bor)

    def _parse_bor(self):
        return self._binary_level(("|",), self._parse_bxor)

    def _parse_bxor(self):
        return self._binary_level(("^",), self._parse_band)

    def _parse_band(self):
        return self._binary_level(("&",), self._parse_eq)

    def _parse_eq(self):
        return self._binary_level(("==", "!="), self._parse_add)

    def _parse_add(self):
        return self._binary_level(("+", "-"), self._parse_unary)

    def _parse_unary(self) -> ExprNode:
        tok = self.peek()
        if tok in ("~", "!"):
            self.take()
            return EUnary(tok, self._parse_unary())
        return self._parse_primary()

    def _parse_primary(self) -> ExprNode:
        tok = self.take()
        if tok == "(":
            node = self.parse_expr()
            self.take(")")
            return node
        if tok == "{":
            parts = [self.parse_expr()]
            while self.peek() == ",":
                self.take()
                parts.append(self.parse_expr())
            self.take("}")
            return EConcat(tuple(parts))
        if _SIZED_RE.fullmatch(tok):
            value, width = _parse_sized(tok)
            return EConst(value, width)
        if tok.isdigit():
            return EConst(int(tok), None)
        if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_$]*", tok):
            if self.peek() == "[":
                self.take("[")
                index = self.parse_expr()
                if self.peek() == ":":
                    raise VsimError("part-select is unsupported")
                self.take("]")
                return EBit(tok, index)
            return ERef(tok)
        raise VsimError(f"unexpected token {tok!r} in expression")


# ---------------------------------------------------------------------------
# Evaluation

class SimulatedModule:
    """Elaborated instance of a parsed module, driven from Python."""

    MAX_SETTLE_ITERATIONS = 1000

    def __init__(self, ast: ModuleAst):
        self.ast = ast
        self.values: Dict[str, int] = {}
        for name in set(ast.widths) | set(ast.ports):
            self.values[name] = 0
        for name, direction in ast.ports.items():
            if direction == "unknown":
                raise VsimError(f"port {name!r} has no declared direction")
        for name, node in ast.initials:
            self.values[name] = self._mask(name, self._eval(node)[0])
        self.settle()

    @classmethod
    def compile(cls, source: str) -> "SimulatedModule":
        """Parse and elaborate; raises VsimError on anything unsupported."""
        return cls(_P(_tokenize(source)).parse_module())

    @property
    def name(self) -> str:
        return self.ast.name

    def width(self, name: str) -> int:
        return self.ast.widths.get(name, 1)

    def _mask(self, name: str, value: int) -> int:
        return value & ((1 << self.width(name)) - 1)

    def inputs(self) -> List[str]:
        return [n for n, d in self.ast.ports.items() if d == "input"]

    def outputs(self) -> List[str]:
        return [n for n, d in self.ast.ports.items() if d == "output"]

    # -- expression evaluation ---------------------------------------------

    def _eval(self, node: ExprNode, env: Optional[Dict[str, int]] = None
              ) -> Tuple[int, int]:
        """Return (value, width)."""
        values = env if env is not None else self.values
        if isinstance(node, EConst):
            return node.value, node.width if node.width else 32
        if isinstance(node, ERef):
            if node.name not in values:
                raise VsimError(f"undeclared signal {node.name!r}")
            return values[node.name], self.width(node.name)
        if isinstance(node, EBit):
            idx, _ = self._eval(node.index, env)
            if node.name not in values:
                raise VsimError(f"undeclared signal {node.name!r}")
            return (values[node.name] >> idx) & 1, 1
        if isinstance(node, EUnary):
            value, width = self._eval(node.operand, env)
            if node.op == "!":
                return (0 if value else 1), 1
            return (~value) & ((1 << width) - 1), width
        if isinstance(node, ECond):
            cond, _ = self._eval(node.cond, env)
            return self._eval(node.then if cond else node.other, env)
        if isinstance(node, EConcat):
            value = 0
            total = 0
            for part in node.parts:
                v, w = self._eval(part, env)
                value = (value << w) | (v & ((1 << w) - 1))
                total += w
            return value, total
        if isinstance(node, EBinary):
            lv, lw = self._eval(node.left, env)
            rv, rw = self._eval(node.right, env)
            width = max(lw, rw)
            mask = (1 << width) - 1
            op = node.op
            if op == "&&":
                return int(bool(lv) and bool(rv)), 1
            if op == "||":
                return int(bool(lv) or bool(rv)), 1
            if op == "==":
                return int(lv == rv), 1
            if op == "!=":
                return int(lv != rv), 1
            if op == "&":
                return lv & rv, width
            if op == "|":
                return lv | rv, width
            if op == "^":
                return (lv ^ rv) & mask, width
            if op == "+":
                return (lv + rv) & mask, width
            if op == "-":
                return (lv - rv) & mask, width
            raise VsimError(f"unsupported operator {op!r}")
        raise VsimError(f"cannot evaluate {node!r}")

    # -- statement execution ------------------------------------------------

    def _exec(self, stmt: StmtNode, env: Dict[str, int],
              deferred: Optional[Dict[str, int]]) -> None:
        if isinstance(stmt, SBlock):
            for s in stmt.statements:
                self._exec(s, env, deferred)
        elif isinstance(stmt, SAssign):
            value = self._mask(stmt.target, self._eval(stmt.value, env)[0])
            if stmt.nonblocking:
                if deferred is None:
                    raise VsimError("nonblocking assign outside a clocked block")
                deferred[stmt.target] = value
            else:
                env[stmt.target] = value
        elif isinstance(stmt, SIf):
            cond, _ = self._eval(stmt.cond, env)
            if cond:
                self._exec(stmt.then, env, deferred)
            elif stmt.other is not None:
                self._exec(stmt.other, env, deferred)
        elif isinstance(stmt, SCase):
            subject, _ = self._eval(stmt.subject, env)
            for labels, body in stmt.items:
                if any(self._eval(l, env)[0] == subject for l in labels):
                    self._exec(body, env, deferred)
                    return
            if stmt.default is not None:
                self._exec(stmt.default, env, deferred)
        else:
            raise VsimError(f"cannot execute {stmt!r}")

    # -- public simulation API ----------------------------------------------

    def set(self, name: str, value: int) -> None:
        if self.ast.ports.get(name) != "input":
            raise VsimError(f"{name!r} is not an input port")
        self.values[name] = self._mask(name, value)

    def get(self, name: str) -> int:
        if name not in self.values:
            raise VsimError(f"undeclared signal {name!r}")
        return self.values[name]

    def settle(self) -> None:
        """Re-evaluate combinational logic until quiescent."""
        for _ in range(self.MAX_SETTLE_ITERATIONS):
            before = dict(self.values)
            for target, node in self.ast.assigns:
                self.values[target] = self._mask(target, self._eval(node)[0])
            for block in self.ast.always:
                if not block.clocks:
                    self._exec(block.body, self.values, None)
            if self.values == before:
                return
        raise VsimError("combinational logic failed to settle")

    def posedge(self, clock: str = "clk") -> None:
        """Apply one rising edge of ``clock`` and settle."""
        self.settle()
        deferred: Dict[str, int] = {}
        snapshot = dict(self.values)
        for block in self.ast.always:
            if clock in block.clocks:
                self._exec(block.body, snapshot, deferred)
        for name, value in deferred.items():
            self.values[name] = value
        if clock in self.values:
            self.values[clock] = 1
        self.settle()
        if clock in self.values:
            self.values[clock] = 0
            self.settle()

    def eval_combinational(self, **inputs: int) -> Dict[str, int]:
        """Drive the given inputs, settle, and return all output values."""
        for name, value in inputs.items():
            self.set(name, value)
        self.settle()
        return {name: self.get(name) for name in self.outputs()}
