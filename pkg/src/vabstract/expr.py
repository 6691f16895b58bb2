"""Single-bit Boolean expression language.

Used for equation-style IR expressions (word operators: AND, OR, NOT, XOR)
and for state-machine transition conditions (C-style operators: !, &&, ||).
Both surface syntaxes parse to the same AST. Constants 0 and 1 are allowed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Tuple, Union

from .errors import ExpressionError


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Not:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # "and" | "or" | "xor"
    left: "Node"
    right: "Node"


Node = Union[Var, Const, Not, BinOp]

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<and>&&|&|\bAND\b|\band\b)
  | (?P<or>\|\||\||\bOR\b|\bor\b)
  | (?P<xor>\^|\bXOR\b|\bxor\b)
  | (?P<not>!|~|\bNOT\b|\bnot\b)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<const>1'b[01]|[01]\b)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    return tokens


class _Parser:
    """Recursive descent; precedence NOT > AND > XOR > OR."""

    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise ExpressionError("unexpected end of expression", len(self.text))
        self.i += 1
        return tok

    def parse(self) -> Node:
        node = self.parse_or()
        tok = self.peek()
        if tok is not None:
            raise ExpressionError(f"trailing input {tok[1]!r}", tok[2])
        return node

    def parse_or(self) -> Node:
        node = self.parse_xor()
        while self.peek() and self.peek()[0] == "or":
            self.take()
            node = BinOp("or", node, self.parse_xor())
        return node

    def parse_xor(self) -> Node:
        node = self.parse_and()
        while self.peek() and self.peek()[0] == "xor":
            self.take()
            node = BinOp("xor", node, self.parse_and())
        return node

    def parse_and(self) -> Node:
        node = self.parse_unary()
        while self.peek() and self.peek()[0] == "and":
            self.take()
            node = BinOp("and", node, self.parse_unary())
        return node

    def parse_unary(self) -> Node:
        tok = self.take()
        kind, text, pos = tok
        if kind == "not":
            return Not(self.parse_unary())
        if kind == "lparen":
            node = self.parse_or()
            closing = self.take()
            if closing[0] != "rparen":
                raise ExpressionError("expected ')'", closing[2])
            return node
        if kind == "const":
            return Const(int(text[-1]))
        if kind == "ident":
            return Var(text)
        raise ExpressionError(f"unexpected token {text!r}", pos)


def parse_expr(text: str) -> Node:
    """Parse a Boolean expression; raises ExpressionError with position."""
    if not text.strip():
        raise ExpressionError("empty expression", 0)
    return _Parser(text).parse()


def expr_vars(node: Node) -> FrozenSet[str]:
    if isinstance(node, Var):
        return frozenset({node.name})
    if isinstance(node, Const):
        return frozenset()
    if isinstance(node, Not):
        return expr_vars(node.operand)
    return expr_vars(node.left) | expr_vars(node.right)


def eval_expr(node: Node, env: Dict[str, int]) -> int:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name] & 1
        except KeyError:
            raise ExpressionError(f"unbound variable {node.name!r}")
    if isinstance(node, Not):
        return 1 - eval_expr(node.operand, env)
    left = eval_expr(node.left, env)
    right = eval_expr(node.right, env)
    if node.op == "and":
        return left & right
    if node.op == "or":
        return left | right
    return left ^ right


def to_verilog(node: Node) -> str:
    """Render the AST using Verilog bitwise operators, fully parenthesized."""
    if isinstance(node, Const):
        return f"1'b{node.value}"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Not):
        return f"(~{to_verilog(node.operand)})"
    sym = {"and": "&", "or": "|", "xor": "^"}[node.op]
    return f"({to_verilog(node.left)} {sym} {to_verilog(node.right)})"
