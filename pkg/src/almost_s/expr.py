"""Scalar expressions over chart coordinates.

Grammar (standard precedence, left associative)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' INT)*
    atom   := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'

``FUNC`` is one of sin, cos, exp, log, sqrt.  Exponents are unsigned
integer literals, so every expression has exact derivatives of all orders.
Error offsets are byte offsets into the UTF-8 encoded text.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chart import Chart, Field
from .jet import Jet

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
MAX_DEPTH = 64


class ExprError(ValueError):
    kind = "error"

    def __init__(self, message, offset):
        super().__init__(f"{self.kind} at offset {offset}: {message}")
        self.offset = offset
        self.message = message


class ExprSyntaxError(ExprError):
    kind = "syntax error"


class UnknownIdentifierError(ExprError):
    kind = "unknown identifier"


class DepthError(ExprError):
    kind = "depth overflow"


class DomainError(ValueError):
    """Evaluation left the domain of a function; carries the offending point."""

    def __init__(self, message, point):
        self.point = tuple(float(v) for v in point)
        super().__init__(f"{message} at point {self.point}")


# ----------------------------------------------------------------------------
# tree


@dataclass(frozen=True)
class Num:
    value: float
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: object
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: object
    offset: int = field(default=0, compare=False)


def depth(e):
    if isinstance(e, (Num, Var)):
        return 1
    if isinstance(e, BinOp):
        return 1 + max(depth(e.left), depth(e.right))
    if isinstance(e, Neg):
        return 1 + depth(e.operand)
    if isinstance(e, Pow):
        return 1 + depth(e.base)
    return 1 + depth(e.arg)


def identifiers(e):
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, BinOp):
        return identifiers(e.left) | identifiers(e.right)
    if isinstance(e, Neg):
        return identifiers(e.operand)
    if isinstance(e, Pow):
        return identifiers(e.base)
    return identifiers(e.arg)


# ----------------------------------------------------------------------------
# tokenizer and parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int  # character index


class _Parser:
    def __init__(self, text, names):
        self.text = text
        self.names = set(names)
        self.toks = self._tokenize()
        self.i = 0
        self.nest = 0

    def _byte(self, pos):
        return len(self.text[:pos].encode("utf-8"))

    def _tokenize(self):
        toks, pos, text = [], 0, self.text
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if not m or m.lastgroup is None:
                at = pos + len(text[pos:]) - len(text[pos:].lstrip())
                raise ExprSyntaxError(f"unexpected character {text[at]!r}", self._byte(at))
            kind = m.lastgroup
            toks.append(_Tok(kind, m.group(kind), m.start(kind)))
            pos = m.end()
        toks.append(_Tok("end", "", len(text)))
        return toks

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, tok, message=None):
        if message is None:
            message = "unexpected end of input" if tok.kind == "end" else f"unexpected token {tok.text!r}"
        raise ExprSyntaxError(message, self._byte(tok.pos))

    def expect(self, text):
        tok = self.take()
        if tok.text != text or tok.kind == "end":
            self.fail(tok, f"expected {text!r}" + ("" if tok.kind == "end" else f", got {tok.text!r}"))
        return tok

    def node(self, cls, *args, pos):
        out = cls(*args, offset=self._byte(pos))
        if depth(out) > MAX_DEPTH:
            raise DepthError(f"expression deeper than {MAX_DEPTH}", self._byte(pos))
        return out

    def enter(self, tok):
        self.nest += 1
        if self.nest > MAX_DEPTH:
            raise DepthError(f"nesting deeper than {MAX_DEPTH}", self._byte(tok.pos))

    def parse(self):
        if not self.text.strip():
            raise ExprSyntaxError("empty expression", 0)
        e = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            self.fail(tok)
        return e

    def expr(self):
        left = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.take()
            left = self.node(BinOp, op.text, left, self.term(), pos=op.pos)
        return left

    def term(self):
        left = self.unary()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            op = self.take()
            left = self.node(BinOp, op.text, left, self.unary(), pos=op.pos)
        return left

    def unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.take()
            self.enter(tok)
            operand = self.unary()
            self.nest -= 1
            return self.node(Neg, operand, pos=tok.pos)
        return self.power()

    def power(self):
        base = self.atom()
        while self.peek().kind == "op" and self.peek().text == "^":
            op = self.take()
            tok = self.take()
            if tok.kind != "num" or not tok.text.isdigit():
                self.fail(tok, "exponent must be an unsigned integer literal")
            base = self.node(Pow, base, int(tok.text), pos=op.pos)
        return base

    def atom(self):
        tok = self.take()
        if tok.kind == "num":
            value = float(tok.text)
            if not math.isfinite(value):
                self.fail(tok, f"literal {tok.text!r} out of range")
            return self.node(Num, value, pos=tok.pos)
        if tok.kind == "ident":
            if tok.text in FUNCTIONS:
                self.expect("(")
                self.enter(tok)
                arg = self.expr()
                self.nest -= 1
                self.expect(")")
                return self.node(Call, tok.text, arg, pos=tok.pos)
            if tok.text not in self.names:
                raise UnknownIdentifierError(repr(tok.text), self._byte(tok.pos))
            return self.node(Var, tok.text, pos=tok.pos)
        if tok.kind == "op" and tok.text == "(":
            self.enter(tok)
            e = self.expr()
            self.nest -= 1
            self.expect(")")
            return e
        self.fail(tok)


def parse(text: str, names: Sequence[str]):
    """Parse ``text`` with the coordinate identifiers ``names``."""
    return _Parser(text, names).parse()


# ----------------------------------------------------------------------------
# printing


def to_text(e):
    """Canonical fully parenthesised form; re-parsing gives an equal tree."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_text(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, Pow):
        return f"({to_text(e.base)}^{e.exponent})"
    return f"{e.func}({to_text(e.arg)})"


# ----------------------------------------------------------------------------
# evaluation


def _point(coords, mask):
    idx = tuple(np.argwhere(mask)[0])
    return [c.value[idx] for c in coords]


def evaluate(e, env, coords):
    """Jet of ``e`` given ``env`` mapping names to coordinate jets."""
    if isinstance(e, Num):
        c = coords[0]
        return Jet.constant(np.full(c.shape, e.value), c.dim, c.order)
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -evaluate(e.operand, env, coords)
    if isinstance(e, BinOp):
        a = evaluate(e.left, env, coords)
        b = evaluate(e.right, env, coords)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        bad = b.value == 0
        if np.any(bad):
            raise DomainError("division by zero", _point(coords, bad))
        return a / b
    if isinstance(e, Pow):
        return evaluate(e.base, env, coords) ** e.exponent
    arg = evaluate(e.arg, env, coords)
    x = arg.value
    if e.func == "log":
        bad = ~(x > 0)
        if np.any(bad):
            raise DomainError("log of a non-positive value", _point(coords, bad))
    elif e.func == "sqrt":
        bad = ~(x > 0) if arg.order > 0 else ~(x >= 0)
        if np.any(bad):
            raise DomainError("sqrt outside its differentiable domain", _point(coords, bad))
    return getattr(arg, e.func)()


def to_field(e, chart: Chart | Sequence[str], name=None):
    """Scalar field on ``chart`` (or on coordinates named by a sequence)."""
    names = tuple(chart.names) if isinstance(chart, Chart) else tuple(chart)
    unknown = identifiers(e) - set(names)
    if unknown:
        raise UnknownIdentifierError(", ".join(sorted(unknown)), 0)

    def fn(x):
        return evaluate(e, dict(zip(names, x)), x)

    return Field("scalar", len(names), fn, name=name or to_text(e))


def parse_field(text, chart: Chart):
    return to_field(parse(text, chart.names), chart, name=text)


__all__ = [
    "BinOp",
    "Call",
    "DepthError",
    "DomainError",
    "ExprError",
    "ExprSyntaxError",
    "MAX_DEPTH",
    "Neg",
    "Num",
    "Pow",
    "UnknownIdentifierError",
    "Var",
    "depth",
    "evaluate",
    "parse",
    "parse_field",
    "to_field",
    "to_text",
]
