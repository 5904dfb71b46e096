"""Tiny arithmetic expression language for user-supplied volatility and drift.

Grammar (``^`` is right-associative, unary minus binds looser than ``^``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'x' | 't' | 'e' | 'exp' '(' expr ')' | '(' expr ')'

Parsed trees evaluate on scalars or numpy arrays and can be differentiated
symbolically, so user expressions get exact first and second derivatives.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

VARIABLES = ("x", "t")


class ExpressionError(ValueError):
    """Raised for malformed expressions; ``column`` is 1-based."""

    def __init__(self, message: str, column: int):
        super().__init__(f"{message} (column {column})")
        self.column = column


class Node:
    def evaluate(self, x, t=0.0):
        raise NotImplementedError

    def diff(self, var: str) -> "Node":
        raise NotImplementedError

    def depends_on(self, var: str) -> bool:
        raise NotImplementedError


@dataclass(frozen=True)
class Const(Node):
    value: float

    def evaluate(self, x, t=0.0):
        return self.value + 0.0 * np.asarray(x, dtype=float) if np.ndim(x) else self.value

    def diff(self, var):
        return ZERO

    def depends_on(self, var):
        return False

    def __str__(self):
        return repr(self.value)


ZERO = Const(0.0)
ONE = Const(1.0)


@dataclass(frozen=True)
class Var(Node):
    name: str

    def evaluate(self, x, t=0.0):
        if self.name == "x":
            return x
        return t + 0.0 * np.asarray(x, dtype=float) if np.ndim(x) else t

    def diff(self, var):
        return ONE if var == self.name else ZERO

    def depends_on(self, var):
        return var == self.name

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def evaluate(self, x, t=0.0):
        return -self.arg.evaluate(x, t)

    def diff(self, var):
        return neg(self.arg.diff(var))

    def depends_on(self, var):
        return self.arg.depends_on(var)

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class Exp(Node):
    arg: Node

    def evaluate(self, x, t=0.0):
        return np.exp(self.arg.evaluate(x, t))

    def diff(self, var):
        return mul(self, self.arg.diff(var))

    def depends_on(self, var):
        return self.arg.depends_on(var)

    def __str__(self):
        return f"exp({self.arg})"


@dataclass(frozen=True)
class Log(Node):
    arg: Node

    def evaluate(self, x, t=0.0):
        return np.log(self.arg.evaluate(x, t))

    def diff(self, var):
        return div(self.arg.diff(var), self.arg)

    def depends_on(self, var):
        return self.arg.depends_on(var)

    def __str__(self):
        return f"log({self.arg})"


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    def evaluate(self, x, t=0.0):
        a = self.left.evaluate(x, t)
        b = self.right.evaluate(x, t)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return a / b
        return np.power(a, b)

    def depends_on(self, var):
        return self.left.depends_on(var) or self.right.depends_on(var)

    def diff(self, var):
        u, v = self.left, self.right
        du, dv = u.diff(var), v.diff(var)
        if self.op == "+":
            return add(du, dv)
        if self.op == "-":
            return sub(du, dv)
        if self.op == "*":
            return add(mul(du, v), mul(u, dv))
        if self.op == "/":
            return div(sub(mul(du, v), mul(u, dv)), mul(v, v))
        # power
        if not v.depends_on(var):
            return mul(mul(v, power(u, sub(v, ONE))), du)
        return mul(self, add(mul(dv, Log(u)), div(mul(v, du), u)))

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


# Smart constructors keep derivative trees from ballooning with 0*... and 1*...


def _is(node: Node, value: float) -> bool:
    return isinstance(node, Const) and node.value == value


def add(a, b):
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return BinOp("+", a, b)


def sub(a, b):
    if _is(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(a, 0.0):
        return neg(b)
    return BinOp("-", a, b)


def mul(a, b):
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return BinOp("*", a, b)


def div(a, b):
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return BinOp("/", a, b)


def power(a, b):
    if _is(b, 1.0):
        return a
    if _is(b, 0.0):
        return ONE
    return BinOp("^", a, b)


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\S))")


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        if m.group(0).strip() == "":
            break
        kind = "num" if m.group(1) else "name" if m.group(2) else "op"
        value = m.group(1) or m.group(2) or m.group(3)
        tokens.append((kind, value, m.start(m.lastindex) + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, col = self.take()
        if val != value:
            raise ExpressionError(f"expected {value!r}, found {val or 'end of input'!r}", col)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, col = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {val!r}", col)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = BinOp(op, node, rhs)
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return neg(self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, col = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val in VARIABLES:
                return Var(val)
            if val == "e":
                return Const(float(np.e))
            if val in ("exp", "log"):
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return Exp(inner) if val == "exp" else Log(inner)
            raise ExpressionError(f"unknown name {val!r}", col)
        if val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        raise ExpressionError(f"unexpected {val or 'end of input'!r}", col)


def parse(text: str) -> Node:
    """Parse ``text`` into an expression tree.

    >>> parse("0.5 - 0.1*e^(1 - x^2)").evaluate(0.0)
    0.2281718171540955
    """
    if not text or not text.strip():
        raise ExpressionError("empty expression", 1)
    return _Parser(text).parse()
