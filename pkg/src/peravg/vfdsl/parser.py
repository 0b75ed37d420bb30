"""Recursive-descent parser, printer and evaluators for field expressions.

Grammar (see ``docs/grammar.md``)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := primary ["^" unary]
    primary := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"

``^`` is right associative and binds tighter than unary minus, so ``-x^2`` is
``-(x^2)`` and ``2^-x`` is ``2^(-x)``.
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

from ..errors import PeravgError

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs")
CONSTANTS = {"pi": math.pi}


class DSLSyntaxError(PeravgError, ValueError):
    """Parse failure at ``line``/``col`` (1-based) with the expected token set."""

    def __init__(self, message, line, col, expected=()):
        self.line = line
        self.col = col
        self.expected = tuple(sorted(set(expected)))
        exp = f"; expected one of {', '.join(self.expected)}" if self.expected else ""
        super().__init__(f"{message} at line {line}, col {col}{exp}")


class UnknownIdentifier(DSLSyntaxError):
    def __init__(self, name, line, col, allowed=()):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", line, col, allowed)


class UnboundVariable(PeravgError, KeyError):
    def __init__(self, name):
        self.name = name
        super().__init__(name)

    def __str__(self):
        return f"variable {self.name!r} is not bound"


class NonFiniteWarning(RuntimeWarning):
    """An expression evaluated to inf or nan."""


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]


# -- lexer -------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r\n]+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
)


@dataclass(frozen=True)
class Token:
    kind: str  # "num", "ident", "op", "eof"
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        col = pos - line_start + 1
        if m is None:
            raise DSLSyntaxError(f"unexpected character {src[pos]!r}", line, col,
                                 ("number", "identifier", "operator"))
        kind = m.lastgroup
        text = m.group()
        if kind == "ws":
            nl = text.count("\n")
            if nl:
                line += nl
                line_start = pos + text.rfind("\n") + 1
        else:
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# -- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, src, variables):
        self.toks = tokenize(src)
        self.i = 0
        self.variables = None if variables is None else frozenset(variables)

    @property
    def tok(self):
        return self.toks[self.i]

    def advance(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, expected):
        t = self.tok
        what = "end of input" if t.kind == "eof" else repr(t.text)
        raise DSLSyntaxError(f"unexpected {what}", t.line, t.col, expected)

    def expect_op(self, op):
        if self.tok.kind == "op" and self.tok.text == op:
            return self.advance()
        self.fail((repr(op),))

    def parse(self):
        e = self.expr()
        if self.tok.kind != "eof":
            self.fail(("operator", "end of input"))
        return e

    def expr(self):
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            value = float(t.text)
            if not math.isfinite(value):
                raise DSLSyntaxError("numeric literal out of range", t.line, t.col)
            return Num(value)
        if t.kind == "ident":
            self.advance()
            if t.text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(t.text, arg)
            if t.text in CONSTANTS:
                return Var(t.text)
            if self.variables is not None and t.text not in self.variables:
                raise UnknownIdentifier(
                    t.text, t.line, t.col,
                    tuple(self.variables) + FUNCTIONS + tuple(CONSTANTS))
            return Var(t.text)
        if t.kind == "op" and t.text == "(":
            self.advance()
            e = self.expr()
            self.expect_op(")")
            return e
        self.fail(("number", "identifier", "'('", "'-'"))


def parse_expr(src: str, variables: Iterable[str] | None = None) -> Expr:
    """Parse ``src`` into an AST.

    When ``variables`` is given, identifiers outside it (and outside the
    function and constant names) raise :class:`UnknownIdentifier`.
    """
    return _Parser(src, variables).parse()


# -- printer -----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_UNARY, _POW, _ATOM = 3, 4, 5


def _prec(e):
    if isinstance(e, BinOp):
        return _POW if e.op == "^" else _PREC[e.op]
    if isinstance(e, Neg):
        return _UNARY
    return _ATOM


def to_source(e: Expr) -> str:
    """Render an AST so that ``parse_expr(to_source(e)) == e``."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    if isinstance(e, Neg):
        inner = to_source(e.operand)
        return f"-({inner})" if _prec(e.operand) < _UNARY else f"-{inner}"
    if e.op == "^":
        left = to_source(e.left)
        if _prec(e.left) < _ATOM:
            left = f"({left})"
        right = to_source(e.right)
        if _prec(e.right) < _UNARY:
            right = f"({right})"
        return f"{left}^{right}"
    p = _PREC[e.op]
    left = to_source(e.left)
    if _prec(e.left) < p:
        left = f"({left})"
    right = to_source(e.right)
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


def free_variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return set() if e.name in CONSTANTS else {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg, Call)):
        return free_variables(e.operand if isinstance(e, Neg) else e.arg)
    return free_variables(e.left) | free_variables(e.right)


# -- evaluation --------------------------------------------------------------

_NP_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt,
             "abs": np.abs}


def _eval(e, env):
    if isinstance(e, Num):
        return np.float64(e.value)
    if isinstance(e, Var):
        if e.name in env:
            return np.float64(env[e.name])
        if e.name in CONSTANTS:
            return np.float64(CONSTANTS[e.name])
        raise UnboundVariable(e.name)
    if isinstance(e, Neg):
        return -_eval(e.operand, env)
    if isinstance(e, Call):
        return _NP_FUNCS[e.func](_eval(e.arg, env))
    a = _eval(e.left, env)
    b = _eval(e.right, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        return a / b
    return np.power(a, b)


def eval_expr(e: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate with IEEE double semantics.

    Division by zero, overflow and invalid operations yield inf/nan and emit a
    :class:`NonFiniteWarning` instead of raising.
    """
    with np.errstate(all="ignore"):
        value = float(_eval(e, bindings))
    if not math.isfinite(value):
        warnings.warn(f"non-finite result {value!r}", NonFiniteWarning, stacklevel=2)
    return value


# -- compilation to numpy callables ------------------------------------------

def _py_source(e, names):
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        if e.name in names:
            return names[e.name]
        return repr(CONSTANTS[e.name])
    if isinstance(e, Neg):
        return f"(-{_py_source(e.operand, names)})"
    if isinstance(e, Call):
        return f"_{e.func}({_py_source(e.arg, names)})"
    a = _py_source(e.left, names)
    b = _py_source(e.right, names)
    if e.op == "^":
        return f"_pow({a}, {b})"
    return f"({a} {e.op} {b})"


def compile_columns(exprs: list[Expr], variables: list[str]):
    """Compile expressions into ``f(P) -> (n, len(exprs))`` over rows of ``P``.

    Column ``j`` of ``P`` binds ``variables[j]``. Evaluation goes through the
    same numpy ufuncs as :func:`eval_expr`.
    """
    names = {v: f"P[:, {j}]" for j, v in enumerate(variables)}
    for e in exprs:
        missing = free_variables(e) - set(names)
        if missing:
            raise UnboundVariable(sorted(missing)[0])
    body = ", ".join(
        f"_bc({_py_source(e, names)}, P.shape[0])" for e in exprs)
    src = f"def _f(P):\n    return _stack(({body},), axis=1)\n"
    ns = {f"_{k}": v for k, v in _NP_FUNCS.items()}
    ns.update(_pow=np.power, _stack=np.stack, _bc=_broadcast)
    code = compile(src, "<vfdsl>", "exec")
    exec(code, ns)
    fn = ns["_f"]

    def f(P):
        P = np.asarray(P, dtype=np.float64)
        with np.errstate(all="ignore"):
            return fn(P)

    return f


def _broadcast(v, n):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 0:
        return np.full(n, float(v))
    return v
