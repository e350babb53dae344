"""Arithmetic expressions for transition and fibre maps.

Transitions are supplied as expression text rather than opaque callables so
that their jets can be computed exactly in Taylor mode, with no numerical
differentiation anywhere downstream.  The grammar is standard infix:

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' integer)*
    atom    := number | name | name '(' expr ')' | '(' expr ')'

``^`` binds tightest, then unary minus, then ``*``/``/``, then ``+``/``-``;
binary operators associate to the left.  Exponents must be non-negative
integer literals.  The only functions are the entire functions ``sin``,
``cos`` and ``exp``.  Every variable name must appear in the declared
variable list passed to :func:`parse`; by convention transverse variables are
named ``y1..yq`` and fibre variables ``f1..fm``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

from .jets import JetMap, Series, table_size

FUNCTIONS = ("sin", "cos", "exp")


class ExprError(ValueError):
    """Base class for expression parsing and evaluation failures."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UndeclaredVariable(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"undeclared variable '{name}' (at offset {offset})")
        self.name = name
        self.offset = offset


class EvaluationError(ExprError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "ExprAst"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "ExprAst"
    right: "ExprAst"


@dataclass(frozen=True)
class Pow:
    base: "ExprAst"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str  # one of sin cos exp
    argument: "ExprAst"


ExprAst = Union[Const, Var, Neg, BinOp, Pow, Call]


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(r"""
    (?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
  | (?P<ws>\s+)
""", re.VERBOSE)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, variables: tuple[str, ...]):
        self.tokens = _tokenize(source)
        self.variables = variables
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, offset = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}", offset)
        self.advance()

    def parse(self) -> ExprAst:
        node = self.expression()
        kind, text, offset = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {text!r}", offset)
        return node

    def expression(self) -> ExprAst:
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = BinOp(text, node, self.term())
            else:
                return node

    def term(self) -> ExprAst:
        node = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = BinOp(text, node, self.unary())
            else:
                return node

    def unary(self) -> ExprAst:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> ExprAst:
        node = self.atom()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text == "^":
                self.advance()
                node = Pow(node, self._integer())
            else:
                return node

    def _integer(self) -> int:
        kind, text, offset = self.peek()
        if kind != "number" or not re.fullmatch(r"\d+", text):
            raise ParseError("exponent must be a non-negative integer literal",
                             offset)
        self.advance()
        return int(text)

    def atom(self) -> ExprAst:
        kind, text, offset = self.advance()
        if kind == "number":
            return Const(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expression()
                self.expect_op(")")
                return Call(text, arg)
            if text not in self.variables:
                raise UndeclaredVariable(text, offset)
            return Var(text)
        if kind == "op" and text == "(":
            node = self.expression()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected token {text!r}" if text else "unexpected end of input",
                         offset)


def parse(source: str, variables: list[str] | tuple[str, ...]) -> ExprAst:
    """Parse ``source`` into an AST; every variable must be declared."""
    return _Parser(source, tuple(variables)).parse()


# ---------------------------------------------------------------------------
# pretty printing (round-trip stable)

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def to_source(ast: ExprAst) -> str:
    text, _ = _render(ast)
    return text


def _render(ast: ExprAst) -> tuple[str, int]:
    if isinstance(ast, Const):
        value = ast.value
        text = str(int(value)) if value.is_integer() and abs(value) < 1e15 else repr(value)
        # negative literals bind like a unary minus when re-parsed
        prec = _PRECEDENCE["atom"] if value >= 0 else _PRECEDENCE["neg"]
        return text, prec
    if isinstance(ast, Var):
        return ast.name, _PRECEDENCE["atom"]
    if isinstance(ast, Call):
        inner, _ = _render(ast.argument)
        return f"{ast.func}({inner})", _PRECEDENCE["atom"]
    if isinstance(ast, Neg):
        inner, prec = _render(ast.operand)
        if prec < _PRECEDENCE["neg"]:
            inner = f"({inner})"
        return f"-{inner}", _PRECEDENCE["neg"]
    if isinstance(ast, Pow):
        base, prec = _render(ast.base)
        if prec < _PRECEDENCE["atom"]:
            base = f"({base})"
        return f"{base}^{ast.exponent}", _PRECEDENCE["^"]
    if isinstance(ast, BinOp):
        prec = _PRECEDENCE[ast.op]
        left, lp = _render(ast.left)
        right, rp = _render(ast.right)
        if lp < prec:
            left = f"({left})"
        # left associativity: parenthesize right operands of equal precedence
        if rp <= prec:
            right = f"({right})"
        return f"{left} {ast.op} {right}", prec
    raise TypeError(f"not an expression node: {ast!r}")


# ---------------------------------------------------------------------------
# evaluation


def eval_point(ast: ExprAst, point: Mapping[str, float]) -> float:
    """Evaluate at a real point; raises on division by zero or overflow."""
    value = _eval_real(ast, point)
    if not math.isfinite(value):
        raise EvaluationError("expression evaluated to a non-finite value")
    return value


def _eval_real(ast: ExprAst, point: Mapping[str, float]) -> float:
    if isinstance(ast, Const):
        return ast.value
    if isinstance(ast, Var):
        try:
            return float(point[ast.name])
        except KeyError:
            raise EvaluationError(f"unbound variable '{ast.name}'") from None
    if isinstance(ast, Neg):
        return -_eval_real(ast.operand, point)
    if isinstance(ast, Pow):
        try:
            return _eval_real(ast.base, point) ** ast.exponent
        except OverflowError:
            raise EvaluationError("expression evaluated to a non-finite value") from None
    if isinstance(ast, Call):
        arg = _eval_real(ast.argument, point)
        try:
            return getattr(math, ast.func)(arg)
        except OverflowError:
            raise EvaluationError("expression evaluated to a non-finite value") from None
    if isinstance(ast, BinOp):
        left = _eval_real(ast.left, point)
        right = _eval_real(ast.right, point)
        if ast.op == "+":
            return left + right
        if ast.op == "-":
            return left - right
        if ast.op == "*":
            return left * right
        denominator = right
        if denominator == 0.0:
            raise EvaluationError("division by zero")
        return left / denominator
    raise TypeError(f"not an expression node: {ast!r}")


def eval_jet(ast: ExprAst, arguments: Mapping[str, Series], order: int) -> JetMap:
    """The exact k-jet of the expression over truncated-series arguments.

    Each declared variable is bound to a scalar series; all series must share
    the same source dimension and have order >= ``order``.  The result is a
    one-dimensional JetMap of the requested order.
    """
    series = dict(arguments)
    sample = next(iter(series.values()))
    nvars = sample.nvars
    for name, s in series.items():
        if s.nvars != nvars:
            raise EvaluationError(f"argument series for '{name}' has mismatched dimension")
        if s.order < order:
            raise EvaluationError(f"argument series for '{name}' has order {s.order} < {order}")
        if s.order > order:
            series[name] = Series(nvars, order, s.coeffs[:table_size(nvars, order)])
    result = _eval_series(ast, series, nvars, order)
    coeffs = result.coeffs.reshape(-1, 1)
    jet = JetMap(nvars, 1, order, coeffs)
    return jet


def _eval_series(ast: ExprAst, args: Mapping[str, Series], nvars: int,
                 order: int) -> Series:
    if isinstance(ast, Const):
        return Series.constant(nvars, order, ast.value)
    if isinstance(ast, Var):
        try:
            return args[ast.name]
        except KeyError:
            raise EvaluationError(f"unbound variable '{ast.name}'") from None
    if isinstance(ast, Neg):
        return -_eval_series(ast.operand, args, nvars, order)
    if isinstance(ast, Pow):
        return _eval_series(ast.base, args, nvars, order) ** ast.exponent
    if isinstance(ast, Call):
        arg = _eval_series(ast.argument, args, nvars, order)
        return getattr(arg, ast.func)()
    if isinstance(ast, BinOp):
        left = _eval_series(ast.left, args, nvars, order)
        right = _eval_series(ast.right, args, nvars, order)
        if ast.op == "+":
            return left + right
        if ast.op == "-":
            return left - right
        if ast.op == "*":
            return left * right
        try:
            return left / right
        except ZeroDivisionError as exc:
            raise EvaluationError(str(exc)) from None
    raise TypeError(f"not an expression node: {ast!r}")
