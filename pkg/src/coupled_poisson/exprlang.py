"""Small expression language for nonlinearities and bound functions.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := number | ident | ident '(' expr ')' | '(' expr ')'

Variables are ``x1, x2, u, v``; constants ``pi, e``; functions
``sin cos tan exp ln sqrt abs``. ``^`` is right-associative and binds tighter
than a leading minus, so ``-x^2`` is ``-(x^2)``.

Evaluation broadcasts over numpy arrays. Domain violations (``ln`` of a
nonpositive value, ``sqrt`` of a negative one, division by zero, a negative
base under a non-integer exponent, overflow) raise :class:`EvalError` instead
of producing NaN or inf.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

VARIABLES = frozenset({"x1", "x2", "u", "v"})
SPACE_VARIABLES = frozenset({"x1", "x2"})
CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt", "abs")


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, source: str = "", pos: int | None = None):
        self.source = source
        self.pos = pos
        if pos is not None:
            message = f"{message} at position {pos}"
            if source:
                message += f"\n  {source}\n  {' ' * pos}^"
        super().__init__(message)


class EvalError(ExprError, ArithmeticError):
    """Raised on a domain violation. ``index`` locates the first bad element
    when evaluating over arrays (None for scalar evaluation)."""

    def __init__(self, message: str, index: tuple | None = None):
        self.index = index
        super().__init__(message)


# --------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Const, Neg, BinOp, Call]


def _collect_vars(node: Node, out: set) -> None:
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, Neg):
        _collect_vars(node.operand, out)
    elif isinstance(node, BinOp):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, Call):
        _collect_vars(node.arg, out)


@dataclass(frozen=True)
class Expr:
    """A parsed expression. Immutable; evaluation is pure."""

    root: Node
    source: str = ""

    @property
    def variables(self) -> frozenset:
        out: set = set()
        _collect_vars(self.root, out)
        return frozenset(out)

    @property
    def is_constant(self) -> bool:
        return not self.variables

    def __call__(self, x1=0.0, x2=0.0, u=0.0, v=0.0):
        return evaluate(self, x1, x2, u, v)

    def __str__(self) -> str:
        return to_source(self)


# ------------------------------------------------------------------ lexing

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "ident", "op", "end"
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    n = len(source)
    while True:
        while pos < n and source[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {source[pos]!r}", source, pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(_Token(kind, m.group(kind), start))
        pos = m.end()
    tokens.append(_Token("end", "", n))
    return tokens


# ----------------------------------------------------------------- parsing


class _Parser:
    def __init__(self, source: str, allowed: frozenset):
        self.source = source
        self.allowed = allowed
        self.tokens = _tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: _Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, self.source, tok.pos)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")

    def parse(self) -> Node:
        if self.tok.kind == "end":
            raise self.error("empty expression")
        node = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected token {self.tok.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        if self.accept("-"):
            return Neg(self.factor())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            name = tok.text
            if name in FUNCTIONS:
                if not self.accept("("):
                    raise self.error(f"function {name!r} requires an argument in parentheses", tok)
                if self.tok.kind == "op" and self.tok.text == ")":
                    raise self.error(f"arity mismatch: {name!r} takes exactly one argument")
                arg = self.expr()
                if self.tok.kind == "op" and self.tok.text == ",":
                    raise self.error(f"arity mismatch: {name!r} takes exactly one argument")
                self.expect(")")
                return Call(name, arg)
            if self.tok.kind == "op" and self.tok.text == "(":
                raise self.error(f"{name!r} is not a function", tok)
            if name in CONSTANTS:
                return Const(name)
            if name in self.allowed:
                return Var(name)
            if name in VARIABLES:
                allowed = ", ".join(sorted(self.allowed)) or "none"
                raise self.error(f"variable {name!r} not allowed here (allowed: {allowed})", tok)
            raise self.error(f"unknown identifier {name!r}", tok)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        found = tok.text or "end of input"
        raise self.error(f"unexpected token {found!r}")


def parse(source: str, variables=VARIABLES) -> Expr:
    """Parse ``source`` into an :class:`Expr`.

    ``variables`` restricts which of ``x1, x2, u, v`` may appear; pass
    :data:`SPACE_VARIABLES` for bound functions of position only.
    """
    if not isinstance(source, str):
        raise TypeError("expression source must be a string")
    allowed = frozenset(variables)
    unknown = allowed - VARIABLES
    if unknown:
        raise ValueError(f"unsupported variables {sorted(unknown)}")
    return Expr(_Parser(source, allowed).parse(), source)


# -------------------------------------------------------------- evaluation


def _first_bad(mask) -> tuple | None:
    mask = np.asarray(mask)
    if mask.ndim == 0:
        return None
    return tuple(int(i) for i in np.argwhere(mask)[0])


def _check(mask, message: str) -> None:
    if np.any(mask):
        raise EvalError(message, _first_bad(mask))


def _eval(node: Node, env: dict):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        op = node.op
        if op == "+":
            out = np.add(a, b)
        elif op == "-":
            out = np.subtract(a, b)
        elif op == "*":
            out = np.multiply(a, b)
        elif op == "/":
            _check(np.equal(b, 0.0), "division by zero")
            out = np.divide(a, b)
        else:
            a_arr = np.asarray(a, dtype=float)
            b_arr = np.asarray(b, dtype=float)
            non_int = b_arr != np.round(b_arr)
            _check((a_arr < 0) & non_int, "negative base with non-integer exponent")
            _check((a_arr == 0) & (b_arr < 0), "division by zero (zero to a negative power)")
            out = np.power(a_arr, b_arr)
        _check(~np.isfinite(out), f"non-finite result in {op!r}")
        return out
    if isinstance(node, Call):
        a = _eval(node.arg, env)
        f = node.func
        if f == "ln":
            _check(np.less_equal(a, 0.0), "ln of nonpositive argument")
            out = np.log(a)
        elif f == "sqrt":
            _check(np.less(a, 0.0), "sqrt of negative argument")
            out = np.sqrt(a)
        elif f == "abs":
            out = np.abs(a)
        else:
            out = getattr(np, f)(a)
        _check(~np.isfinite(out), f"non-finite result in {f}()")
        return out
    raise TypeError(f"unknown node {node!r}")


def evaluate(expr: Expr, x1=0.0, x2=0.0, u=0.0, v=0.0):
    """Evaluate ``expr``; arguments may be scalars or broadcastable arrays.

    Scalar inputs give a Python float, array inputs an ndarray of the
    broadcast shape.
    """
    env = {"x1": x1, "x2": x2, "u": u, "v": v}
    scalar = all(np.ndim(a) == 0 for a in env.values())
    with np.errstate(all="ignore"):
        out = _eval(expr.root, env)
    if scalar:
        return float(out)
    shape = np.broadcast_shapes(*(np.shape(a) for a in env.values()))
    return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()


# -------------------------------------------------------- pretty printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _fmt_num(x: float) -> str:
    text = repr(float(x))
    if text in ("inf", "nan"):
        raise ValueError(f"cannot print non-finite literal {text}")
    return text


def _src(node: Node) -> tuple[str, int]:
    """Return (text, precedence) for ``node``."""
    if isinstance(node, Num):
        return _fmt_num(node.value), 5
    if isinstance(node, (Var, Const)):
        return node.name, 5
    if isinstance(node, Call):
        return f"{node.func}({_src(node.arg)[0]})", 5
    if isinstance(node, Neg):
        text, prec = _src(node.operand)
        if prec < _PREC["neg"]:
            text = f"({text})"
        return f"-{text}", _PREC["neg"]
    op = node.op
    prec = _PREC[op]
    left, lp = _src(node.left)
    right, rp = _src(node.right)
    if op == "^":
        # base must be an atom; exponent is a factor (right-assoc)
        if lp < 5:
            left = f"({left})"
        if rp < _PREC["neg"]:
            right = f"({right})"
        return f"{left}^{right}", prec
    if lp < prec:
        left = f"({left})"
    if rp <= prec:
        right = f"({right})"
    return f"{left} {op} {right}", prec


def to_source(expr: Expr | Node) -> str:
    """Render an expression back to parseable text."""
    root = expr.root if isinstance(expr, Expr) else expr
    return _src(root)[0]
