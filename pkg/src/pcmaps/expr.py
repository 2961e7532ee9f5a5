"""Branch expressions: parsing, printing and derivative evaluation.

Expressions are immutable trees of frozen dataclasses. Derivatives come from
forward propagation of truncated Taylor coefficients (``t_k = f^(k)/k!``); the
same code runs on float arrays and on :class:`~pcmaps.interval.Interval`
enclosures, the latter giving the slope bounds used by the maximization kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import interval as iv
from .errors import (EvalDomain, EvalOverflow, ExprSyntaxError, OrderTooHigh,
                     UnknownIdentifier)

MAX_ORDER = 8
MAX_EXPONENT = 64
FUNCTIONS = ("sin", "cos", "exp")
CONSTANTS = {"pi": math.pi, "e": math.e}


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Const, Neg, Add, Sub, Mul, Div, Pow, Call]
X = Var()


def num(value: float) -> Expr:
    """Literal node for any finite float; negatives become ``Neg(Num)`` so that
    printed output parses back to the same tree."""
    value = float(value)
    if value < 0 or (value == 0 and math.copysign(1.0, value) < 0):
        return Neg(Num(-value))
    return Num(value)


# ---------------------------------------------------------------------------
# tokenizer / parser

_OPS = set("+-*/^()")


@dataclass(frozen=True)
class _Tok:
    kind: str  # "num", "ident", "op", "end"
    text: str
    offset: int  # byte offset


def _tokenize(text: str) -> list[_Tok]:
    byte_at = [0]
    for ch in text:
        byte_at.append(byte_at[-1] + len(ch.encode("utf-8")))
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        start = i
        if ch.isascii() and (ch.isdigit() or ch == "."):
            while i < n and text[i].isascii() and text[i].isdigit():
                i += 1
            if i < n and text[i] == ".":
                i += 1
                while i < n and text[i].isascii() and text[i].isdigit():
                    i += 1
            if text[start:i] == ".":
                raise ExprSyntaxError("malformed number", byte_at[start])
            if i < n and text[i] in "eE":
                j = i + 1
                if j < n and text[j] in "+-":
                    j += 1
                if j < n and text[j].isascii() and text[j].isdigit():
                    while j < n and text[j].isascii() and text[j].isdigit():
                        j += 1
                    i = j
            toks.append(_Tok("num", text[start:i], byte_at[start]))
        elif ch.isascii() and (ch.isalpha() or ch == "_"):
            while i < n and text[i].isascii() and (text[i].isalnum() or text[i] == "_"):
                i += 1
            toks.append(_Tok("ident", text[start:i], byte_at[start]))
        elif ch in _OPS:
            i += 1
            toks.append(_Tok("op", ch, byte_at[start]))
        else:
            raise ExprSyntaxError(f"unexpected character {ch!r}", byte_at[start])
    toks.append(_Tok("end", "", byte_at[n]))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def take(self) -> _Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def at_op(self, chars: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text in chars

    def expect(self, op: str) -> None:
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            what = "end of input" if tok.kind == "end" else repr(tok.text)
            raise ExprSyntaxError(f"expected {op!r}, found {what}", tok.offset)
        self.pos += 1

    def expr(self) -> Expr:
        node = self.term()
        while self.at_op("+-"):
            op = self.take().text
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.at_op("*/"):
            op = self.take().text
            rhs = self.factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def factor(self) -> Expr:
        if self.at_op("-"):
            self.take()
            return Neg(self.factor())
        node = self.base()
        if self.at_op("^"):
            self.take()
            return Pow(node, self.exponent())
        return node

    def exponent(self) -> int:
        sign = 1
        if self.at_op("-"):
            self.take()
            sign = -1
        tok = self.peek()
        if tok.kind != "num" or not tok.text.isdigit():
            raise ExprSyntaxError("exponent must be an integer literal", tok.offset)
        self.pos += 1
        value = sign * int(tok.text)
        if abs(value) > MAX_EXPONENT:
            raise ExprSyntaxError(f"exponent magnitude exceeds {MAX_EXPONENT}", tok.offset)
        return value

    def base(self) -> Expr:
        tok = self.take()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "ident":
            if tok.text == "x":
                return X
            if tok.text in CONSTANTS:
                return Const(tok.text)
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            raise UnknownIdentifier(tok.text, tok.offset)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(f"unexpected {what}", tok.offset)


def parse_expr(text: str) -> Expr:
    """Parse an expression in the variable ``x``."""
    parser = _Parser(text)
    if parser.peek().kind == "end":
        raise ExprSyntaxError("empty expression", parser.peek().offset)
    node = parser.expr()
    tok = parser.peek()
    if tok.kind != "end":
        raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.offset)
    return node


# ---------------------------------------------------------------------------
# printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(node: Expr) -> int:
    return _PREC.get(type(node), 5)


def _wrap(node: Expr, min_prec: int) -> str:
    s = unparse(node)
    return f"({s})" if _prec(node) < min_prec else s


def unparse(node: Expr) -> str:
    """Render an AST as text that parses back to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Neg):
        return "-" + _wrap(node.arg, 3)
    if isinstance(node, (Add, Sub)):
        op = " + " if isinstance(node, Add) else " - "
        return _wrap(node.left, 1) + op + _wrap(node.right, 2)
    if isinstance(node, (Mul, Div)):
        op = "*" if isinstance(node, Mul) else "/"
        return _wrap(node.left, 2) + op + _wrap(node.right, 3)
    if isinstance(node, Pow):
        return _wrap(node.base, 5) + "^" + str(node.exponent)
    if isinstance(node, Call):
        return f"{node.func}({unparse(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# tree utilities


def substitute(node: Expr, replacement: Expr) -> Expr:
    """Replace every occurrence of ``x`` by ``replacement``."""
    if isinstance(node, Var):
        return replacement
    if isinstance(node, (Num, Const)):
        return node
    if isinstance(node, Neg):
        return Neg(substitute(node.arg, replacement))
    if isinstance(node, Pow):
        return Pow(substitute(node.base, replacement), node.exponent)
    if isinstance(node, Call):
        return Call(node.func, substitute(node.arg, replacement))
    return type(node)(substitute(node.left, replacement), substitute(node.right, replacement))


def has_var(node: Expr) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, (Num, Const)):
        return False
    if isinstance(node, (Neg, Call)):
        return has_var(node.arg)
    if isinstance(node, Pow):
        return has_var(node.base)
    return has_var(node.left) or has_var(node.right)


def affine_coefficients(node: Expr) -> tuple[float, float] | None:
    """``(slope, intercept)`` when the expression is affine in ``x``, else None."""
    if isinstance(node, Var):
        return 1.0, 0.0
    if not has_var(node):
        return 0.0, const_value(node)
    if isinstance(node, Neg):
        inner = affine_coefficients(node.arg)
        return None if inner is None else (-inner[0], -inner[1])
    if isinstance(node, (Add, Sub)):
        a, b = affine_coefficients(node.left), affine_coefficients(node.right)
        if a is None or b is None:
            return None
        if isinstance(node, Add):
            return a[0] + b[0], a[1] + b[1]
        return a[0] - b[0], a[1] - b[1]
    if isinstance(node, Mul):
        a, b = affine_coefficients(node.left), affine_coefficients(node.right)
        if a is None or b is None:
            return None
        if a[0] == 0.0:
            return a[1] * b[0], a[1] * b[1]
        if b[0] == 0.0:
            return b[1] * a[0], b[1] * a[1]
        return None
    if isinstance(node, Div):
        a = affine_coefficients(node.left)
        if a is None or has_var(node.right):
            return None
        d = const_value(node.right)
        if d == 0.0:
            return None
        return a[0] / d, a[1] / d
    if isinstance(node, Pow):
        if node.exponent == 1:
            return affine_coefficients(node.base)
        return None
    return None


def const_value(node: Expr) -> float:
    """Value of an expression that does not depend on ``x``."""
    if has_var(node):
        raise ValueError("expression depends on x")
    return float(eval_jet(node, 0.0, 0).coefficients[0])


# ---------------------------------------------------------------------------
# jet propagation


def _is_zero(c) -> bool:
    return isinstance(c, float) and c == 0.0


class _FloatOps:
    interval = False
    sin = staticmethod(np.sin)
    cos = staticmethod(np.cos)
    exp = staticmethod(np.exp)

    @staticmethod
    def ipow(a, n):
        return a ** n

    @staticmethod
    def check_divisor(b0, xs):
        zero = np.asarray(b0) == 0.0
        if np.any(zero):
            where = np.broadcast_to(np.asarray(xs), zero.shape)[zero]
            x0 = float(np.ravel(where)[0]) if np.size(where) else None
            raise EvalDomain(f"division by zero at x={x0!r}", {"x": x0})

    @staticmethod
    def check_finite(coeffs, xs):
        for c in coeffs:
            if _is_zero(c):
                continue
            bad = ~np.isfinite(np.asarray(c))
            if np.any(bad):
                where = np.broadcast_to(np.asarray(xs), bad.shape)[bad]
                x0 = float(np.ravel(where)[0]) if np.size(where) else None
                raise EvalOverflow(f"non-finite intermediate at x={x0!r}", {"x": x0})


class _IntervalOps:
    interval = True

    @staticmethod
    def sin(a):
        return iv.sin(iv.Interval._coerce(a))

    @staticmethod
    def cos(a):
        return iv.cos(iv.Interval._coerce(a))

    @staticmethod
    def exp(a):
        return iv.exp(iv.Interval._coerce(a))

    @staticmethod
    def ipow(a, n):
        return iv.ipow(iv.Interval._coerce(a), n)

    @staticmethod
    def check_divisor(b0, xs):
        pass

    @staticmethod
    def check_finite(coeffs, xs):
        pass


def _const_jet(value: float, order: int) -> list:
    return [float(value)] + [0.0] * order


def _mul(a, b, order):
    out = []
    for k in range(order + 1):
        acc = 0.0
        for i in range(k + 1):
            ai, bk = a[i], b[k - i]
            if _is_zero(ai) or _is_zero(bk):
                continue
            term = ai * bk
            acc = term if _is_zero(acc) else acc + term
        out.append(acc)
    return out


def _add(a, b):
    return [y if _is_zero(x) else (x if _is_zero(y) else x + y) for x, y in zip(a, b)]


def _neg(a):
    return [c if _is_zero(c) else -c for c in a]


def _div(a, b, order, ops, xs):
    ops.check_divisor(b[0], xs)
    out = []
    for k in range(order + 1):
        acc = a[k]
        for i in range(1, k + 1):
            bi, ck = b[i], out[k - i]
            if _is_zero(bi) or _is_zero(ck):
                continue
            acc = -(bi * ck) if _is_zero(acc) else acc - bi * ck
        out.append(acc if _is_zero(acc) else acc / b[0])
    return out


def _pow(a, n, order, ops, xs):
    if n == 0:
        return _const_jet(1.0, order)
    if n < 0:
        return _div(_const_jet(1.0, order), _pow(a, -n, order, ops, xs), order, ops, xs)
    result = None
    base = a
    m = n
    while m:
        if m & 1:
            result = base if result is None else _mul(result, base, order)
        m >>= 1
        if m:
            base = _mul(base, base, order)
    result = list(result)
    if not _is_zero(a[0]):
        result[0] = ops.ipow(a[0], n)
    return result


def _exp(a, order, ops):
    e = [ops.exp(a[0])]
    for k in range(1, order + 1):
        acc = 0.0
        for i in range(1, k + 1):
            if _is_zero(a[i]):
                continue
            term = a[i] * e[k - i] * float(i)
            acc = term if _is_zero(acc) else acc + term
        e.append(acc if _is_zero(acc) else acc * (1.0 / k))
    return e


def _sincos(a, order, ops):
    s, c = [ops.sin(a[0])], [ops.cos(a[0])]
    for k in range(1, order + 1):
        sk, ck = 0.0, 0.0
        for i in range(1, k + 1):
            if _is_zero(a[i]):
                continue
            ts = a[i] * c[k - i] * float(i)
            tc = a[i] * s[k - i] * float(i)
            sk = ts if _is_zero(sk) else sk + ts
            ck = tc if _is_zero(ck) else ck + tc
        s.append(sk if _is_zero(sk) else sk * (1.0 / k))
        c.append(ck if _is_zero(ck) else ck * (-1.0 / k))
    return s, c


def _propagate(node: Expr, xj: list, order: int, ops, xs) -> list:
    if isinstance(node, Var):
        return xj
    if isinstance(node, Num):
        return _const_jet(node.value, order)
    if isinstance(node, Const):
        return _const_jet(CONSTANTS[node.name], order)
    if isinstance(node, Neg):
        return _neg(_propagate(node.arg, xj, order, ops, xs))
    if isinstance(node, Pow):
        out = _pow(_propagate(node.base, xj, order, ops, xs), node.exponent, order, ops, xs)
    elif isinstance(node, Call):
        a = _propagate(node.arg, xj, order, ops, xs)
        if node.func == "exp":
            out = _exp(a, order, ops)
        else:
            s, c = _sincos(a, order, ops)
            out = s if node.func == "sin" else c
    else:
        a = _propagate(node.left, xj, order, ops, xs)
        b = _propagate(node.right, xj, order, ops, xs)
        if isinstance(node, Add):
            out = _add(a, b)
        elif isinstance(node, Sub):
            out = _add(a, _neg(b))
        elif isinstance(node, Mul):
            out = _mul(a, b, order)
        else:
            out = _div(a, b, order, ops, xs)
    ops.check_finite(out, xs)
    return out


@dataclass(frozen=True)
class Jet:
    order: int
    coefficients: tuple

    def __getitem__(self, k):
        return self.coefficients[k]

    def __len__(self):
        return len(self.coefficients)


def eval_jet(node: Expr, x: float, order: int) -> Jet:
    """Value and derivatives up to ``order`` of ``node`` at the point ``x``."""
    if order < 0:
        raise ValueError("order must be non-negative")
    if order > MAX_ORDER:
        raise OrderTooHigh(f"order {order} exceeds the cap {MAX_ORDER}", {"order": order})
    x = float(x)
    if not math.isfinite(x):
        raise EvalDomain(f"non-finite argument {x!r}", {"x": x})
    derivs = jets(node, np.array([x]), order)
    return Jet(order, tuple(float(v) for v in derivs[:, 0]))


def input_jet(value, slope, order: int) -> list:
    """Taylor jet of an affine inner function ``t -> value + slope*(t - x)``."""
    return [value, slope] + [0.0] * (order - 1) if order >= 1 else [value]


def jets(node: Expr, xs, order: int, slope=None) -> np.ndarray:
    """Derivatives 0..order at each point of ``xs``, shape (order+1, len(xs)).

    With ``slope`` given the expression is composed with an inner map that is
    locally affine with that slope at each point (used for reparametrized
    branches); derivatives are then those of the composition.
    """
    xs = np.asarray(xs, dtype=float)
    xj = input_jet(xs, 1.0 if slope is None else np.asarray(slope, float), order)
    with np.errstate(all="ignore"):
        coeffs = _propagate(node, xj, order, _FloatOps, xs)
    out = np.empty((order + 1,) + xs.shape)
    for k, c in enumerate(coeffs):
        out[k] = 0.0 if _is_zero(c) else np.asarray(c) * float(math.factorial(k))
    return out


def jets_interval(node: Expr, lo, hi, order: int, slope: iv.Interval | None = None) -> list[iv.Interval]:
    """Interval enclosures of derivatives 0..order over the boxes ``[lo, hi]``."""
    box = iv.Interval(np.asarray(lo, float), np.asarray(hi, float))
    xj = input_jet(box, 1.0 if slope is None else slope, order)
    with np.errstate(all="ignore"):
        coeffs = _propagate(node, xj, order, _IntervalOps, None)
    out = []
    for k, c in enumerate(coeffs):
        if _is_zero(c) or not isinstance(c, iv.Interval):
            v = 0.0 if _is_zero(c) else float(c) * math.factorial(k)
            out.append(iv.Interval(np.full(box.lo.shape, v), np.full(box.lo.shape, v)))
        else:
            out.append(c * float(math.factorial(k)) if k > 1 else c)
    return out
