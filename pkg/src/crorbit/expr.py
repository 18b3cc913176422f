"""Scalar expression trees with exact first/second derivatives.

Expressions are immutable trees over positional variables x1..xn built from
+, -, *, /, integer powers and sin/cos/exp/log.  They define manifold
defining functions, vector-field coefficients and scalar multipliers, and
support three evaluation paths:

* ``eval_jet`` -- interpreted forward-mode evaluation carrying value,
  gradient and (optionally) Hessian through every node.
* ``differentiate`` -- symbolic partial derivatives, closing the tree
  grammar under differentiation (used to build bracket fields).
* ``JetCompiler`` -- generates straight-line Python source for value plus
  directional-derivative evaluation, used by the ODE right-hand sides where
  interpreted evaluation would dominate the runtime.

All derivative values come from forward-mode rules, never finite
differences; the test suite keeps a finite-difference oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ScalarExpr",
    "Const",
    "Var",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "Neg",
    "Call",
    "Jet",
    "ExprError",
    "ExprSyntaxError",
    "ExprDomainError",
    "parse_expr",
    "to_text",
    "eval_jet",
    "eval_value",
    "differentiate",
    "const",
    "var",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "powi",
    "call",
    "JetCompiler",
    "compile_values",
    "compile_values_and_jacobian",
    "FUNCTIONS",
]


class ExprError(Exception):
    """Base class for expression failures."""


class ExprSyntaxError(ExprError):
    """Parse failure; carries the 0-based character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ExprDomainError(ExprError):
    """Evaluation left the expression's domain (division by zero, log <= 0)."""


class ScalarExpr:
    """Base class for expression nodes.  Nodes are frozen and hashable."""

    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Const(ScalarExpr):
    value: float


@dataclass(frozen=True, slots=True)
class Var(ScalarExpr):
    index: int  # 0-based


@dataclass(frozen=True, slots=True)
class Add(ScalarExpr):
    left: ScalarExpr
    right: ScalarExpr


@dataclass(frozen=True, slots=True)
class Sub(ScalarExpr):
    left: ScalarExpr
    right: ScalarExpr


@dataclass(frozen=True, slots=True)
class Mul(ScalarExpr):
    left: ScalarExpr
    right: ScalarExpr


@dataclass(frozen=True, slots=True)
class Div(ScalarExpr):
    left: ScalarExpr
    right: ScalarExpr


@dataclass(frozen=True, slots=True)
class Pow(ScalarExpr):
    base: ScalarExpr
    exponent: int


@dataclass(frozen=True, slots=True)
class Neg(ScalarExpr):
    operand: ScalarExpr


@dataclass(frozen=True, slots=True)
class Call(ScalarExpr):
    func: str  # one of FUNCTIONS
    arg: ScalarExpr


FUNCTIONS = ("sin", "cos", "exp", "log")


# ---------------------------------------------------------------------------
# smart constructors (constant folding keeps iterated brackets small)
# ---------------------------------------------------------------------------

def const(v: float) -> Const:
    return Const(float(v))


def var(i: int) -> Var:
    return Var(i)


def _is_const(e: ScalarExpr, v: float | None = None) -> bool:
    return isinstance(e, Const) and (v is None or e.value == v)


def add(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def sub(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Sub(a, b)


def mul(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Mul(a, b)


def div(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    return Div(a, b)


def neg(a: ScalarExpr) -> ScalarExpr:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def powi(a: ScalarExpr, n: int) -> ScalarExpr:
    if n == 0:
        return Const(1.0)
    if n == 1:
        return a
    if _is_const(a) and not (a.value == 0.0 and n < 0):
        return Const(a.value**n)
    return Pow(a, n)


def call(func: str, a: ScalarExpr) -> ScalarExpr:
    if func not in FUNCTIONS:
        raise ValueError(f"unknown function {func!r}")
    if _is_const(a):
        v = a.value
        if func != "log" or v > 0.0:
            return Const(getattr(math, func)(v))
    return Call(func, a)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_NUM_START = set("0123456789.")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    """Return (kind, value, position) tokens; kind in num/ident/op."""
    tokens: list[tuple[str, str, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^()":
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch in _NUM_START:
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                seen_dot = seen_dot or text[j] == "."
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            lit = text[i:j]
            try:
                float(lit)
            except ValueError:
                raise ExprSyntaxError(f"bad number literal {lit!r}", i) from None
            tokens.append(("num", lit, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("ident", text[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, dim: int, aliases: Mapping[str, int] | None):
        self.text = text
        self.dim = dim
        self.aliases = dict(aliases or {})
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def next(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, val, at = self.next()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}, found {val or 'end of input'!r}", at)

    def parse(self) -> ScalarExpr:
        e = self.expr()
        kind, val, at = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected trailing input {val!r}", at)
        return e

    def expr(self) -> ScalarExpr:
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.term()
                e = Add(e, rhs) if val == "+" else Sub(e, rhs)
            else:
                return e

    def term(self) -> ScalarExpr:
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.unary()
                e = Mul(e, rhs) if val == "*" else Div(e, rhs)
            else:
                return e

    def unary(self) -> ScalarExpr:
        # extension over the strict grammar: unary minus on a factor
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            # fold a directly negated literal; "-(...)" stays a Neg node
            nkind, nval, _ = self.peek()
            if nkind == "num":
                self.next()
                node: ScalarExpr = Const(-float(nval))
                okind, oval, _ = self.peek()
                if okind == "op" and oval == "^":
                    self.next()
                    node = Neg(Pow(Const(float(nval)), self.exponent()))
                return node
            return Neg(self.unary())
        return self.factor()

    def factor(self) -> ScalarExpr:
        e = self.base()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            e = Pow(e, self.exponent())
        return e

    def exponent(self) -> int:
        sign = 1
        kind, val, at = self.next()
        if kind == "op" and val == "-":
            sign = -1
            kind, val, at = self.next()
        if kind != "num" or any(c in val for c in ".eE"):
            raise ExprSyntaxError("exponent must be an integer", at)
        return sign * int(val)

    def base(self) -> ScalarExpr:
        kind, val, at = self.next()
        if kind == "num":
            return Const(float(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        if kind == "ident":
            if val in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(val, arg)
            return self.variable(val, at)
        raise ExprSyntaxError(f"expected a number, variable or '(', found {val or 'end of input'!r}", at)

    def variable(self, name: str, at: int) -> Var:
        if name in self.aliases:
            idx = self.aliases[name]
        elif len(name) > 1 and name[0] == "x" and name[1:].isdigit():
            idx = int(name[1:]) - 1
        else:
            raise ExprSyntaxError(f"unknown identifier {name!r}", at)
        if not 0 <= idx < self.dim:
            raise ExprSyntaxError(
                f"variable {name!r} is out of range for dimension {self.dim}", at
            )
        return Var(idx)


def parse_expr(
    text: str, dim: int, aliases: Mapping[str, int] | Sequence[str] | None = None
) -> ScalarExpr:
    """Parse ``text`` into an expression tree over x1..x{dim}.

    ``aliases`` maps user names to 0-based variable indices; a plain
    sequence of names is interpreted positionally.  Raises
    :class:`ExprSyntaxError` with the offending position on bad input.
    """
    if isinstance(aliases, Mapping):
        amap = dict(aliases)
    elif aliases is not None:
        amap = {name: i for i, name in enumerate(aliases)}
    else:
        amap = {}
    for name in amap:
        if name in FUNCTIONS:
            raise ValueError(f"alias {name!r} shadows a builtin function")
    return _Parser(text, dim, amap).parse()


# ---------------------------------------------------------------------------
# printing (round-trips through parse_expr)
# ---------------------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(e: ScalarExpr) -> int:
    return _PREC.get(type(e), 5)


def to_text(e: ScalarExpr, aliases: Sequence[str] | None = None) -> str:
    """Render the tree; parsing the result yields a structurally equal tree."""

    def name(i: int) -> str:
        if aliases is not None and i < len(aliases):
            return aliases[i]
        return f"x{i + 1}"

    def wrap(child: ScalarExpr, minimum: int) -> str:
        s = rec(child)
        return f"({s})" if _prec(child) < minimum else s

    def rec(node: ScalarExpr) -> str:
        if isinstance(node, Const):
            return repr(node.value)
        if isinstance(node, Var):
            return name(node.index)
        if isinstance(node, Add):
            return f"{wrap(node.left, 1)} + {wrap(node.right, 2)}"
        if isinstance(node, Sub):
            return f"{wrap(node.left, 1)} - {wrap(node.right, 2)}"
        if isinstance(node, Mul):
            return f"{wrap(node.left, 2)}*{wrap(node.right, 3)}"
        if isinstance(node, Div):
            return f"{wrap(node.left, 2)}/{wrap(node.right, 3)}"
        if isinstance(node, Neg):
            # a bare negated literal would re-fold into a constant when parsed
            if isinstance(node.operand, Const):
                return f"-({rec(node.operand)})"
            return f"-{wrap(node.operand, 3)}"
        if isinstance(node, Pow):
            base = rec(node.base)
            if _prec(node.base) < 5 or base.startswith("-"):
                base = f"({base})"
            return f"{base}^{node.exponent}"
        if isinstance(node, Call):
            return f"{node.func}({rec(node.arg)})"
        raise TypeError(f"not an expression node: {node!r}")

    return rec(e)


# ---------------------------------------------------------------------------
# symbolic differentiation
# ---------------------------------------------------------------------------

def differentiate(e: ScalarExpr, k: int) -> ScalarExpr:
    """Symbolic partial derivative with respect to variable index ``k``."""
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.index == k else 0.0)
    if isinstance(e, Add):
        return add(differentiate(e.left, k), differentiate(e.right, k))
    if isinstance(e, Sub):
        return sub(differentiate(e.left, k), differentiate(e.right, k))
    if isinstance(e, Mul):
        return add(
            mul(differentiate(e.left, k), e.right),
            mul(e.left, differentiate(e.right, k)),
        )
    if isinstance(e, Div):
        num = sub(
            mul(differentiate(e.left, k), e.right),
            mul(e.left, differentiate(e.right, k)),
        )
        return div(num, powi(e.right, 2))
    if isinstance(e, Pow):
        inner = differentiate(e.base, k)
        return mul(mul(Const(float(e.exponent)), powi(e.base, e.exponent - 1)), inner)
    if isinstance(e, Neg):
        return neg(differentiate(e.operand, k))
    if isinstance(e, Call):
        da = differentiate(e.arg, k)
        if e.func == "sin":
            return mul(call("cos", e.arg), da)
        if e.func == "cos":
            return neg(mul(call("sin", e.arg), da))
        if e.func == "exp":
            return mul(call("exp", e.arg), da)
        if e.func == "log":
            return div(da, e.arg)
    raise TypeError(f"not an expression node: {e!r}")


def substitute(e: ScalarExpr, mapping: Mapping[int, ScalarExpr]) -> ScalarExpr:
    """Replace variables by expressions (with constant folding)."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return mapping.get(e.index, e)
    if isinstance(e, Add):
        return add(substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Sub):
        return sub(substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Mul):
        return mul(substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Div):
        return div(substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Pow):
        return powi(substitute(e.base, mapping), e.exponent)
    if isinstance(e, Neg):
        return neg(substitute(e.operand, mapping))
    if isinstance(e, Call):
        return call(e.func, substitute(e.arg, mapping))
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# interpreted jet evaluation
# ---------------------------------------------------------------------------

@dataclass
class Jet:
    """Value with optional exact gradient and Hessian at a point."""

    value: float
    gradient: np.ndarray | None = None
    hessian: np.ndarray | None = None


def _jet_rec(e: ScalarExpr, x: np.ndarray, order: int):
    n = x.shape[0]

    def mk(v, g=None, h=None):
        if order == 0:
            return (v, None, None)
        g = np.zeros(n) if g is None else g
        if order == 1:
            return (v, g, None)
        h = np.zeros((n, n)) if h is None else h
        return (v, g, h)

    if isinstance(e, Const):
        return mk(e.value)
    if isinstance(e, Var):
        g = None
        if order >= 1:
            g = np.zeros(n)
            g[e.index] = 1.0
        return mk(float(x[e.index]), g)
    if isinstance(e, (Add, Sub)):
        va, ga, ha = _jet_rec(e.left, x, order)
        vb, gb, hb = _jet_rec(e.right, x, order)
        s = 1.0 if isinstance(e, Add) else -1.0
        return (
            va + s * vb,
            None if order < 1 else ga + s * gb,
            None if order < 2 else ha + s * hb,
        )
    if isinstance(e, Mul):
        va, ga, ha = _jet_rec(e.left, x, order)
        vb, gb, hb = _jet_rec(e.right, x, order)
        v = va * vb
        g = None if order < 1 else va * gb + vb * ga
        h = None
        if order >= 2:
            h = va * hb + vb * ha + np.outer(ga, gb) + np.outer(gb, ga)
        return (v, g, h)
    if isinstance(e, Div):
        va, ga, ha = _jet_rec(e.left, x, order)
        vb, gb, hb = _jet_rec(e.right, x, order)
        if vb == 0.0:
            raise ExprDomainError("division by zero")
        v = va / vb
        g = None if order < 1 else (ga - v * gb) / vb
        h = None
        if order >= 2:
            h = (ha - v * hb - np.outer(g, gb) - np.outer(gb, g)) / vb
        return (v, g, h)
    if isinstance(e, Pow):
        va, ga, ha = _jet_rec(e.base, x, order)
        nexp = e.exponent
        if va == 0.0 and nexp < 0:
            raise ExprDomainError("zero raised to a negative power")
        v = va**nexp
        g = h = None
        if order >= 1:
            d1 = nexp * va ** (nexp - 1) if nexp != 0 else 0.0
            g = d1 * ga
            if order >= 2:
                d2 = nexp * (nexp - 1) * va ** (nexp - 2) if nexp not in (0, 1) else 0.0
                h = d1 * ha + d2 * np.outer(ga, ga)
        return (v, g, h)
    if isinstance(e, Neg):
        va, ga, ha = _jet_rec(e.operand, x, order)
        return (
            -va,
            None if order < 1 else -ga,
            None if order < 2 else -ha,
        )
    if isinstance(e, Call):
        va, ga, ha = _jet_rec(e.arg, x, order)
        if e.func == "log" and va <= 0.0:
            raise ExprDomainError("log of a non-positive value")
        f = getattr(math, e.func)
        v = f(va)
        if e.func == "sin":
            d1, d2 = math.cos(va), -v
        elif e.func == "cos":
            d1, d2 = -math.sin(va), -v
        elif e.func == "exp":
            d1 = d2 = v
        else:  # log
            d1, d2 = 1.0 / va, -1.0 / (va * va)
        g = None if order < 1 else d1 * ga
        h = None
        if order >= 2:
            h = d1 * ha + d2 * np.outer(ga, ga)
        return (v, g, h)
    raise TypeError(f"not an expression node: {e!r}")


def eval_jet(e: ScalarExpr, x: Sequence[float], order: int = 1) -> Jet:
    """Evaluate ``e`` at ``x`` with exact derivatives up to ``order`` (0|1|2)."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    xv = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xv)):
        raise ExprDomainError("evaluation point is not finite")
    v, g, h = _jet_rec(e, xv, order)
    return Jet(float(v), g, h)


def eval_value(e: ScalarExpr, x: Sequence[float]) -> float:
    return eval_jet(e, x, order=0).value


# ---------------------------------------------------------------------------
# compiled forward-mode evaluation
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def _lit(ref: str) -> float | None:
    try:
        return float(ref)
    except ValueError:
        return None


class JetCompiler:
    """Emit straight-line Python for values and directional derivatives.

    Every distinct subtree is emitted once (structural memoization), and
    tangent terms that are statically zero or one are folded away at
    generation time, so the emitted code does exactly the arithmetic the
    chain and product rules require.  Variables may be bound to state-array
    slots or to literal constants (used to pin the normal block x'' = 0).
    """

    def __init__(self, var_refs: Sequence[str], directions: Sequence[Sequence[float]]):
        self.var_refs = list(var_refs)
        self.directions = [list(d) for d in directions]
        self.lines: list[str] = []
        self._memo: dict[ScalarExpr, tuple[str, tuple[str, ...]]] = {}
        self._count = 0

    # -- low-level emission helpers -------------------------------------

    def _tmp(self, code: str) -> str:
        name = f"t{self._count}"
        self._count += 1
        self.lines.append(f"{name} = {code}")
        return name

    def _bind(self, code: str) -> str:
        """Bind composite code to a temp; pass through bare names/literals."""
        if code.isidentifier() or _lit(code) is not None:
            return code
        return self._tmp(code)

    def _add(self, a: str, b: str) -> str:
        la, lb = _lit(a), _lit(b)
        if la is not None and lb is not None:
            return _fmt(la + lb)
        if la == 0.0:
            return b
        if lb == 0.0:
            return a
        return f"({a} + {b})"

    def _sub(self, a: str, b: str) -> str:
        la, lb = _lit(a), _lit(b)
        if la is not None and lb is not None:
            return _fmt(la - lb)
        if lb == 0.0:
            return a
        if la == 0.0:
            return self._neg(b)
        return f"({a} - {b})"

    def _mul(self, a: str, b: str) -> str:
        la, lb = _lit(a), _lit(b)
        if la is not None and lb is not None:
            return _fmt(la * lb)
        if la == 0.0 or lb == 0.0:
            return "0.0"
        if la == 1.0:
            return b
        if lb == 1.0:
            return a
        if la == -1.0:
            return self._neg(b)
        if lb == -1.0:
            return self._neg(a)
        return f"{a}*{b}"

    def _neg(self, a: str) -> str:
        la = _lit(a)
        if la is not None:
            return _fmt(-la)
        return f"(-{a})"

    # -- node emission ----------------------------------------------------

    def emit(self, e: ScalarExpr) -> tuple[str, tuple[str, ...]]:
        """Return (value_ref, tangent_refs) for node ``e``."""
        hit = self._memo.get(e)
        if hit is not None:
            return hit
        ndir = len(self.directions)

        if isinstance(e, Const):
            out = (_fmt(e.value), tuple("0.0" for _ in range(ndir)))
        elif isinstance(e, Var):
            tangents = tuple(_fmt(d[e.index]) for d in self.directions)
            out = (self.var_refs[e.index], tangents)
        elif isinstance(e, (Add, Sub)):
            va, da = self.emit(e.left)
            vb, db = self.emit(e.right)
            op = self._add if isinstance(e, Add) else self._sub
            v = self._bind(op(va, vb))
            out = (v, tuple(self._bind(op(x, y)) for x, y in zip(da, db)))
        elif isinstance(e, Mul):
            va, da = self.emit(e.left)
            vb, db = self.emit(e.right)
            v = self._bind(self._mul(va, vb))
            tangents = tuple(
                self._bind(self._add(self._mul(va, y), self._mul(vb, x)))
                for x, y in zip(da, db)
            )
            out = (v, tangents)
        elif isinstance(e, Div):
            va, da = self.emit(e.left)
            vb, db = self.emit(e.right)
            r = self._bind(f"1.0/{vb}")
            v = self._bind(self._mul(va, r))
            tangents = tuple(
                self._bind(self._mul(self._sub(x, self._mul(v, y)), r))
                for x, y in zip(da, db)
            )
            out = (v, tangents)
        elif isinstance(e, Pow):
            va, da = self.emit(e.base)
            n = e.exponent
            lv = _lit(va)
            if lv is not None and not (lv == 0.0 and n < 0):
                v = _fmt(lv**n)
            else:
                v = self._bind(f"{va}**{n}")
            if all(_lit(x) == 0.0 for x in da):
                tangents = tuple("0.0" for _ in da)
            else:
                if lv is not None and not (lv == 0.0 and n < 2):
                    dfac = _fmt(n * lv ** (n - 1))
                elif n == 2:
                    dfac = self._bind(self._mul("2.0", va))
                else:
                    dfac = self._bind(f"{_fmt(n)}*{va}**{n - 1}")
                tangents = tuple(self._bind(self._mul(dfac, x)) for x in da)
            out = (v, tangents)
        elif isinstance(e, Neg):
            va, da = self.emit(e.operand)
            out = (
                self._bind(self._neg(va)),
                tuple(self._bind(self._neg(x)) for x in da),
            )
        elif isinstance(e, Call):
            va, da = self.emit(e.arg)
            lv = _lit(va)
            if lv is not None and (e.func != "log" or lv > 0.0):
                v = _fmt(getattr(math, e.func)(lv))
            else:
                v = self._bind(f"math.{e.func}({va})")
            if all(_lit(x) == 0.0 for x in da):
                tangents = tuple("0.0" for _ in da)
            else:
                if e.func == "sin":
                    dfac = _fmt(math.cos(lv)) if lv is not None else self._bind(f"math.cos({va})")
                elif e.func == "cos":
                    dfac = _fmt(-math.sin(lv)) if lv is not None else self._bind(self._neg(f"math.sin({va})"))
                elif e.func == "exp":
                    dfac = v
                else:  # log
                    dfac = _fmt(1.0 / lv) if lv is not None else self._bind(f"1.0/{va}")
                tangents = tuple(self._bind(self._mul(dfac, x)) for x in da)
            out = (v, tangents)
        else:
            raise TypeError(f"not an expression node: {e!r}")

        self._memo[e] = out
        return out


def _compile_source(name: str, body: list[str], result: str) -> Callable:
    src = f"def {name}(x):\n"
    for line in body:
        src += f"    {line}\n"
    src += f"    return {result}\n"
    namespace: dict = {"math": math}
    exec(compile(src, f"<crorbit:{name}>", "exec"), namespace)
    fn = namespace[name]
    fn.__generated_source__ = src
    return fn


def coordinate_directions(dim: int, which: Iterable[int] | None = None) -> list[list[float]]:
    idx = range(dim) if which is None else which
    out = []
    for k in idx:
        d = [0.0] * dim
        d[k] = 1.0
        out.append(d)
    return out


def compile_values(
    exprs: Sequence[ScalarExpr],
    dim: int,
    var_refs: Sequence[str] | None = None,
) -> Callable[[Sequence[float]], tuple[float, ...]]:
    """Compile ``x -> (e_1(x), ..., e_k(x))`` into a single function."""
    refs = list(var_refs) if var_refs is not None else [f"x[{i}]" for i in range(dim)]
    comp = JetCompiler(refs, [])
    vals = [comp.emit(e)[0] for e in exprs]
    result = "(" + ", ".join(vals) + ("," if len(vals) == 1 else "") + ")"
    return _compile_source("field_values", comp.lines, result)


def compile_values_and_jacobian(
    exprs: Sequence[ScalarExpr],
    dim: int,
    var_refs: Sequence[str] | None = None,
    deriv_vars: Sequence[int] | None = None,
) -> Callable:
    """Compile ``x -> (values, rows)`` where ``rows[i][j] = d e_i / d x_{deriv_vars[j]}``.

    ``var_refs`` may pin selected coordinates to literals (e.g. "0.0"),
    which prunes the generated code for restricted evaluations on x'' = 0.
    """
    refs = list(var_refs) if var_refs is not None else [f"x[{i}]" for i in range(dim)]
    dirs = coordinate_directions(dim, deriv_vars)
    comp = JetCompiler(refs, dirs)
    vals, rows = [], []
    for e in exprs:
        v, tangents = comp.emit(e)
        vals.append(v)
        rows.append("(" + ", ".join(tangents) + ("," if len(tangents) == 1 else "") + ")")
    values = "(" + ", ".join(vals) + ("," if len(vals) == 1 else "") + ")"
    jac = "(" + ", ".join(rows) + ("," if len(rows) == 1 else "") + ")"
    return _compile_source("field_jet", comp.lines, f"({values}, {jac})")
