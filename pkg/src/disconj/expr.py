"""Coefficient expressions: parsing, fast evaluation and symbolic derivatives.

Expressions are small immutable trees over the single variable ``t``::

    >>> e = parse("t^2/4 + 1/2")
    >>> e(2.0)
    1.5
    >>> differentiate(e)(3.0)
    1.5

Evaluation goes through a generated closure (``math`` for scalars, ``numpy``
for arrays).  When the fast path fails the tree is re-walked node by node so
the raised :class:`ExprDomainError` names the sub-expression at fault.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Expr", "Num", "Var", "Const", "Unary", "Binary", "Func",
    "ExprError", "ExprSyntaxError", "UnknownIdentifierError",
    "ExprDomainError", "NonDifferentiableError",
    "parse", "evaluate", "differentiate", "to_text", "as_expr", "substitute", "breakpoints",
]


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int, expected=(), source: str = ""):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        self.source = source
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownIdentifierError(ExprSyntaxError):
    def __init__(self, name: str, offset: int, source: str = ""):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", offset, source=source)


class ExprDomainError(ExprError, ArithmeticError):
    def __init__(self, node: "Expr", t: float, reason: str = "outside domain"):
        self.node = node
        self.t = t
        super().__init__(f"{to_text(node)} is {reason} at t={t!r}")


class NonDifferentiableError(ExprError):
    def __init__(self, node: "Expr"):
        self.node = node
        super().__init__(f"cannot differentiate {to_text(node)}")


# --------------------------------------------------------------------------
# scalar / vector primitive tables

def _cot(x):
    s = math.sin(x)
    if abs(s) <= 1e-15 * (1.0 + abs(x)):
        raise ZeroDivisionError("cot pole")
    return math.cos(x) / s


def _vcot(x):
    s = np.sin(x)
    pole = np.abs(s) <= 1e-15 * (1.0 + np.abs(x))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(pole, np.nan, np.cos(x) / np.where(pole, 1.0, s))


def _pos(x):
    return x if x > 0.0 else 0.0


def _div(a, b):
    return a / b


def _vdiv(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.true_divide(a, b)


_SCALAR = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan, "cot": _cot,
    "exp": math.exp, "log": math.log, "sqrt": math.sqrt, "abs": abs,
    "pos": _pos, "pow": math.pow, "div": _div,
}

_VECTOR = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "cot": _vcot,
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": np.abs,
    "pos": lambda x: np.maximum(x, 0.0), "pow": np.power, "div": _vdiv,
}

UNARY_FUNCS = ("sin", "cos", "tan", "cot", "exp", "log", "sqrt", "abs", "pos")
CONSTANTS = {"pi": math.pi, "e": math.e}
_NON_DIFFERENTIABLE = ("abs", "pos")


# --------------------------------------------------------------------------
# nodes

class Expr:
    """Base node.  Instances are callable: ``e(t)`` for floats or arrays."""

    __slots__ = ()

    def __call__(self, t):
        return evaluate(self, t)

    def __str__(self):
        return to_text(self)

    # arithmetic sugar for building expressions in code
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __neg__(self):
        return neg(self)

    def is_constant(self) -> bool:
        return not any(isinstance(n, (Var, Func)) for n in _walk(self))

    @property
    def fast(self) -> "_Compiled":
        c = self.__dict__.get("_compiled")
        if c is None:
            c = _Compiled(self)
            object.__setattr__(self, "_compiled", c)
        return c


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Expr):
    pass


@dataclass(frozen=True, eq=True)
class Const(Expr):
    name: str

    @property
    def value(self) -> float:
        return CONSTANTS[self.name]


@dataclass(frozen=True, eq=True)
class Unary(Expr):
    op: str          # "neg" or a name from UNARY_FUNCS
    arg: Expr


@dataclass(frozen=True, eq=True)
class Binary(Expr):
    op: str          # one of + - * / ^
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=False)
class Func(Expr):
    """Leaf wrapping a Python function of ``t``.

    ``fn`` should accept floats; if it also accepts arrays set ``vectorized``.
    ``derivative`` (another Expr) makes the node differentiable.
    ``breakpoints`` lists abscissas where ``fn`` has kinks or narrow
    features; integrators place mesh points there.
    """

    fn: Callable
    name: str = "f"
    vectorized: bool = False
    derivative: Expr | None = field(default=None)
    breakpoints: tuple = ()


T = Var()


def _walk(e: Expr):
    yield e
    if isinstance(e, Unary):
        yield from _walk(e.arg)
    elif isinstance(e, Binary):
        yield from _walk(e.left)
        yield from _walk(e.right)


def breakpoints(e: Expr) -> tuple:
    """Sorted breakpoints declared by the ``Func`` leaves of ``e``."""
    pts = set()
    for node in _walk(e):
        if isinstance(node, Func):
            pts.update(float(b) for b in node.breakpoints)
    return tuple(sorted(pts))


def as_expr(x) -> Expr:
    """Coerce text, numbers, Exprs or callables into an Expr."""
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return parse(x)
    if isinstance(x, (int, float, np.floating, np.integer)):
        return Num(float(x))
    if callable(x):
        return Func(x, getattr(x, "__name__", "f"))
    raise TypeError(f"cannot make an expression from {x!r}")


# smart constructors with constant folding -------------------------------

def _num(e):
    if isinstance(e, Num):
        return e.value
    return None


def add(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va + vb)
    if va == 0.0:
        return b
    if vb == 0.0:
        return a
    return Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va - vb)
    if vb == 0.0:
        return a
    if va == 0.0:
        return neg(b)
    return Binary("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va * vb)
    if va == 0.0 or vb == 0.0:
        return Num(0.0)
    if va == 1.0:
        return b
    if vb == 1.0:
        return a
    if va == -1.0:
        return neg(b)
    if vb == -1.0:
        return neg(a)
    return Binary("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None and vb != 0.0:
        return Num(va / vb)
    if va == 0.0:
        return Num(0.0)
    if vb == 1.0:
        return a
    return Binary("/", a, b)


def power(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if vb == 0.0:
        return Num(1.0)
    if vb == 1.0:
        return a
    if va is not None and vb is not None:
        try:
            return Num(math.pow(va, vb))
        except (ValueError, OverflowError, ZeroDivisionError):
            pass
    return Binary("^", a, b)


def neg(a: Expr) -> Expr:
    va = _num(a)
    if va is not None:
        return Num(-va)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def fn(name: str, a: Expr) -> Expr:
    if name not in UNARY_FUNCS:
        raise ValueError(name)
    va = _num(a)
    if va is not None:
        try:
            return Num(float(_SCALAR[name](va)))
        except (ValueError, OverflowError, ZeroDivisionError):
            pass
    return Unary(name, a)


# --------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(src: str):
    toks = []
    pos = 0
    n = len(src)
    while pos < n:
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            start = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {src[start]!r}", start,
                                  source=src)
        kind = m.lastgroup
        text = m.group(kind)
        toks.append((kind, "^" if text == "**" else text, m.start(kind)))
        pos = m.end()
    toks.append(("end", "", len(src)))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, expected):
        kind, text, off = self.peek()
        what = "end of input" if kind == "end" else f"token {text!r}"
        raise ExprSyntaxError(f"unexpected {what}", off, expected, self.src)

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail({"+", "-", "*", "/", "^", "end of input"})
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            r = self.term()
            e = Binary(op, e, r)
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            r = self.unary()
            e = Binary(op, e, r)
        return e

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Unary("neg", self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            # right-associative; exponent may carry its own sign
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text == "t":
                return Var()
            if text in CONSTANTS:
                return Const(text)
            if text in UNARY_FUNCS:
                if not (self.peek()[0] == "op" and self.peek()[1] == "("):
                    self.fail({"("})
                self.take()
                arg = self.expr()
                if not (self.peek()[0] == "op" and self.peek()[1] == ")"):
                    self.fail({")"})
                self.take()
                return Unary(text, arg)
            raise UnknownIdentifierError(text, off, self.src)
        if kind == "op" and text == "(":
            e = self.expr()
            if not (self.peek()[0] == "op" and self.peek()[1] == ")"):
                self.fail({")"})
            self.take()
            return e
        self.i -= 1
        self.fail({"number", "t", "pi", "e", "(", "-"} | set(UNARY_FUNCS))


def parse(source: str) -> Expr:
    """Parse infix text in the variable ``t`` into an :class:`Expr`."""
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 0, source=source or "")
    return _Parser(source).parse()


# --------------------------------------------------------------------------
# printing

def to_text(e: Expr) -> str:
    """Canonical fully parenthesized form; ``parse(to_text(e))`` round-trips."""
    if isinstance(e, Num):
        r = repr(float(e.value))
        if r in ("inf", "-inf", "nan"):
            raise ValueError("non-finite literal")
        return f"({r})" if e.value < 0 or r.startswith("-") else r
    if isinstance(e, Var):
        return "t"
    if isinstance(e, Const):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{to_text(e.arg)})"
        return f"{e.op}({to_text(e.arg)})"
    if isinstance(e, Binary):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, Func):
        return f"<{e.name}>"
    raise TypeError(type(e))


# --------------------------------------------------------------------------
# evaluation

class _Compiled:
    """Python closures generated from the tree, one for floats, one for arrays."""

    def __init__(self, expr: Expr):
        self.expr = expr
        self.funcs: list[Func] = []
        code = self._code(expr)
        ns_s = {"_" + k: v for k, v in _SCALAR.items()}
        ns_v = {"_" + k: v for k, v in _VECTOR.items()}
        for i, f in enumerate(self.funcs):
            ns_s[f"_f{i}"] = f.fn
            ns_v[f"_f{i}"] = f.fn if f.vectorized else np.vectorize(f.fn, otypes=[float])
        self.scalar = eval(f"lambda t: {code}", ns_s)
        self.vector = eval(f"lambda t: {code}", ns_v)
        self.constant = expr.is_constant()

    def _code(self, e: Expr) -> str:
        if isinstance(e, Num):
            return repr(float(e.value))
        if isinstance(e, Var):
            return "t"
        if isinstance(e, Const):
            return repr(e.value)
        if isinstance(e, Unary):
            a = self._code(e.arg)
            return f"(-{a})" if e.op == "neg" else f"_{e.op}({a})"
        if isinstance(e, Binary):
            a, b = self._code(e.left), self._code(e.right)
            if e.op == "^":
                return f"_pow({a}, {b})"
            if e.op == "/":
                return f"_div({a}, {b})"
            return f"({a} {e.op} {b})"
        if isinstance(e, Func):
            self.funcs.append(e)
            return f"_f{len(self.funcs) - 1}(t)"
        raise TypeError(type(e))


def _interpret(e: Expr, t: float) -> float:
    """Slow node-by-node evaluation that pinpoints domain failures."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return t
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Func):
        try:
            v = float(e.fn(t))
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise ExprDomainError(e, t, str(exc) or "outside domain") from None
    elif isinstance(e, Unary):
        a = _interpret(e.arg, t)
        if e.op == "neg":
            return -a
        try:
            v = float(_SCALAR[e.op](a))
        except ZeroDivisionError:
            raise ExprDomainError(e, t, "singular") from None
        except (ValueError, OverflowError):
            raise ExprDomainError(e, t) from None
    else:
        a = _interpret(e.left, t)
        b = _interpret(e.right, t)
        try:
            if e.op == "+":
                v = a + b
            elif e.op == "-":
                v = a - b
            elif e.op == "*":
                v = a * b
            elif e.op == "/":
                v = a / b
            else:
                v = math.pow(a, b)
        except ZeroDivisionError:
            raise ExprDomainError(e, t, "division by zero") from None
        except (ValueError, OverflowError):
            raise ExprDomainError(e, t) from None
    if not math.isfinite(v):
        raise ExprDomainError(e, t, "not finite")
    return v


def evaluate(e: Expr, t):
    """Value of ``e`` at ``t`` (float or array).  Raises ExprDomainError."""
    c = e.fast
    if np.ndim(t) == 0:
        t = float(t)
        try:
            v = c.scalar(t)
        except (ValueError, ZeroDivisionError, OverflowError, TypeError):
            return _interpret(e, t)
        if not math.isfinite(v):
            return _interpret(e, t)
        return float(v)
    t = np.asarray(t, dtype=float)
    try:
        with np.errstate(all="ignore"):
            v = c.vector(t)
    except (ValueError, ZeroDivisionError, OverflowError):
        return np.array([evaluate(e, x) for x in t.ravel()]).reshape(t.shape)
    v = np.broadcast_to(np.asarray(v, dtype=float), t.shape).copy()
    bad = ~np.isfinite(v)
    if bad.any():
        _interpret(e, float(t[bad][0]))
        raise ExprDomainError(e, float(t[bad][0]))
    return v


# --------------------------------------------------------------------------
# calculus

def differentiate(e: Expr) -> Expr:
    """Exact derivative with respect to ``t`` (constant folding only)."""
    if isinstance(e, (Num, Const)):
        return Num(0.0)
    if isinstance(e, Var):
        return Num(1.0)
    if isinstance(e, Func):
        if e.derivative is None:
            raise NonDifferentiableError(e)
        return e.derivative
    if isinstance(e, Unary):
        u = e.arg
        if e.op in _NON_DIFFERENTIABLE:
            raise NonDifferentiableError(e)
        du = differentiate(u)
        if e.op == "neg":
            return neg(du)
        if e.op == "sin":
            outer = fn("cos", u)
        elif e.op == "cos":
            outer = neg(fn("sin", u))
        elif e.op == "tan":
            outer = add(Num(1.0), power(fn("tan", u), Num(2.0)))
        elif e.op == "cot":
            outer = neg(add(Num(1.0), power(fn("cot", u), Num(2.0))))
        elif e.op == "exp":
            outer = fn("exp", u)
        elif e.op == "log":
            return div(du, u)
        elif e.op == "sqrt":
            return div(du, mul(Num(2.0), fn("sqrt", u)))
        else:  # pragma: no cover
            raise NonDifferentiableError(e)
        return mul(outer, du)
    a, b = e.left, e.right
    if e.op in "+-":
        da, db = differentiate(a), differentiate(b)
        return add(da, db) if e.op == "+" else sub(da, db)
    if e.op == "*":
        return add(mul(differentiate(a), b), mul(a, differentiate(b)))
    if e.op == "/":
        return div(sub(mul(differentiate(a), b), mul(a, differentiate(b))),
                   power(b, Num(2.0)))
    # power
    if b.is_constant():
        return mul(mul(b, power(a, sub(b, Num(1.0)))), differentiate(a))
    if a.is_constant():
        return mul(mul(e, fn("log", a)), differentiate(b))
    # general u^v = exp(v log u)
    return mul(e, add(mul(differentiate(b), fn("log", a)),
                      div(mul(b, differentiate(a)), a)))


def substitute(e: Expr, replacement: Expr) -> Expr:
    """Compose: replace every occurrence of ``t`` in ``e`` by ``replacement``."""
    if isinstance(e, Var):
        return replacement
    if isinstance(e, (Num, Const)):
        return e
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.arg, replacement))
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.left, replacement), substitute(e.right, replacement))
    if isinstance(e, Func):
        inner = replacement
        f = e.fn
        return Func(lambda t: f(evaluate(inner, t)), f"{e.name}∘", vectorized=e.vectorized)
    raise TypeError(type(e))
