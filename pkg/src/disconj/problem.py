"""Intervals, ODE problems and the coefficient-plane geometry.

An :class:`OdeProblem` describes ``x'' + p(t) x' + q(t) x = f(t)`` on an
interval that may be finite, a half-line, or the whole axis.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .expr import Expr, Func, Num, Unary, as_expr, breakpoints, parse, substitute, to_text, T

__all__ = [
    "Interval", "OdeProblem", "PlanePoint", "ConfigError", "PreconditionError",
    "q_plus", "halfline_substitution", "in_region_N", "in_halfplane_M",
    "DEFAULT_TRUNCATION",
]

# finite stand-ins for infinite ends: whole axis -> [-50, 50]; half-line -> [a + 1e-6, a + 100]
DEFAULT_TRUNCATION = 50.0
DEFAULT_HALFLINE = (1e-6, 100.0)


class PreconditionError(ValueError):
    """An operation's mathematical precondition does not hold."""


class ConfigError(ValueError):
    """Malformed problem description (carries the offending field)."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


def _endpoint(x) -> float:
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("inf", "+inf", "infinity", "+infinity"):
            return math.inf
        if s in ("-inf", "-infinity"):
            return -math.inf
        return float(parse(x)(0.0))
    return float(x)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    closed_lo: bool = True
    closed_hi: bool = True

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi) or not lo < hi:
            raise ValueError(f"interval needs lo < hi, got ({lo}, {hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        # infinite ends are always open
        if math.isinf(lo):
            object.__setattr__(self, "closed_lo", False)
        if math.isinf(hi):
            object.__setattr__(self, "closed_hi", False)

    # constructors ------------------------------------------------------
    @classmethod
    def closed(cls, a, b):
        return cls(a, b, True, True)

    @classmethod
    def half_open(cls, a, b):
        """``[a, b)``"""
        return cls(a, b, True, False)

    @classmethod
    def open(cls, a, b):
        return cls(a, b, False, False)

    @classmethod
    def real_line(cls):
        return cls(-math.inf, math.inf, False, False)

    @classmethod
    def parse(cls, pair, closed_lower=None, closed_upper=None):
        if isinstance(pair, str):
            text = pair.strip()
            # bracket notation "[a, b)" fixes closedness unless given explicitly
            if text[:1] in "[(" and text[-1:] in "])" and len(text) > 1:
                if closed_lower is None:
                    closed_lower = text[0] == "["
                if closed_upper is None:
                    closed_upper = text[-1] == "]"
                text = text[1:-1]
            pair = [s for s in text.replace(",", " ").split()]
        if len(pair) != 2:
            raise ConfigError("interval must be a pair", "interval")
        lo, hi = _endpoint(pair[0]), _endpoint(pair[1])
        cl = True if closed_lower is None else bool(closed_lower)
        cu = True if closed_upper is None else bool(closed_upper)
        return cls(lo, hi, cl, cu)

    # queries -----------------------------------------------------------
    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def is_closed(self) -> bool:
        return self.closed_lo and self.closed_hi

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, t: float) -> bool:
        above = t >= self.lo if self.closed_lo else t > self.lo
        below = t <= self.hi if self.closed_hi else t < self.hi
        return above and below

    def window(self, truncation: float = DEFAULT_TRUNCATION,
               halfline=DEFAULT_HALFLINE) -> tuple[float, float]:
        """Finite working window standing in for this interval."""
        lo, hi = self.lo, self.hi
        if math.isinf(lo) and math.isinf(hi):
            return -truncation, truncation
        if math.isinf(hi):
            return lo + halfline[0], lo + halfline[1]
        if math.isinf(lo):
            return hi - halfline[1], hi - halfline[0]
        return lo, hi

    def covers(self, other: "Interval") -> bool:
        """True if disconjugacy on ``self`` implies it on ``other``.

        Half-open and open intervals with the same ends are interchangeable;
        a closed ``[a, b]`` is only covered by something reaching past or
        including both ends.
        """
        if other.lo < self.lo or other.hi > self.hi:
            return False
        if other.is_finite and other.is_closed:
            ok_lo = other.lo > self.lo or self.closed_lo
            ok_hi = other.hi < self.hi or self.closed_hi
            return ok_lo and ok_hi
        return True

    def __str__(self):
        def fmt(x):
            return "inf" if x == math.inf else "-inf" if x == -math.inf else f"{x:g}"
        return (("[" if self.closed_lo else "(") + f"{fmt(self.lo)}, {fmt(self.hi)}"
                + ("]" if self.closed_hi else ")"))

    def to_dict(self) -> dict:
        def enc(x):
            return "inf" if x == math.inf else "-inf" if x == -math.inf else x
        return {"interval": [enc(self.lo), enc(self.hi)],
                "closed_lower": self.closed_lo, "closed_upper": self.closed_hi}


@dataclass(frozen=True)
class OdeProblem:
    """``x'' + p x' + q x = f`` on ``interval``; ``f`` is None for the homogeneous case."""

    interval: Interval
    p: Expr
    q: Expr
    f: Expr | None = None
    notes: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "p", as_expr(self.p))
        object.__setattr__(self, "q", as_expr(self.q))
        if self.f is not None:
            object.__setattr__(self, "f", as_expr(self.f))

    @classmethod
    def create(cls, p="0", q="0", interval=None, f=None, **kw):
        if interval is None:
            interval = Interval.real_line()
        elif not isinstance(interval, Interval):
            interval = Interval.parse(interval)
        return cls(interval, as_expr(p), as_expr(q), None if f is None else as_expr(f), **kw)

    @property
    def breakpoints(self) -> tuple:
        """Declared kinks of the coefficients (see ``Func.breakpoints``)."""
        pts = set(breakpoints(self.p)) | set(breakpoints(self.q))
        if self.f is not None:
            pts |= set(breakpoints(self.f))
        return tuple(sorted(pts))

    @property
    def homogeneous(self) -> "OdeProblem":
        return replace(self, f=None) if self.f is not None else self

    def with_interval(self, interval: Interval) -> "OdeProblem":
        return replace(self, interval=interval)

    def rhs(self, homogeneous: bool = False):
        """Scalar right-hand side ``(t, x, v) -> (v, v')`` for the first-order system."""
        p, q = self.p.fast.scalar, self.q.fast.scalar
        pe, qe = self.p, self.q
        f = None if (homogeneous or self.f is None) else self.f
        if f is None:
            def rhs(t, x, v):
                try:
                    return v, -p(t) * v - q(t) * x
                except (ValueError, ZeroDivisionError, OverflowError):
                    pe(t), qe(t)   # re-raise with node information
                    raise
        else:
            fs, fe = f.fast.scalar, f

            def rhs(t, x, v):
                try:
                    return v, fs(t) - p(t) * v - q(t) * x
                except (ValueError, ZeroDivisionError, OverflowError):
                    pe(t), qe(t), fe(t)
                    raise
        return rhs

    def check_evaluable(self, ts) -> None:
        """Spot-check that the coefficients are finite on ``ts`` (raises otherwise)."""
        self.p(np.asarray(ts, float))
        self.q(np.asarray(ts, float))
        if self.f is not None:
            self.f(np.asarray(ts, float))

    # serialization -------------------------------------------------------
    def to_config(self) -> dict:
        d = {"p": to_text(self.p), "q": to_text(self.q)}
        if self.f is not None:
            d["f"] = to_text(self.f)
        d.update(self.interval.to_dict())
        return d

    @classmethod
    def from_config(cls, cfg: dict | str) -> "OdeProblem":
        if isinstance(cfg, str):
            try:
                cfg = json.loads(cfg)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("problem config must be an object")
        known = {"p", "q", "f", "interval", "closed_lower", "closed_upper"}
        extra = set(cfg) - known
        if extra:
            raise ConfigError(f"unknown field(s) {sorted(extra)}")
        exprs = {}
        for key in ("p", "q", "f"):
            if key in cfg and cfg[key] is not None:
                val = cfg[key]
                if isinstance(val, (int, float)):
                    val = repr(float(val))
                if not isinstance(val, str):
                    raise ConfigError("expected an expression string", key)
                exprs[key] = parse(val)
        try:
            interval = Interval.parse(cfg.get("interval", ["-inf", "inf"]),
                                      cfg.get("closed_lower"), cfg.get("closed_upper"))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), "interval") from None
        return cls(interval, exprs.get("p", Num(0.0)), exprs.get("q", Num(0.0)), exprs.get("f"))


@dataclass(frozen=True)
class PlanePoint:
    p: float
    q: float


def q_plus(prob: OdeProblem) -> OdeProblem:
    """Replace ``q`` by its positive part ``max(q, 0)``."""
    q = prob.q
    if isinstance(q, Unary) and q.op == "pos":
        return prob
    return replace(prob, q=Unary("pos", q))


def halfline_substitution(prob: OdeProblem) -> OdeProblem:
    """Carry a problem on ``(a, inf)`` over to the whole axis by composing with ``a + t^2``.

    Only the coefficients are composed, exactly as written in the source
    reduction; the derivative factors a change of variable would introduce are
    not added (see ``notes`` on the result).
    """
    J = prob.interval
    if not (math.isfinite(J.lo) and J.hi == math.inf):
        raise ValueError(f"expected an interval (a, inf), got {J}")
    a = J.lo
    shift = T ** Num(2.0) if a == 0 else Num(a) + T ** Num(2.0)
    f = None if prob.f is None else substitute(prob.f, shift)
    note = ("coefficients composed with a + t^2 without chain-rule factors; "
            "equivalence of disconjugacy is not asserted")
    return OdeProblem(Interval.real_line(), substitute(prob.p, shift),
                      substitute(prob.q, shift), f, notes=prob.notes + (note,))


def in_region_N(pt: PlanePoint) -> bool:
    """Real characteristic roots: ``p^2 - 4q >= 0``."""
    return pt.p * pt.p - 4.0 * pt.q >= 0.0


def in_halfplane_M(pt: PlanePoint, gamma: float, sign: str | int = "+") -> bool:
    """``q <= -gamma^2 + gamma p`` (sign '+') or ``q <= -gamma^2 - gamma p`` (sign '-')."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    s = _sign(sign)
    return pt.q <= -gamma * gamma + s * gamma * pt.p


def _sign(sign) -> int:
    if sign in ("+", 1, "plus"):
        return 1
    if sign in ("-", -1, "minus"):
        return -1
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")
