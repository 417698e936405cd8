"""Conjugate points and numerical disconjugacy verdicts.

Everything here reduces to one primitive: launch the solution with
``x(a)=0, x'(a)=1`` and find its next zero.  By monotonicity of the
conjugate-point map, the equation is disconjugate on ``[a, b)`` exactly when
that zero does not occur before ``b``.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from .expr import ExprError
from .integrate import IntegrationError, StepSizeUnderflow, integrate_system, solve_ivp, ZERO_SEPARATION
from .problem import Interval, OdeProblem, PreconditionError

__all__ = [
    "ConjugatePoint", "OracleVerdict", "Status", "rho", "rho_many",
    "is_disconjugate", "check_separation", "check_rho_monotone",
    "check_comparison", "verify_first_zero", "prufer_rhs", "HORIZON", "open_offset",
]

HORIZON = 100.0


def open_offset(x: float) -> float:
    """Inward offset used when launching from an open endpoint."""
    return 1e-7 * (1.0 + abs(x))


def _tie(x: float) -> float:
    return 1e-7 * (1.0 + abs(x))


@dataclass(frozen=True)
class ConjugatePoint:
    """``rho_+(a)`` or ``rho_-(a)``; ``value`` is None when no zero was met before ``end``."""

    base: float
    side: str
    value: float | None
    error: float = 0.0
    end: float = math.nan
    status: str = "found"          # found | none | failed
    message: str = ""

    @property
    def finite(self) -> bool:
        return self.value is not None

    def to_dict(self) -> dict:
        return {"base": self.base, "side": self.side, "value": self.value,
                "error": self.error, "searched_to": self.end, "status": self.status,
                "message": self.message}


class Status(str, enum.Enum):
    DISCONJUGATE = "Disconjugate"
    NOT_DISCONJUGATE = "NotDisconjugate"
    UNDETERMINED = "Undetermined"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class OracleVerdict:
    status: Status
    witness: tuple[float, float] | None = None
    horizon: float | None = None
    window: tuple[float, float] | None = None
    tolerances: dict = field(default_factory=dict)
    message: str = ""

    def to_dict(self) -> dict:
        return {"status": str(self.status),
                "witness": None if self.witness is None else list(self.witness),
                "horizon": self.horizon,
                "window": None if self.window is None else list(self.window),
                "tolerances": dict(self.tolerances), "message": self.message}


def _side(side) -> int:
    if side in ("+", 1, "plus", "right"):
        return 1
    if side in ("-", -1, "minus", "left"):
        return -1
    raise ValueError(f"side must be '+' or '-', got {side!r}")


def _domain_limit(J: Interval, d: int) -> float:
    """Furthest point reachable in direction ``d`` inside the problem interval."""
    end = J.hi if d > 0 else J.lo
    if math.isinf(end):
        return end
    closed = J.closed_hi if d > 0 else J.closed_lo
    return end if closed else end - d * open_offset(end)


def prufer_rhs(prob: OdeProblem, shift: float = 0.0):
    """Right-hand side for the Prufer angle ``theta`` of ``x = r sin(theta), x' = r cos(theta)``.

    The state's first component is ``theta - shift``, so a zero of it marks
    ``theta = shift``; the second component is unused.
    """
    p, q = prob.p.fast.scalar, prob.q.fast.scalar
    pe, qe = prob.p, prob.q
    sin, cos = math.sin, math.cos

    def rhs(t, x, _):
        th = x + shift
        s, c = sin(th), cos(th)
        try:
            return c * c + (p(t) * c + q(t) * s) * s, 0.0
        except (ValueError, ZeroDivisionError, OverflowError):
            pe(t), qe(t)
            raise
    return rhs


def _first_zero(prob: OdeProblem, a: float, end: float, rtol: float, atol: float):
    """First zero beyond ``a`` of the solution with ``x(a)=0, x'(a)=1``, searching to ``end``.

    Works on the Prufer angle, which starts at 0 and crosses each multiple
    of pi in the direction of integration exactly when ``x`` vanishes.  The
    angle stays bounded where ``x`` itself would over- or underflow.  Near a
    singular coefficient the angle equation becomes stiff; then the search
    falls back to ``(x, x')`` with periodic renormalization.
    """
    d = 1.0 if end >= a else -1.0
    shift = d * math.pi
    try:
        tr = integrate_system(prufer_rhs(prob, shift), a, -shift, 0.0, end, rtol=rtol,
                              atol=atol, stop_at_zero=True, tstops=prob.breakpoints)
    except StepSizeUnderflow:
        return _first_zero_direct(prob, a, end, rtol, atol)
    return tr.zeros[0].t if tr.zeros else None


def _first_zero_direct(prob, a, end, rtol, atol):
    t, x, v = a, 0.0, 1.0
    while True:
        tr = solve_ivp(prob, t, x, v, end, rtol=rtol, atol=atol, homogeneous=True,
                       stop_at_zero=True, max_norm=1e3, min_norm=1e-3,
                       check_interval=False)
        zs = [z.t for z in tr.zeros if abs(z.t - a) > ZERO_SEPARATION]
        if zs:
            return zs[0]
        if tr.status != "norm":
            return None
        t = tr.t1
        s = abs(tr.x[-1]) + abs(tr.v[-1])
        x, v = tr.x[-1] / s, tr.v[-1] / s


def verify_first_zero(prob: OdeProblem, a: float, end: float) -> float | None:
    """Independent check of the first zero with scipy's DOP853 at tight tolerance."""
    d = 1.0 if end >= a else -1.0
    p, q = prob.p, prob.q

    def fun(t, y):
        s, c = math.sin(y[0]), math.cos(y[0])
        return [c * c + (p(t) * c + q(t) * s) * s]

    def hit(t, y):
        return y[0] - d * math.pi
    hit.terminal = True

    # restart at every declared breakpoint so narrow features are resolved
    inner = sorted((b for b in prob.breakpoints if d * (b - a) > 0 and d * (end - b) > 0),
                   key=lambda b: d * b)
    t0, y0 = a, [0.0]
    for t1 in inner + [end]:
        res = scipy.integrate.solve_ivp(fun, (t0, t1), y0, method="DOP853",
                                        rtol=1e-12, atol=1e-14, events=hit)
        if res.status == -1:
            raise IntegrationError(f"verification failed: {res.message}", t0)
        ts = res.t_events[0]
        if len(ts):
            return float(ts[0])
        t0, y0 = t1, [res.y[0, -1]]
    return None


def rho(prob: OdeProblem, a: float, side="+", horizon: float = HORIZON,
        end: float | None = None, rtol: float = 1e-10, atol: float = 1e-12,
        estimate_error: bool = True) -> ConjugatePoint:
    """Conjugate point of ``a`` on the given side, searched up to ``horizon`` away.

    The search also stops at the problem interval's edge (or at ``end``).
    Integrator failures give a ConjugatePoint with status ``"failed"``.
    """
    d = _side(side)
    s = "+" if d > 0 else "-"
    a = float(a)
    lim = _domain_limit(prob.interval, d)
    stop = a + d * horizon
    stop = min(stop, lim) if d > 0 else max(stop, lim)
    if end is not None:
        stop = min(stop, end) if d > 0 else max(stop, end)
    if d * (stop - a) <= 0:
        return ConjugatePoint(a, s, None, 0.0, stop, "none", "empty search range")
    try:
        z = _first_zero(prob, a, stop, rtol, atol)
        err = 0.0
        if z is not None and estimate_error:
            z2 = _first_zero(prob, a, stop, rtol * 1e-2, atol * 1e-2)
            err = abs(z - z2) if z2 is not None else math.inf
            z = z2 if z2 is not None else z
    except (IntegrationError, ExprError, ArithmeticError, ValueError) as exc:
        return ConjugatePoint(a, s, None, math.inf, stop, "failed", str(exc))
    if z is None:
        return ConjugatePoint(a, s, None, 0.0, stop, "none",
                              f"no zero within {abs(stop - a):g} of the base point")
    return ConjugatePoint(a, s, z, err, stop, "found")


def rho_many(prob: OdeProblem, points, side="+", workers: int = 4, **kw):
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda a: rho(prob, a, side, **kw), points))


def is_disconjugate(prob: OdeProblem, J: Interval | None = None, *,
                    horizon: float = HORIZON, truncation: float = 50.0,
                    halfline=(1e-6, 100.0), rtol: float = 1e-10,
                    atol: float = 1e-12) -> OracleVerdict:
    """Numerical verdict on whether every nontrivial solution has at most one zero in ``J``.

    Finite ``J``: launch at the left end (nudged inward when open) and look
    for the next zero.  Half-open and open intervals pass when it is not
    before ``b``; a closed interval needs it strictly after ``b``.  Infinite
    ends are replaced by the truncation window and the search continues
    ``horizon`` beyond it; any zero pair found is a genuine witness.
    """
    J = prob.interval if J is None else J
    D = prob.interval
    tols = {"rtol": rtol, "atol": atol, "tie": None, "open_offset": None}
    if J.lo < D.lo or J.hi > D.hi:
        raise PreconditionError(f"{J} is not inside the problem interval {D}")

    infinite = not J.is_finite
    if infinite:
        lo, hi = J.window(truncation, halfline)
        start = lo - horizon if math.isinf(J.lo) else lo
        stop = hi + horizon if math.isinf(J.hi) else hi
        if not math.isinf(J.hi):
            stop = J.hi if J.closed_hi else J.hi - open_offset(J.hi)
        if not math.isinf(J.lo):
            start = J.lo if J.closed_lo else J.lo + open_offset(J.lo)
        b, closed = stop, True
        window = (start, stop)
    else:
        start = J.lo if J.closed_lo else J.lo + open_offset(J.lo)
        b = J.hi
        closed = J.is_closed
        # look slightly past b to separate "at b" from "after b"; a closed domain
        # end is stepped over too (the expressions are evaluable there), with a
        # retry that stops exactly at the end if that fails
        lim = _domain_limit(D, 1)
        stop = b + 10 * _tie(b)
        if stop > lim and not (D.closed_hi and b == D.hi):
            stop = lim
        window = (J.lo, J.hi)
    tie = _tie(b)
    tols["tie"] = tie
    tols["open_offset"] = open_offset(start)
    hz = horizon if infinite else None
    try:
        try:
            z = _first_zero(prob, start, stop, rtol, atol)
        except (IntegrationError, ExprError, ArithmeticError, ValueError):
            if infinite or stop <= b:
                raise
            stop = b
            z = _first_zero(prob, start, stop, rtol, atol)
    except (IntegrationError, ExprError, ArithmeticError, ValueError) as exc:
        return OracleVerdict(Status.UNDETERMINED, None, hz, window, tols,
                             f"integration failed: {exc}")

    def passes(zero):
        if zero is None:
            return True
        if infinite:
            return False
        return zero > b + tie if closed else zero >= b - tie

    if not passes(z):
        try:
            z2 = verify_first_zero(prob, start, min(stop, z + 0.5 + 0.5 * abs(z - start)))
        except (IntegrationError, ExprError, ArithmeticError, ValueError) as exc:
            return OracleVerdict(Status.UNDETERMINED, None, hz, window, tols,
                                 f"witness re-verification failed: {exc}")
        if z2 is None or abs(z2 - z) > 1e-6 * (1 + abs(z)):
            return OracleVerdict(Status.UNDETERMINED, None, hz, window, tols,
                                 f"witness zero {z!r} not confirmed (re-integration gave {z2!r})")
        return OracleVerdict(Status.NOT_DISCONJUGATE, (start, z), hz, window, tols,
                             "solution vanishing at the left end has a second zero")
    msg = "no second zero" + (f" on [{start:g}, {stop:g}] (horizon {horizon:g})" if infinite else "")
    return OracleVerdict(Status.DISCONJUGATE, None, hz, window, tols, msg)


# ----------------------------------------------------------------------------
# Sturm-theory checks

def _zeros_in(prob, a, b, x0, v0):
    tr = solve_ivp(prob, a, x0, v0, b, homogeneous=True, check_interval=False)
    return [z.t for z in tr.zeros]


def check_separation(prob: OdeProblem, window: Interval, rng=None, seed: int = 0) -> bool:
    """Zeros of two independent solutions strictly interlace on ``window``."""
    if not window.is_finite:
        raise PreconditionError("separation check needs a finite window")
    rng = np.random.default_rng(seed) if rng is None else rng
    a = window.lo if window.closed_lo else window.lo + open_offset(window.lo)
    b = window.hi if window.closed_hi else window.hi - open_offset(window.hi)
    for _ in range(100):
        th1, th2 = rng.uniform(0, math.pi, 2)
        if abs(math.sin(th1 - th2)) > 0.1:
            break
    else:  # pragma: no cover - vanishingly unlikely
        raise PreconditionError("could not sample independent initial data")
    z1 = _zeros_in(prob, a, b, math.cos(th1), math.sin(th1))
    z2 = _zeros_in(prob, a, b, math.cos(th2), math.sin(th2))
    merged = sorted([(t, 1) for t in z1] + [(t, 2) for t in z2])
    for (ta, la), (tb, lb) in zip(merged, merged[1:]):
        if la != lb and tb - ta <= ZERO_SEPARATION:
            # one solution dominates so strongly that both collapse onto it
            raise PreconditionError(
                f"sampled solutions are numerically dependent near t={ta:g}")
        if la == lb:
            return False
    return True


def check_rho_monotone(prob: OdeProblem, samples, tol: float = 1e-6,
                       horizon: float = HORIZON) -> bool:
    """``rho_+`` strictly increases over ``samples`` and ``rho_-(rho_+(t)) = t``."""
    pts = sorted(float(s) for s in samples)
    vals = [rho(prob, t, "+", horizon=horizon, estimate_error=False) for t in pts]
    seen_none = False
    prev = -math.inf
    for t, cp in zip(pts, vals):
        if cp.status == "failed":
            return False
        if cp.value is None:
            seen_none = True
            continue
        if seen_none or cp.value <= prev:
            return False
        prev = cp.value
        back = rho(prob, cp.value, "-", horizon=cp.value - t + 1.0, estimate_error=False)
        if back.value is None or abs(back.value - t) > tol * (1 + abs(t)):
            return False
    return True


def check_comparison(prob1: OdeProblem, prob2: OdeProblem, window: Interval,
                     grid: int = 2001) -> bool:
    """Comparison theorem: with equal ``p`` and ``q1 <= q2``, disconjugacy passes from 2 to 1."""
    lo, hi = window.window()
    ts = np.linspace(lo, hi, grid)
    if not np.allclose(prob1.p(ts), prob2.p(ts), rtol=1e-12, atol=1e-12):
        raise PreconditionError("problems must share p")
    q1, q2 = prob1.q(ts), prob2.q(ts)
    bad = np.nonzero(q1 > q2 + 1e-12 * (1 + np.abs(q2)))[0]
    if len(bad):
        raise PreconditionError(f"q1 > q2 at t={ts[bad[0]]:g}")
    v2 = is_disconjugate(prob2, window)
    v1 = is_disconjugate(prob1, window)
    return not (v2.status is Status.DISCONJUGATE and v1.status is Status.NOT_DISCONJUGATE)
