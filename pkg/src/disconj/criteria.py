"""Sufficient (and, for constant coefficients, necessary) tests for disconjugacy.

Every checker returns a :class:`CriterionReport`.  Pointwise inequalities
are evaluated on a uniform grid, with extra midpoints wherever the margin
is under ``1e-6``.  That is semi-verification: a sampled inequality is
evidence, not proof, and every report says so in its grid metadata.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, quad_vec
from scipy.optimize import minimize_scalar

from .expr import Expr, ExprError, Num, as_expr, differentiate, to_text
from .integrate import adaptive_quad
from .oracle import OracleVerdict, Status, is_disconjugate
from .problem import Interval, OdeProblem, q_plus

__all__ = [
    "Verdict", "CriterionReport", "BatteryReport", "GridCheck", "working_grid",
    "crit_constant", "crit_euler", "crit_lyapunov", "crit_q_nonpositive",
    "crit_sine", "crit_parabola", "crit_char_poly", "crit_valleepoussin",
    "crit_kernel_constPQ", "crit_kernel_Q0", "crit_kernel_varp",
    "crit_halfplane", "crit_line", "crit_thnew2", "crit_thnew3",
    "crit_r_condition", "crit_monotone_p", "run_battery", "constant_kernel",
    "GRID", "REFINE_MARGIN",
]

GRID = 2001
REFINE_MARGIN = 1e-6
SLACK = 1e-12


class Verdict(str, enum.Enum):
    PROVEN = "Proven"
    DISPROVEN = "Disproven"
    INCONCLUSIVE = "Inconclusive"
    NOT_APPLICABLE = "NotApplicable"

    def __str__(self):
        return self.value


_ORDER = {Verdict.PROVEN: 0, Verdict.DISPROVEN: 1, Verdict.INCONCLUSIVE: 2,
          Verdict.NOT_APPLICABLE: 3}


@dataclass(frozen=True)
class CriterionReport:
    """Outcome of one test.  ``interval`` is where disconjugacy is claimed when Proven."""

    criterion: str
    verdict: Verdict
    interval: Interval | None = None
    witness: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    message: str = ""

    @property
    def proven(self) -> bool:
        return self.verdict is Verdict.PROVEN

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "verdict": str(self.verdict),
                "interval": None if self.interval is None else str(self.interval),
                "witness": _jsonable(self.witness), "grid": _jsonable(self.grid),
                "message": self.message}


def _jsonable(d):
    if isinstance(d, dict):
        return {k: _jsonable(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_jsonable(v) for v in d]
    if isinstance(d, (np.floating, np.integer)):
        return d.item()
    if isinstance(d, float) and not math.isfinite(d):
        return str(d)
    return d


def _report(name, verdict, interval=None, witness=None, grid=None, message=""):
    return CriterionReport(name, verdict, interval, dict(witness or {}),
                           dict(grid or {}), message)


# ----------------------------------------------------------------------------
# grids and pointwise checks

def _edge(x: float) -> float:
    return 1e-7 * (1.0 + abs(x))


def working_grid(J: Interval, n: int = GRID, interior: bool = False,
                 geometric: bool = False, truncation: float = 50.0,
                 halfline=(1e-6, 100.0)) -> np.ndarray:
    """Sample points for ``J``: its finite window, open (or all, if ``interior``) ends nudged inward."""
    lo, hi = J.window(truncation, halfline)
    if interior or (math.isfinite(J.lo) and not J.closed_lo):
        lo = lo + _edge(lo)
    if interior or (math.isfinite(J.hi) and not J.closed_hi):
        hi = hi - _edge(hi)
    if geometric and lo > 0:
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class GridCheck:
    ok: bool
    worst_t: float
    worst_margin: float
    points: int
    refined: int
    window: tuple

    def meta(self) -> dict:
        return {"points": self.points, "refined": self.refined,
                "window": list(self.window), "worst_t": self.worst_t,
                "worst_margin": self.worst_margin,
                "semi_verified": "inequality sampled on a grid, not certified"}


def _check_le(lhs_rhs, ts: np.ndarray) -> GridCheck:
    """Verify ``lhs(t) <= rhs(t)`` on ``ts`` plus midpoints where the margin is thin.

    ``lhs_rhs`` maps an array of points to the pair ``(lhs, rhs)``.  A
    relative slack of ``1e-12 (1 + |lhs| + |rhs|)`` absorbs rounding in
    cases of exact equality.
    """
    def margins(x):
        lhs, rhs = lhs_rhs(x)
        lhs = np.broadcast_to(np.asarray(lhs, float), x.shape)
        rhs = np.broadcast_to(np.asarray(rhs, float), x.shape)
        return rhs - lhs, SLACK * (1 + np.abs(lhs) + np.abs(rhs))

    m, s = margins(ts)
    thin = np.nonzero(m < REFINE_MARGIN)[0]
    extra = np.empty(0)
    if len(thin) and len(ts) > 1:
        left = thin[thin > 0]
        right = thin[thin < len(ts) - 1]
        extra = np.unique(np.concatenate([0.5 * (ts[left - 1] + ts[left]),
                                          0.5 * (ts[right] + ts[right + 1])]))
    if len(extra):
        m2, s2 = margins(extra)
        allt = np.concatenate([ts, extra])
        m, s = np.concatenate([m, m2]), np.concatenate([s, s2])
    else:
        allt = ts
    if not np.all(np.isfinite(m)):
        raise ArithmeticError("non-finite value in inequality")
    i = int(np.argmin(m + s))
    ok = bool(np.all(m >= -s))
    return GridCheck(ok, float(allt[i]), float(m[i]), len(ts), len(extra),
                     (float(ts[0]), float(ts[-1])))


def _vals(e: Expr, ts):
    return np.broadcast_to(np.asarray(e(ts), float), np.shape(ts)).copy()


def _is_zero(e: Expr, ts) -> bool:
    return bool(np.all(_vals(e, ts) == 0.0))


def _guard(name, fn):
    """Run a checker; evaluation failures become NotApplicable reports."""
    try:
        return fn()
    except (ExprError, ArithmeticError, ValueError) as exc:
        return _report(name, Verdict.NOT_APPLICABLE, message=f"evaluation failed: {exc}")


def _interval(prob: OdeProblem, J) -> Interval:
    if J is None:
        return prob.interval
    return J if isinstance(J, Interval) else Interval.parse(J)


def _finite(J: Interval) -> bool:
    return J is not None and J.is_finite


# ----------------------------------------------------------------------------
# constant coefficients

def crit_constant(prob: OdeProblem, J: Interval | None = None) -> CriterionReport:
    """Exact test for constant ``p, q``.

    Real characteristic roots give disconjugacy everywhere.  Complex roots
    ``g +- i d`` put consecutive zeros exactly ``pi/d`` apart, so any window
    shorter than that (or of that length, when not closed) still passes.
    """
    name = "constant"
    J = _interval(prob, J)

    def run():
        if not (prob.p.is_constant() and prob.q.is_constant()):
            return _report(name, Verdict.NOT_APPLICABLE, message="coefficients are not constant")
        lo, hi = J.window()
        probe = np.array([lo, 0.5 * (lo + hi), hi])
        pv, qv = _vals(prob.p, probe), _vals(prob.q, probe)
        if np.ptp(pv) != 0 or np.ptp(qv) != 0:
            return _report(name, Verdict.NOT_APPLICABLE, message="coefficients vary")
        p, q = float(pv[0]), float(qv[0])
        disc = p * p - 4 * q
        w = {"p": p, "q": q, "discriminant": disc}
        if disc >= 0:
            return _report(name, Verdict.PROVEN, J, w, message="real characteristic roots")
        spacing = math.pi / math.sqrt(-disc / 4)
        w["zero_spacing"] = spacing
        if not J.is_finite:
            return _report(name, Verdict.DISPROVEN, J, w,
                           message="complex roots: solutions oscillate on an unbounded interval")
        too_long = J.length >= spacing if J.is_closed else J.length > spacing
        if too_long:
            return _report(name, Verdict.DISPROVEN, J, w,
                           message=f"complex roots: zeros {spacing:.12g} apart fit in the interval")
        return _report(name, Verdict.PROVEN, J, w,
                       message=f"complex roots, but the interval is shorter than the zero spacing {spacing:.12g}")
    return _guard(name, run)


# ----------------------------------------------------------------------------
# Euler-type equations

def crit_euler(prob: OdeProblem, J: Interval | None = None, grid: int = GRID) -> CriterionReport:
    """``p = c/t`` on a subinterval of ``(0, inf)`` with ``q <= (c-1)^2/(4t^2)``."""
    name = "euler"
    J = _interval(prob, J)

    def run():
        if J.lo < 0:
            return _report(name, Verdict.NOT_APPLICABLE, message="interval must lie in (0, inf)")
        if J.lo == 0 and J.closed_lo:
            return _report(name, Verdict.NOT_APPLICABLE, message="t = 0 must be excluded")
        ts = working_grid(J, grid, geometric=True)
        tp = ts * _vals(prob.p, ts)
        c = float(np.median(tp))
        if np.max(np.abs(tp - c)) > 1e-9 * (1 + abs(c)):
            return _report(name, Verdict.NOT_APPLICABLE, message="p is not of the form c/t")
        bound = (c - 1) ** 2 / 4
        chk = _check_le(lambda x: (_vals(prob.q, x), bound / (x * x)), ts)
        v = Verdict.PROVEN if chk.ok else Verdict.INCONCLUSIVE
        return _report(name, v, J, {"c": c}, {**chk.meta(), "kind": "geometric"},
                       "q <= (c-1)^2/(4 t^2) on grid" if chk.ok
                       else f"bound fails near t={chk.worst_t:.6g}")
    return _guard(name, run)


# ----------------------------------------------------------------------------
# integral (Lyapunov) test

def crit_lyapunov(prob: OdeProblem, J: Interval | None = None, use_q_plus: bool = False,
                  grid: int = GRID) -> CriterionReport:
    """``p == 0`` and ``int_a^b q <= 4/(b-a)`` (with ``q >= 0``, or using ``max(q, 0)``)."""
    name = "lyapunov_q_plus" if use_q_plus else "lyapunov"
    J = _interval(prob, J)

    def run():
        if not _finite(J):
            return _report(name, Verdict.NOT_APPLICABLE, message="needs a finite interval")
        ts = np.linspace(J.lo, J.hi, grid)
        if not _is_zero(prob.p, ts):
            return _report(name, Verdict.NOT_APPLICABLE, message="p is not identically zero")
        q = prob.q
        if use_q_plus:
            q = q_plus(prob).q
        elif np.min(_vals(q, ts)) < 0:
            return _report(name, Verdict.NOT_APPLICABLE,
                           message="q takes negative values; use the positive-part form")
        integral, err = adaptive_quad(lambda x: _vals(q, x), ts, epsabs=1e-9)
        bound = 4.0 / J.length
        w = {"integral": integral, "quadrature_error": err, "bound": bound}
        g = {"points": grid, "window": [J.lo, J.hi], "kind": "adaptive Gauss-Kronrod"}
        claim = Interval.closed(J.lo, J.hi)
        if integral <= bound + SLACK * (1 + bound):
            return _report(name, Verdict.PROVEN, claim, w, g, "integral within 4/(b-a)")
        return _report(name, Verdict.INCONCLUSIVE, claim, w, g, "integral exceeds 4/(b-a)")
    return _guard(name, run)


# ----------------------------------------------------------------------------
# test-function criteria on a finite interval

def crit_q_nonpositive(prob: OdeProblem, J: Interval | None = None,
                       grid: int = GRID) -> CriterionReport:
    name = "q_nonpositive"
    J = _interval(prob, J)

    def run():
        ts = working_grid(J, grid)
        chk = _check_le(lambda x: (_vals(prob.q, x), 0.0), ts)
        v = Verdict.PROVEN if chk.ok else Verdict.INCONCLUSIVE
        return _report(name, v, J, {}, chk.meta(),
                       "q <= 0 on grid" if chk.ok else f"q > 0 near t={chk.worst_t:.6g}")
    return _guard(name, run)


def _endpoint_decay_ok(p: Expr, a: float, b: float, bound: float = 1e6) -> bool:
    L = b - a
    h = L * np.logspace(-1, -8, 15)
    ra = np.abs(_vals(p, a + h)) / h
    rb = np.abs(_vals(p, b - h)) / h
    return bool(np.all(ra <= bound) and np.all(rb <= bound))


def crit_sine(prob: OdeProblem, J: Interval | None = None, grid: int = GRID) -> CriterionReport:
    """``(pi/L) cot(pi (t-a)/L) p + q <= pi^2/L^2`` with ``p`` vanishing linearly at both ends."""
    name = "sine"
    J = _interval(prob, J)

    def run():
        if not _finite(J):
            return _report(name, Verdict.NOT_APPLICABLE, message="needs a finite interval")
        a, b = J.lo, J.hi
        L = b - a
        if not _endpoint_decay_ok(prob.p, a, b):
            return _report(name, Verdict.NOT_APPLICABLE,
                           message="p/(t-a) or p/(b-t) exceeds 1e6 near an endpoint")
        ts = working_grid(J, grid, interior=True)
        k = math.pi / L

        def sides(x):
            cot = 1.0 / np.tan(k * (x - a))
            return k * cot * _vals(prob.p, x) + _vals(prob.q, x), k * k
        chk = _check_le(sides, ts)
        v = Verdict.PROVEN if chk.ok else Verdict.INCONCLUSIVE
        return _report(name, v, Interval.half_open(a, b), {}, chk.meta(),
                       "inequality holds on interior grid" if chk.ok
                       else f"inequality fails near t={chk.worst_t:.6g}")
    return _guard(name, run)


def crit_parabola(prob: OdeProblem, J: Interval | None = None, form: str = "C1",
                  grid: int = GRID) -> CriterionReport:
    """Pointwise (``C1``) or sup-norm (``C2``) bound built from ``v = (b-t)(t-a)/2``."""
    form = form.upper()
    if form not in ("C1", "C2"):
        raise ValueError("form must be 'C1' or 'C2'")
    name = f"parabola_{form}"
    J = _interval(prob, J)

    def run():
        if not _finite(J):
            return _report(name, Verdict.NOT_APPLICABLE, message="needs a finite interval")
        a, b = J.lo, J.hi
        claim = Interval.half_open(a, b)
        if form == "C1":
            ts = working_grid(J, grid, interior=True)

            def sides(x):
                return (np.abs(_vals(prob.p, x)) * np.abs((a + b) / 2 - x)
                        + np.abs(_vals(prob.q, x)) * (b - x) * (x - a) / 2, 1.0)
            chk = _check_le(sides, ts)
            v = Verdict.PROVEN if chk.ok else Verdict.INCONCLUSIVE
            return _report(name, v, claim, {}, chk.meta(),
                           "pointwise bound holds on grid" if chk.ok
                           else f"bound fails near t={chk.worst_t:.6g}")
        ts = working_grid(J, grid, interior=True)
        P = float(np.max(np.abs(_vals(prob.p, ts))))
        Q = float(np.max(np.abs(_vals(prob.q, ts))))
        lhs = (b - a) / 2 * P + (b - a) ** 2 / 8 * Q
        ok = lhs <= 1 + SLACK * (1 + lhs)
        meta = {"points": len(ts), "window": [float(ts[0]), float(ts[-1])],
                "semi_verified": "essential suprema approximated by grid maxima (1e-12 slack)"}
        return _report(name, Verdict.PROVEN if ok else Verdict.INCONCLUSIVE, claim,
                       {"sup_p": P, "sup_q": Q, "lhs": lhs}, meta,
                       f"(b-a)/2 sup|p| + (b-a)^2/8 sup|q| = {lhs:.12g}")
    return _guard(name, run)


def crit_valleepoussin(prob: OdeProblem, J: Interval | None = None, v="1",
                       tol_slack: float = 0.0, grid: int = GRID) -> CriterionReport:
    """Positive test function ``v`` with ``v'' + p v' + q v <= 0``.

    For a closed ``[a, b]``, ``v`` must be positive on ``(a, b]`` and the
    claim is ``[a, b]``; otherwise positivity on ``(a, b)`` gives ``[a, b)``.
    """
    name = "vallee_poussin"
    J = _interval(prob, J)
    v = as_expr(v)

    def run():
        try:
            dv = differentiate(v)
            ddv = differentiate(dv)
        except ExprError as exc:
            return _report(name, Verdict.NOT_APPLICABLE, message=f"cannot differentiate v: {exc}")
        closed = J.is_finite and J.is_closed
        if closed:
            ts = working_grid(J, grid)
            pos = ts[1:]
            claim = J
        else:
            ts = working_grid(J, grid, interior=J.is_finite)
            pos = ts
            claim = Interval.half_open(J.lo, J.hi) if J.is_finite else J
        w = {"v": to_text(v)}
        vp = _vals(v, pos)
        if not np.all(vp > 0):
            i = int(np.argmin(vp))
            return _report(name, Verdict.INCONCLUSIVE, claim, w, {"points": len(ts)},
                           f"v is not positive at t={pos[i]:.6g}")

        def sides(x):
            Lv = _vals(ddv, x) + _vals(prob.p, x) * _vals(dv, x) + _vals(prob.q, x) * _vals(v, x)
            return Lv, tol_slack
        chk = _check_le(sides, ts)
        verdict = Verdict.PROVEN if chk.ok else Verdict.INCONCLUSIVE
        return _report(name, verdict, claim, w, chk.meta(),
                       "v > 0 and Lv <= 0 on grid" if chk.ok else f"Lv > 0 near t={chk.worst_t:.6g}")
    return _guard(name, run)


# ----------------------------------------------------------------------------
# kernel (auxiliary equation) criteria

def constant_kernel(P: float, Q: float):
    """Cauchy function ``K(x) = C(s + x, s)`` of ``x'' + P x' + Q x = 0`` and its derivative."""
    disc = P * P - 4 * Q
    if disc > 0:
        r = math.sqrt(disc)
        l1, l2 = (-P + r) / 2, (-P - r) / 2
        if Q == 0:
            l1 = 0.0
            l2 = -P

        def K(x):
            if l1 == 0.0:
                return -np.expm1(l2 * x) / (-l2)
            return np.exp(l1 * x) * -np.expm1((l2 - l1) * x) / (l1 - l2)

        def dK(x):
            return l1 * K(x) + np.exp(l2 * x)
    elif disc == 0:
        lam = -P / 2

        def K(x):
            return x * np.exp(lam * x)

        def dK(x):
            return lam * K(x) + np.exp(lam * x)
    else:
        al, be = -P / 2, math.sqrt(-disc) / 2

        def K(x):
            return np.exp(al * x) * np.sin(be * x) / be

        def dK(x):
            return al * K(x) + np.exp(al * x) * np.cos(be * x)
    return K, dK


def _aux_profile(P: float, Q: float, a: float, b: float, ts: np.ndarray):
    """``v(t) = int M(t,s) ds`` and ``v'(t)`` for the constant auxiliary equation.

    ``M = -G`` with ``G`` the Dirichlet Green function, written through the
    Cauchy function ``K`` as ``G(t,s) = K(t-s)[s<=t] - K(t-a) K(b-s)/K(b-a)``.
    Integrating in ``s`` leaves ``I(x) = int_0^x K``, computed by vectorized
    adaptive quadrature.
    """
    K, dK = constant_kernel(P, Q)
    xs = np.concatenate([ts - a, [b - a]])
    I, _ = quad_vec(lambda u: xs * K(xs * u), 0.0, 1.0, epsabs=1e-13, epsrel=1e-12)
    It, Iba = I[:-1], I[-1]
    Kba = float(K(np.array(b - a)))
    x = ts - a
    v = -It + K(x) * Iba / Kba
    dv = -K(x) + dK(x) * Iba / Kba
    return v, dv


def _aux_disconjugate(P: float, Q: float, a: float, b: float) -> bool:
    disc = P * P - 4 * Q
    if disc < 0 and (b - a) >= math.pi / (math.sqrt(-disc) / 2):
        return False
    aux = OdeProblem(Interval.closed(a, b), Num(P), Num(Q))
    return is_disconjugate(aux, Interval.closed(a, b)).status is Status.DISCONJUGATE


def crit_kernel_constPQ(prob: OdeProblem, J: Interval | None = None, P: float | None = None,
                        Q: float | None = None, grid: int = GRID) -> CriterionReport:
    """``(p-P) v' + (q-Q) v <= 1`` with ``v`` solving ``v'' + P v' + Q v = -1``, ``v(a)=v(b)=0``.

    Without explicit ``(P, Q)`` a few natural choices are tried in turn.
    """
    name = "kernel_constPQ"
    J = _interval(prob, J)

    def run():
        if not _finite(J):
            return _report(name, Verdict.NOT_APPLICABLE, message="needs a finite interval")
        a, b = J.lo, J.hi
        ts = working_grid(J, grid, interior=True)
        pv, qv = _vals(prob.p, ts), _vals(prob.q, ts)
        if P is not None or Q is not None:
            cands = [(float(P or 0.0), float(Q or 0.0))]
        else:
            mp = float(np.mean(pv))
            cands = [(mp, 0.0), (mp, float(np.mean(np.minimum(qv, 0.0)))), (0.0, 0.0)]
        last = None
        for Pc, Qc in cands:
            if not _aux_disconjugate(Pc, Qc, a, b):
                last = _report(name, Verdict.NOT_APPLICABLE, witness={"P": Pc, "Q": Qc},
                               message="auxiliary constant equation is not disconjugate on [a,b]")
                continue

            def sides(x, Pc=Pc, Qc=Qc):
                v, dv = _aux_profile(Pc, Qc, a, b, x)
                return (_vals(prob.p, x) - Pc) * dv + (_vals(prob.q, x) - Qc) * v, 1.0
            chk = _check_le(sides, ts)
            rep = _report(name, Verdict.PROVEN if chk.ok else Verdict.INCONCLUSIVE,
                          Interval.half_open(a, b), {"P": Pc, "Q": Qc}, chk.meta(),
                          "kernel inequality holds on grid" if chk.ok
                          else f"kernel inequality fails near t={chk.worst_t:.6g}")
            if rep.proven:
                return rep
            if last is None or last.verdict is Verdict.NOT_APPLICABLE:
                last = rep
        return last
    return _guard(name, run)


def q0_factors(P: float, L: float) -> tuple[float, float]:
    """Bounds on ``max|v'|`` and ``max v`` for the auxiliary equation ``v'' + P v' = -1`` on length ``L``.

    Both depend only on ``|P|``: reversing ``t`` maps the ``P`` profile to the
    ``-P`` one.
    """
    A = abs(P)
    f1 = abs(A * L + math.expm1(-A * L)) / (A * -math.expm1(-A * L))
    f2 = 2 * (L / 2 + math.expm1(-A * L / 2) / A) / (A * (1 + math.exp(-A * L / 2)))
    return f1, f2


def crit_kernel_Q0(prob: OdeProblem, J: Interval | None = None, P: float | None = None,
                   grid: int = GRID) -> CriterionReport:
    """Closed-form version of the kernel test with auxiliary ``x'' + P x' = 0``."""
    name = "kernel_Q0"
    J = _interval(prob, J)

    def run():
        if not _finite(J):
            return _report(name, Verdict.NOT_APPLICABLE, message="needs a finite interval")
        ts = working_grid(J, grid, interior=True)
        Pv = float(np.mean(_vals(prob.p, ts))) if P is None else float(P)
        if Pv == 0.0:
            return _report(name, Verdict.NOT_APPLICABLE, witness={"P": 0.0},
                           message="P = 0: use the constant-coefficient kernel test with P = Q = 0")
        f1, f2 = q0_factors(Pv, J.length)
        chk = _check_le(lambda x: (np.abs(_vals(prob.p, x) - Pv) * f1
                                   + np.abs(_vals(prob.q, x)) * f2, 1.0), ts)
        w = {"P": Pv, "slope_factor": f1, "value_factor": f2}
        msg = "closed-form kernel bound holds on grid" if chk.ok else \
            f"closed-form kernel bound fails near t={chk.worst_t:.6g}"
        if Pv < 0:
            msg += " (P < 0: factors evaluated with |P|)"
        return _report(name, Verdict.PROVEN if chk.ok else Verdict.INCONCLUSIVE,
                       Interval.half_open(J.lo, J.hi), w, chk.meta(), msg)
    return _guard(name, run)


def _varp_profile(p: Expr, a: float, b: float, n: int):
    """``v = int M ds`` for the auxiliary equation ``v'' + p v' = -1`` on a fine grid.

    With ``e(s) = exp(-int_a^s p)`` and ``R(t) = int_a^t e``, the Green kernel
    gives ``v(t) = [(R_b - R(t)) A(t) + R(t)(R_b (B_b - B(t)) - (A_b - A(t)))] / R_b``
    where ``A' = R/e`` and ``B' = 1/e``.
    """
    fine = np.linspace(a, b, n)
    phi = cumulative_simpson(_vals(p, fine), x=fine, initial=0.0)
    e = np.exp(-phi)
    if not np.all(np.isfinite(e)) or np.any(e == 0):
        raise ArithmeticError("integrating factor over/underflows")
    R = cumulative_simpson(e, x=fine, initial=0.0)
    A = cumulative_simpson(R / e, x=fine, initial=0.0)
    B = cumulative_simpson(1.0 / e, x=fine, initial=0.0)
    Rb, Ab, Bb = R[-1], A[-1], B[-1]
    v = ((Rb - R) * A + R * (Rb * (Bb - B) - (Ab - A))) / Rb
    return fine, v


def crit_kernel_varp(prob: OdeProblem, J: Interval | None = None,
                     grid: int = GRID) -> CriterionReport:
    """``q(t) int M(t,s) ds <= 1`` with ``M`` from the auxiliary equation ``x'' + p x' = 0``."""
    name = "kernel_varp"
    J = _interval(prob, J)

    def run():
        if not _finite(J):
            return _report(name, Verdict.NOT_APPLICABLE, message="needs a finite interval")
        a, b = J.lo, J.hi
        n = 8 * (grid - 1) + 1
        fine, v = _varp_profile(prob.p, a, b, n)
        ts = working_grid(J, grid, interior=True)
        # v is smooth and the profile grid is 8x finer, so linear interpolation suffices
        chk = _check_le(lambda x: (_vals(prob.q, x) * np.interp(x, fine, v), 1.0), ts)
        return _report(name, Verdict.PROVEN if chk.ok else Verdict.INCONCLUSIVE,
                       Interval.half_open(a, b), {"max_kernel_integral": float(np.max(v))},
                       {**chk.meta(), "quadrature": f"cumulative Simpson on {n} points"},
                       "kernel inequality holds on grid" if chk.ok
                       else f"kernel inequality fails near t={chk.worst_t:.6g}")
    return _guard(name, run)


# ----------------------------------------------------------------------------
# whole-axis criteria (valid on any subinterval as well)

def _envelope_min(pv: np.ndarray, qv: np.ndarray, lo: float, hi: float, n: int = 401):
    """Minimize ``F(nu) = nu^2 + max_i (p_i nu + q_i)`` over ``[lo, hi]``.

    Coarse logarithmic grid, then bounded Brent (golden section with
    parabolic steps), then an exact polish: the optimum of a max of lines
    plus ``nu^2`` sits at a crossing of two lines or at ``-p_i/2``.
    """
    def F(nu):
        return nu * nu + float(np.max(pv * nu + qv))

    mag = max(abs(lo), abs(hi))
    pos = np.geomspace(1e-3, mag, (n - 1) // 2)
    cand = np.unique(np.clip(np.concatenate([-pos, [0.0], pos]), lo, hi))
    vals = np.array([F(c) for c in cand])
    i = int(np.argmin(vals))
    blo = cand[max(i - 1, 0)]
    bhi = cand[min(i + 1, len(cand) - 1)]
    best_nu, best = float(cand[i]), float(vals[i])
    if bhi > blo:
        res = minimize_scalar(F, bounds=(blo, bhi), method="bounded",
                              options={"xatol": 1e-12 * (1 + abs(best_nu))})
        if res.fun < best:
            best_nu, best = float(res.x), float(res.fun)
    # exact polish
    lines = pv * best_nu + qv
    top = np.argsort(lines)[-8:]
    polish = [-pv[j] / 2 for j in top]
    for j in top:
        for k in top:
            if pv[j] != pv[k]:
                polish.append((qv[k] - qv[j]) / (pv[j] - pv[k]))
    for c in polish:
        if lo <= c <= hi:
            f = F(c)
            if f < best:
                best_nu, best = float(c), f
    return best_nu, best


def crit_char_poly(prob: OdeProblem, J: Interval | None = None, nu_max: float = 100.0,
                   grid: int = GRID) -> CriterionReport:
    """Some real ``nu`` with ``nu^2 + p(t) nu + q(t) <= 0`` everywhere (test function ``e^(nu t)``)."""
    name = "char_poly"
    J = _interval(prob, J)

    def run():
        ts = working_grid(J, grid)
        pv, qv = _vals(prob.p, ts), _vals(prob.q, ts)
        nu, _ = _envelope_min(pv, qv, -nu_max, nu_max)
        chk = _check_le(lambda x: (nu * nu + _vals(prob.p, x) * nu + _vals(prob.q, x), 0.0), ts)
        return _report(name, Verdict.PROVEN if chk.ok else Verdict.INCONCLUSIVE, J,
                       {"nu": nu}, chk.meta(),
                       f"P(t, {nu:.12g}) <= 0 on grid" if chk.ok
                       else f"no nu in [-{nu_max:g}, {nu_max:g}] found; best {nu:.6g}")
    return _guard(name, run)


def crit_halfplane(prob: OdeProblem, J: Interval | None = None, gamma_max: float = 100.0,
                   grid: int = GRID) -> CriterionReport:
    """The curve ``t -> (p(t), q(t))`` lies in ``q <= -g^2 + g p`` or ``q <= -g^2 - g p`` for some ``g >= 0``."""
    name = "halfplane"
    J = _interval(prob, J)

    def run():
        ts = working_grid(J, grid)
        pv, qv = _vals(prob.p, ts), _vals(prob.q, ts)
        best = None
        for sign in (+1, -1):
            # q + g^2 - sign g p = nu^2 + p nu + q with nu = -sign g
            lo, hi = (-gamma_max, 0.0) if sign > 0 else (0.0, gamma_max)
            nu, val = _envelope_min(pv, qv, lo, hi)
            g = abs(nu)
            chk = _check_le(lambda x, g=g, s=sign: (_vals(prob.q, x) + g * g
                                                     - s * g * _vals(prob.p, x), 0.0), ts)
            rec = (chk, "+" if sign > 0 else "-", g)
            if chk.ok:
                return _report(name, Verdict.PROVEN, J, {"sign": rec[1], "gamma": g},
                               chk.meta(), f"curve inside the half-plane {rec[1]} with gamma={g:.12g}")
            if best is None or chk.worst_margin > best[0].worst_margin:
                best = rec
        chk, s, g = best
        return _report(name, Verdict.INCONCLUSIVE, J, {"sign": s, "gamma": g}, chk.meta(),
                       f"no gamma in [0, {gamma_max:g}]; closest sign {s}, gamma={g:.6g}")
    return _guard(name, run)


def crit_line(prob: OdeProblem, J: Interval | None = None, grid: int = GRID,
              residual_tol: float = 1e-9) -> CriterionReport:
    """The curve ``(p, q)`` is a line or segment inside the real-root region."""
    name = "line"
    J = _interval(prob, J)

    def run():
        ts = working_grid(J, grid)
        pv, qv = _vals(prob.p, ts), _vals(prob.q, ts)
        scale = 1 + np.max(np.abs(qv))
        if np.ptp(qv) <= residual_tol * scale:
            c = float(np.mean(qv))
            if c <= 0:
                return _report(name, Verdict.PROVEN, J, {"q": c}, {"points": len(ts)},
                               "q is a nonpositive constant")
            if np.ptp(pv) <= residual_tol * (1 + np.max(np.abs(pv))):
                return _report(name, Verdict.NOT_APPLICABLE, J, {"q": c}, {"points": len(ts)},
                               "curve is a single point; use the constant-coefficient test")
        if np.ptp(pv) <= residual_tol * (1 + np.max(np.abs(pv))):
            return _report(name, Verdict.NOT_APPLICABLE, J, {}, {"points": len(ts)},
                           "p constant while q varies: curve is a vertical segment")
        A = np.column_stack([np.ones_like(pv), pv])
        (c, k), *_ = np.linalg.lstsq(A, qv, rcond=None)
        resid = float(np.max(np.abs(A @ np.array([c, k]) - qv)))
        w = {"c": float(c), "k": float(k), "residual": resid}
        if resid > residual_tol * scale:
            return _report(name, Verdict.NOT_APPLICABLE, J, w, {"points": len(ts)},
                           "q is not an affine function of p")
        if c > SLACK:
            return _report(name, Verdict.INCONCLUSIVE, J, w, {"points": len(ts)},
                           "line q = c + k p with c > 0 leaves the real-root region")
        gamma = math.sqrt(max(-c, 0.0))
        w["gamma"] = gamma
        if abs(k) <= gamma + 1e-9 * (1 + gamma):
            return _report(name, Verdict.PROVEN, J, w, {"points": len(ts)},
                           f"q = -gamma^2 + k p with |k| <= gamma = {gamma:.12g}")
        return _report(name, Verdict.INCONCLUSIVE, J, w, {"points": len(ts)},
                       f"|k| = {abs(k):.6g} exceeds gamma = {gamma:.6g}")
    return _guard(name, run)


def crit_thnew2(prob: OdeProblem, J: Interval | None = None, r="0", literal: bool = False,
                grid: int = GRID) -> CriterionReport:
    """``q <= p^2/4 + r`` together with ``p' >= 2r`` or ``p^2 - 4p' + 4r <= 0``.

    Both branches compare with ``x'' + p x' + (p^2/4 + r) x = 0`` through the
    test functions ``exp(-1/2 int p)`` and ``exp(-int p)``.  ``literal=True``
    evaluates the four-branch statement in its printed form instead
    (``p' >= 2r``, ``p' <= -2r``, ``p^2 -+ 4p' + r <= 0``); the extra branches
    there are not sound and are kept only for comparison.
    """
    name = "r_condition_literal" if literal else "r_condition"
    J = _interval(prob, J)
    r = as_expr(r)

    def run():
        try:
            dp = differentiate(prob.p)
        except ExprError as exc:
            return _report(name, Verdict.NOT_APPLICABLE, message=f"cannot differentiate p: {exc}")
        ts = working_grid(J, grid)
        P = lambda x: _vals(prob.p, x)  # noqa: E731
        D = lambda x: _vals(dp, x)      # noqa: E731
        R = lambda x: _vals(r, x)       # noqa: E731
        base = _check_le(lambda x: (_vals(prob.q, x), P(x) ** 2 / 4 + R(x)), ts)
        w = {"r": to_text(r)}
        if not base.ok:
            return _report(name, Verdict.INCONCLUSIVE, J, w, base.meta(),
                           f"q > p^2/4 + r near t={base.worst_t:.6g}")
        if literal:
            branches = [("p' >= 2r", lambda x: (2 * R(x), D(x))),
                        ("p' <= -2r", lambda x: (D(x), -2 * R(x))),
                        ("p^2 - 4p' + r <= 0", lambda x: (P(x) ** 2 - 4 * D(x) + R(x), 0.0)),
                        ("p^2 + 4p' + r <= 0", lambda x: (P(x) ** 2 + 4 * D(x) + R(x), 0.0))]
        else:
            branches = [("p' >= 2r", lambda x: (2 * R(x), D(x))),
                        ("p^2 - 4p' + 4r <= 0", lambda x: (P(x) ** 2 - 4 * D(x) + 4 * R(x), 0.0))]
        for label, fn in branches:
            chk = _check_le(fn, ts)
            if chk.ok:
                return _report(name, Verdict.PROVEN, J, {**w, "branch": label},
                               chk.meta(), f"q <= p^2/4 + r and {label} on grid")
        return _report(name, Verdict.INCONCLUSIVE, J, w, base.meta(),
                       "q <= p^2/4 + r holds but no branch condition does")
    return _guard(name, run)


def crit_thnew3(prob: OdeProblem, J: Interval | None = None, literal: bool = False,
                grid: int = GRID) -> CriterionReport:
    """Nondecreasing ``p`` with ``q <= p^2/4 + p'/2`` (comparison with ``exp(-1/2 int p)``).

    ``literal=True`` also accepts the nonincreasing mirror ``q <= p^2/4 - p'/2``,
    which is not a valid test; kept only for comparison.
    """
    name = "monotone_p_literal" if literal else "monotone_p"
    J = _interval(prob, J)

    def run():
        try:
            dp = differentiate(prob.p)
        except ExprError as exc:
            return _report(name, Verdict.NOT_APPLICABLE, message=f"cannot differentiate p: {exc}")
        ts = working_grid(J, grid)
        branches = [("increasing", +1)] + ([("decreasing", -1)] if literal else [])
        last = None
        for label, s in branches:
            mono = _check_le(lambda x, s=s: (0.0, s * _vals(dp, x)), ts)
            if not mono.ok:
                last = mono
                continue
            chk = _check_le(lambda x, s=s: (_vals(prob.q, x), _vals(prob.p, x) ** 2 / 4
                                            + s * _vals(dp, x) / 2), ts)
            if chk.ok:
                return _report(name, Verdict.PROVEN, J, {"branch": label}, chk.meta(),
                               f"p {label} and q <= p^2/4 {'+' if s > 0 else '-'} p'/2 on grid")
            last = chk
        return _report(name, Verdict.INCONCLUSIVE, J, {}, last.meta(),
                       "monotonicity or bound fails on grid")
    return _guard(name, run)


crit_r_condition = crit_thnew2
crit_monotone_p = crit_thnew3


# ----------------------------------------------------------------------------
# battery

@dataclass(frozen=True)
class BatteryReport:
    interval: Interval
    reports: tuple
    oracle: OracleVerdict | None
    verdict: Verdict

    def to_dict(self) -> dict:
        return {"interval": str(self.interval), "verdict": str(self.verdict),
                "criteria": [r.to_dict() for r in self.reports],
                "oracle": None if self.oracle is None else self.oracle.to_dict()}

    def to_csv(self) -> str:
        import csv
        import io
        import json
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["criterion", "verdict", "interval", "witness"])
        for r in self.reports:
            w.writerow([r.criterion, str(r.verdict), "" if r.interval is None else str(r.interval),
                        json.dumps(_jsonable(r.witness), sort_keys=True)])
        return buf.getvalue()


def run_battery(prob: OdeProblem, J: Interval | None = None, *, grid: int = GRID,
                r="0", v=None, P: float | None = None, Q: float | None = None,
                oracle: bool = True, literal: bool = False, workers: int = 4,
                oracle_kw: dict | None = None) -> BatteryReport:
    """Run every test that applies to ``J`` (concurrently) and optionally the oracle.

    The aggregate verdict is Proven only when some Proven report claims an
    interval covering ``J``; Disproven comes only from the exact
    constant-coefficient test.
    """
    J = _interval(prob, J)
    jobs = [
        lambda: crit_constant(prob, J),
        lambda: crit_euler(prob, J, grid=grid),
        lambda: crit_q_nonpositive(prob, J, grid=grid),
        lambda: crit_char_poly(prob, J, grid=grid),
        lambda: crit_halfplane(prob, J, grid=grid),
        lambda: crit_line(prob, J, grid=grid),
        lambda: crit_thnew2(prob, J, r=r, literal=literal, grid=grid),
        lambda: crit_thnew3(prob, J, literal=literal, grid=grid),
    ]
    if J.is_finite:
        jobs += [
            lambda: crit_lyapunov(prob, J, False, grid=grid),
            lambda: crit_lyapunov(prob, J, True, grid=grid),
            lambda: crit_sine(prob, J, grid=grid),
            lambda: crit_parabola(prob, J, "C1", grid=grid),
            lambda: crit_parabola(prob, J, "C2", grid=grid),
            lambda: crit_kernel_constPQ(prob, J, P, Q, grid=grid),
            lambda: crit_kernel_Q0(prob, J, P, grid=grid),
            lambda: crit_kernel_varp(prob, J, grid=grid),
        ]
    if v is not None:
        jobs.append(lambda: crit_valleepoussin(prob, J, v, grid=grid))

    def safe(job):
        try:
            return job()
        except Exception as exc:  # a broken checker must not sink the battery
            return _report("unknown", Verdict.NOT_APPLICABLE, message=f"checker failed: {exc}")

    with ThreadPoolExecutor(max_workers=workers) as ex:
        reports = list(ex.map(safe, jobs))
    reports.sort(key=lambda r: _ORDER[r.verdict])
    verdict = Verdict.INCONCLUSIVE
    if any(r.proven and r.interval is not None and r.interval.covers(J) for r in reports):
        verdict = Verdict.PROVEN
    elif any(r.verdict is Verdict.DISPROVEN for r in reports):
        verdict = Verdict.DISPROVEN
    ov = is_disconjugate(prob, J, **(oracle_kw or {})) if oracle else None
    return BatteryReport(J, tuple(reports), ov, verdict)
