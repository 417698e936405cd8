"""Green's function of ``x'' + p x' + q x = f``, ``x(a) = x(b) = 0``.

With ``C`` the Cauchy function,

    G(t, s) = C(t, s) [s <= t] - C(t, a) C(b, s) / C(b, a).

For ``p == 0`` this coincides with the symmetric two-branch form
``-C(b,t) C(s,a) / C(b,a)`` (``s <= t``); for general ``p`` the two differ by
the factor ``W(t)/W(s)`` of Wronskians, and only the form above solves the
boundary value problem.  ``C`` is assembled from a fundamental system at
``a``, so a whole grid of kernel values costs two integrations.
"""
from __future__ import annotations

import csv
import io
import numpy as np
from scipy.integrate import quad_vec

from .expr import Expr, as_expr, differentiate
from .integrate import Kernel, Trajectory, solve_ivp
from .oracle import Status, is_disconjugate
from .problem import Interval, OdeProblem, PreconditionError

__all__ = [
    "GreenFunction", "FundamentalCauchy", "ResonanceError", "BvpSolution",
    "build_green", "solve_bvp", "positive_solution", "sign_changes",
    "generalized_rolle", "TIGHT_RTOL", "TIGHT_ATOL",
]

TIGHT_RTOL = 1e-12
TIGHT_ATOL = 1e-14
RESONANCE = 1e-10
JUMP_STEP = 1e-5


class ResonanceError(PreconditionError):
    """``C(b, a)`` vanishes: the Dirichlet problem is not uniquely solvable."""


def _as_interval(J) -> Interval:
    return J if isinstance(J, Interval) else Interval.parse(J)


class FundamentalCauchy(Kernel):
    """Vectorized ``C(t, s)`` on ``[a, b]`` from solutions ``u0, u1`` with data (1,0), (0,1) at ``a``.

    ``C(t, s) = (u0(s) u1(t) - u1(s) u0(t)) / W(s)``.
    """

    kind = "cauchy"

    def __init__(self, prob: OdeProblem, a: float, b: float,
                 rtol: float = TIGHT_RTOL, atol: float = TIGHT_ATOL):
        hom = prob.homogeneous
        self.a, self.b = float(a), float(b)
        kw = dict(rtol=rtol, atol=atol, homogeneous=True, check_interval=False)
        self.u0 = solve_ivp(hom, a, 1.0, 0.0, b, **kw)
        self.u1 = solve_ivp(hom, a, 0.0, 1.0, b, **kw)

    def basis(self, t):
        x0, d0 = self.u0(t)
        x1, d1 = self.u1(t)
        return x0, d0, x1, d1

    def wronskian(self, t):
        x0, d0, x1, d1 = self.basis(t)
        return x0 * d1 - x1 * d0

    def __call__(self, t, s):
        t, s = np.asarray(t, float), np.asarray(s, float)
        x0t, _, x1t, _ = self.basis(t)
        x0s, d0s, x1s, d1s = self.basis(s)
        out = np.asarray((x0s * x1t - x1s * x0t) / (x0s * d1s - x1s * d0s))
        return float(out) if out.ndim == 0 else out

    def dt(self, t, s):
        t, s = np.asarray(t, float), np.asarray(s, float)
        _, d0t, _, d1t = self.basis(t)
        x0s, d0s, x1s, d1s = self.basis(s)
        out = np.asarray((x0s * d1t - x1s * d0t) / (x0s * d1s - x1s * d0s))
        return float(out) if out.ndim == 0 else out

    def grid(self, ts, ss):
        T, S = np.meshgrid(np.asarray(ts, float), np.asarray(ss, float), indexing="ij")
        return self(T, S)


class GreenFunction(Kernel):
    """``G(t, s)`` on ``[a, b]^2``.  Evaluation is vectorized and thread-safe (read-only state)."""

    kind = "G"

    def __init__(self, prob: OdeProblem, J: Interval, rtol: float = TIGHT_RTOL,
                 atol: float = TIGHT_ATOL, probe: int = 21):
        J = _as_interval(J)
        if not J.is_finite:
            raise PreconditionError(f"Green's function needs a finite interval, got {J}")
        self.problem = prob
        self.a, self.b = J.lo, J.hi
        self.interval = Interval.closed(J.lo, J.hi)
        self.cauchy = FundamentalCauchy(prob, self.a, self.b, rtol, atol)
        self.C_ba = float(self.cauchy.u1(self.b)[0])   # C(b, a) = u1(b)
        xs = np.linspace(self.a, self.b, probe)
        scale = float(np.max(np.abs(self.cauchy.grid(xs, xs))))
        self.scale = scale
        if not abs(self.C_ba) > RESONANCE * scale:
            raise ResonanceError(
                f"C(b, a) = {self.C_ba:.3e} vanishes relative to max|C| = {scale:.3e}: "
                f"the boundary value problem on [{self.a:g}, {self.b:g}] is not uniquely solvable")

    def C_b(self, s):
        """``C(b, s)``."""
        return self.cauchy(np.full(np.shape(s), self.b), s)

    def __call__(self, t, s):
        t, s = np.asarray(t, float), np.asarray(s, float)
        t, s = np.broadcast_arrays(t, s)
        C = self.cauchy
        below = np.where(s <= t, C(t, s), 0.0)
        out = below - C.u1(t)[0] * self.C_b(s) / self.C_ba
        out = np.asarray(out, float)
        return float(out) if out.ndim == 0 else out

    def dGdt(self, t, s):
        t, s = np.asarray(t, float), np.asarray(s, float)
        t, s = np.broadcast_arrays(t, s)
        C = self.cauchy
        below = np.where(s < t, C.dt(t, s), 0.0)
        out = np.asarray(below - C.u1(t)[1] * self.C_b(s) / self.C_ba, float)
        return float(out) if out.ndim == 0 else out

    def grid(self, ts, ss):
        T, S = np.meshgrid(np.asarray(ts, float), np.asarray(ss, float), indexing="ij")
        return self(T, S)

    def jump(self, s: float, h: float = JUMP_STEP) -> float:
        """``dG/dt(s+, s) - dG/dt(s-, s)`` from second-order one-sided differences."""
        g = lambda t: self(t, s)  # noqa: E731
        right = (-3 * g(s) + 4 * g(s + h) - g(s + 2 * h)) / (2 * h)
        left = (3 * g(s) - 4 * g(s - h) + g(s - 2 * h)) / (2 * h)
        return right - left

    def to_csv(self, ts, ss, path=None) -> str:
        vals = self.grid(ts, ss)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "s", "G"])
        for i, t in enumerate(ts):
            for j, s in enumerate(ss):
                w.writerow([repr(float(t)), repr(float(s)), repr(float(vals[i, j]))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def build_green(prob: OdeProblem, J=None, **kw) -> GreenFunction:
    J = prob.interval if J is None else _as_interval(J)
    return GreenFunction(prob, J, **kw)


class BvpSolution(Trajectory):
    """Shooting trajectory of the BVP together with the Green-quadrature values it was checked against."""

    def __init__(self, traj: Trajectory, nodes, green_values, discrepancy):
        super().__init__(traj.t, traj.x, traj.v, traj.coef, traj.zeros, traj.grazes,
                         traj.status, traj.problem, traj.rtol, traj.atol)
        self.nodes = np.asarray(nodes, float)
        self.green_values = np.asarray(green_values, float)
        self.discrepancy = float(discrepancy)


def solve_bvp(prob: OdeProblem, J=None, nodes: int | np.ndarray = 11,
              check_tol: float = 1e-6) -> BvpSolution:
    """Solve ``Lx = f``, ``x(a) = x(b) = 0`` as ``x(t) = int G(t, s) f(s) ds``.

    The integral is split through the fundamental system into cumulative
    integrals of ``u_i f / W``, evaluated piecewise by adaptive quadrature.
    The result is cross-checked against shooting from ``a`` with the slope
    that the Green representation predicts; a mismatch above ``check_tol``
    raises ``ArithmeticError``.
    """
    J = prob.interval if J is None else _as_interval(J)
    G = build_green(prob, J)
    a, b = G.a, G.b
    ts = np.linspace(a, b, nodes) if np.ndim(nodes) == 0 else np.sort(np.asarray(nodes, float))
    if ts[0] != a:
        ts = np.concatenate([[a], ts])
    if ts[-1] != b:
        ts = np.concatenate([ts, [b]])
    C = G.cauchy
    if prob.f is None:
        vals = np.zeros_like(ts)
        slope = 0.0
    else:
        f = prob.f
        lo, h = ts[:-1], np.diff(ts)

        def integrand(u):
            s = lo + h * u
            x0, d0, x1, d1 = C.basis(s)
            fw = np.asarray(f(s), float) / (x0 * d1 - x1 * d0)
            return np.concatenate([h * x0 * fw, h * x1 * fw])
        pieces, _ = quad_vec(integrand, 0.0, 1.0, epsabs=1e-14, epsrel=1e-12)
        n = len(h)
        F0 = np.concatenate([[0.0], np.cumsum(pieces[:n])])
        F1 = np.concatenate([[0.0], np.cumsum(pieces[n:])])
        x0, _, x1, _ = C.basis(ts)
        particular = x1 * F0 - x0 * F1              # int_a^t C(t,s) f(s) ds
        Ib = particular[-1]                          # int_a^b C(b,s) f(s) ds
        vals = particular - x1 * Ib / G.C_ba
        vals[0] = vals[-1] = 0.0
        slope = -Ib / G.C_ba
    traj = solve_ivp(prob, a, 0.0, slope, b, rtol=TIGHT_RTOL, atol=TIGHT_ATOL,
                     check_interval=False)
    shot = traj.value(ts)
    disc = float(np.max(np.abs(shot - vals)))
    if disc > check_tol * (1 + float(np.max(np.abs(vals)))):
        raise ArithmeticError(f"Green quadrature and shooting disagree by {disc:.3e}")
    return BvpSolution(traj, ts, vals, disc)


def _require_disconjugate(prob: OdeProblem, J: Interval):
    verdict = is_disconjugate(prob, J)
    if verdict.status is not Status.DISCONJUGATE:
        raise PreconditionError(f"equation is not known to be disconjugate on {J}: "
                                f"{verdict.status} ({verdict.message})")


def positive_solution(prob: OdeProblem, J=None, check: bool = True, grid: int = 2001) -> Trajectory:
    """A solution positive on the interior of ``J`` (on all of ``J`` when closed).

    Closed ``[a, b]``: ``y1 + y2`` with ``y1(a) = 0, y1'(a) = 1`` and
    ``y2(b) = 0, y2'(b) = -1``, returned as one trajectory from ``a``.
    ``[a, b)`` and ``(a, b)``: ``y1``.  ``(a, b]``: ``y2``, integrated
    backwards from ``b``.
    """
    J = prob.interval if J is None else _as_interval(J)
    if not J.is_finite:
        raise PreconditionError(f"needs a finite interval, got {J}")
    if check:
        _require_disconjugate(prob, J)
    a, b = J.lo, J.hi
    kw = dict(rtol=TIGHT_RTOL, atol=TIGHT_ATOL, homogeneous=True, check_interval=False)
    hom = prob.homogeneous
    if J.is_closed:
        y2 = solve_ivp(hom, b, 0.0, -1.0, a, **kw)
        ya, dya = y2(a)
        y = solve_ivp(hom, a, ya, 1.0 + dya, b, **kw)
        ts = np.linspace(a, b, grid)
    elif J.closed_hi:
        y = solve_ivp(hom, b, 0.0, -1.0, a, **kw)
        ts = np.linspace(a, b, grid)[1:-1]
    else:
        y = solve_ivp(hom, a, 0.0, 1.0, b, **kw)
        ts = np.linspace(a, b, grid)[1:-1]
    if not np.all(y.value(ts) > 0):
        raise PreconditionError(f"constructed solution is not positive on {J}")
    return y


def sign_changes(values) -> int:
    """Number of strict sign changes, skipping exact zeros."""
    v = np.asarray(values, float)
    v = v[v != 0]
    return int(np.count_nonzero(np.signbit(v[1:]) != np.signbit(v[:-1])))


def generalized_rolle(prob: OdeProblem, u, J=None, grid: int = 4001) -> tuple[int, int]:
    """``(zeros of u, sign changes of Lu)`` sampled on ``J``.

    On a disconjugacy interval the second number is at least the first minus two.
    """
    J = prob.interval if J is None else _as_interval(J)
    u = as_expr(u)
    du = differentiate(u)
    ddu = differentiate(du)
    lo, hi = J.window()
    ts = np.linspace(lo, hi, grid)

    def v(e: Expr):
        return np.broadcast_to(np.asarray(e(ts), float), ts.shape)
    Lu = v(ddu) + v(prob.p) * v(du) + v(prob.q) * v(u)
    return sign_changes(v(u)), sign_changes(Lu)
