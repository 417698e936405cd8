"""Factorization ``L = h2 d/dt h1 d/dt h0`` of a disconjugate operator.

From a positive solution ``y`` and a companion solution ``u`` with
Wronskian ``w = y u' - u y' > 0``:

    h0 = 1/y,    h1 = y^2/w,    h2 = w/y,    h0 h1 h2 = 1.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .expr import as_expr, differentiate
from .greens import TIGHT_ATOL, TIGHT_RTOL, positive_solution
from .integrate import Trajectory, solve_ivp
from .problem import Interval, OdeProblem, PreconditionError

__all__ = ["Factorization", "factorize", "apply_factored", "FD_STEP"]

FD_STEP = 1e-5


@dataclass(frozen=True)
class Factorization:
    """Positive factors built from trajectories ``y`` (positive) and ``u`` (companion)."""

    problem: OdeProblem
    interval: Interval
    y: Trajectory
    u: Trajectory

    def _yw(self, t):
        y, dy = self.y(t)
        u, du = self.u(t)
        return np.asarray(y), np.asarray(dy), np.asarray(y * du - u * dy)

    def wronskian(self, t):
        return _out(self._yw(t)[2])

    def h0(self, t):
        y, _, _ = self._yw(t)
        return _out(1.0 / y)

    def h1(self, t):
        y, _, w = self._yw(t)
        return _out(y * y / w)

    def h2(self, t):
        y, _, w = self._yw(t)
        return _out(w / y)

    def factors(self, t):
        y, _, w = self._yw(t)
        return _out(1.0 / y), _out(y * y / w), _out(w / y)

    def grid(self, n: int = 201) -> np.ndarray:
        """Interior sample points (open ends, and zeros of ``y``, are excluded)."""
        a, b = self.interval.lo, self.interval.hi
        ts = np.linspace(a, b, n)
        y = np.asarray(self.y.value(ts))
        return ts[y > 0]

    def to_csv(self, ts=None, path=None) -> str:
        ts = self.grid() if ts is None else np.asarray(ts, float)
        h0, h1, h2 = self.factors(ts)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "h0", "h1", "h2"])
        for row in zip(ts, np.atleast_1d(h0), np.atleast_1d(h1), np.atleast_1d(h2)):
            w.writerow([repr(float(c)) for c in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _out(x):
    x = np.asarray(x, float)
    return float(x) if x.ndim == 0 else x


def factorize(prob: OdeProblem, J=None, check: bool = True) -> Factorization:
    """Factor ``L`` on ``J`` (closed, open, or half-open finite interval).

    ``u`` starts where ``y`` starts, with the rotated data ``(-y', y)``, so
    ``w = y^2 + y'^2 > 0`` there and, by Abel's formula, everywhere.
    """
    J = prob.interval if J is None else (J if isinstance(J, Interval) else Interval.parse(J))
    y = positive_solution(prob, J, check=check)
    t0, t1 = y.t0, y.t1
    y0, dy0 = y(t0)
    u = solve_ivp(prob.homogeneous, t0, -dy0, y0, t1, rtol=TIGHT_RTOL, atol=TIGHT_ATOL,
                  homogeneous=True, check_interval=False)
    fac = Factorization(prob, J, y, u)
    ts = fac.grid()
    w = np.asarray(fac.wronskian(ts))
    if np.all(w < 0):
        u = solve_ivp(prob.homogeneous, t0, dy0, -y0, t1, rtol=TIGHT_RTOL, atol=TIGHT_ATOL,
                      homogeneous=True, check_interval=False)
        fac = Factorization(prob, J, y, u)
        w = np.asarray(fac.wronskian(ts))
    if not np.all(w > 0):
        raise PreconditionError("Wronskian of the factorization pair changes sign")
    return fac


def apply_factored(fac: Factorization, x, t: float, h: float = FD_STEP) -> float:
    """``h2 (h1 (h0 x)')'`` at ``t``.

    The inner derivative is exact: ``h1 (h0 x)' = (x' y - x y') / w``.  The
    outer one is a central difference with one Richardson extrapolation.
    """
    x = as_expr(x)
    dx = differentiate(x)
    xs, dxs = x.fast.scalar, dx.fast.scalar

    def inner(s):
        y, dy, w = fac._yw(s)
        return (dxs(s) * y - xs(s) * dy) / w

    def central(step):
        return (inner(t + step) - inner(t - step)) / (2 * step)
    d = (4 * central(h / 2) - central(h)) / 3
    return float(fac.h2(t) * d)
