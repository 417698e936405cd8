"""Explicit equations with known behaviour, used by tests and demos.

``lyapunov_extremal`` builds ``x'' + q x = 0`` on ``[0, 1]`` whose solution
``v`` vanishes at both ends while ``int q`` is close to ``4/(1 - 2 delta)``;
letting ``delta -> 0`` shows the constant 4 in the integral test is sharp.
``equation_from_solution`` goes the other way: it turns a prescribed
positive function into a coefficient ``q`` that has it as a solution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import Func, as_expr, differentiate
from .problem import Interval, OdeProblem

__all__ = ["ExtremalBump", "lyapunov_extremal", "equation_from_solution"]


def _clip(s):
    return min(max(s, 0.0), 1.0)


def _phi(s):                         # C^0 bump, integral 1 on [0, 1]
    return 6.0 * s * (1.0 - s) if 0.0 < s < 1.0 else 0.0


def _g1(s):                          # integral of phi from 0 to s
    s = _clip(s)
    return 3.0 * s * s - 2.0 * s ** 3


def _g2(s):                          # integral of g1 from 0 to s
    if s <= 0.0:
        return 0.0
    if s <= 1.0:
        return s ** 3 - 0.5 * s ** 4
    return 0.5 + (s - 1.0)


@dataclass(frozen=True)
class ExtremalBump:
    """``v`` concave on ``[0, 1]``, linear away from three localized bumps of ``-v''``.

    Two narrow spikes of width ``w`` sit at ``1/2 - delta`` and
    ``1/2 + delta - w``; a small smooth bump of mass ``eps`` spreads over the
    gap so ``v`` is strictly concave there.  The spike height is fixed by
    ``v(1) = 0``.
    """

    delta: float = 0.1
    w: float = 1e-4
    eps: float = 1e-3

    @property
    def lo(self):
        return 0.5 - self.delta

    @property
    def hi(self):
        return 0.5 + self.delta

    @property
    def W(self):
        return self.hi - self.lo

    @property
    def A(self):
        return (2.0 - self.eps * self.W) / (2.0 * self.w)

    def _s(self, t):
        return ((t - self.lo) / self.w, (t - (self.hi - self.w)) / self.w, (t - self.lo) / self.W)

    def v(self, t: float) -> float:
        s1, s2, s3 = self._s(t)
        A, w, W, e = self.A, self.w, self.W, self.eps
        return t - (A * w * w * (_g2(s1) + _g2(s2)) + e * W * W * _g2(s3))

    def dv(self, t: float) -> float:
        s1, s2, s3 = self._s(t)
        A, w, W, e = self.A, self.w, self.W, self.eps
        return 1.0 - (A * w * (_g1(s1) + _g1(s2)) + e * W * _g1(s3))

    def ddv(self, t: float) -> float:
        s1, s2, s3 = self._s(t)
        return -(self.A * (_phi(s1) + _phi(s2)) + self.eps * _phi(s3))

    def q(self, t):
        """``-v''/v`` on ``(0, 1)``, zero elsewhere (scalar or array)."""
        if np.ndim(t) == 0:
            t = float(t)
            if not 0.0 < t < 1.0:
                return 0.0
            dd = self.ddv(t)
            return 0.0 if dd == 0.0 else -dd / self.v(t)
        return np.array([self.q(x) for x in np.ravel(t)]).reshape(np.shape(t))

    @property
    def breakpoints(self):
        return [self.lo, self.lo + self.w, self.hi - self.w, self.hi]

    def target(self) -> float:
        """``4/(1 - 2 delta)``, the value ``int q`` approaches as ``w, eps -> 0``."""
        return 4.0 / (1.0 - 2.0 * self.delta)


def lyapunov_extremal(delta: float = 0.1, w: float = 1e-4, eps: float = 1e-3):
    """``(problem, bump)``: ``x'' + q x = 0`` on ``[0, 1]`` with ``v`` of ``bump`` as its solution."""
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    if not 0 < w < delta:
        raise ValueError("spike width must be below delta")
    bump = ExtremalBump(delta, w, eps)
    q = Func(bump.q, f"lyapunov_extremal_q[{delta:g}]", vectorized=True,
             breakpoints=tuple(bump.breakpoints))
    return OdeProblem(Interval.closed(0.0, 1.0), as_expr(0.0), q), bump


def equation_from_solution(v, p="0", interval=None) -> OdeProblem:
    """Coefficient ``q = -(v'' + p v')/v`` so that ``v`` solves ``x'' + p x' + q x = 0``."""
    v, p = as_expr(v), as_expr(p)
    dv = differentiate(v)
    q = -(differentiate(dv) + p * dv) / v
    J = Interval.real_line() if interval is None else interval
    return OdeProblem(J, p, q)
