"""Green's function and the factored form of L on a disconjugate interval.

For x'' + x = 0 on [0, 2] (shorter than pi) the Green function of the
Dirichlet problem is negative inside the square, and L factors as
h2 d/dt h1 d/dt h0 with positive h's.
"""
import numpy as np

from disconj import OdeProblem, apply_factored, build_green, factorize, solve_bvp

pr = OdeProblem.create("0", "1", "[0, 2]")
G = build_green(pr)
xs = np.linspace(0, 2, 9)
grid = G.grid(xs, xs)
print(f"max G over the interior grid: {grid[1:-1, 1:-1].max():.4f}  (negative as expected)")
print(f"jump of dG/dt across the diagonal at s = 1: {G.jump(1.0):.8f}")

sol = solve_bvp(OdeProblem.create("0", "1", "[0, 2]", f="1"))
t = np.linspace(0, 2, 5)
exact = 1 - np.cos(t) - (1 - np.cos(2)) / np.sin(2) * np.sin(t)
print("x'' + x = 1, x(0) = x(2) = 0:", np.max(np.abs(sol.value(t) - exact)), "max error vs closed form")

fac = factorize(OdeProblem.create("0", "1", "(0, 2)"))
ts = np.linspace(0.2, 1.8, 5)
print("h0 h1 h2 =", np.round(fac.h0(ts) * fac.h1(ts) * fac.h2(ts), 12))
lx = [apply_factored(fac, "t^2", float(s)) for s in ts]
print("L(t^2) via factors:", np.round(lx, 6), " vs 2 + t^2:", 2 + ts ** 2)
