"""x'' + t x' + (t^2/4 + 1/2) x = 0 has the solution exp(-t^2/4).

The point (p, q) = (t, t^2/4 + 1/2) never enters the region where a
constant-coefficient equation is disconjugate (p^2 - 4q = -2 everywhere),
so half-plane style tests cannot see it.  The monotone-p test can, and the
conjugate-point oracle agrees.
"""
import numpy as np

from disconj import OdeProblem, rho, run_battery

pr = OdeProblem.create("t", "t^2/4 + 1/2")
report = run_battery(pr, oracle=True)
for r in report.reports:
    print(f"  {r.criterion:<16} {r.verdict}")
print("  oracle:", report.oracle.status.value)

print("\nforward conjugate points from a few base points (horizon 100):")
for a in np.linspace(-10, 10, 5):
    cp = rho(pr, float(a), "+", horizon=100.0)
    print(f"  rho+({a:+.1f}) = {cp.value if cp.value is not None else 'none'}")
