"""How sharp is the Lyapunov bound  int_a^b q+ <= 4/(b-a)?

For each delta we build a potential on [0, 1] with a solution vanishing at
both ends and  int q  close to 4/(1 - 2 delta).  The oracle confirms the
conjugate pair (0, 1); as delta shrinks the integral drops towards 4, so the
constant cannot be improved.
"""
from disconj import Interval, OdeProblem, is_disconjugate, lyapunov_extremal
from disconj.criteria import crit_lyapunov
from disconj.integrate import adaptive_quad

print(f"{'delta':>8} {'int q':>10} {'criterion':>13}  oracle")
for delta in (0.4, 0.2, 0.1, 0.05):
    pr, bump = lyapunov_extremal(delta)
    total, _ = adaptive_quad(pr.q, [0.0, *bump.breakpoints, 1.0], epsabs=1e-10)
    rep = crit_lyapunov(pr)
    ov = is_disconjugate(pr, Interval.closed(0, 1))
    print(f"{delta:>8} {total:>10.5f} {rep.verdict.value:>13}  {ov.status.value} {ov.witness}")

# A constant potential exactly at the bound is still disconjugate on [0, 1];
# pushing past pi^2 produces a conjugate pair inside.
for c in (4.0, 10.0):
    ov = is_disconjugate(OdeProblem.create("0", str(c), "[0, 1]"), Interval.closed(0, 1))
    print(f"q = {c:>4}: {ov.status.value} {ov.witness or ''}")
