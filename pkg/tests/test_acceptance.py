"""Acceptance criteria 1-8.  Each test records a PASS/FAIL line printed at the end of the run."""
import functools
import math
import sys
import time

import numpy as np
import pytest

from disconj import (Interval, OdeProblem, PlanePoint, Status, build_green, in_region_N,
                     is_disconjugate, rho)
from disconj.constructions import lyapunov_extremal
from disconj.criteria import (Verdict, crit_char_poly, crit_constant, crit_euler,
                              crit_halfplane, crit_kernel_Q0, crit_kernel_constPQ,
                              crit_kernel_varp, crit_line, crit_lyapunov, crit_parabola,
                              crit_q_nonpositive, crit_sine, crit_thnew2, crit_thnew3,
                              crit_valleepoussin)
from disconj.expr import to_text
from disconj.integrate import adaptive_quad

from conftest import ACCEPTANCE, bounded_coefficient, num


def acceptance(n):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*a, **kw):
            t0 = time.perf_counter()
            try:
                detail = fn(*a, **kw) or ""
            except BaseException as exc:
                ACCEPTANCE[n] = (False, f"{type(exc).__name__}: {str(exc).splitlines()[0][:150]}")
                raise
            ACCEPTANCE[n] = (True, f"{detail} [{time.perf_counter() - t0:.2f}s]".strip())
        return run
    return wrap


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# ---------------------------------------------------------------------------

@acceptance(1)
def test_conjugate_point_of_sine():
    pr = OdeProblem.create("0", "1")
    cp, dt = timed(lambda: rho(pr, 0.0, "+"))
    assert abs(cp.value - math.pi) <= 1e-8
    assert dt < 0.1, dt
    return f"rho+(0) - pi = {cp.value - math.pi:.1e}, {dt * 1e3:.1f} ms"


@acceptance(2)
def test_lyapunov_sharpness():
    def body():
        pr, bump = lyapunov_extremal(0.1)
        integral, _ = adaptive_quad(pr.q, [0.0, *bump.breakpoints, 1.0], epsabs=1e-10)
        rep = crit_lyapunov(pr)
        ov = is_disconjugate(pr, Interval.closed(0, 1))
        return integral, rep, ov
    (integral, rep, ov), dt = timed(body)
    assert abs(integral - 5.0) <= 1e-3, integral
    assert rep.verdict is Verdict.INCONCLUSIVE
    assert ov.status is Status.NOT_DISCONJUGATE
    assert abs(ov.witness[0] - 0.0) <= 1e-6 and abs(ov.witness[1] - 1.0) <= 1e-6, ov.witness
    assert dt < 1.0, dt
    return f"int q = {integral:.6f}, witness ({ov.witness[0]:g}, {ov.witness[1]:.9f})"


@acceptance(3)
def test_lyapunov_boundary():
    I01 = Interval.closed(0, 1)

    def body():
        p4 = OdeProblem.create("0", "4", I01)
        p10 = OdeProblem.create("0", "10", I01)
        return crit_lyapunov(p4), is_disconjugate(p4, I01), is_disconjugate(p10, I01)
    (rep, ov4, ov10), dt = timed(body)
    assert rep.verdict is Verdict.PROVEN
    assert ov4.status is Status.DISCONJUGATE
    assert ov10.status is Status.NOT_DISCONJUGATE
    assert abs(ov10.witness[1] - math.pi / math.sqrt(10)) <= 1e-6
    assert dt < 0.5, dt
    return f"q=10 second zero {ov10.witness[1]:.9f}"


@acceptance(4)
def test_gaussian_counterexample():
    def body():
        pr = OdeProblem.create("t", "t^2/4 + 1/2")
        r3 = crit_thnew3(pr)
        hp = crit_halfplane(pr)
        ts = np.linspace(-50, 50, 2001)
        outside = [not in_region_N(PlanePoint(float(pr.p(t)), float(pr.q(t)))) for t in ts]
        disc = pr.p(ts) ** 2 - 4 * pr.q(ts)
        cps = [rho(pr, float(a), "+", horizon=100.0) for a in np.linspace(-10, 10, 20)]
        return r3, hp, outside, disc, cps
    (r3, hp, outside, disc, cps), dt = timed(body)
    assert r3.verdict is Verdict.PROVEN
    assert hp.verdict is Verdict.INCONCLUSIVE
    assert all(outside) and np.allclose(disc, -2.0, atol=1e-9)
    assert all(c.status == "none" for c in cps), [c.value for c in cps if c.value is not None]
    assert dt < 5.0, dt
    return "monotone_p Proven, halfplane Inconclusive, no conjugate point from 20 bases"


@acceptance(5)
def test_green_exactness():
    def body():
        G = build_green(OdeProblem.create("0", "0", "[0, 1]"))
        xs = np.linspace(0, 1, 21)
        T, S = np.meshgrid(xs, xs, indexing="ij")
        exact = np.where(S <= T, -(1 - T) * S, -T * (1 - S))
        err = float(np.max(np.abs(G.grid(xs, xs) - exact)))
        jumps = [G.jump(float(s)) for s in xs[1:-1]]
        return err, jumps
    (err, jumps), dt = timed(body)
    assert err <= 1e-8, err
    assert max(abs(j - 1.0) for j in jumps) <= 1e-6
    assert dt < 1.0, dt
    return f"max |G - closed form| = {err:.1e}"


# ---------------------------------------------------------------------------
# soundness sweep

N_SWEEP = 200


def _window(rng, lo=-2.0, hi=2.0):
    a = float(rng.uniform(lo, hi))
    return a, a + float(rng.uniform(0.3, 3.0))


def _closedness(rng, a, b):
    k = int(rng.integers(0, 4))
    return Interval(a, b, k in (0, 1), k in (0, 2))


def _bump(rng, scale):
    """Nonnegative trig/polynomial perturbation."""
    return f"{num(scale)}*({bounded_coefficient(rng, 1.0)})^2"


def _shift(rng, scale):
    # mostly on the favourable side, sometimes just past the boundary
    return num(float(rng.uniform(-0.15, 1.0)) * scale)


def g_constant(rng):
    a, b = _window(rng)
    p, q = rng.uniform(-4, 4), rng.uniform(-3, 6)
    J = _closedness(rng, a, b)
    return OdeProblem.create(num(p), num(q), J), lambda pr: crit_constant(pr, J)


def g_euler(rng):
    a = float(rng.choice([0.0, rng.uniform(0.1, 2)]))
    b = a + float(rng.uniform(0.5, 5))
    J = Interval(a, b, a > 0, True)
    c = float(rng.uniform(-3, 4))
    k = (c - 1) ** 2 / 4 * float(rng.uniform(0.5, 1.1))
    pert = f"{num(rng.uniform(-0.3, 0.3))}*sin({num(rng.uniform(0.5, 3))}*t)"
    pr = OdeProblem.create(f"{num(c)}/t", f"({num(k)} + {pert})/t^2", J)
    return pr, lambda pr: crit_euler(pr, J)


def g_lyapunov(rng, plus=False):
    a, b = _window(rng)
    L = b - a
    w, ph = rng.uniform(0.5, 6), rng.uniform(0, 2 * math.pi)
    amp = rng.uniform(0.0, 0.95) if not plus else rng.uniform(1.0, 3.0)
    s = 4 / L ** 2 * float(rng.uniform(0.4, 1.6))
    q = f"{num(s)}*(1 + {num(amp)}*sin({num(w)}*t + {num(ph)}))"
    J = Interval.closed(a, b)
    return OdeProblem.create("0", q, J), lambda pr: crit_lyapunov(pr, J, use_q_plus=plus)


def g_q_nonpositive(rng):
    a, b = _window(rng)
    J = _closedness(rng, a, b)
    q = f"-({_bump(rng, rng.uniform(0, 3))}) + {_shift(rng, -0.2)}"
    return OdeProblem.create(bounded_coefficient(rng, 2.0), q, J), lambda pr: crit_q_nonpositive(pr, J)


def g_sine(rng):
    a, b = _window(rng)
    L = b - a
    c = rng.uniform(-2, 2) / L ** 2
    p = f"{num(c)}*(t - {num(a)})*({num(b)} - t)*(1 + 0.5*sin(t))"
    q = f"{num((math.pi / L) ** 2 * rng.uniform(0.3, 1.2))} + {num(rng.uniform(-1, 1))}*cos(2*t)"
    J = Interval.closed(a, b)
    return OdeProblem.create(p, q, J), lambda pr: crit_sine(pr, J)


def g_parabola(rng, form):
    a, b = _window(rng, hi=1.0)
    L = b - a
    s = rng.uniform(0.2, 1.5)
    p = f"{num(s / L)}*({bounded_coefficient(rng, 1.0)})"
    q = f"{num(8 * s / L ** 2)}*({bounded_coefficient(rng, 1.0)})"
    J = Interval.closed(a, b)
    return OdeProblem.create(p, q, J), lambda pr: crit_parabola(pr, J, form=form)


def g_char_poly(rng):
    a, b = _window(rng)
    nu = float(rng.uniform(-3, 3))
    p = bounded_coefficient(rng, 2.0)
    q = f"-{num(nu * nu)} - {num(nu)}*({p}) - ({_bump(rng, 1.0)}) + {_shift(rng, -0.3)}"
    J = _closedness(rng, a, b)
    return OdeProblem.create(p, q, J), lambda pr: crit_char_poly(pr, J)


def g_valleepoussin(rng):
    a, b = _window(rng)
    v = f"2 + {num(rng.uniform(-1.5, 1.5))}*sin({num(rng.uniform(0.3, 2))}*t + {num(rng.uniform(0, 6))})"
    p = bounded_coefficient(rng, 1.0)
    from disconj.expr import differentiate, parse
    ve = parse(v)
    dv = differentiate(ve)
    lv = -(differentiate(dv) + parse(p) * dv) / ve
    q = f"{to_text(lv)} - ({_bump(rng, 0.5)}) + {_shift(rng, -0.3)}"
    J = Interval.closed(a, b)
    return OdeProblem.create(p, q, J), lambda pr: crit_valleepoussin(pr, J, v=v)


def g_constPQ(rng):
    a, b = _window(rng, hi=1.0)
    L = b - a
    P = float(rng.uniform(-3, 3))
    p = f"{num(P)} + {num(rng.uniform(0, 1) / L)}*sin({num(rng.uniform(0.5, 4))}*t)"
    q = f"{num(rng.uniform(-2, 12) / L ** 2)} + {num(rng.uniform(-2, 2) / L ** 2)}*cos(t)"
    J = Interval.closed(a, b)
    return OdeProblem.create(p, q, J), lambda pr: crit_kernel_constPQ(pr, J)


def g_Q0(rng):
    a, b = _window(rng, hi=1.0)
    L = b - a
    P = float(rng.choice([-1, 1]) * rng.uniform(0.2, 4))
    p = f"{num(P)} + {num(rng.uniform(0, 0.5) / L)}*sin({num(rng.uniform(0.5, 4))}*t)"
    q = f"{num(rng.uniform(-10, 10) / L ** 2)}*({bounded_coefficient(rng, 1.0)})"
    J = Interval.closed(a, b)
    return OdeProblem.create(p, q, J), lambda pr: crit_kernel_Q0(pr, J, P=P)


def g_varp(rng):
    a, b = _window(rng, hi=1.0)
    L = b - a
    p = f"{num(1 / L)}*({bounded_coefficient(rng, 2.0)})"
    q = f"{num(rng.uniform(2, 14) / L ** 2)} + {num(rng.uniform(-3, 3) / L ** 2)}*sin(t)"
    J = Interval.closed(a, b)
    return OdeProblem.create(p, q, J), lambda pr: crit_kernel_varp(pr, J)


def g_halfplane(rng):
    a, b = _window(rng)
    g = float(rng.uniform(0, 3))
    sg = rng.choice([1, -1])
    p = bounded_coefficient(rng, 2.0)
    q = f"-{num(g * g)} + {num(sg * g)}*({p}) - ({_bump(rng, 1.0)}) + {_shift(rng, -0.3)}"
    J = _closedness(rng, a, b)
    return OdeProblem.create(p, q, J), lambda pr: crit_halfplane(pr, J)


def g_line(rng):
    a, b = _window(rng)
    g = float(rng.uniform(0, 3))
    k = g * float(rng.uniform(-1.3, 1.3))
    p = bounded_coefficient(rng, 3.0)
    q = f"-{num(g * g)} + {num(k)}*({p})"
    J = _closedness(rng, a, b)
    return OdeProblem.create(p, q, J), lambda pr: crit_line(pr, J)


def g_thnew2(rng):
    a, b = _window(rng)
    r = f"{num(rng.uniform(-2, 1))} + {num(rng.uniform(-0.5, 0.5))}*cos(t)"
    p = rng.choice([f"{num(rng.uniform(-2, 2))}*t + {num(rng.uniform(-1, 1))}",
                    bounded_coefficient(rng, 2.0)])
    q = f"({p})^2/4 + {r} - ({_bump(rng, 0.5)}) + {_shift(rng, -0.3)}"
    J = _closedness(rng, a, b)
    return OdeProblem.create(p, q, J), lambda pr: crit_thnew2(pr, J, r=r)


def g_thnew3(rng):
    a, b = _window(rng)
    al = float(rng.uniform(0, 2))
    be = al * float(rng.uniform(-1.1, 1.0))
    w = 1.0
    sg = rng.choice([1, -1])
    p = f"{num(sg)}*({num(al)}*t + {num(be)}*sin(t))"
    dp = f"{num(sg)}*({num(al)} + {num(be * w)}*cos(t))"
    q = f"({p})^2/4 + ({dp})/2 - ({_bump(rng, 0.5)}) + {_shift(rng, -0.3)}"
    J = _closedness(rng, a, b)
    return OdeProblem.create(p, q, J), lambda pr: crit_thnew3(pr, J)


SWEEP = {
    "constant": g_constant,
    "euler": g_euler,
    "lyapunov": g_lyapunov,
    "lyapunov_q_plus": functools.partial(g_lyapunov, plus=True),
    "q_nonpositive": g_q_nonpositive,
    "sine": g_sine,
    "parabola_C1": functools.partial(g_parabola, form="C1"),
    "parabola_C2": functools.partial(g_parabola, form="C2"),
    "char_poly": g_char_poly,
    "vallee_poussin": g_valleepoussin,
    "kernel_constPQ": g_constPQ,
    "kernel_Q0": g_Q0,
    "kernel_varp": g_varp,
    "halfplane": g_halfplane,
    "line": g_line,
    "r_condition": g_thnew2,
    "monotone_p": g_thnew3,
}


def _sweep(name, seed):
    rng = np.random.default_rng(seed)
    gen = SWEEP[name]
    proven = undetermined = 0
    bad = []
    for _ in range(N_SWEEP):
        pr, check = gen(rng)
        rep = check(pr)
        if not rep.proven:
            continue
        proven += 1
        J = rep.interval
        ov = is_disconjugate(pr.with_interval(Interval(min(J.lo, pr.interval.lo),
                                                       max(J.hi, pr.interval.hi))), J)
        if ov.status is Status.NOT_DISCONJUGATE:
            bad.append((pr.to_config(), str(J), ov.witness))
        elif ov.status is Status.UNDETERMINED:
            undetermined += 1
    return proven, undetermined, bad


_SWEEP_RESULTS = {}


@pytest.mark.parametrize("name", list(SWEEP))
def test_soundness_sweep(name):
    seed = 1000 + list(SWEEP).index(name)
    t0 = time.perf_counter()
    proven, undetermined, bad = _sweep(name, seed)
    _SWEEP_RESULTS[name] = (proven, undetermined, len(bad), time.perf_counter() - t0)
    assert not bad, bad[:3]
    # the sweep is only informative if the generator reaches Proven often enough
    assert proven >= 20, proven


@acceptance(6)
def test_soundness_summary():
    missing = [n for n in SWEEP if n not in _SWEEP_RESULTS]
    for n in missing:  # run on its own, e.g. with -k
        test_soundness_sweep(n)
    total = sum(r[3] for r in _SWEEP_RESULTS.values())
    bad = sum(r[2] for r in _SWEEP_RESULTS.values())
    proven = sum(r[0] for r in _SWEEP_RESULTS.values())
    assert bad == 0
    assert total < 300, total
    return (f"{len(SWEEP)} criteria x {N_SWEEP} problems, {proven} Proven, "
            f"0 refuted by the oracle, sweep time {total:.1f}s")


# ---------------------------------------------------------------------------
# property suites

@acceptance(7)
def test_property_suites():
    import test_factorize
    import test_greens
    import test_oracle
    suites = [
        ("separation x50", test_oracle.test_separation_trials),
        ("rho monotone x20", test_oracle.test_rho_monotone_trials),
        ("comparison x50", test_oracle.test_comparison_trials),
        ("factorization identity 20x20", test_factorize.test_factored_identity),
        ("generalized Rolle x30", test_greens.test_generalized_rolle_trials),
        ("h0 h1 h2 = 1", test_factorize.test_factors_positive_and_product_one),
    ]
    for _, fn in suites:
        fn()
    return ", ".join(n for n, _ in suites)


# ---------------------------------------------------------------------------
# subsumption

def _sign_coherent_problem(rng):
    """Random ``[a, b)`` problem with ``p (mid - t) >= 0``, ``p = O((t-a)(b-t))`` and ``q >= 0``.

    On this class ``L v <= 0`` for ``v = (b-t)(t-a)/2`` is literally the first parabola test, so
    the verdicts must coincide; outside it the absolute values in that test make
    it strictly weaker than the test-function form.
    """
    a, b = _window(rng, hi=1.0)
    L = b - a
    m = (a + b) / 2
    c = float(rng.uniform(0, 8)) / L ** 3 if rng.random() < 0.7 else 0.0
    p = f"{num(c)}*(t - {num(a)})*({num(b)} - t)*({num(m)} - t)*(1 + 0.5*cos(t)^2)"
    q = f"{num(rng.uniform(0, 14) / L ** 2)}*(0.3 + sin({num(rng.uniform(0.3, 3))}*t + {num(rng.uniform(0, 6))})^2)"
    return OdeProblem.create(p, q, Interval.half_open(a, b)), a, b


@acceptance(8)
def test_subsumption():
    rng = np.random.default_rng(808)
    counts = {}
    for _ in range(50):
        pr, a, b = _sign_coherent_problem(rng)
        J = pr.interval
        L = b - a
        pairs = [
            ("q_nonpositive", crit_valleepoussin(pr, J, v="1"), crit_q_nonpositive(pr, J)),
            ("sine", crit_valleepoussin(pr, J, v=f"sin(pi*(t - {num(a)})/{num(L)})"), crit_sine(pr, J)),
            ("parabola_C1", crit_valleepoussin(pr, J, v=f"({num(b)} - t)*(t - {num(a)})/2"),
             crit_parabola(pr, J, form="C1")),
        ]
        # v = 1 needs no sign structure; mirror q so that both outcomes occur
        neg = OdeProblem.create(to_text(pr.p), f"-({to_text(pr.q)}) + {num(rng.uniform(-0.1, 0.5))}", J)
        pairs.append(("q_nonpositive", crit_valleepoussin(neg, J, v="1"), crit_q_nonpositive(neg, J)))
        for name, vp, crit in pairs:
            assert vp.verdict is crit.verdict, (name, pr.to_config(), vp.message, crit.message)
            counts.setdefault(name, [0, 0])[vp.proven] += 1
    # both outcomes must occur for the comparison to mean anything
    for name in counts:
        assert min(counts[name]) >= 5, counts
    return "; ".join(f"{k}: {v[1]} Proven / {v[0]} not" for k, v in counts.items())


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
