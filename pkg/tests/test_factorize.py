import csv
import io
import math

import numpy as np
import pytest

from disconj import (Interval, OdeProblem, PreconditionError, Status, apply_factored,
                     factorize, is_disconjugate)
from disconj.constructions import equation_from_solution
from disconj.expr import Func, differentiate, parse

from conftest import bounded_coefficient, num

I01 = Interval.closed(0, 1)


def prob(p="0", q="0", J=I01):
    return OdeProblem.create(p, q, J)


def L(pr, x, t):
    x = parse(x) if isinstance(x, str) else x
    dx = differentiate(x)
    return differentiate(dx)(t) + pr.p(t) * dx(t) + pr.q(t) * x(t)


def test_identity_factorization():
    fac = factorize(prob())
    ts = fac.grid(21)
    for h in fac.factors(ts):
        assert np.allclose(h, 1.0, atol=1e-12)


def test_identity_applied_to_square():
    fac = factorize(prob())
    for t in (0.2, 0.5, 0.9):
        assert apply_factored(fac, "t^2", t) == pytest.approx(2.0, abs=1e-6)


def test_cosine_factorization():
    fac = factorize(prob("0", "1", Interval.open(-math.pi / 2, math.pi / 2)))
    for t in (-1.2, 0.0, 0.5, 1.4):
        # y = cos and w = 1 up to one common positive scale, which cancels in h0 h1 h2
        c = fac.y.value(0.0)
        w = fac.wronskian(0.0)
        assert fac.h0(t) * c == pytest.approx(1 / math.cos(t), rel=1e-8)
        assert fac.h1(t) * w / c ** 2 == pytest.approx(math.cos(t) ** 2, rel=1e-8)
        assert fac.h2(t) * c / w == pytest.approx(1 / math.cos(t), rel=1e-8)


def test_cosine_factorization_applied():
    fac = factorize(prob("0", "1", Interval.open(-math.pi / 2, math.pi / 2)))
    assert apply_factored(fac, "t^2", 1.0) == pytest.approx(3.0, abs=1e-4)


def test_positive_solution_is_annihilated():
    pr = prob("sin(t)", "1+t")
    fac = factorize(pr)
    y = Func(fac.y.value, "y", derivative=Func(fac.y.derivative, "dy"))
    for t in (0.1, 0.5, 0.9):
        assert apply_factored(fac, y, t) == pytest.approx(0.0, abs=1e-4)


def test_factors_positive_and_product_one():
    rng = np.random.default_rng(37)
    done = 0
    while done < 10:
        J = Interval.closed(0, float(rng.uniform(0.5, 1.5)))
        pr = prob(bounded_coefficient(rng, 1.0), bounded_coefficient(rng, 4.0), J)
        if is_disconjugate(pr, J).status is not Status.DISCONJUGATE:
            continue
        fac = factorize(pr)
        ts = np.linspace(J.lo, J.hi, 20)
        h0, h1, h2 = fac.factors(ts)
        assert np.all(h0 > 0) and np.all(h1 > 0) and np.all(h2 > 0)
        assert np.max(np.abs(h0 * h1 * h2 - 1.0)) <= 1e-8
        done += 1


def test_factorization_requires_disconjugacy():
    with pytest.raises(PreconditionError):
        factorize(prob("0", "10"))


def _test_function(rng):
    kind = rng.integers(0, 3)
    c = rng.uniform(-2, 2, 4)
    if kind == 0:
        return " + ".join(f"{num(ci)}*t^{k}" for k, ci in enumerate(c))
    if kind == 1:
        return f"{num(c[0])}*sin({num(c[1])}*t) + {num(c[2])}*cos({num(c[3])}*t)"
    return f"exp({num(c[0] / 2)}*t) * ({num(c[1])} + {num(c[2])}*t)"


def test_factored_identity():
    rng = np.random.default_rng(41)
    problems = 0
    while problems < 20:
        J = Interval.closed(0, float(rng.uniform(0.5, 1.5)))
        pr = prob(bounded_coefficient(rng, 1.0), bounded_coefficient(rng, 4.0), J)
        if is_disconjugate(pr, J).status is not Status.DISCONJUGATE:
            continue
        fac = factorize(pr)
        for _ in range(20):
            x = parse(_test_function(rng))
            t = float(rng.uniform(J.lo + 0.01, J.hi - 0.01))
            Lx = L(pr, x, t)
            assert abs(apply_factored(fac, x, t) - Lx) <= 1e-4 * (1 + abs(Lx))
        problems += 1


def test_sufficiency_direction():
    # any positive v is a solution of some equation; that equation must be disconjugate
    rng = np.random.default_rng(43)
    for _ in range(15):
        c = rng.uniform(-1, 1, 3)
        v = f"2 + {num(c[0])}*sin({num(1 + c[1])}*t) + {num(c[2] / 2)}*t"
        J = Interval.closed(-1, 1)
        pr = equation_from_solution(v, p=bounded_coefficient(rng, 1.0), interval=J)
        assert is_disconjugate(pr, J).status is Status.DISCONJUGATE


def test_csv_columns():
    fac = factorize(prob())
    rows = list(csv.reader(io.StringIO(fac.to_csv(np.linspace(0, 1, 3)))))
    assert rows[0] == ["t", "h0", "h1", "h2"] and len(rows) == 4
    assert all(float(v) == pytest.approx(1.0) for r in rows[1:] for v in r[1:])
