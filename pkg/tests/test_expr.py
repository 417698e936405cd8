import math
import threading

import numpy as np
import pytest
from hypothesis import given, strategies as st

from disconj.expr import (ExprDomainError, ExprSyntaxError, NonDifferentiableError,
                          UnknownIdentifierError, differentiate, evaluate, parse, to_text)


# ---------------------------------------------------------------------------
# examples

def test_precedence_and_arithmetic():
    assert parse("t^2/4 + 1/2")(2.0) == pytest.approx(1.5, abs=1e-15)


def test_cot_at_half_pi():
    assert abs(parse("cot(pi*(t-0)/1)")(0.5)) < 1e-15


def test_incomplete_input_reports_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse("t +")
    assert info.value.offset == 3
    assert info.value.expected


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("foo(t)")
    assert info.value.offset == 0


def test_empty_source():
    with pytest.raises(ExprSyntaxError):
        parse("   ")


def test_power_is_right_associative_and_binds_over_unary_minus():
    assert parse("2^3^2")(0) == 512.0
    assert parse("-t^2")(3.0) == -9.0
    assert parse("(-t)^2")(3.0) == 9.0


def test_whitespace_is_insignificant():
    assert parse(" t*  2 ")(1.5) == parse("t*2")(1.5)


def test_scientific_literals():
    assert parse("1.5e-3*t")(2.0) == pytest.approx(3e-3)


def test_sin_at_zero():
    assert evaluate(parse("sin(t)"), 0.0) == 0.0


def test_division_by_zero_is_a_domain_error():
    with pytest.raises(ExprDomainError) as info:
        evaluate(parse("1/t"), 0.0)
    assert info.value.t == 0.0


@pytest.mark.parametrize("src,t", [("log(t)", -1.0), ("sqrt(t)", -4.0), ("cot(t)", 0.0)])
def test_other_domain_errors(src, t):
    with pytest.raises(ExprDomainError):
        parse(src)(t)


def test_array_domain_error():
    with pytest.raises(ExprDomainError):
        parse("log(t)")(np.array([1.0, 0.0]))


def test_gaussian_value():
    assert parse("exp(-t^2/4)")(2.0) == pytest.approx(math.exp(-1), rel=1e-15)


def test_derivative_of_sin():
    assert differentiate(parse("sin(t)"))(0.0) == pytest.approx(1.0)


def test_derivative_of_quadratic():
    assert differentiate(parse("t^2/4"))(3.0) == pytest.approx(1.5)


def test_abs_is_not_differentiable():
    with pytest.raises(NonDifferentiableError):
        differentiate(parse("abs(t)"))


def test_vector_matches_scalar():
    e = parse("exp(-t^2/4)*cos(3*t) + t^3 - tan(t/5)")
    ts = np.linspace(-2, 2, 41)
    assert np.allclose(e(ts), [e(float(x)) for x in ts], rtol=0, atol=1e-14)


def test_printer_is_fully_parenthesized():
    assert to_text(parse("0.5 + -0.3*t")) == "(0.5 + ((-0.3) * t))"


def test_concurrent_evaluation():
    e = parse("sin(t)^2 + cos(t)^2")
    out = []

    def work():
        out.append(np.max(np.abs(e(np.linspace(-5, 5, 2001)) - 1.0)))

    threads = [threading.Thread(target=work) for _ in range(8)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert len(out) == 8 and max(out) < 1e-14


# ---------------------------------------------------------------------------
# random expression trees

_LEAVES = st.one_of(
    st.just("t"), st.just("pi"), st.just("e"),
    st.floats(-5, 5, allow_nan=False).map(lambda x: f"({x!r})"),
)
_SAFE_UNARY = ["sin", "cos", "exp"]


def _expr(depth=3):
    if depth == 0:
        return _LEAVES
    sub = _expr(depth - 1)
    return st.one_of(
        _LEAVES,
        st.tuples(st.sampled_from(_SAFE_UNARY), sub).map(lambda a: f"{a[0]}(({a[1]})/4)"),
        st.tuples(sub, st.sampled_from(["+", "-", "*"]), sub).map(lambda a: f"({a[0]} {a[1]} {a[2]})"),
        st.tuples(sub, sub).map(lambda a: f"({a[0]}) / (2 + sin({a[1]}))"),
        sub.map(lambda a: f"({a})^2"),
    )


EXPRS = _expr()


@given(EXPRS, st.integers(0, 2**31))
def test_round_trip_on_100_points(src, seed):
    e = parse(src)
    back = parse(to_text(e))
    ts = np.random.default_rng(seed).uniform(-3, 3, 100)
    for t in ts:
        a, b = e(float(t)), back(float(t))
        assert a == b or (math.isnan(a) and math.isnan(b))


@given(EXPRS, st.integers(0, 2**31))
def test_derivative_matches_central_difference(src, seed):
    e = parse(src)
    de = differentiate(e)
    h = 1e-5
    for t in np.random.default_rng(seed).uniform(-3, 3, 50):
        t = float(t)
        fd = (e(t + h) - e(t - h)) / (2 * h)
        v = de(t)
        assert abs(v - fd) <= 1e-6 * (1 + abs(v)), (src, t, v, fd)
