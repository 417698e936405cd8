import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from disconj import (ConfigError, ExprSyntaxError, Interval, OdeProblem, PlanePoint,
                     halfline_substitution, in_halfplane_M, in_region_N, q_plus)


# ---------------------------------------------------------------------------
# intervals

def test_interval_needs_order():
    with pytest.raises(ValueError):
        Interval(1.0, 1.0)
    with pytest.raises(ValueError):
        Interval(2.0, 1.0)


def test_infinite_ends_are_open():
    J = Interval(-math.inf, 3.0, True, True)
    assert not J.closed_lo and J.closed_hi


def test_bracket_notation():
    J = Interval.parse("[0, 1)")
    assert (J.lo, J.hi, J.closed_lo, J.closed_hi) == (0.0, 1.0, True, False)
    assert Interval.parse(["-inf", "inf"]) == Interval.real_line()
    assert Interval.parse(["0", "pi"]).hi == pytest.approx(math.pi)


def test_contains_respects_closedness():
    J = Interval.half_open(0, 1)
    assert J.contains(0.0) and not J.contains(1.0)


def test_window_defaults():
    assert Interval.real_line().window() == (-50.0, 50.0)
    lo, hi = Interval(2.0, math.inf, False, False).window()
    assert lo == pytest.approx(2 + 1e-6) and hi == pytest.approx(102.0)


def test_covers_treats_half_open_cases_alike():
    assert Interval.half_open(0, 1).covers(Interval.open(0, 1))
    assert Interval(0, 1, False, True).covers(Interval.half_open(0, 1))
    assert not Interval.half_open(0, 1).covers(Interval.closed(0, 1))
    assert Interval.closed(0, 1).covers(Interval.closed(0, 1))
    assert Interval.half_open(0, 2).covers(Interval.closed(0, 1))


# ---------------------------------------------------------------------------
# q_plus

def test_q_plus_examples():
    pr = q_plus(OdeProblem.create("0", "t", "[-1, 1]"))
    assert pr.q(0.5) == 0.5
    assert pr.q(-0.5) == 0.0
    assert q_plus(OdeProblem.create("0", "-1")).q(7.0) == 0.0


def test_q_plus_keeps_p_and_f():
    pr = OdeProblem.create("sin(t)", "t", "[-1, 1]", f="1")
    qp = q_plus(pr)
    assert qp.p == pr.p and qp.f == pr.f


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-5, 5))
def test_q_plus_idempotent_and_dominating(c0, c1, t):
    pr = OdeProblem.create("0", f"({c0!r}) + ({c1!r})*sin(t)")
    once, twice = q_plus(pr), q_plus(q_plus(pr))
    v = once.q(t)
    assert twice.q(t) == v
    assert v >= pr.q(t) and v >= 0.0


# ---------------------------------------------------------------------------
# half-line substitution

def test_halfline_substitution_at_zero():
    out = halfline_substitution(OdeProblem.create("1/t", "0", Interval(0, math.inf, False, False)))
    assert out.interval == Interval.real_line()
    assert out.p(2.0) == pytest.approx(0.25)
    assert out.notes  # composition-only caveat is attached


def test_halfline_substitution_vertex():
    out = halfline_substitution(OdeProblem.create("0", "t", Interval(1, math.inf, False, False)))
    assert out.q(0.0) == 1.0


def test_halfline_substitution_shape_error():
    with pytest.raises(ValueError):
        halfline_substitution(OdeProblem.create("0", "t", "[0, 1]"))


# ---------------------------------------------------------------------------
# plane geometry

def test_region_N_examples():
    assert in_region_N(PlanePoint(2, 1))
    assert not in_region_N(PlanePoint(0, 1))
    assert in_region_N(PlanePoint(0, -1))


def test_halfplane_examples():
    assert in_halfplane_M(PlanePoint(0, -1), 1, "+")
    assert not in_halfplane_M(PlanePoint(0, 0), 1, "+")
    with pytest.raises(ValueError):
        in_halfplane_M(PlanePoint(0, 0), -1, "+")


@pytest.mark.parametrize("sign", ["+", "-"])
def test_halfplanes_lie_in_N(sign):
    rng = np.random.default_rng(7)
    for gamma in np.linspace(0, 10, 21):
        pts = rng.uniform(-30, 30, (1000, 2))
        # bias half the points onto the boundary line where the containment is tight
        pts[::2, 1] = -gamma ** 2 + (1 if sign == "+" else -1) * gamma * pts[::2, 0]
        for p, q in pts:
            pt = PlanePoint(float(p), float(q))
            if in_halfplane_M(pt, float(gamma), sign):
                assert in_region_N(pt)


@given(st.floats(0, 10), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.sampled_from("+-"))
def test_halfplane_subset_property(gamma, p, q, sign):
    pt = PlanePoint(p, q)
    if in_halfplane_M(pt, gamma, sign):
        assert in_region_N(pt)


# ---------------------------------------------------------------------------
# configs

def test_config_round_trip():
    pr = OdeProblem.create("t", "t^2/4 + 1/2", "[0, inf)", f="sin(t)")
    back = OdeProblem.from_config(json.dumps(pr.to_config()))
    assert back.interval == pr.interval
    for t in (0.0, 0.7, 3.0):
        assert back.p(t) == pr.p(t) and back.q(t) == pr.q(t) and back.f(t) == pr.f(t)


def test_config_defaults_to_real_line():
    pr = OdeProblem.from_config({"q": "1"})
    assert pr.interval == Interval.real_line() and pr.p(3.0) == 0.0


def test_config_numeric_coefficients():
    assert OdeProblem.from_config({"q": 4}).q(0.0) == 4.0


@pytest.mark.parametrize("cfg,field", [
    ({"q": "1", "bogus": 1}, None),
    ({"q": ["1"]}, "q"),
    ({"q": "1", "interval": [0]}, "interval"),
    ({"q": "1", "interval": [1, 0]}, "interval"),
])
def test_config_errors(cfg, field):
    with pytest.raises(ConfigError) as info:
        OdeProblem.from_config(cfg)
    if field:
        assert info.value.field == field


def test_config_bad_json_names_position():
    with pytest.raises(ConfigError, match="line 1"):
        OdeProblem.from_config('{"q": }')


def test_config_bad_expression():
    with pytest.raises(ExprSyntaxError):
        OdeProblem.from_config({"q": "t+"})
