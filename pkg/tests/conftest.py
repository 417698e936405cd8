import math
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from disconj import Interval, OdeProblem

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True)
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


# acceptance results collected by tests/test_acceptance.py and echoed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"acceptance {n}: {'PASS' if ok else 'FAIL'}  {detail}")


def num(x: float) -> str:
    """Literal safe to splice into an expression string."""
    return f"({float(x)!r})"


def poly(rng, deg: int, scale: float) -> str:
    cs = rng.uniform(-scale, scale, deg + 1)
    return " + ".join(f"{num(c)}*t^{k}" for k, c in enumerate(cs))


def trig(rng, scale: float) -> str:
    c0, c1 = rng.uniform(-scale, scale, 2)
    k = rng.uniform(0.2, 3.0)
    ph = rng.uniform(0, 2 * math.pi)
    return f"{num(c0)} + {num(c1)}*sin({num(k)}*t + {num(ph)})"


def coefficient(rng, scale: float) -> str:
    return poly(rng, int(rng.integers(0, 3)), scale) if rng.random() < 0.5 else trig(rng, scale)


def bounded_coefficient(rng, scale: float) -> str:
    """Polynomial in ``t/3`` or trig term; stays within about ``3 scale`` on ``[-3, 3]``."""
    if rng.random() < 0.5:
        return trig(rng, scale)
    cs = rng.uniform(-scale, scale, int(rng.integers(1, 4)))
    return " + ".join(f"{num(c)}*(t/3)^{k}" for k, c in enumerate(cs))


def random_window(rng, lo=-3.0, hi=3.0, min_len=0.3, max_len=4.0) -> Interval:
    a = rng.uniform(lo, hi)
    L = rng.uniform(min_len, max_len)
    kind = rng.integers(0, 4)
    return Interval(a, a + L, bool(kind & 1) or kind == 0, bool(kind & 2) or kind == 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def problem(p, q, J, f=None) -> OdeProblem:
    return OdeProblem.create(p, q, J, f=f)
