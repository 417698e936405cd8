"""Numerical toolkit for disconjugacy of ``x'' + p(t) x' + q(t) x = 0``.

Coefficients are symbolic expressions in ``t``; intervals may be finite,
half-lines or the whole axis.  The package offers a conjugate-point oracle,
a battery of sufficient criteria, Green's functions and the factorization
``L = h2 d/dt h1 d/dt h0``.
"""
from .expr import (Expr, ExprDomainError, ExprError, ExprSyntaxError, NonDifferentiableError,
                   UnknownIdentifierError, as_expr, differentiate, evaluate, parse,
                   substitute, to_text)
from .problem import (ConfigError, Interval, OdeProblem, PlanePoint, PreconditionError,
                      halfline_substitution, in_halfplane_M, in_region_N, q_plus)
from .integrate import (CauchyKernel, IntegrationError, Trajectory, cauchy_function,
                        find_zeros, fundamental_system, solve_ivp, variation_of_constants,
                        wronskian)
from .oracle import (ConjugatePoint, OracleVerdict, Status, check_comparison,
                     check_rho_monotone, check_separation, is_disconjugate, rho)
from .criteria import (BatteryReport, CriterionReport, Verdict, run_battery)
from .greens import (GreenFunction, ResonanceError, build_green, positive_solution,
                     solve_bvp)
from .factorize import Factorization, apply_factored, factorize
from .constructions import equation_from_solution, lyapunov_extremal

__version__ = "0.1.0"

__all__ = [
    "Expr", "ExprError", "ExprSyntaxError", "UnknownIdentifierError", "ExprDomainError",
    "NonDifferentiableError", "parse", "evaluate", "differentiate", "to_text", "as_expr",
    "substitute",
    "Interval", "OdeProblem", "PlanePoint", "ConfigError", "PreconditionError", "q_plus",
    "halfline_substitution", "in_region_N", "in_halfplane_M",
    "Trajectory", "IntegrationError", "solve_ivp", "find_zeros", "fundamental_system",
    "wronskian", "cauchy_function", "CauchyKernel", "variation_of_constants",
    "ConjugatePoint", "OracleVerdict", "Status", "rho", "is_disconjugate",
    "check_separation", "check_rho_monotone", "check_comparison",
    "Verdict", "CriterionReport", "BatteryReport", "run_battery",
    "GreenFunction", "ResonanceError", "build_green", "solve_bvp", "positive_solution",
    "Factorization", "factorize", "apply_factored",
    "lyapunov_extremal", "equation_from_solution",
    "__version__",
]
