"""Command-line front end: ``disconj {check,conjugate,green,factor,bvp}``.

A problem comes from a JSON config (``--config``), inline flags, or both;
flags win.  Every report carries the schema tag, tool version, tolerances,
grid and horizon so a run can be reproduced from its output alone.

Exit codes: 0 success (for ``check``: disconjugacy established), 1 the
oracle found two zeros, 2 nothing conclusive, 3 bad config, 4 expression
syntax, 5 numerical failure, 6 violated precondition.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .criteria import GRID, Verdict, run_battery
from .expr import ExprError, ExprSyntaxError
from .factorize import factorize
from .greens import build_green, solve_bvp
from .integrate import IntegrationError
from .oracle import HORIZON, Status, rho
from .problem import ConfigError, Interval, OdeProblem, PreconditionError

__all__ = ["RunConfig", "main", "build_config", "cmd_check", "cmd_conjugate",
           "cmd_green", "cmd_factor", "cmd_bvp", "SCHEMA", "EXIT"]

SCHEMA = "dk/1"
EXIT = {"ok": 0, "not_disconjugate": 1, "inconclusive": 2, "config": 3, "syntax": 4,
        "numerical": 5, "precondition": 6}
COMMANDS = ("check", "conjugate", "green", "factor", "bvp")
DEFAULT_GRID = {"check": GRID, "conjugate": GRID, "green": 21, "factor": 201, "bvp": 101}
RUN_KEYS = {"command", "grid", "tol", "horizon", "format", "out", "seed", "a", "side",
            "nu_max", "gamma_max", "oracle", "r", "v"}
PROBLEM_KEYS = {"p", "q", "f", "interval", "closed_lower", "closed_upper"}


@dataclass
class RunConfig:
    problem: OdeProblem
    command: str = "check"
    grid: int = GRID
    tol: float = 1e-10
    horizon: float = HORIZON
    format: str = "json"
    out: str | None = None
    seed: int = 0
    a: float | None = None
    side: str = "+"
    nu_max: float = 100.0
    gamma_max: float = 100.0
    oracle: bool = True
    r: str = "0"
    v: str | None = None
    problem_config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}", "command")
        if not (isinstance(self.grid, int) and self.grid >= 3):
            raise ConfigError("grid density must be an integer >= 3", "grid")
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise ConfigError("tolerance must be positive", "tol")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive", "horizon")
        if self.format not in ("json", "csv", "pretty"):
            raise ConfigError("format must be json, csv or pretty", "format")
        if self.side not in ("+", "-"):
            raise ConfigError("side must be '+' or '-'", "side")
        for name in ("nu_max", "gamma_max"):
            if not getattr(self, name) > 0:
                raise ConfigError("search bound must be positive", name)

    def settings(self) -> dict:
        return {"grid": self.grid, "tolerances": {"rtol": self.tol, "atol": self.tol * 1e-2},
                "horizon": self.horizon, "seed": self.seed,
                "search": {"nu_max": self.nu_max, "gamma_max": self.gamma_max}}


# ----------------------------------------------------------------------------
# config assembly

def _load_file(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", "config") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
                          "config") from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", "config")
    if "problem" in data:
        prob = data.pop("problem")
        if not isinstance(prob, dict):
            raise ConfigError("must be an object", "problem")
        data.update(prob)
    unknown = set(data) - RUN_KEYS - PROBLEM_KEYS
    if unknown:
        raise ConfigError(f"unknown field(s) {sorted(unknown)}", "config")
    return data


_CLOSED = {"both": (True, True), "lower": (True, False), "upper": (False, True),
           "none": (False, False)}


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge the config file (if any) with command-line flags; flags take precedence."""
    data = _load_file(args.config) if args.config else {}
    data["command"] = args.command
    for key in ("p", "q", "f", "interval", "grid", "tol", "horizon", "format", "out", "seed",
                "a", "side", "nu_max", "gamma_max", "r", "v"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    if getattr(args, "closed", None):
        data["closed_lower"], data["closed_upper"] = _CLOSED[args.closed]
    if getattr(args, "no_oracle", False):
        data["oracle"] = False
    pcfg = {k: data[k] for k in PROBLEM_KEYS if k in data}
    problem = OdeProblem.from_config(pcfg)
    run = {k: data[k] for k in RUN_KEYS if k in data}
    grid = run.pop("grid", None)
    grid = DEFAULT_GRID[args.command] if grid is None else grid
    if isinstance(grid, float) and grid.is_integer():
        grid = int(grid)
    try:
        return RunConfig(problem=problem, grid=grid, problem_config=problem.to_config(),
                         **{k: v for k, v in run.items() if k != "grid"})
    except TypeError as exc:
        raise ConfigError(str(exc), "config") from None


# ----------------------------------------------------------------------------
# commands; each returns (exit code, report dict)

def _envelope(cfg: RunConfig, result: dict) -> dict:
    return {"schema": SCHEMA, "version": __version__, "command": cfg.command,
            "problem": cfg.problem_config, "settings": cfg.settings(), "result": result}


def cmd_check(cfg: RunConfig):
    prob = cfg.problem
    batt = run_battery(prob, prob.interval, grid=cfg.grid, r=cfg.r, v=cfg.v,
                       oracle=cfg.oracle,
                       oracle_kw={"horizon": cfg.horizon, "rtol": cfg.tol, "atol": cfg.tol * 1e-2})
    ov = batt.oracle
    if (ov is not None and ov.status is Status.NOT_DISCONJUGATE) or batt.verdict is Verdict.DISPROVEN:
        code = EXIT["not_disconjugate"]
    elif batt.verdict is Verdict.PROVEN or (ov is not None and ov.status is Status.DISCONJUGATE):
        code = EXIT["ok"]
    else:
        code = EXIT["inconclusive"]
    result = batt.to_dict()
    result["exit_code"] = code
    report = _envelope(cfg, result)
    report["_csv"] = batt.to_csv()
    return code, report


def cmd_conjugate(cfg: RunConfig):
    prob = cfg.problem
    a = cfg.a
    if a is None:
        J = prob.interval
        if not math.isfinite(J.lo if cfg.side == "+" else J.hi):
            raise ConfigError("base point required for this interval", "a")
        a = J.lo if cfg.side == "+" else J.hi
    if not prob.interval.contains(a) and a not in (prob.interval.lo, prob.interval.hi):
        raise ConfigError(f"base point {a} outside {prob.interval}", "a")
    cp = rho(prob, a, cfg.side, horizon=cfg.horizon, rtol=cfg.tol, atol=cfg.tol * 1e-2)
    if cp.status == "failed":
        raise IntegrationError(cp.message)
    res = cp.to_dict()
    res["text"] = (f"rho{cp.side}({a:g}) = {cp.value:.15g}" if cp.finite
                   else f"rho{cp.side}({a:g}): none within horizon")
    report = _envelope(cfg, res)
    report["_csv"] = _table(["base", "side", "value", "error", "status"],
                            [[a, cp.side, "" if cp.value is None else cp.value, cp.error, cp.status]])
    return EXIT["ok"], report


def cmd_green(cfg: RunConfig):
    G = build_green(cfg.problem, cfg.problem.interval)
    xs = np.linspace(G.a, G.b, cfg.grid)
    vals = G.grid(xs, xs)
    rows = [[t, s, vals[i, j]] for i, t in enumerate(xs) for j, s in enumerate(xs)]
    res = {"a": G.a, "b": G.b, "C_ba": G.C_ba, "columns": ["t", "s", "G"], "rows": rows}
    report = _envelope(cfg, res)
    report["_csv"] = _table(["t", "s", "G"], rows)
    return EXIT["ok"], report


def cmd_factor(cfg: RunConfig):
    fac = factorize(cfg.problem, cfg.problem.interval)
    ts = fac.grid(cfg.grid)
    h0, h1, h2 = (np.atleast_1d(h) for h in fac.factors(ts))
    rows = [list(r) for r in zip(ts, h0, h1, h2)]
    prod = h0 * h1 * h2
    res = {"columns": ["t", "h0", "h1", "h2"], "rows": rows,
           "max_product_deviation": float(np.max(np.abs(prod - 1)))}
    report = _envelope(cfg, res)
    report["_csv"] = _table(["t", "h0", "h1", "h2"], rows)
    return EXIT["ok"], report


def cmd_bvp(cfg: RunConfig):
    sol = solve_bvp(cfg.problem, cfg.problem.interval, nodes=cfg.grid)
    xs, dxs = sol(sol.nodes)
    rows = [list(r) for r in zip(sol.nodes, xs, dxs)]
    res = {"columns": ["t", "x", "dx"], "rows": rows, "shooting_discrepancy": sol.discrepancy}
    report = _envelope(cfg, res)
    report["_csv"] = _table(["t", "x", "dx"], rows)
    return EXIT["ok"], report


HANDLERS = {"check": cmd_check, "conjugate": cmd_conjugate, "green": cmd_green,
            "factor": cmd_factor, "bvp": cmd_bvp}


# ----------------------------------------------------------------------------
# rendering

def _num(x):
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return x


def _table(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_num(c) for c in r])
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items() if not k.startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else "-inf" if obj < 0 else "nan"
    return obj


def _pretty(report: dict) -> str:
    res = report["result"]
    lines = [f"disconj {report['version']}  {report['command']}  "
             f"p = {report['problem']['p']}, q = {report['problem']['q']}"]
    if report["command"] == "check":
        lines.append(f"interval {res['interval']}: {res['verdict']}")
        for c in res["criteria"]:
            wit = ", ".join(f"{k}={_num(v)}" for k, v in c["witness"].items())
            lines.append(f"  {c['criterion']:<22} {c['verdict']:<14} {c['interval'] or '':<18} {wit}")
        if res["oracle"]:
            o = res["oracle"]
            lines.append(f"  oracle: {o['status']}" + (f", zeros at {o['witness']}" if o["witness"] else "")
                         + f" ({o['message']})")
        lines.append("  (pointwise criteria are sampled on a grid: semi-verified)")
    elif report["command"] == "conjugate":
        lines.append(res["text"])
    else:
        cols = res["columns"]
        lines.append("  ".join(f"{c:>14}" for c in cols))
        for r in res["rows"]:
            lines.append("  ".join(f"{v:>14.8g}" for v in r))
    return "\n".join(lines) + "\n"


def render(report: dict, fmt: str) -> str:
    if fmt == "csv":
        return report["_csv"]
    if fmt == "pretty":
        return _pretty(_clean(report))
    return json.dumps(_clean(report), indent=2) + "\n"


def _error_report(kind: str, message: str, extra: dict | None = None) -> dict:
    return {"schema": SCHEMA, "version": __version__, "error": {"kind": kind, "message": message,
                                                                 **(extra or {})}}


# ----------------------------------------------------------------------------
# argument parsing

def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="disconj", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("problem")
    g.add_argument("--config", help="JSON config file (flags override its fields)")
    g.add_argument("--p", help="coefficient p(t)")
    g.add_argument("--q", help="coefficient q(t)")
    g.add_argument("--f", help="right-hand side f(t) (bvp)")
    g.add_argument("--interval", help="'a,b', '[a,b)' etc.; use --interval=-inf,inf for negative starts")
    g.add_argument("--closed", choices=sorted(_CLOSED), help="which finite ends are closed")
    r = common.add_argument_group("run")
    r.add_argument("--grid", type=int, help="grid density (points per axis)")
    r.add_argument("--tol", type=float, help="relative integration tolerance")
    r.add_argument("--horizon", type=float, help="conjugate-point search horizon")
    r.add_argument("--format", choices=("json", "csv", "pretty"))
    r.add_argument("--out", help="write the report here instead of stdout")
    r.add_argument("--seed", type=int, help="RNG seed (recorded in the report)")
    sub.add_parser("check", parents=[common], help="run the criteria battery and the oracle")
    sub.choices["check"].add_argument("--r", help="auxiliary function r(t) for the r-condition test")
    sub.choices["check"].add_argument("--v", help="test function for the Vallee-Poussin check")
    sub.choices["check"].add_argument("--nu-max", dest="nu_max", type=float)
    sub.choices["check"].add_argument("--gamma-max", dest="gamma_max", type=float)
    sub.choices["check"].add_argument("--no-oracle", action="store_true")
    c = sub.add_parser("conjugate", parents=[common], help="conjugate point rho+-(a)")
    c.add_argument("--a", type=float, help="base point (default: the interval end)")
    c.add_argument("--side", choices=("+", "-"))
    sub.add_parser("green", parents=[common], help="Green's function grid (t, s, G)")
    sub.add_parser("factor", parents=[common], help="factorization columns (t, h0, h1, h2)")
    sub.add_parser("bvp", parents=[common], help="solve x'' + p x' + q x = f, x(a) = x(b) = 0")
    return ap


def run(argv=None) -> tuple[int, str, str | None]:
    """Parse ``argv`` and execute; returns ``(exit code, rendered output, output path)``."""
    args = make_parser().parse_args(argv)
    out = args.out
    try:
        cfg = build_config(args)
        out = cfg.out
        code, report = HANDLERS[cfg.command](cfg)
        return code, render(report, cfg.format), out
    except ExprSyntaxError as exc:
        if exc.source:
            sys.stderr.write(exc.source + "\n" + " " * exc.offset + "^\n")
        code, err = EXIT["syntax"], _error_report(
            "syntax", str(exc), {"offset": exc.offset, "source": exc.source,
                                 "expected": list(exc.expected)})
    except ConfigError as exc:
        code, err = EXIT["config"], _error_report("config", str(exc), {"field": exc.field})
    except PreconditionError as exc:
        code, err = EXIT["precondition"], _error_report("precondition", str(exc))
    except (IntegrationError, ArithmeticError, ExprError) as exc:
        code, err = EXIT["numerical"], _error_report("numerical", str(exc))
    except ValueError as exc:
        code, err = EXIT["config"], _error_report("config", str(exc))
    return code, json.dumps(err, indent=2) + "\n", None


def main(argv=None) -> int:
    code, text, out = run(argv)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
