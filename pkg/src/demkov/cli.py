"""Command-line front end.

    demkov evolve     --gamma 0.1 --delta 1.5 --omega 25 --t-min -5 --t-max 5 --n 1001
    demkov inversion  --gamma 0.1 --delta 1.5 --omega 25
    demkov sweep      --gamma 0.1 --grid delta=0.1:3:20 --grid omega=0.1:25:20:log
    demkov compare    --gamma 0.1 --delta 1.5 --omega 25 --t-min -10 --t-max 10 --n 1001
    demkov resonant   --gamma 0.1 --omega 5

Parameters come either in reduced form (--gamma/--delta/--omega, T = 1) or in
physical form (--detuning/--rabi0/--width/--dephasing), never both.  Every
float is printed with 17 significant digits, which round-trips doubles.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 comparison failure.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Optional, Sequence

import numpy as np

from .core import ModelParams, TimeSeries, final_inversion, reduce, solve, time_series
from .errors import DemkovError
from .oracle import IntegratorConfig, integrate_bloch
from .resonant import solve_resonant
from .specialfn import DEFAULT_POLICY, PrecisionPolicy

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_COMPARE = 3

COMMANDS = ("evolve", "inversion", "sweep", "compare", "resonant")
REDUCED_KEYS = ("gamma", "delta", "omega")
PHYSICAL_KEYS = ("detuning", "rabi0", "width", "dephasing")

# built-in values used when neither a flag nor the config file sets a key
DEFAULTS: dict[str, Any] = {
    "t_min": -10.0,
    "t_max": 10.0,
    "n": 201,
    "format": "csv",
    "output": None,
    "tol": 1e-6,
    "jobs": 1,
    "target_rel_error": DEFAULT_POLICY.target_rel_error,
    "max_terms": DEFAULT_POLICY.max_terms,
    "z_switch": DEFAULT_POLICY.z_switch,
    "oracle_rel_tol": IntegratorConfig.rel_tol,
    "oracle_abs_tol": IntegratorConfig.abs_tol,
    "oracle_t_start": IntegratorConfig.t_start_factor,
    "oracle_t_end": IntegratorConfig.t_end_factor,
    "oracle_max_steps": IntegratorConfig.max_steps,
}

_FLOAT_KEYS = set(REDUCED_KEYS + PHYSICAL_KEYS) | {
    "t_min", "t_max", "tol", "target_rel_error", "z_switch",
    "oracle_rel_tol", "oracle_abs_tol", "oracle_t_start", "oracle_t_end",
}
_INT_KEYS = {"n", "jobs", "max_terms", "oracle_max_steps"}


class UsageError(Exception):
    pass


class ComparisonFailed(Exception):
    pass


# ---------------------------------------------------------------------------
# run specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridAxis:
    name: str
    lo: float
    hi: float
    count: int
    scale: str = "linear"

    def __post_init__(self):
        if self.count < 1:
            raise UsageError(f"grid count for {self.name} must be >= 1")
        if self.scale not in ("linear", "log"):
            raise UsageError(f"grid scale must be linear or log, got {self.scale!r}")
        if self.scale == "log" and not (self.lo > 0 and self.hi > 0):
            raise UsageError(f"log grid for {self.name} needs positive bounds")

    def values(self) -> list[float]:
        if self.count == 1:
            return [self.lo]
        space = np.geomspace if self.scale == "log" else np.linspace
        vals = [float(v) for v in space(self.lo, self.hi, self.count)]
        # geomspace may miss the endpoints by an ulp
        vals[0], vals[-1] = self.lo, self.hi
        return vals

    @classmethod
    def parse(cls, text: str) -> "GridAxis":
        """``name=min:max:count[:linear|log]``."""
        name, sep, rest = text.partition("=")
        parts = rest.split(":")
        if not sep or len(parts) not in (3, 4):
            raise UsageError(f"bad grid {text!r}; expected name=min:max:count[:linear|log]")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise UsageError(f"bad grid numbers in {text!r}") from None
        scale = parts[3] if len(parts) == 4 else "linear"
        return cls(name.strip().replace("-", "_"), lo, hi, count, scale)


@dataclass(frozen=True)
class RunSpec:
    command: str
    values: dict[str, float]
    form: str
    grid: tuple[GridAxis, ...] = ()
    output: Optional[str] = None
    fmt: str = "csv"
    policy: PrecisionPolicy = DEFAULT_POLICY
    oracle: IntegratorConfig = field(default_factory=IntegratorConfig)
    t_min: float = -10.0
    t_max: float = 10.0
    n: int = 201
    tol: float = 1e-6
    jobs: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.fmt not in ("csv", "json"):
            raise UsageError(f"format must be csv or json, got {self.fmt!r}")

    def params(self, overrides: Optional[dict[str, float]] = None) -> ModelParams:
        vals = dict(self.values)
        vals.update(overrides or {})
        if self.form == "reduced":
            return ModelParams.from_reduced(vals.get("gamma", 0.0), vals["delta"], vals["omega"])
        return ModelParams(
            vals["detuning"], vals["rabi0"], vals.get("width", 1.0), vals.get("dephasing", 0.0)
        )


@dataclass(frozen=True)
class CompareReport:
    times: list[float]
    analytic: list[float]
    oracle: list[float]
    abs_diff: list[float]
    sup_norm: float
    tolerance: float
    passed: bool


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------

def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _json_text(obj: Any) -> str:
    """JSON with every float at 17 significant digits; non-finite floats become null."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, dict):
        inner = ", ".join(f"{json.dumps(str(k))}: {_json_text(v)}" for k, v in obj.items())
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_text(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _cell(v: Any) -> str:
    return fmt_float(v) if isinstance(v, float) else str(v)


def render(columns: Sequence[str], rows: Sequence[Sequence[Any]], fmt: str) -> str:
    if fmt == "json":
        records = [dict(zip(columns, row)) for row in rows]
        return "[\n" + ",\n".join("  " + _json_text(r) for r in records) + "\n]\n"
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    return buf.getvalue()


def write_output(text: str, path: Optional[str]) -> None:
    """Write to ``path`` atomically (temp file + rename), or to stdout."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".demkov-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_cell(text: str) -> Any:
    try:
        return float(text)
    except ValueError:
        return text


def read_csv_table(path: str) -> tuple[list[str], list[list[Any]]]:
    """Read back a table written by ``render``; numeric cells become floats."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    return header, [[_parse_cell(c) for c in line.split(",")] for line in lines[1:] if line]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _banner(route: str) -> None:
    if route == "resonant":
        print("# route: resonant (delta = 0)", file=sys.stderr)


def series_rows(ts: TimeSeries) -> list[list[float]]:
    return [[t, s.u, s.v, s.w] for t, s in zip(ts.times, ts.states)]


def cmd_evolve(spec: RunSpec) -> int:
    params = spec.params()
    if params.omega0 > 0.0:
        _banner("resonant" if reduce(params).is_resonant else "general")
    ts = time_series(params, spec.t_min, spec.t_max, spec.n, spec.policy)
    write_output(render(("t", "u", "v", "w"), series_rows(ts), spec.fmt), spec.output)
    return EXIT_OK


def cmd_resonant(spec: RunSpec) -> int:
    params = spec.params()
    if params.delta != 0.0:
        raise UsageError("the resonant command requires zero detuning")
    _banner("resonant")
    times = [float(t) for t in np.linspace(spec.t_min, spec.t_max, spec.n)]
    if params.omega0 == 0.0:
        rows = [[t, 0.0, 0.0, -1.0] for t in times]
    else:
        sol = solve_resonant(params, spec.policy)
        rows = []
        for t in times:
            b = sol.bloch(t)
            rows.append([t, b.u, b.v, b.w])
    write_output(render(("t", "u", "v", "w"), rows, spec.fmt), spec.output)
    return EXIT_OK


_INVERSION_COLUMNS = ("w_inf", "p", "est_error", "route")


def _inversion_row(params: ModelParams, policy: PrecisionPolicy) -> list[Any]:
    fi = final_inversion(params, policy)
    return [fi.w_inf, fi.probability, fi.est_error, fi.route]


def cmd_inversion(spec: RunSpec) -> int:
    row = _inversion_row(spec.params(), spec.policy)
    _banner(row[3])
    write_output(render(_INVERSION_COLUMNS, [row], spec.fmt), spec.output)
    return EXIT_OK


def _sweep_cell(args: tuple[RunSpec, dict[str, float]]) -> list[Any]:
    spec, point = args
    return _inversion_row(spec.params(point), spec.policy)


def cmd_sweep(spec: RunSpec) -> int:
    if not 1 <= len(spec.grid) <= 2:
        raise UsageError("sweep needs one or two --grid axes")
    names = [ax.name for ax in spec.grid]
    allowed = REDUCED_KEYS if spec.form == "reduced" else PHYSICAL_KEYS
    for name in names:
        if name not in allowed:
            raise UsageError(f"grid parameter {name!r} not in {allowed}")
        if name in spec.values:
            raise UsageError(f"{name} is both fixed and gridded")
    if len(set(names)) != len(names):
        raise UsageError("grid axes must be distinct")
    # itertools.product walks the last axis fastest: lexicographic in indices
    points = [dict(zip(names, combo)) for combo in product(*(ax.values() for ax in spec.grid))]
    for point in points:
        spec.params(point)  # validate before spending time
    jobs = [(spec, p) for p in points]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(j) for j in jobs]
    rows = [[p[n] for n in names] + r for p, r in zip(points, results)]
    write_output(render(tuple(names) + _INVERSION_COLUMNS, rows, spec.fmt), spec.output)
    return EXIT_OK


def compare_report(spec: RunSpec) -> CompareReport:
    params = spec.params()
    times = [float(t) for t in np.linspace(spec.t_min, spec.t_max, spec.n)]
    if params.omega0 == 0.0:
        analytic = [-1.0] * len(times)
    else:
        sol = solve(params, spec.policy)
        _banner(sol.route)
        analytic = [sol.w(t) for t in times]
    oracle = integrate_bloch(params, spec.oracle, times).w
    diffs = [abs(a - b) for a, b in zip(analytic, oracle)]
    sup = max(diffs)
    return CompareReport(times, analytic, oracle, diffs, sup, spec.tol, sup <= spec.tol)


def cmd_compare(spec: RunSpec) -> int:
    rep = compare_report(spec)
    if spec.fmt == "json":
        points = [
            {"t": t, "analytic": a, "oracle": o, "abs_diff": d}
            for t, a, o, d in zip(rep.times, rep.analytic, rep.oracle, rep.abs_diff)
        ]
        body = {"sup_norm": rep.sup_norm, "tolerance": rep.tolerance, "passed": rep.passed, "points": points}
        text = _json_text(body) + "\n"
    else:
        rows = list(zip(rep.times, rep.analytic, rep.oracle, rep.abs_diff))
        text = render(("t", "analytic", "oracle", "abs_diff"), rows, "csv")
    write_output(text, spec.output)
    verdict = "pass" if rep.passed else "FAIL"
    print(f"sup_norm={fmt_float(rep.sup_norm)} tolerance={fmt_float(rep.tolerance)} {verdict}", file=sys.stderr)
    if not rep.passed:
        raise ComparisonFailed(f"sup-norm {rep.sup_norm:.3e} exceeds {rep.tolerance:.3e}")
    return EXIT_OK


HANDLERS = {
    "evolve": cmd_evolve,
    "inversion": cmd_inversion,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "resonant": cmd_resonant,
}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("reduced parameters (T = 1)")
    g.add_argument("--gamma", type=float, help="reduced dephasing T*Gamma/2")
    g.add_argument("--delta", type=float, help="reduced detuning T*Delta/2")
    g.add_argument("--omega", type=float, help="reduced peak Rabi frequency T*Omega0/2")
    g = common.add_argument_group("physical parameters")
    g.add_argument("--detuning", type=float, help="Delta")
    g.add_argument("--rabi0", type=float, help="Omega0")
    g.add_argument("--width", type=float, help="pulse width T")
    g.add_argument("--dephasing", type=float, help="Gamma")
    g = common.add_argument_group("output")
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--output", "-o", help="output file (default stdout)")
    g.add_argument("--config", help="flat key=value file; flags take precedence")
    g = common.add_argument_group("precision")
    g.add_argument("--target-rel-error", type=float)
    g.add_argument("--max-terms", type=int)
    g.add_argument("--z-switch", type=float)
    g = common.add_argument_group("oracle")
    g.add_argument("--oracle-rel-tol", type=float)
    g.add_argument("--oracle-abs-tol", type=float)
    g.add_argument("--oracle-t-start", type=float, help="start at -factor*T")
    g.add_argument("--oracle-t-end", type=float, help="end at +factor*T")
    g.add_argument("--oracle-max-steps", type=int)

    timed = _Parser(add_help=False)
    timed.add_argument("--t-min", type=float)
    timed.add_argument("--t-max", type=float)
    timed.add_argument("--n", type=int, help="number of samples, endpoints included")

    parser = _Parser(prog="demkov", description="Exact Bloch-equation solution for the Demkov pulse.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("evolve", parents=[common, timed], help="write t,u,v,w over a time grid")
    sub.add_parser("inversion", parents=[common], help="print w(+inf) and the transition probability")
    sw = sub.add_parser("sweep", parents=[common], help="tabulate w(+inf) over a 1-D or 2-D grid")
    sw.add_argument("--grid", action="append", default=[], metavar="NAME=MIN:MAX:COUNT[:linear|log]")
    sw.add_argument("--jobs", type=int, help="worker processes")
    cmp_ = sub.add_parser("compare", parents=[common, timed], help="analytic w(t) against the oracle")
    cmp_.add_argument("--tol", type=float, help="sup-norm tolerance")
    sub.add_parser("resonant", parents=[common, timed], help="evolve through the resonant (delta = 0) solution")
    return parser


def read_config(path: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key = key.strip().replace("-", "_")
        value = value.strip()
        try:
            if key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key in _INT_KEYS:
                out[key] = int(value)
            elif key in ("format", "output"):
                out[key] = value
            elif key == "grid":
                out.setdefault("grid", []).append(value)
            else:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def spec_from_args(ns: argparse.Namespace) -> RunSpec:
    config = read_config(ns.config) if ns.config else {}

    def pick(key):
        flag = getattr(ns, key, None)
        if flag is not None and flag != []:
            return flag
        if key in config:
            return config[key]
        return DEFAULTS.get(key)

    reduced = {k: pick(k) for k in REDUCED_KEYS if pick(k) is not None}
    physical = {k: pick(k) for k in PHYSICAL_KEYS if pick(k) is not None}
    if reduced and physical:
        raise UsageError("reduced (--gamma/--delta/--omega) and physical parameters cannot be mixed")
    grid = tuple(GridAxis.parse(g) for g in (pick("grid") or []))
    grid_names = {ax.name for ax in grid}
    if physical or grid_names & set(PHYSICAL_KEYS):
        form, values, required = "physical", physical, ("detuning", "rabi0")
    else:
        form, values, required = "reduced", reduced, ("delta", "omega")
    if ns.command == "resonant":
        values.setdefault("detuning" if form == "physical" else "delta", 0.0)
    for key in required:
        if key not in values and key not in grid_names:
            raise UsageError(f"missing parameter --{key}")

    try:
        policy = PrecisionPolicy(
            target_rel_error=pick("target_rel_error"),
            max_terms=pick("max_terms"),
            z_switch=pick("z_switch"),
        )
        oracle = IntegratorConfig(
            rel_tol=pick("oracle_rel_tol"),
            abs_tol=pick("oracle_abs_tol"),
            t_start_factor=pick("oracle_t_start"),
            t_end_factor=pick("oracle_t_end"),
            max_steps=pick("oracle_max_steps"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    n = pick("n")
    if n < 2:
        raise UsageError("--n must be >= 2")
    t_min, t_max = pick("t_min"), pick("t_max")
    if not t_min < t_max:
        raise UsageError("--t-min must be below --t-max")
    jobs = pick("jobs")
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    return RunSpec(
        command=ns.command,
        values=values,
        form=form,
        grid=grid,
        output=pick("output"),
        fmt=pick("format"),
        policy=policy,
        oracle=oracle,
        t_min=t_min,
        t_max=t_max,
        n=n,
        tol=pick("tol"),
        jobs=jobs,
    )


def _check_env() -> None:
    raw = os.environ.get("DEMKOV_PRECISION_DIGITS")
    if raw is None:
        return
    try:
        digits = int(raw)
    except ValueError:
        raise UsageError(f"DEMKOV_PRECISION_DIGITS must be an integer, got {raw!r}") from None
    if digits < 1:
        raise UsageError("DEMKOV_PRECISION_DIGITS must be positive")


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        _check_env()
        ns = build_parser().parse_args(argv)
        spec = spec_from_args(ns)
        if spec.command != "sweep" and spec.grid:
            raise UsageError("--grid is only valid for sweep")
        if spec.command != "sweep":
            spec.params()
        return HANDLERS[spec.command](spec)
    except UsageError as exc:
        print(f"demkov: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ComparisonFailed as exc:
        print(f"demkov: comparison failed: {exc}", file=sys.stderr)
        return EXIT_COMPARE
    except DemkovError as exc:
        print(f"demkov: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError) as exc:
        print(f"demkov: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"demkov: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
