"""Command-line front end.

Every subcommand builds a table (a header plus rows) and writes it as CSV or
JSON. Rate-valued columns are divided by ln 2 only when ``--units bits`` is
chosen; parameters such as r and D are never converted.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .errors import DegenerateSpectrum, Infeasible, InvalidInput, NotApplicable, RemoteRDError
from .matching import (
    DEFAULT_SEED,
    check_theorem8_window,
    circulant4_rho,
    run_all_checks,
    theorem8_closed_form,
    theorem9_curve,
)
from .model import (
    SourceSpec,
    as_rates,
    build_circulant4,
    build_equicorrelated,
    check_distortion,
    common_boundary_rate,
    equicorr_inverse_coeffs,
    load_model,
    mmse_trace,
)
from .region import (
    all_endpoints,
    inner_bound,
    outer_bound,
    parametric_curve,
    point_in_bound,
    subset_label,
    sum_rate_lower_cyclic,
    sum_rate_min,
)
from .selftest import run_selftest

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4
COMMANDS = ("region", "endpoints", "sum-rate", "curve", "matching", "selftest")
LN2 = math.log(2.0)


@dataclass
class Table:
    """Tabular output; ``rate_columns`` name the columns converted for ``--units bits``."""

    columns: list[str]
    rows: list[list]
    rate_columns: frozenset = frozenset()
    meta: dict = field(default_factory=dict)


def parse_model(desc: str) -> SourceSpec:
    kind, _, arg = desc.partition(":")
    try:
        if kind == "file":
            return load_model(arg)
        nums = [float(x) for x in arg.split(",")] if arg else []
        if kind == "equicorr" and len(nums) == 3:
            if nums[0] != int(nums[0]):
                raise InvalidInput("L must be an integer")
            return build_equicorrelated(int(nums[0]), nums[1], nums[2])
        if kind == "circulant4" and len(nums) == 2:
            return build_circulant4(nums[0], nums[1])
    except ValueError as exc:
        raise InvalidInput(f"bad model descriptor {desc!r}: {exc}") from None
    raise InvalidInput(
        f"bad model descriptor {desc!r}; expected equicorr:L,rho,sigma2 | circulant4:rho,sigma2 | file:path"
    )


def parse_rates(text: str | None, L: int) -> np.ndarray | None:
    if text is None:
        return None
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise InvalidInput(f"--r must be comma-separated numbers, got {text!r}") from None
    return as_rates(vals, L)


def _need(value, flag: str, command: str):
    if value is None:
        raise InvalidInput(f"{command} requires {flag}")
    return value


def _default_r(spec: SourceSpec, D: float, r: np.ndarray | None) -> np.ndarray:
    if r is not None:
        return r
    if D >= spec.trace_cov:
        return np.zeros(spec.L)
    return np.full(spec.L, common_boundary_rate(spec, D))


def _feasible_D(spec: SourceSpec, D: float) -> float:
    if not (math.isfinite(D) and D > 0):
        raise InvalidInput("--D must be finite and positive")
    return D


def cmd_region(spec: SourceSpec, args) -> Table:
    D = _feasible_D(spec, _need(args.D, "--D", "region"))
    r = _default_r(spec, D, parse_rates(args.r, spec.L))
    outer = outer_bound(spec, D, r)
    inner = inner_bound(spec, r)
    rows = []
    for mask in range(1, 1 << spec.L):
        o, i = outer[mask], inner[mask]
        rows.append([mask, subset_label(mask, spec.L), o, i, i - o])
    meta = {"D": D, "r": r.tolist(), "trivial": D >= spec.trace_cov,
            "boundary_residual": (mmse_trace(spec, r) - D) / D}
    return Table(["mask", "subset", "outer", "inner", "gap"], rows,
                 frozenset({"outer", "inner", "gap"}), meta)


def cmd_endpoints(spec: SourceSpec, args) -> Table:
    D = _feasible_D(spec, _need(args.D, "--D", "endpoints"))
    r = _default_r(spec, D, parse_rates(args.r, spec.L))
    outer = outer_bound(spec, D, r)
    inner = inner_bound(spec, r)
    names = [f"R{i + 1}" for i in range(spec.L)]
    rows = []
    for k, p in enumerate(all_endpoints(outer)):
        rows.append([k] + [float(x) for x in p] + [float(np.sum(p)), point_in_bound(inner, p)])
    return Table(["index"] + names + ["sum", "in_inner"], rows,
                 frozenset(names + ["sum"]), {"D": D, "r": r.tolist()})


def cmd_sum_rate(spec: SourceSpec, args) -> Table:
    D = check_distortion(spec, _need(args.D, "--D", "sum-rate"))
    res = sum_rate_min(spec, D, seed=args.seed)
    rows = [["sum_rate_min", res.value]]
    rows += [[f"argmin_r{i + 1}", float(x)] for i, x in enumerate(res.argmin)]
    rows += [["boundary_residual", res.boundary_residual], ["n_starts", res.n_starts]]
    rate_keys = {"sum_rate_min"}
    if spec.is_cyclic():
        low = sum_rate_lower_cyclic(spec, D)
        rows += [["lower_cyclic", low.value], ["lower_cyclic_r_min", low.r_min],
                 ["r_star", low.r_star], ["lower_cyclic_monotone", low.monotone]]
        rate_keys.add("lower_cyclic")
        rho = spec.equicorrelation()
        if rho is not None and spec.L >= 2:
            a, b = equicorr_inverse_coeffs(spec.L, rho)
            c = float(spec.precision_gain[0])
            if check_theorem8_window(a, b, c, spec.L, D).holds:
                try:
                    r_sum, r_opt = theorem8_closed_form(a, b, c, spec.L, D, rho)
                except (NotApplicable, Infeasible):
                    pass
                else:
                    rows += [["closed_form", r_sum], ["closed_form_r_opt", r_opt]]
                    rate_keys.add("closed_form")
    # per-row conversion: only the value cell of rate-valued quantities
    return Table(["quantity", "value"], rows, frozenset(), {"D": D, "rate_rows": sorted(rate_keys)})


def cmd_curve(spec: SourceSpec, args) -> Table:
    n = args.grid if args.grid is not None else 200
    if n < 2:
        raise InvalidInput("--grid must be at least 2")
    grid = np.geomspace(1e-3, 8.0, n)
    pts = parametric_curve(spec, grid)
    columns = ["r", "D", "R"]
    rows = [[float(r), d, R] for r, (d, R) in zip(grid, pts)]
    rate = {"R"}
    rho = circulant4_rho(spec)
    if rho is not None:
        try:
            extra = theorem9_curve(rho, float(spec.noise_var[0]), grid)
        except NotApplicable:
            extra = None
        if extra is not None:
            columns += ["D_closed", "R_closed"]
            rate.add("R_closed")
            rows = [row + [d, R] for row, (d, R) in zip(rows, extra)]
    return Table(columns, rows, frozenset(rate), {})


def cmd_matching(spec: SourceSpec, args) -> Table:
    D = check_distortion(spec, _need(args.D, "--D", "matching"))
    n = args.samples if args.samples is not None else 1000
    if n < 1:
        raise InvalidInput("--samples must be positive")
    rows = []
    for rep in run_all_checks(spec, D, n, args.seed):
        wit = ";".join(_fmt(float(x)) for w in rep.witnesses for x in np.ravel(w))
        rows.append([rep.condition_id, rep.verdict, rep.slack, wit])
    return Table(["condition_id", "verdict", "slack", "witness"], rows, frozenset(), {"D": D})


def cmd_selftest(spec: SourceSpec | None, args) -> Table:
    n = args.samples if args.samples is not None else 200
    if n < 1:
        raise InvalidInput("--samples must be positive")
    res = run_selftest(args.seed, n, spec)
    rows = [[s.name, "pass" if s.passed else "fail", s.count, s.worst, s.tol] for s in res]
    return Table(["suite", "result", "count", "worst", "tol"], rows, frozenset(),
                 {"all_passed": all(s.passed for s in res)})


HANDLERS = {
    "region": cmd_region,
    "endpoints": cmd_endpoints,
    "sum-rate": cmd_sum_rate,
    "curve": cmd_curve,
    "matching": cmd_matching,
    "selftest": cmd_selftest,
}


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def convert_units(table: Table, units: str) -> Table:
    """Divide rate-valued cells by ln 2 for bits; the input table is left untouched."""
    if units == "nats":
        return table
    idx = [k for k, c in enumerate(table.columns) if c in table.rate_columns]
    rate_rows = set(table.meta.get("rate_rows", ()))
    rows = []
    for row in table.rows:
        row = list(row)
        for k in idx:
            row[k] = row[k] / LN2
        if rate_rows and row[0] in rate_rows:
            row[1] = row[1] / LN2
        rows.append(row)
    return Table(table.columns, rows, table.rate_columns, table.meta)


def render(table: Table, fmt: str, command: str, model: str, units: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_fmt(x) for x in row])
        return buf.getvalue()
    doc = {
        "command": command,
        "model": model,
        "units": units,
        "meta": table.meta,
        "rows": [dict(zip(table.columns, [_jsonable(x) for x in row])) for row in table.rows],
    }
    return json.dumps(doc, indent=2) + "\n"


def _jsonable(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="remote-rd",
        description="Rate-region bounds for Gaussian sources observed through noisy encoders.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--model", required=name != "selftest",
                       help="equicorr:L,rho,sigma2 | circulant4:rho,sigma2 | file:path")
        s.add_argument("--D", type=float, help="sum distortion")
        s.add_argument("--r", help="comma-separated auxiliary rates (one value is broadcast)")
        s.add_argument("--out", help="output file (default stdout)")
        s.add_argument("--format", choices=("json", "csv"), default="csv")
        s.add_argument("--units", choices=("nats", "bits"), default="nats")
        s.add_argument("--seed", type=int, default=DEFAULT_SEED)
        s.add_argument("--samples", type=int)
        s.add_argument("--grid", type=int)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = parse_model(args.model) if args.model is not None else None
        table = HANDLERS[args.command](spec, args)
    except InvalidInput as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Infeasible as exc:
        print(f"error: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (RemoteRDError, DegenerateSpectrum, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = render(convert_units(table, args.units), args.format, args.command,
                  args.model or "", args.units)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.command == "selftest" and not table.meta["all_passed"]:
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
