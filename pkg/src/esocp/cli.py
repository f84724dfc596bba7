"""Command-line front end.

Every subcommand resolves its parameters the same way (file, then inline
flags, then the built-in base case), echoes a manifest of the resolved
inputs, and writes plot-ready CSV when an output directory is given.
Exit codes: 0 success, 1 engine/domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from math import isfinite
from pathlib import Path

import numpy as np

from . import __version__
from .full_info import FullInfoResult, price_full
from .lattice import AdmissibilityError
from .model import ModelParams, ParameterError, load_params, parse_rate, validate
from .partial_info import price_partial
from .perpetual import (
    BracketError,
    DegenerateParameterError,
    NoFiniteBoundary,
    solve_perpetual,
)
from .simulate import (
    RNG_NAME,
    aggregate_stats,
    replay_batch,
    replay_policies,
    simulate_joint_path,
    surface_threshold,
)

# Base case used throughout the numerical study: at-the-money ten-year grant.
BASE_PARAMS = ModelParams(
    mu0=0.02,
    mu1=-0.02,
    sigma=0.30,
    lam=0.10,
    r=0.025,
    strike=100.0,
    maturity=10.0,
    spot=100.0,
    y0=0.0,
)

# y0 is deliberately absent: subcommands that need beliefs own a repeatable
# --y0; the model-level prior comes from the parameter file.
_PARAM_FLAGS = ("mu0", "mu1", "sigma", "lam", "r", "strike", "maturity", "spot")


def _fmt(x: float) -> str:
    if not isfinite(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))  # shortest round-trip decimal


def _resolve_params(args: argparse.Namespace) -> ModelParams:
    if args.params is not None:
        path = Path(args.params)
        if not path.exists():
            raise UsageError(f"parameter file not found: {path}")
        params = load_params(path)
    else:
        params = BASE_PARAMS
    overrides = {
        name: getattr(args, name) for name in _PARAM_FLAGS if getattr(args, name) is not None
    }
    if overrides:
        params = replace(params, **overrides)
    return validate(params)


class UsageError(Exception):
    pass


class _Output:
    """Manifest plus CSV sink; prints to stdout, writes files under --out."""

    def __init__(self, args: argparse.Namespace, command: str):
        self.out_dir = Path(args.out) if args.out else None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        self.manifest: list[tuple[str, str]] = [("command", command), ("version", __version__)]

    def record(self, key: str, value) -> None:
        if isinstance(value, float):
            value = _fmt(value)
        self.manifest.append((key, str(value)))

    def record_params(self, params: ModelParams) -> None:
        for file_key, field in (
            ("mu0", "mu0"),
            ("mu1", "mu1"),
            ("sigma", "sigma"),
            ("lambda", "lam"),
            ("r", "r"),
            ("strike", "strike"),
            ("maturity", "maturity"),
            ("spot", "spot"),
            ("y0", "y0"),
        ):
            self.record(file_key, getattr(params, field))

    def emit_manifest(self) -> None:
        lines = [f"{k}={v}" for k, v in self.manifest]
        if self.out_dir is not None:
            (self.out_dir / "manifest.txt").write_text("\n".join(lines) + "\n")
        for line in lines:
            print(f"# {line}")

    def write_csv(self, name: str, header: list[str], rows) -> None:
        if self.out_dir is None:
            return
        with open(self.out_dir / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) if isinstance(v, float) else str(v) for v in row])
        print(f"wrote {self.out_dir / name}")


def _boundary_rows(result: FullInfoResult):
    h = result.lattice.h
    b0, b1 = result.boundary(0), result.boundary(1)
    for k in range(result.lattice.n_steps + 1):
        yield (k, k * h, float(b0[k]), float(b1[k]))


def _smoothed(steps: np.ndarray, values: np.ndarray, degree: int) -> np.ndarray:
    """Polynomial-regression smoothing of the finite part of a boundary."""
    finite = np.isfinite(values)
    out = np.full_like(values, np.inf)
    if finite.sum() > degree:
        coeffs = np.polyfit(steps[finite], values[finite], degree)
        out[finite] = np.polyval(coeffs, steps[finite])
    else:
        out[finite] = values[finite]
    return out


def cmd_price_full(args: argparse.Namespace) -> int:
    params = _resolve_params(args)
    out = _Output(args, "price-full")
    out.record_params(params)
    out.record("N", args.N)
    out.record("literal_pl_exponent", args.literal_pl_exponent)
    out.emit_manifest()
    result = price_full(params, args.N, literal_exponent=args.literal_pl_exponent)
    print(f"v0 = {result.v0_root:.6f}")
    print(f"v1 = {result.v1_root:.6f}")
    out.write_csv(
        "boundary.csv",
        ["step", "time_years", "boundary_regime0", "boundary_regime1"],
        _boundary_rows(result),
    )
    return 0


def cmd_price_partial(args: argparse.Namespace) -> int:
    params = _resolve_params(args)
    y0_list = args.y0_list if args.y0_list else [params.y0]
    out = _Output(args, "price-partial")
    out.record_params(params)
    out.record("N", args.N)
    out.record("L", args.L)
    out.record("y0_list", ",".join(_fmt(y) for y in y0_list))
    out.record("literal_pl_exponent", args.literal_pl_exponent)
    out.emit_manifest()
    result = price_partial(params, args.N, args.L, literal_exponent=args.literal_pl_exponent)
    rows = []
    for y0 in y0_list:
        if not 0.0 <= y0 <= 1.0:
            raise UsageError(f"--y0 must lie in [0, 1], got {y0}")
        value = result.root_at(y0)
        print(f"u(y0={y0:g}) = {value:.6f}")
        rows.append((y0, float(value)))
    out.write_csv("values.csv", ["y0", "value"], rows)
    return 0


def cmd_boundary(args: argparse.Namespace) -> int:
    params = _resolve_params(args)
    out = _Output(args, "boundary")
    out.record_params(params)
    out.record("N", args.N)
    out.record("literal_pl_exponent", args.literal_pl_exponent)
    out.record("smooth", args.smooth)
    out.emit_manifest()
    result = price_full(params, args.N, literal_exponent=args.literal_pl_exponent)
    header = ["step", "time_years", "boundary_regime0", "boundary_regime1"]
    out.write_csv("boundary.csv", header, _boundary_rows(result))
    if args.smooth:
        steps = np.arange(args.N + 1, dtype=float)
        s0 = _smoothed(steps, result.boundary(0), args.smooth_degree)
        s1 = _smoothed(steps, result.boundary(1), args.smooth_degree)
        h = result.lattice.h
        rows = ((k, k * h, float(s0[k]), float(s1[k])) for k in range(args.N + 1))
        out.write_csv("boundary_smoothed.csv", header, rows)
    if out.out_dir is None:
        b0, b1 = result.boundary(0), result.boundary(1)
        print(f"boundary at t=0: regime0 {_fmt(float(b0[0]))}, regime1 {_fmt(float(b1[0]))}")
    return 0


def cmd_surface(args: argparse.Namespace) -> int:
    params = _resolve_params(args)
    out = _Output(args, "surface")
    out.record_params(params)
    out.record("N", args.N)
    out.record("L", args.L)
    out.record("literal_pl_exponent", args.literal_pl_exponent)
    out.emit_manifest()
    result = price_partial(
        params, args.N, args.L, literal_exponent=args.literal_pl_exponent, keep_surface=True
    )
    h = result.lattice.h

    def rows():
        for k in range(args.N + 1):
            for l, belief in enumerate(result.grid.points):
                yield (k, k * h, float(belief), float(result.surface[k, l]))

    out.write_csv("surface.csv", ["step", "time_years", "belief", "boundary_price"], rows())
    if out.out_dir is None:
        print(f"surface at t=0: y=0 -> {_fmt(float(result.surface[0, 0]))}, "
              f"y=1 -> {_fmt(float(result.surface[0, -1]))}")
    return 0


def cmd_perpetual(args: argparse.Namespace) -> int:
    params = _resolve_params(args)
    out = _Output(args, "perpetual")
    out.record_params(params)
    out.emit_manifest()
    solution = solve_perpetual(params)
    if isinstance(solution, NoFiniteBoundary):
        print(f"no finite exercise boundary: {solution.reason}")
        return 0
    for name in ("gamma", "beta", "delta", "A", "B", "C", "D", "E", "F", "x1", "x0"):
        print(f"{name} = {getattr(solution, name):.10g}")
    x_lo = args.x_min if args.x_min is not None else 0.0
    x_hi = args.x_max if args.x_max is not None else 1.5 * solution.x0
    xs = np.linspace(x_lo, x_hi, args.x_points)
    out.write_csv(
        "perpetual.csv",
        ["x", "v0", "v1"],
        ((float(x), float(solution.v0(x)), float(solution.v1(x))) for x in xs),
    )
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    params = _resolve_params(args)
    belief_starts = tuple(args.y0_list) if args.y0_list else (0.0, 0.5)
    n_export = min(args.export_paths, args.paths)
    out = _Output(args, "simulate")
    out.record_params(params)
    out.record("N", args.N)
    out.record("L", args.L)
    out.record("seed", args.seed)
    out.record("paths", args.paths)
    out.record("export_paths", n_export)
    out.record("belief_starts", ",".join(_fmt(y) for y in belief_starts))
    out.record("rng", RNG_NAME)
    out.record("literal_pl_exponent", args.literal_pl_exponent)
    out.emit_manifest()

    full = price_full(params, args.N, literal_exponent=args.literal_pl_exponent)
    partial = price_partial(
        params, args.N, args.L, literal_exponent=args.literal_pl_exponent, keep_surface=True
    )
    lattice, q, p = full.lattice, full.q, full.p

    for i in range(n_export):
        path = simulate_joint_path(params, lattice, q, p, (args.seed, i), belief_starts)
        outcomes = replay_policies(path, full, {y0: partial for y0 in belief_starts})
        exercise_step = {o.agent: o.exercise_step for o in outcomes}
        header = ["step", "time", "stock", "regime"]
        for y0 in belief_starts:
            header.append(f"belief_y0={y0:g}")
        header.append("insider_boundary")
        for y0 in belief_starts:
            header.append(f"outsider_boundary_y0={y0:g}")
        header.append("exercise_insider")
        for y0 in belief_starts:
            header.append(f"exercise_outsider_y0={y0:g}")

        def rows(path=path, exercise_step=exercise_step):
            b = (full.boundary(0), full.boundary(1))
            for k in range(args.N + 1):
                row = [k, k * lattice.h, float(path.stock[k]), int(path.regime[k])]
                row += [float(path.beliefs[y0][k]) for y0 in belief_starts]
                row.append(float(b[path.regime[k]][k]))
                row += [
                    float(surface_threshold(partial.surface[k], partial, path.beliefs[y0][k]))
                    for y0 in belief_starts
                ]
                row.append(int(exercise_step["insider"] == k))
                row += [
                    int(exercise_step[f"outsider(y0={y0:g})"] == k) for y0 in belief_starts
                ]
                yield row

        out.write_csv(f"path_{i:04d}.csv", header, rows())

    results = replay_batch(full, partial, args.paths, args.seed, belief_starts)
    table = aggregate_stats(results, lattice.h)
    print(table.as_text())
    out.write_csv(
        "summary.csv",
        ["agent", "paths", "mean_payoff", "std_payoff", "se_payoff", "exercise_frequency", "mean_exercise_time"],
        (
            (a.agent, a.n_paths, a.mean_payoff, a.std_payoff, a.se_payoff, a.exercise_frequency, a.mean_exercise_time)
            for a in table.agents
        ),
    )
    if out.out_dir is not None:
        (out.out_dir / "summary.txt").write_text(table.as_text() + "\n")
    return 0


# Parameter grid of the comparative-statics table.
TABLE1_MU0 = (0.02, 0.08, 0.18)
TABLE1_MU1 = (-0.02, -0.05, -0.10)
TABLE1_SIGMA = (0.20, 0.30, 0.40)
TABLE1_LAMBDA = (0.10, 0.20)


def cmd_table1(args: argparse.Namespace) -> int:
    params = _resolve_params(args)
    out = _Output(args, "table1")
    out.record_params(params)
    out.record("N", args.N)
    out.record("L", args.L)
    out.record("literal_pl_exponent", args.literal_pl_exponent)
    out.emit_manifest()
    rows = []
    print(f"{'mu0':>5} {'mu1':>5} {'sigma':>6} {'lambda':>6}   {'v0':>7} {'v1':>7} {'u(0)':>7} {'u(0.5)':>7}")
    for lam in TABLE1_LAMBDA:
        for sigma in TABLE1_SIGMA:
            for mu0 in TABLE1_MU0:
                for mu1 in TABLE1_MU1:
                    cell = replace(params, mu0=mu0, mu1=mu1, sigma=sigma, lam=lam)
                    full = price_full(
                        cell, args.N, literal_exponent=args.literal_pl_exponent, keep_boundaries=False
                    )
                    partial = price_partial(
                        cell, args.N, args.L, literal_exponent=args.literal_pl_exponent
                    )
                    u0, u05 = partial.root_at(0.0), partial.root_at(0.5)
                    rows.append(
                        (mu0, mu1, sigma, lam, full.v0_root, full.v1_root, float(u0), float(u05))
                    )
                    print(
                        f"{mu0:>5.0%} {mu1:>5.0%} {sigma:>6.0%} {lam:>6.0%}   "
                        f"{full.v0_root:>7.1f} {full.v1_root:>7.1f} {u0:>7.1f} {u05:>7.1f}"
                    )
    out.write_csv(
        "table1.csv", ["mu0", "mu1", "sigma", "lambda", "v0", "v1", "u0", "u05"], rows
    )
    return 0


def cmd_converge(args: argparse.Namespace) -> int:
    params = _resolve_params(args)
    out = _Output(args, "converge")
    out.record_params(params)
    out.record("N_list", ",".join(str(n) for n in args.N_list))
    out.record("L_list", ",".join(str(l) for l in args.L_list))
    out.record("L", args.L)
    out.record("N", args.N)
    out.record("literal_pl_exponent", args.literal_pl_exponent)
    out.emit_manifest()

    n_rows = []
    for n in args.N_list:
        full = price_full(params, n, literal_exponent=args.literal_pl_exponent, keep_boundaries=False)
        partial = price_partial(params, n, args.L, literal_exponent=args.literal_pl_exponent)
        n_rows.append(
            (n, full.v0_root, full.v1_root, float(partial.root_at(0.0)), float(partial.root_at(0.5)))
        )
        print(f"N={n:>6d}: v0={n_rows[-1][1]:.4f} v1={n_rows[-1][2]:.4f} "
              f"u0={n_rows[-1][3]:.4f} u05={n_rows[-1][4]:.4f}")
    out.write_csv("value_vs_n.csv", ["n", "v0", "v1", "u0", "u05"], n_rows)

    l_rows = []
    for l in args.L_list:
        partial = price_partial(params, args.N, l, literal_exponent=args.literal_pl_exponent)
        l_rows.append((l, float(partial.root_at(0.0)), float(partial.root_at(0.5))))
        print(f"L={l:>6d}: u0={l_rows[-1][1]:.4f} u05={l_rows[-1][2]:.4f}")
    out.write_csv("value_vs_l.csv", ["l", "u0", "u05"], l_rows)

    if len(n_rows) >= 2:
        last, prev = n_rows[-1], n_rows[-2]
        for idx, name in ((1, "v0"), (2, "v1"), (3, "u0"), (4, "u05")):
            print(f"|{name}(N={last[0]}) - {name}(N={prev[0]})| = {abs(last[idx]-prev[idx]):.4f}")
    if len(l_rows) >= 2:
        last, prev = l_rows[-1], l_rows[-2]
        for idx, name in ((1, "u0"), (2, "u05")):
            print(f"|{name}(L={last[0]}) - {name}(L={prev[0]})| = {abs(last[idx]-prev[idx]):.4f}")
    return 0


def _add_param_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--params", help="parameter file (key=value lines, '#' comments)")
    for name in _PARAM_FLAGS:
        flag = "--lambda" if name == "lam" else f"--{name}"
        sp.add_argument(
            flag,
            dest=name,
            type=parse_rate,
            default=None,
            help=f"override {name} (accepts e.g. '2.5%%')",
        )
    sp.add_argument("--out", help="output directory for manifest and CSV files")
    sp.add_argument(
        "--literal-pl-exponent",
        action="store_true",
        help="use the mu*sqrt(h) growth exponent instead of the mu*h default",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esocp",
        description="American ESO valuation with full/partial information on a drift change point",
    )
    parser.add_argument("--version", action="version", version=f"esocp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("price-full", help="insider (regime-observing) option values")
    _add_param_flags(sp)
    sp.add_argument("--N", type=int, default=2500, help="lattice steps")
    sp.set_defaults(func=cmd_price_full)

    sp = sub.add_parser("price-partial", help="outsider (price-filtering) option values")
    _add_param_flags(sp)
    sp.add_argument("--N", type=int, default=2500, help="lattice steps")
    sp.add_argument("--L", type=int, default=250, help="belief grid points")
    sp.add_argument("--y0", dest="y0_list", type=parse_rate, action="append",
                    help="initial belief to price at (repeatable)")
    sp.set_defaults(func=cmd_price_partial)

    sp = sub.add_parser("boundary", help="full-information exercise boundaries as CSV")
    _add_param_flags(sp)
    sp.add_argument("--N", type=int, default=2500)
    sp.add_argument("--smooth", action="store_true", help="also write a polynomial-smoothed CSV")
    sp.add_argument("--smooth-degree", type=int, default=5)
    sp.set_defaults(func=cmd_boundary)

    sp = sub.add_parser("surface", help="partial-information exercise surface as CSV")
    _add_param_flags(sp)
    sp.add_argument("--N", type=int, default=2500)
    sp.add_argument("--L", type=int, default=250)
    sp.set_defaults(func=cmd_surface)

    sp = sub.add_parser("perpetual", help="closed-form infinite-horizon solution")
    _add_param_flags(sp)
    sp.add_argument("--x-min", type=float, default=None)
    sp.add_argument("--x-max", type=float, default=None)
    sp.add_argument("--x-points", type=int, default=201)
    sp.set_defaults(func=cmd_perpetual)

    sp = sub.add_parser("simulate", help="simulate joint paths and replay both policies")
    _add_param_flags(sp)
    sp.add_argument("--N", type=int, default=2500)
    sp.add_argument("--L", type=int, default=250)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--paths", type=int, default=4, help="paths in the summary statistics")
    sp.add_argument("--export-paths", type=int, default=4, help="paths written as CSV")
    sp.add_argument("--y0", dest="y0_list", type=parse_rate, action="append",
                    help="outsider initial beliefs (repeatable; default 0 and 0.5)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("table1", help="comparative statics over the parameter grid")
    _add_param_flags(sp)
    sp.add_argument("--N", type=int, default=2500)
    sp.add_argument("--L", type=int, default=250)
    sp.set_defaults(func=cmd_table1)

    sp = sub.add_parser("converge", help="value-vs-N and value-vs-L refinement tables")
    _add_param_flags(sp)
    sp.add_argument("--N-list", type=int, nargs="+", default=[156, 312, 625, 1250, 2500])
    sp.add_argument("--L-list", type=int, nargs="+", default=[50, 100, 150, 200, 250, 300])
    sp.add_argument("--N", type=int, default=2500, help="fixed N for the L sweep")
    sp.add_argument("--L", type=int, default=250, help="fixed L for the N sweep")
    sp.set_defaults(func=cmd_converge)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        ParameterError,
        AdmissibilityError,
        DegenerateParameterError,
        BracketError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
