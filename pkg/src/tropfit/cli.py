"""Command-line front door: solve, fit, sweep, bench, repro, gen-example.

Outputs land in --out (default: current directory).  Every table and
report embeds the invoked configuration and seed, so runs replay
bit-identically.  Exit codes: 0 ok, 2 infeasible, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from . import io_formats
from .regression import (
    Dataset,
    Score,
    SlopeSet,
    evaluate,
    fit,
    gradient_slopes,
    grid_slopes,
    score,
)
from .solver import (
    FitProblem,
    GreedyState,
    Infeasible,
    greedy_sparse_solve,
    submodularity_ratio,
)
from .tropical import ShapeError, principal_solution

PAPER_SCALE = 1000
DESK_SCALE = 200


# ---------------------------------------------------------------------------
# example data generators (synthetic-data policy lives here, not the library)


def example1_dataset(points: int = 100) -> Dataset:
    """Noiseless 1-D convex curve on [-2, 2]: max(-6x-6, x/2, x^5/5 + x/2)."""
    x = np.linspace(-2.0, 2.0, points)
    f = np.maximum.reduce([-6.0 * x - 6.0, x / 2.0, x**5 / 5.0 + x / 2.0])
    return Dataset(x, f)


def example2_dataset(seed: int, points: int = 500) -> Dataset:
    """Noisy paraboloid: z = x^2 + y^2 + N(0, 0.25^2), (x, y) ~ Unif[-1, 1]^2."""
    rng = np.random.default_rng(seed)
    xy = rng.uniform(-1.0, 1.0, size=(points, 2))
    z = (xy**2).sum(axis=1) + rng.normal(0.0, 0.25, size=points)
    return Dataset(xy, z)


def example3_dataset() -> Dataset:
    """log(exp(x1)+exp(x2)+exp(x3)) on the integer grid {-5..5}^3."""
    v = np.arange(-5.0, 6.0)
    g = np.meshgrid(v, v, v, indexing="ij")
    pts = np.column_stack([a.ravel() for a in g])
    return Dataset(pts, logsumexp(pts, axis=1))


# ---------------------------------------------------------------------------
# shared plumbing


@dataclass
class RunConfig:
    """Replay record embedded in every output file."""

    command: str
    seed: int
    out: str
    threads: int
    options: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "seed": self.seed,
            "out": self.out,
            "threads": self.threads,
            **self.options,
        }


def _config_from(args: argparse.Namespace, **options) -> RunConfig:
    clean = {}
    for key, val in options.items():
        if isinstance(val, Path):
            val = str(val)
        if isinstance(val, float) and math.isinf(val):
            val = "inf"
        clean[key] = val
    return RunConfig(
        command=args.command,
        seed=args.seed,
        out=str(args.out),
        threads=args.threads,
        options=clean,
    )


def _outdir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_table(path: Path, header: list[str], rows: list[list], config: RunConfig) -> None:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config.as_dict()) + "\n")
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def _problem_from_args(args: argparse.Namespace) -> FitProblem:
    p = math.inf if getattr(args, "norm_inf_greedy", False) else args.p
    return FitProblem(None, None, p=p, theta=args.theta, epsilon=args.epsilon, estimator=args.estimator)


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _slope_set(args: argparse.Namespace, data: Dataset) -> SlopeSet:
    chosen = [
        name
        for name, on in (
            ("--grid-step", args.grid_step is not None),
            ("--slopes", args.slopes is not None),
            ("--gradient-slopes", args.gradient_slopes),
        )
        if on
    ]
    if len(chosen) != 1:
        raise ValueError(f"exactly one slope source required, got {chosen or 'none'}")
    if args.grid_step is not None:
        lo = _parse_float_list(args.grid_lo) if args.grid_lo else None
        hi = _parse_float_list(args.grid_hi) if args.grid_hi else None
        if lo is None or hi is None:
            raise ValueError("--grid-step requires --grid-lo and --grid-hi")
        if len(lo) == 1:
            lo = lo * data.dim
        if len(hi) == 1:
            hi = hi * data.dim
        return grid_slopes(lo, hi, args.grid_step)
    if args.slopes is not None:
        return SlopeSet(io_formats.load_matrix(args.slopes), origin="explicit")
    return gradient_slopes(data, args.neighbors)


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args: argparse.Namespace) -> int:
    out = _outdir(args)
    A = io_formats.load_matrix(args.matrix)
    b = io_formats.load_vector(args.vector)
    problem = _problem_from_args(args).with_data(A, b)
    config = _config_from(
        args,
        matrix=args.matrix,
        vector=args.vector,
        p=problem.p,
        theta=problem.budget,
        estimator=args.estimator,
    )
    try:
        solution = greedy_sparse_solve(problem)
    except Infeasible as exc:
        io_formats.save_text(out / "report.json", io_formats.write_report(None, config.as_dict()))
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    io_formats.save_text(out / "solution.csv", io_formats.write_vector(solution.x))
    io_formats.save_text(out / "report.json", io_formats.write_report(solution, config.as_dict()))
    print(
        f"support {list(solution.support)}  error_p {solution.error_p:.6g}  "
        f"error_inf {solution.error_inf:.6g}"
    )
    return 0


def _fit_once(data: Dataset, slopes: SlopeSet, problem: FitProblem, seed: int):
    model = fit(data, slopes, problem, seed=seed)
    if model.support_size == 0:
        return model, Score(rms=math.nan, max_abs=math.nan, support=0)
    return model, score(model, data)


def cmd_fit(args: argparse.Namespace) -> int:
    out = _outdir(args)
    data = io_formats.load_dataset(args.dataset)
    slopes = _slope_set(args, data)
    problem = _problem_from_args(args)
    config = _config_from(
        args,
        dataset=args.dataset,
        p=problem.p,
        theta=problem.budget,
        estimator=args.estimator,
        slope_count=slopes.size,
        slope_origin=slopes.origin,
    )
    try:
        model, s = _fit_once(data, slopes, problem, args.seed)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    io_formats.save_text(out / "model.json", io_formats.write_model(model))
    if model.support_size:
        io_formats.save_text(
            out / "fit_plot.csv",
            io_formats.write_plot_data(
                data, evaluate(model, data.x), comment="config: " + json.dumps(config.as_dict())
            ),
        )
    _write_table(
        out / "fit.csv",
        ["p", "theta", "rms", "max_abs", "support"],
        [[problem.p, problem.budget, s.rms, s.max_abs, s.support]],
        config,
    )
    print(f"regions {s.support}  rms {s.rms:.6g}  max_abs {s.max_abs:.6g}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    out = _outdir(args)
    data = io_formats.load_dataset(args.dataset)
    slopes = _slope_set(args, data)
    ps = _parse_float_list(args.p_list)
    if args.theta_list is not None:
        budgets = [("theta", t) for t in _parse_float_list(args.theta_list)]
    else:
        budgets = [("epsilon", e) for e in _parse_float_list(args.epsilon_list)]
    if not ps or not budgets:
        raise ValueError("sweep needs at least one norm order and one budget")
    config = _config_from(
        args,
        dataset=args.dataset,
        p_list=ps,
        budgets=[b for _, b in budgets],
        budget_kind=budgets[0][0],
        estimator=args.estimator,
        slope_count=slopes.size,
    )
    rows = []
    for p in ps:
        for kind, val in budgets:
            problem = FitProblem(
                None,
                None,
                p=p,
                theta=val if kind == "theta" else None,
                epsilon=val if kind == "epsilon" else None,
                estimator=args.estimator,
            )
            tag = f"p{p:g}_{kind}{val:g}"
            try:
                model, s = _fit_once(data, slopes, problem, args.seed)
            except Infeasible:
                rows.append([p, val, "", "", "", True])
                continue
            rows.append([p, val, s.rms, s.max_abs, s.support, False])
            io_formats.save_text(out / f"model_{tag}.json", io_formats.write_model(model))
            if model.support_size:
                io_formats.save_text(
                    out / f"plot_{tag}.csv",
                    io_formats.write_plot_data(
                        data,
                        evaluate(model, data.x),
                        comment="config: " + json.dumps(config.as_dict()),
                    ),
                )
    _write_table(
        out / "sweep.csv",
        ["p", budgets[0][0], "rms", "max_abs", "support", "infeasible"],
        rows,
        config,
    )
    for row in rows:
        print(
            f"p={row[0]:g} budget={row[1]:g}  "
            + ("infeasible" if row[5] else f"rms={row[2]:.4f} max_abs={row[3]:.4f} supp={row[4]}")
        )
    return 0


@dataclass
class BenchRow:
    trial: int
    heuristic_support: int | None
    heuristic_error_inf: float | None
    greedy_support: int | None
    greedy_error_inf: float | None
    infeasible: bool


@dataclass
class BenchReport:
    rows: list[BenchRow]
    median_heuristic: float | None
    median_greedy: float | None
    bound: float
    feasible_trials: int


def _bench_trial(seed, m: int, n: int, delta: float, p: float) -> BenchRow:
    rng = np.random.default_rng(seed)
    A = rng.normal(0.0, 2.0, size=(m, n))
    b = rng.normal(0.0, 1.0, size=m)
    trial = int(seed.spawn_key[-1]) if hasattr(seed, "spawn_key") else 0
    try:
        heur = greedy_sparse_solve(
            FitProblem(A, b, p=p, theta=2.0 * delta, estimator="smmae")
        )
        grd = greedy_sparse_solve(FitProblem(A, b, p=math.inf, theta=delta))
    except Infeasible:
        return BenchRow(trial, None, None, None, None, True)
    return BenchRow(
        trial,
        len(heur.support),
        heur.error_inf,
        len(grd.support),
        grd.error_inf,
        False,
    )


def run_bench(trials: int, m: int, n: int, delta: float, p: float, seed: int, threads: int = 1) -> BenchReport:
    """Random-instance comparison: SMMAE heuristic vs the guarantee-free
    l-infinity greedy, both targeting max-abs error <= delta.

    Per-trial seeds spawn deterministically from the master seed, so the
    report is identical however many threads run.  Trials whose full support
    cannot meet the budget are recorded as infeasible and excluded from the
    medians.  Every feasible heuristic row is hard-checked against the
    guaranteed bound.
    """
    children = np.random.SeedSequence(seed).spawn(trials)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # the l-infinity greedy warns by design
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows = list(pool.map(lambda s: _bench_trial(s, m, n, delta, p), children))
        else:
            rows = [_bench_trial(s, m, n, delta, p) for s in children]
    feasible = [r for r in rows if not r.infeasible]
    for row in feasible:
        if row.heuristic_error_inf > delta:
            raise RuntimeError(
                f"heuristic trial {row.trial} violates the guaranteed bound: "
                f"{row.heuristic_error_inf} > {delta}"
            )
    return BenchReport(
        rows=rows,
        median_heuristic=float(np.median([r.heuristic_support for r in feasible])) if feasible else None,
        median_greedy=float(np.median([r.greedy_support for r in feasible])) if feasible else None,
        bound=delta,
        feasible_trials=len(feasible),
    )


def cmd_bench(args: argparse.Namespace) -> int:
    out = _outdir(args)
    m = n = PAPER_SCALE if args.paper_scale else args.size
    config = _config_from(
        args, trials=args.trials, rows=m, cols=n, delta=args.delta, p=args.p
    )
    t0 = time.perf_counter()
    report = run_bench(args.trials, m, n, args.delta, args.p, args.seed, args.threads)
    elapsed = time.perf_counter() - t0
    _write_table(
        out / "bench.csv",
        ["trial", "heuristic_support", "heuristic_error_inf", "greedy_support", "greedy_error_inf", "infeasible"],
        [
            [r.trial, r.heuristic_support, r.heuristic_error_inf, r.greedy_support, r.greedy_error_inf, r.infeasible]
            for r in report.rows
        ],
        config,
    )
    summary = {
        "median_heuristic": report.median_heuristic,
        "median_greedy": report.median_greedy,
        "bound": report.bound,
        "feasible_trials": report.feasible_trials,
        "trials": args.trials,
        "elapsed_seconds": elapsed,
        "config": config.as_dict(),
    }
    (out / "bench_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(
        f"{m}x{n}, {report.feasible_trials}/{args.trials} feasible: "
        f"median support heuristic {report.median_heuristic} vs greedy {report.median_greedy} "
        f"({elapsed:.1f}s)"
    )
    if m < PAPER_SCALE:
        print("note: support medians depend on instance size; paper-scale values need --paper-scale")
    return 0


def cmd_gen_example(args: argparse.Namespace) -> int:
    out = _outdir(args)
    if args.which == 1:
        data = example1_dataset()
    elif args.which == 2:
        data = example2_dataset(args.seed)
    else:
        data = example3_dataset()
    config = _config_from(args, which=args.which)
    path = out / f"example{args.which}.csv"
    io_formats.save_text(
        path, io_formats.write_dataset(data, comment="config: " + json.dumps(config.as_dict()))
    )
    print(path)
    return 0


# ---------------------------------------------------------------------------
# reproduction harness


EXAMPLE1_P1 = {
    # theta: (rms, support) reference values for the p = 1 sweep
    0.15: (0.0038, 15),
    0.25: (0.0057, 13),
    0.5: (0.0120, 11),
    1.0: (0.0202, 8),
}
EXAMPLE2_SEEDS = (5, 8, 21, 24, 25)  # noise draws for which theta = 10^(8/150) is feasible


def _check_worked_example() -> tuple[bool, str]:
    A = np.array([[0.0, 5.0, 2.0], [4.0, 1.0, 0.0], [0.0, 1.0, 0.0]])
    b = np.array([3.0, 1.0, 0.0])
    tol = 1e-12
    xhat = principal_solution(A, b)
    ok = bool(np.abs(xhat - [-3.0, -2.0, 0.0]).max() <= tol)
    state = GreedyState(A, b)
    expected = {(2,): 0.5, (0, 2): 0.5, (1, 2): 0.5, (0, 1, 2): 0.0}
    for T, val in expected.items():
        ok &= abs(state.error_norm_of(T, math.inf) - val) <= tol
    ratio = submodularity_ratio(A, b, math.inf, [2], [0, 1])
    ok &= abs(ratio) <= tol
    return ok, f"xhat={xhat.tolist()} ratio={ratio}"


def _check_example1() -> tuple[bool, str]:
    data = example1_dataset()
    slopes = grid_slopes([-20.0], [20.0], 0.125)
    notes = []
    ok = True
    for theta, (rms, supp) in EXAMPLE1_P1.items():
        sgle, s = _fit_once(data, slopes, FitProblem(None, None, p=1, theta=theta), seed=0)
        smmae, sm = _fit_once(
            data, slopes, FitProblem(None, None, p=1, theta=theta, estimator="smmae"), seed=0
        )
        ok &= abs(s.support - supp) <= 1
        ok &= abs(s.rms - rms) <= 0.10 * rms
        # model re-evaluation rounds independently of the solver, hence the slack
        ok &= abs(sm.max_abs - 0.5 * s.max_abs) <= 1e-12
        notes.append(f"theta={theta}: supp={s.support}/{supp} rms={s.rms:.4f}/{rms}")
    return ok, "; ".join(notes)


def _check_example2() -> tuple[bool, str]:
    slopes = grid_slopes([-10.0, -10.0], [10.0, 10.0], 0.25)
    bound = 10 ** (8 / 150) / 2
    for seed in EXAMPLE2_SEEDS:
        data = example2_dataset(seed)
        try:
            sgle, s = _fit_once(data, slopes, FitProblem(None, None, p=150, epsilon=1e8), seed=seed)
        except Infeasible:
            continue
        smmae, sm = _fit_once(
            data, slopes, FitProblem(None, None, p=150, epsilon=1e8, estimator="smmae"), seed=seed
        )
        residuals = data.f - evaluate(sgle, data.x)
        ok = (
            sm.max_abs <= bound
            and sm.rms < s.rms
            and bool((residuals >= -1e-12).all())
            and abs(sm.max_abs - 0.5 * s.max_abs) <= 1e-12
        )
        return ok, (
            f"seed={seed}: SMMAE max_abs={sm.max_abs:.4f} <= {bound:.4f}, "
            f"rms {sm.rms:.4f} < {s.rms:.4f}"
        )
    return False, "no feasible noise draw among candidate seeds"


def _check_example3() -> tuple[bool, str]:
    data = example3_dataset()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        slopes = gradient_slopes(data)
    model, s = _fit_once(data, slopes, FitProblem(None, None, p=2, epsilon=1331.0), seed=0)
    ok = s.rms < 1.0 and s.support <= 6
    supports = [s.support]
    eps = 1331.0
    while supports[-1] < 21 and eps > 1e-6:
        eps /= 2.0
        _, sk = _fit_once(data, slopes, FitProblem(None, None, p=2, epsilon=eps), seed=0)
        supports.append(sk.support)
    ok &= all(a <= b for a, b in zip(supports, supports[1:]))
    return ok, f"K={s.support} rms={s.rms:.4f}; K sweep {supports}"


REPRO_CHECKS = [
    ("worked-example", _check_worked_example),
    ("example-1-sweep", _check_example1),
    ("example-2-properties", _check_example2),
    ("example-3-curve", _check_example3),
]


def cmd_repro(args: argparse.Namespace) -> int:
    out = _outdir(args)
    results = []
    failed = 0
    for name, check in REPRO_CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = check()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"error: {exc}"
        elapsed = time.perf_counter() - t0
        failed += not ok
        results.append({"check": name, "pass": bool(ok), "detail": detail, "seconds": elapsed})
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({elapsed:.2f}s)  {detail}")
    config = _config_from(args)
    (out / "repro.json").write_text(
        json.dumps({"results": results, "config": config.as_dict()}, indent=2) + "\n"
    )
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0, help="master seed recorded in outputs")
    sub.add_argument("--out", default=".", help="output directory")
    sub.add_argument("--threads", type=int, default=1, help="parallel trials where supported")


def _add_problem_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--p", type=float, default=1.0, help="norm order (>= 1; < 1 experimental)")
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--theta", type=float, help="norm-domain error budget")
    group.add_argument("--epsilon", type=float, help="p-th-power error budget (theta = epsilon^(1/p))")
    sub.add_argument("--estimator", choices=["sgle", "smmae"], default="sgle")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tropfit",
        description="sparse max-plus solving and piecewise-linear convex fitting",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    solve = subs.add_parser("solve", help="sparse-solve a max-plus equation from CSV files")
    solve.add_argument("matrix", help="matrix CSV")
    solve.add_argument("vector", help="right-hand-side vector CSV")
    _add_problem_flags(solve)
    solve.add_argument(
        "--norm-inf-greedy",
        action="store_true",
        help="run the l-infinity greedy (comparison only, no guarantee)",
    )
    _add_common(solve)
    solve.set_defaults(func=cmd_solve)

    def add_slope_flags(sub):
        sub.add_argument("--grid-lo", help="comma-separated grid lower corner (scalar broadcasts)")
        sub.add_argument("--grid-hi", help="comma-separated grid upper corner")
        sub.add_argument("--grid-step", type=float, help="grid slope spacing")
        sub.add_argument("--slopes", help="explicit slope matrix CSV")
        sub.add_argument("--gradient-slopes", action="store_true", help="slopes from local gradients")
        sub.add_argument("--neighbors", type=int, default=None, help="neighborhood size for gradients")

    fit_p = subs.add_parser("fit", help="fit a piecewise-linear convex model to a dataset")
    fit_p.add_argument("dataset", help="dataset CSV (features..., target)")
    add_slope_flags(fit_p)
    _add_problem_flags(fit_p)
    _add_common(fit_p)
    fit_p.set_defaults(func=cmd_fit)

    sweep = subs.add_parser("sweep", help="fit over a list of (p, budget) pairs and tabulate")
    sweep.add_argument("dataset")
    add_slope_flags(sweep)
    sweep.add_argument("--p", dest="p_list", required=True, help="comma-separated norm orders")
    group = sweep.add_mutually_exclusive_group(required=True)
    group.add_argument("--theta", dest="theta_list", help="comma-separated theta budgets")
    group.add_argument("--epsilon", dest="epsilon_list", help="comma-separated epsilon budgets")
    sweep.add_argument("--estimator", choices=["sgle", "smmae"], default="sgle")
    _add_common(sweep)
    sweep.set_defaults(func=cmd_sweep)

    bench = subs.add_parser("bench", help="random-instance heuristic vs l-infinity greedy")
    bench.add_argument("--trials", type=int, default=100)
    bench.add_argument("--size", type=int, default=DESK_SCALE, help="square instance size")
    bench.add_argument("--paper-scale", action="store_true", help=f"use {PAPER_SCALE}x{PAPER_SCALE}")
    bench.add_argument("--delta", type=float, default=2.5, help="target max-abs error")
    bench.add_argument("--p", type=float, default=150.0, help="norm order for the heuristic arm")
    _add_common(bench)
    bench.set_defaults(func=cmd_bench)

    repro = subs.add_parser("repro", help="re-run the reference examples and verify known values")
    _add_common(repro)
    repro.set_defaults(func=cmd_repro)

    gen = subs.add_parser("gen-example", help="write a synthetic example dataset")
    gen.add_argument("which", type=int, choices=[1, 2, 3])
    _add_common(gen)
    gen.set_defaults(func=cmd_gen_example)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except (io_formats.ParseError, ShapeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
