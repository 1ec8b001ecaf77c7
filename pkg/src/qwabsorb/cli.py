"""
Command-line experiment runner.

Every subcommand writes one CSV (plus, for some, a small companion CSV)
whose first line is ``# config: {...}`` with the full resolved configuration,
followed by a header row.  One summary line per row goes to stdout.

Exit codes: 0 success, 2 usage or invalid configuration, 3 resource limit,
4 convergence or numerical disagreement, 5 output path not writable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__, _backend
from .classical import (MAX_MC_DIMENSION, classical_monte_carlo,
                        classical_times_closed_form, classical_times_linear_solve,
                        write_classical_csv)
from .errors import ConfigurationError, ConvergenceError, ResourceError
from .hypercube import (DEFAULT_DIMENSION_CAP, HypercubeConfig, conjectured_probability,
                        full_walk_summary, vertex_at_distance, write_summary_csv)
from .line import LineWalkConfig, conjectured_limit, estimate_rm, write_line_csv
from .reduced import (generating_coefficients, reduced_first_passage,
                      reduced_series_totals, solve_stein, write_generating_csv)
from .walk import StoppingRule, summarize

__all__ = ["ExperimentConfig", "run_experiment", "build_parser", "main", "COMMANDS",
           "EXIT_OK", "EXIT_USAGE", "EXIT_RESOURCE", "EXIT_CONVERGENCE", "EXIT_OUTPUT"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RESOURCE = 3
EXIT_CONVERGENCE = 4
EXIT_OUTPUT = 5

OUTPUT_DIR_ENV = "QWABSORB_OUTPUT_DIR"

# relative agreement demanded by solver-crosscheck
CROSSCHECK_RTOL = 1e-6
# antipodal rows up to this n are summed to the exact horizon by block doubling
DOUBLING_N_MAX = 40

COMMANDS = ("line-rm", "line-limit-sweep", "hypercube-table", "hypercube-scaling",
            "classical-scaling", "solver-crosscheck")


@dataclass
class ExperimentConfig:
    """A validated experiment: command name, numeric parameters, output path."""

    command: str
    params: dict
    output: Optional[Path] = None
    jobs: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        if int(self.jobs) != self.jobs or self.jobs < 1:
            raise ConfigurationError(f"--jobs must be >= 1, got {self.jobs}")
        p = self.params
        if "eps" in p and not p["eps"] > 0:
            raise ConfigurationError(f"--eps must be > 0, got {p['eps']}")
        if "t_max" in p and not p["t_max"] >= 1:
            raise ConfigurationError(f"--t-max must be >= 1, got {p['t_max']}")
        for lo, hi in (("n_min", "n_max"), ("m_min", "m_max"), ("p_min", "p_max")):
            if lo in p and p[lo] > p[hi]:
                raise ConfigurationError(f"empty range: {lo}={p[lo]} > {hi}={p[hi]}")
        if "n_min" in p and p["n_min"] < 1:
            raise ConfigurationError(f"--n-min must be >= 1, got {p['n_min']}")
        if "m_min" in p and p["m_min"] < 1:
            raise ConfigurationError(f"--m-min must be >= 1, got {p['m_min']}")

    def output_path(self) -> Path:
        if self.output is not None:
            return Path(self.output)
        base = Path(os.environ.get(OUTPUT_DIR_ENV, "."))
        return base / f"{self.command}.csv"

    def header_line(self) -> str:
        record = {"command": self.command, "version": __version__,
                  "backend": _backend.BACKEND, "jobs": self.jobs, **self.params}
        return "# config: " + json.dumps(record, sort_keys=True, default=str) + "\n"


def _stop(params) -> StoppingRule:
    return StoppingRule(t_max=int(params["t_max"]), eps=float(params["eps"]),
                        window=params.get("window"))


def _pmap(fn: Callable, items: Sequence, jobs: int) -> list:
    """Map in parameter order; results never depend on completion order."""
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _g(x) -> str:
    return format(float(x), ".10g")


# ---------------------------------------------------------------- line walks

def _line_row(args):
    m, p, params = args
    return estimate_rm(LineWalkConfig(m=m, p=p, stop=_stop(params)))


def _p_grid(params) -> list:
    if params.get("p_values"):
        return [float(v) for v in params["p_values"]]
    lo, hi, step = params["p_min"], params["p_max"], params["p_step"]
    if not step > 0:
        raise ConfigurationError(f"--p-step must be > 0, got {step}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + k * step, 12) for k in range(count)]


def _run_line_rm(cfg: ExperimentConfig, fh) -> None:
    prm = cfg.params
    tasks = [(m, prm["p"], prm) for m in range(prm["m_min"], prm["m_max"] + 1)]
    rows = _pmap(_line_row, tasks, cfg.jobs)
    write_line_csv(rows, fh)
    for r in rows:
        print(f"line-rm m={r.m} p={_g(r.p)} r_m={_g(r.r_m)} T={r.truncation} "
              f"residual={_g(r.residual_mass)} monotone_tail={r.monotone_tail}")


def _run_line_limit_sweep(cfg: ExperimentConfig, fh) -> None:
    prm = cfg.params
    tasks = [(prm["m"], p, prm) for p in _p_grid(prm)]
    rows = _pmap(_line_row, tasks, cfg.jobs)
    write_line_csv(rows, fh)
    for r in rows:
        print(f"line-limit-sweep m={r.m} p={_g(r.p)} r_m={_g(r.r_m)} "
              f"limit={_g(conjectured_limit(r.p))} T={r.truncation} residual={_g(r.residual_mass)}")


# ---------------------------------------------------------------- hypercube

def _hypercube_row(args):
    n, i, start, params = args
    cfg = HypercubeConfig(n=n, absorbing_vertex=vertex_at_distance(n, i), start=start,
                          stop=_stop(params), cap=params["cap"])
    return full_walk_summary(cfg)


def _start(value):
    return value if value == "symmetric" else int(value)


def _run_hypercube_table(cfg: ExperimentConfig, fh) -> None:
    prm = cfg.params
    n = prm["n"]
    start = _start(prm["start"])
    tasks = [(n, i, start, prm) for i in range(n + 1)]
    summaries = _pmap(_hypercube_row, tasks, cfg.jobs)
    rows = [(n, i, s) for i, s in enumerate(summaries)]
    write_summary_csv(rows, fh)
    for _, i, s in rows:
        print(f"hypercube-table n={n} i={i} prob={s.prob:.4f} "
              f"conjectured={conjectured_probability(n, i):.4f} "
              f"time_nominal={s.time_nominal:.4f} time_real={s.time_real:.4f} T={s.truncation}")


def _antipodal_row(args):
    n, params = args
    if n <= DOUBLING_N_MAX:
        return reduced_series_totals(n).summary()
    return summarize(reduced_first_passage(n, _stop(params)))


def _fit(ns, values, power) -> tuple:
    """Least-squares ``c`` in ``values ~ c n**power`` and the max relative deviation."""
    x = np.asarray(ns, dtype=float) ** power
    y = np.asarray(values, dtype=float)
    c = float(x @ y / (x @ x))
    return c, float(np.max(np.abs(y - c * x) / y))


def _run_hypercube_scaling(cfg: ExperimentConfig, fh) -> None:
    prm = cfg.params
    ns = list(range(prm["n_min"], prm["n_max"] + 1, prm["n_step"]))
    antipodal = _pmap(_antipodal_row, [(n, prm) for n in ns], cfg.jobs)
    rows = [(n, n, s) for n, s in zip(ns, antipodal)]

    avg_ns = [n for n in range(max(1, prm["n_min"]), prm["average_n_max"] + 1)]
    tasks = [(n, i, "symmetric", prm) for n in avg_ns for i in range(1, n + 1)]
    full = dict(zip([(t[0], t[1]) for t in tasks], _pmap(_hypercube_row, tasks, cfg.jobs)))
    averages = []
    for n in avg_ns:
        weights = [math.comb(n, i) / (2 ** n - 1) for i in range(1, n + 1)]
        avg = math.fsum(w * full[(n, i)].time_real for w, i in zip(weights, range(1, n + 1)))
        averages.append((n, avg))
        rows.extend((n, i, full[(n, i)]) for i in range(1, n + 1) if i != n or n not in ns)
    rows.sort(key=lambda r: (r[0], r[1]))
    write_summary_csv(rows, fh)

    for n, s in zip(ns, antipodal):
        print(f"hypercube-scaling n={n} antipodal time_real={_g(s.time_real)} "
              f"ratio_n1.5={_g(s.time_real / n ** 1.5)} ratio_n2={_g(s.time_real / n ** 2)} "
              f"T={s.truncation} residual={_g(s.residual_mass)}")
    for n, avg in averages:
        print(f"hypercube-scaling n={n} average time_real={_g(avg)} ratio_2^n={_g(avg / 2 ** n)}")

    fits = []
    fit_ns = [n for n in ns if n >= prm["fit_n_min"]]
    fit_vals = [s.time_real for n, s in zip(ns, antipodal) if n >= prm["fit_n_min"]]
    if fit_ns:
        for label, power in (("c*n^2", 2.0), ("c*n^1.5", 1.5)):
            c, dev = _fit(fit_ns, fit_vals, power)
            fits.append((label, c, dev))
        x = np.asarray(fit_ns, dtype=float) ** 1.5
        dev = float(np.max(np.abs(np.asarray(fit_vals) - 1.25 * x) / np.asarray(fit_vals)))
        fits.append(("1.25*n^1.5", 1.25, dev))
    companion = cfg.output_path().with_name(cfg.output_path().stem + "_fits.csv")
    with open(companion, "w", newline="") as ch:
        ch.write(cfg.header_line())
        ch.write("kind,n,model,coefficient,max_rel_deviation,value\n")
        for label, c, dev in fits:
            ch.write(f"fit,,{label},{c:.17g},{dev:.17g},\n")
            print(f"hypercube-scaling fit {label}: coefficient={_g(c)} max_rel_deviation={_g(dev)}")
        for n, avg in averages:
            ch.write(f"average,{n},,,,{avg:.17g}\n")


# ---------------------------------------------------------------- classical

def _classical_row(args):
    n, i, s_exact, trials, seed = args
    if trials > 0 and n <= MAX_MC_DIMENSION:
        return classical_monte_carlo(n, i, trials, seed)
    return None


def _row_seed(seed: int, n: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, n, i]).generate_state(1, np.uint64)[0] >> 1)


def _run_classical_scaling(cfg: ExperimentConfig, fh) -> None:
    prm = cfg.params
    tasks = []
    for n in range(prm["n_min"], prm["n_max"] + 1):
        closed = classical_times_closed_form(n)
        solved = classical_times_linear_solve(n)
        rel = float(np.max(np.abs(closed.s - solved.s)) / closed.s.max())
        print(f"classical-scaling n={n} s_1/2^n={_g(closed.s[1] / 2 ** n)} "
              f"closed_vs_solve_rel={rel:.3e}")
        mc = prm["trials"] if n <= prm["mc_n_max"] else 0
        for i in range(n + 1):
            tasks.append((n, i, float(closed.s[i]), mc, _row_seed(prm["seed"], n, i)))
    estimates = _pmap(_classical_row, tasks, cfg.jobs)
    rows = [(n, i, s_exact, est, seed)
            for (n, i, s_exact, _, seed), est in zip(tasks, estimates)]
    write_classical_csv(rows, fh)
    for n, i, s_exact, est, _ in rows:
        extra = "" if est is None else f" s_mc={_g(est.mean)} stderr={_g(est.stderr)}"
        print(f"classical-scaling n={n} i={i} s_exact={_g(s_exact)}{extra}")


# ---------------------------------------------------------------- solvers

def _crosscheck_row(args):
    n, t_gen = args
    series = reduced_series_totals(n)
    stein, t_stein = solve_stein(n)
    gen = generating_coefficients(n, t_gen)
    times = (series.time_nominal, t_stein, gen.total_time())
    rel = (max(times) - min(times)) / max(times)
    return dict(n=n, prob_series=series.prob, prob_generating=gen.total_prob(),
                time_series=times[0], time_stein=times[1], time_generating=times[2],
                max_rel_diff=rel, stein_residual=stein.residual), gen


def _run_solver_crosscheck(cfg: ExperimentConfig, fh) -> None:
    prm = cfg.params
    ns = list(range(prm["n_min"], prm["n_max"] + 1))
    results = _pmap(_crosscheck_row, [(n, prm["t_generating"]) for n in ns], cfg.jobs)
    cols = ["n", "prob_series", "prob_generating", "time_series", "time_stein",
            "time_generating", "max_rel_diff", "stein_residual"]
    fh.write(",".join(cols) + "\n")
    worst = 0.0
    for row, _ in results:
        fh.write(",".join(str(row["n"]) if c == "n" else format(row[c], ".17g") for c in cols) + "\n")
        print(f"solver-crosscheck n={row['n']} series={_g(row['time_series'])} "
              f"stein={_g(row['time_stein'])} generating={_g(row['time_generating'])} "
              f"max_rel_diff={row['max_rel_diff']:.3e}")
        worst = max(worst, row["max_rel_diff"], abs(row["prob_series"] - 1),
                    abs(row["prob_generating"] - 1))
    if prm.get("generating_output"):
        with open(prm["generating_output"], "w", newline="") as gh:
            gh.write(cfg.header_line())
            for k, (_, gen) in enumerate(results):
                buf = _Collect()
                write_generating_csv(gen, buf)
                gh.write("".join(buf.parts if k == 0 else buf.parts[1:]))
    if worst > CROSSCHECK_RTOL:
        raise ConvergenceError(f"antipodal solvers disagree: worst relative gap {worst:.3e}", worst)


class _Collect:
    def __init__(self):
        self.parts = []

    def write(self, s):
        self.parts.append(s)


RUNNERS = {
    "line-rm": _run_line_rm,
    "line-limit-sweep": _run_line_limit_sweep,
    "hypercube-table": _run_hypercube_table,
    "hypercube-scaling": _run_hypercube_scaling,
    "classical-scaling": _run_classical_scaling,
    "solver-crosscheck": _run_solver_crosscheck,
}


def run_experiment(config: ExperimentConfig) -> int:
    """Run one experiment and return its exit status."""
    path = config.output_path()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fh = open(path, "w", newline="")
    except OSError as exc:
        print(f"error: cannot write output {path}: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    try:
        with fh:
            fh.write(config.header_line())
            RUNNERS[config.command](config, fh)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        path.unlink(missing_ok=True)
        return EXIT_USAGE
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        path.unlink(missing_ok=True)
        return EXIT_RESOURCE
    except ConvergenceError as exc:
        # rows written so far stay on disk as diagnostics
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def _common(sub: argparse.ArgumentParser, t_max: int) -> None:
    sub.add_argument("--output", "-o", type=Path, default=None,
                     help=f"CSV path (default: ${OUTPUT_DIR_ENV} or . / <command>.csv)")
    sub.add_argument("--jobs", "-j", type=int, default=1, help="parallel worker processes")
    sub.add_argument("--t-max", type=int, default=t_max, help="step cap T_max")
    sub.add_argument("--eps", type=float, default=1e-12,
                     help="stop once a window of steps absorbs less than this")
    sub.add_argument("--window", type=int, default=None,
                     help="stopping window (default max(100, 10 * diameter))")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qwabsorb", description="Absorbing quantum walks on the line and the hypercube.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = subs.add_parser("line-rm", help="r_m against m at fixed p")
    _common(s, 100_000)
    s.add_argument("--p", type=float, default=0.5)
    s.add_argument("--m-min", type=int, default=1)
    s.add_argument("--m-max", type=int, default=30)

    s = subs.add_parser("line-limit-sweep", help="r_m at fixed m against p")
    _common(s, 100_000)
    s.add_argument("--m", type=int, default=30)
    s.add_argument("--p-min", type=float, default=0.0)
    s.add_argument("--p-max", type=float, default=1.0)
    s.add_argument("--p-step", type=float, default=0.05)
    s.add_argument("--p-values", type=lambda v: [float(x) for x in v.split(",")], default=None,
                   help="comma-separated p values (overrides the uniform grid)")

    s = subs.add_parser("hypercube-table", help="absorbing summary per Hamming distance")
    _common(s, 100_000)
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--start", default="symmetric",
                   help="'symmetric' (uniform over labels) or a start label 1..n")
    s.add_argument("--cap", type=int, default=DEFAULT_DIMENSION_CAP,
                   help="largest dimension allowed for full-space simulation")

    s = subs.add_parser("hypercube-scaling",
                        help="antipodal (reduced chain) and average (full space) times against n")
    _common(s, 1_000_000)
    s.add_argument("--n-min", type=int, default=1)
    s.add_argument("--n-max", type=int, default=100)
    s.add_argument("--n-step", type=int, default=1)
    s.add_argument("--average-n-max", type=int, default=8,
                   help="largest n for the full-space average over absorbing vertices")
    s.add_argument("--fit-n-min", type=int, default=10,
                   help="smallest n entering the n^2 and n^1.5 fits")
    s.add_argument("--cap", type=int, default=DEFAULT_DIMENSION_CAP)

    s = subs.add_parser("classical-scaling", help="classical absorbing times with Monte Carlo")
    _common(s, 1)
    s.add_argument("--n-min", type=int, default=1)
    s.add_argument("--n-max", type=int, default=20)
    s.add_argument("--trials", type=int, default=10_000)
    s.add_argument("--mc-n-max", type=int, default=8, help="largest n that gets Monte Carlo")
    s.add_argument("--seed", type=int, default=0)

    s = subs.add_parser("solver-crosscheck", help="series, Stein and generating-function times")
    _common(s, 1)
    s.add_argument("--n-min", type=int, default=2)
    s.add_argument("--n-max", type=int, default=30)
    s.add_argument("--t-generating", type=int, default=4096,
                   help="number of generating-series coefficients to expand")
    s.add_argument("--generating-output", type=Path, default=None,
                   help="optional CSV for the coefficients a_t")
    return parser


_NOT_PARAMS = {"command", "output", "jobs"}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    params = {k: v for k, v in vars(args).items() if k not in _NOT_PARAMS}
    if args.command in ("classical-scaling", "solver-crosscheck"):
        # no time stepping in these commands
        for key in ("t_max", "eps", "window"):
            params.pop(key, None)
    if params.get("generating_output") is not None:
        params["generating_output"] = str(params["generating_output"])
    return ExperimentConfig(command=args.command, params=params, output=args.output,
                            jobs=args.jobs)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
    except ConfigurationError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run_experiment(config)


if __name__ == "__main__":
    sys.exit(main())
