"""Command-line front end.

Data (tables, JSON) goes to stdout; diagnostics go to stderr.  Exit status
is 0 on success, 1 on a runtime or input error, 2 on a usage error and 3
when a simulation finished with failed replications.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ancova import AncovaInputs, score_vs_covariates
from .config import ConfigError, apply_overrides, read_config_file, seed_from_env
from .design import (DesignQuery, design_factor, design_factor_gap, fraction_grid, grid_axis,
                     interim_pi_rho, r2_oos, sample_size_two_arm, variance_fraction)
from .dgp import DgpParams, TrialData, sample_friedman_historical
from .rng import RngStream
from .simulate import ExperimentConfig, ExperimentResults, fast_config, records_checksum, \
    run_experiment, RECORDS_FILE

log = logging.getLogger("progadjust")

SUMMARY_COLUMNS = ["r2", "n_hist", "count", "median_fraction", "theory_fraction",
                   "design_factor", "median_rho_hat", "median_r2_oos_hat", "mean_beta_adj",
                   "mean_beta_unadj", "mean_se_adj", "mean_se_unadj"]
FIG2_DRAWS = 10_000


class UsageError(Exception):
    """Bad combination of arguments; exits with status 2."""


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _emit_table(rows, out=None) -> None:
    out = out or sys.stdout
    for row in rows:
        out.write("\t".join(_fmt(v) for v in row) + "\n")


def summary_rows(results: ExperimentResults) -> list:
    rows = [SUMMARY_COLUMNS]
    for s in results.summaries:
        rows.append([s.r2, s.n_hist, s.count, s.fraction.median, s.overlay_theory,
                     s.overlay_design, s.rho_hat.median, s.r2_oos_hat.median, s.beta_adj.mean,
                     s.beta_unadj.mean, s.se_adj.mean, s.se_unadj.mean])
    return rows


def write_summary_tsv(results: ExperimentResults, path) -> None:
    with open(path, "w") as fh:
        _emit_table(summary_rows(results), fh)


# -- fraction -------------------------------------------------------------

def cmd_fraction(args) -> int:
    if args.grid is None and (args.r2 is None or args.rho is None):
        raise UsageError("give --r2 and --rho, or --grid STEP")
    if args.r2 is not None or args.rho is not None:
        if args.r2 is None or args.rho is None:
            raise UsageError("--r2 and --rho must be given together")
        r2oos = r2_oos(args.r2, args.rho)
        _emit_table([
            ["r2", "rho", "fraction", "r2_oos", "design_factor", "gap"],
            [args.r2, args.rho, variance_fraction(args.r2, args.rho), r2oos,
             design_factor(r2oos), design_factor_gap(args.r2, args.rho)],
        ])
    if args.grid is not None:
        from .plotting import plot_fraction_grid

        axis = grid_axis(args.grid)
        grid = fraction_grid(axis, axis)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        grid.to_csv(out / "fraction_grid.csv")
        plot_fraction_grid(grid, out / "fig1.svg")
        print(f"wrote {out / 'fraction_grid.csv'} and {out / 'fig1.svg'}", file=sys.stderr)
    return 0


# -- samplesize -----------------------------------------------------------

def cmd_samplesize(args) -> int:
    query = DesignQuery(r2=args.r2, rho=args.rho, delta=args.delta, sigma2=args.sigma2,
                        alpha_level=args.alpha, power=args.power)
    unadjusted, adjusted = sample_size_two_arm(query)
    fraction = variance_fraction(args.r2, args.rho)
    _emit_table([
        ["arm_unadjusted", "arm_adjusted", "total_unadjusted", "total_adjusted", "fraction",
         "saved_fraction"],
        [unadjusted, adjusted, 2 * unadjusted, 2 * adjusted, fraction,
         1.0 - adjusted / unadjusted],
    ])
    return 0


# -- interim --------------------------------------------------------------

def cmd_interim(args) -> int:
    data = TrialData.from_csv(args.data)
    if data.s_hat is None:
        raise ValueError(f"{args.data}: no s_hat column")
    controls = data.z == 0
    pi_rho, fraction = interim_pi_rho(data.y[controls], data.s_hat[controls])
    _emit_table([["n_controls", "pi_rho", "fraction"],
                 [int(controls.sum()), pi_rho, fraction]])
    return 0


# -- ancova ---------------------------------------------------------------

def cmd_ancova(args) -> int:
    try:
        report = score_vs_covariates(AncovaInputs(args.n, args.k, args.sigma1sq, args.sigmaksq))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.json:
        json.dump(report.to_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 0
    lines = [
        ("n", report.n), ("k", report.k),
        ("mse_effect", report.mse_effect),
        ("imbalance_effect", report.imbalance_effect),
        ("margin", report.margin),
        ("verdict", report.verdict),
        ("t_variance_unadjusted", report.second_order_unadjusted),
        ("t_variance_score", report.second_order_score),
        ("t_variance_covariates", report.second_order_full),
        ("note", report.note),
    ]
    for key, value in lines:
        print(f"{key}\t{_fmt(value) if value is not None else 'NA'}")
    return 0


# -- simulate -------------------------------------------------------------

def _csv_floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _csv_ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _optional_int(text):
    return None if text.lower() == "none" else int(text)


# (flag, section, key, type)
SIMULATE_FLAGS = [
    ("--r2-values", "simulate", "r2_values", _csv_floats),
    ("--n-hist-values", "simulate", "n_hist_values", _csv_ints),
    ("--n-trial", "simulate", "n_trial", int),
    ("--replications", "simulate", "replications", int),
    ("--beta", "simulate", "beta", float),
    ("--sigma2", "simulate", "sigma2", float),
    ("--alpha", "simulate", "alpha", float),
    ("--eval-size", "simulate", "eval_size", int),
    ("--seed", "simulate", "master_seed", int),
    ("--output-dir", "simulate", "output_dir", str),
    ("--n-trees", "forest", "n_trees", int),
    ("--mtry", "forest", "mtry", _optional_int),
    ("--min-node-size", "forest", "min_node_size", int),
    ("--max-depth", "forest", "max_depth", _optional_int),
    ("--bootstrap", "forest", "bootstrap", _bool),
    ("--friedman-center", "friedman", "center", float),
    ("--friedman-scale", "friedman", "scale", float),
]


def resolve_experiment(args, environ=None) -> tuple[ExperimentConfig, int]:
    """Defaults (or fast mode) <- config file <- PROGADJUST_SEED <- flags."""
    config = fast_config() if args.fast else ExperimentConfig()
    workers = 1
    if args.config:
        sections = read_config_file(args.config)
        config = apply_overrides(config, sections)
        workers = sections.get("run", {}).get("workers", workers)
    seed = seed_from_env(environ)
    if seed is not None:
        config = apply_overrides(config, {"simulate": {"master_seed": seed}})
    flags: dict = {}
    for flag, section, key, _ in SIMULATE_FLAGS:
        value = getattr(args, flag[2:].replace("-", "_"))
        if value is not None:
            flags.setdefault(section, {})[key] = value
    if flags:
        config = apply_overrides(config, flags)
    if args.workers is not None:
        workers = args.workers
    if workers < 1:
        raise ConfigError("workers must be at least 1")
    return config, workers


def cmd_simulate(args) -> int:
    config, workers = resolve_experiment(args)
    progress = None
    if not args.quiet:
        def progress(done, total):
            print(f"\rchunks {done}/{total}", end="" if done < total else "\n",
                  file=sys.stderr, flush=True)
    results = run_experiment(config, workers=workers, progress=progress)
    out = results.save()
    write_summary_tsv(results, out / "summary.tsv")
    _emit_table(summary_rows(results))
    print(f"records {out / RECORDS_FILE} sha256 {records_checksum(out / RECORDS_FILE)}",
          file=sys.stderr)
    if results.failures:
        print(f"{len(results.failures)} replication(s) failed; see summary.json",
              file=sys.stderr)
        return 3
    return 0


# -- figures --------------------------------------------------------------

def cmd_figures(args) -> int:
    from .plotting import (plot_fraction_grid, plot_score_density, plot_treatment_effects,
                           plot_variance_fractions)

    results = ExperimentResults.load(args.results)
    if not results.records:
        raise ValueError(f"{args.results}: no records")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    axis = grid_axis(0.05)
    grid = fraction_grid(axis, axis)
    grid.to_csv(out / "fraction_grid.csv")
    plot_fraction_grid(grid, out / "fig1.svg")
    config = results.config
    scores = sample_friedman_historical(DgpParams(), config.friedman, FIG2_DRAWS,
                                        RngStream(config.master_seed).child("figure-scores"))
    np.savetxt(out / "scores.csv", scores.s_true, header="s", comments="", fmt="%.17g")
    plot_score_density(scores.s_true, out / "fig2.svg")
    plot_variance_fractions(results, out / "fig3.svg")
    plot_treatment_effects(results, out / "fig4.svg")
    write_summary_tsv(results, out / "summary.tsv")
    _emit_table(summary_rows(results))
    print(f"wrote fig1-fig4.svg, fraction_grid.csv, scores.csv, summary.tsv to {out}",
          file=sys.stderr)
    return 0


# -- parser ---------------------------------------------------------------

def _unit(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{value} is not in [0, 1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="progadjust",
        description="Design calculus and simulations for prognostic score adjustment "
                    "in two-arm randomized trials.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    fmt = argparse.RawDescriptionHelpFormatter

    p = sub.add_parser(
        "fraction", formatter_class=fmt, help="variance fraction and design factor",
        description="Adjusted over unadjusted residual variance when the estimated score "
                    "correlates rho with the true score:\n\n"
                    "    fraction = 1 - R^2 rho^2\n"
                    "    R2_oos   = (2 rho - 1) R^2\n"
                    "    design factor = 1 - R2_oos,  gap = R^2 (1 - rho)^2\n\n"
                    "--grid STEP writes fraction_grid.csv and fig1.svg (R^2 horizontal, "
                    "rho vertical) for the interior grid STEP, 2 STEP, ... < 1.")
    p.add_argument("--r2", type=_unit, help="variance explained by the true score")
    p.add_argument("--rho", type=_unit, help="correlation of estimated and true score")
    p.add_argument("--grid", type=float, metavar="STEP", help="emit a grid CSV and heatmap")
    p.add_argument("--out", default=".", help="directory for --grid output (default: .)")
    p.set_defaults(func=cmd_fraction)

    p = sub.add_parser(
        "samplesize", formatter_class=fmt, help="per-arm sample sizes with and without the score",
        description="Unadjusted per-arm size 2 (z_{1-alpha/2} + z_power)^2 sigma2 / delta^2 "
                    "(rounded up);\nthe adjusted size scales it by 1 - R^2 rho^2 "
                    "(rounded up).")
    p.add_argument("--delta", type=float, required=True, help="clinically relevant effect")
    p.add_argument("--sigma2", type=float, default=1.0, help="outcome variance (default 1)")
    p.add_argument("--alpha", type=float, default=0.05, help="two-sided level (default 0.05)")
    p.add_argument("--power", type=float, default=0.8, help="power (default 0.8)")
    p.add_argument("--r2", type=_unit, required=True)
    p.add_argument("--rho", type=_unit, required=True)
    p.set_defaults(func=cmd_samplesize)

    p = sub.add_parser(
        "interim", formatter_class=fmt, help="estimate pi*rho from trial controls",
        description="Regress y on the unit-variance estimated score among controls (z = 0);\n"
                    "the slope estimates pi rho and 1 - slope^2 / var(y) estimates the "
                    "variance fraction.\nThe CSV needs columns y, z and s_hat.")
    p.add_argument("--data", required=True, help="CSV with y, z, s_hat columns")
    p.set_defaults(func=cmd_interim)

    p = sub.add_parser(
        "ancova", formatter_class=fmt, help="fit the score or its k covariates?",
        description="Fitting the score is preferred when\n\n"
                    "    sigma1^2 / sigmak^2 <= (n - 4) / (n - 3 - k),   2 <= k <= n - 4,\n\n"
                    "where sigma1^2 and sigmak^2 are the residual mean squares with the score "
                    "and with\nthe k covariates.  The bound is the expected imbalance ratio "
                    "E(q_k) / E(q_1) with\nE(q_k) = (4/n)(n - 3)/(n - 3 - k).")
    p.add_argument("--n", type=int, required=True, help="total sample size")
    p.add_argument("--k", type=int, required=True, help="number of covariates")
    p.add_argument("--sigma1sq", type=float, required=True, help="mean square error, score")
    p.add_argument("--sigmaksq", type=float, required=True, help="mean square error, covariates")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(func=cmd_ancova)

    p = sub.add_parser(
        "simulate", formatter_class=fmt, help="run the Friedman-score Monte Carlo experiment",
        description="For each (R^2, n_hist) cell and replication: fit a random forest to n_hist "
                    "historical\ncontrols, analyse a simulated trial with and without the "
                    "estimated score, and\nrecord the residual variances.  The summary compares "
                    "the median fraction with\n1 - R^2 rho_hat^2 and the design factor "
                    "1 - R2_oos_hat.\n\nSettings: defaults (or --fast) <- --config file <- "
                    "PROGADJUST_SEED <- flags.")
    p.add_argument("--config", help="INI file with [simulate], [forest], [friedman], [run]")
    p.add_argument("--fast", action="store_true",
                   help="reduced grid: R^2 0.2/0.5/0.8, n_hist 50/100/2000, 200 reps, "
                        "100 trees, 10^4 evaluation draws")
    p.add_argument("--workers", type=int, help="worker processes (default 1)")
    p.add_argument("-q", "--quiet", action="store_true", help="no progress output")
    for flag, _, _, kind in SIMULATE_FLAGS:
        p.add_argument(flag, type=kind)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser(
        "figures", formatter_class=fmt, help="render figures from saved results",
        description="fig1.svg: heatmap of 1 - R^2 rho^2; fig2.svg: density of the "
                    "standardized\nFriedman score with an N(0,1) reference; fig3.svg: "
                    "residual-variance fractions with\nthe 1 - R^2 rho_hat^2 and 1 - R2_oos_hat "
                    "overlays; fig4.svg: treatment effect\nestimates with the true beta.")
    p.add_argument("--results", required=True, help="directory written by 'simulate'")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"progadjust {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ConfigError, OSError, np.linalg.LinAlgError) as exc:
        print(f"progadjust {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
