"""Command-line front end: bounds, certify, simulate, figure, intervals, tails."""
import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional

import pandas as pd

from grouproulette import get_settings
from grouproulette.bounds import WINDOW_POLICIES, bounds_gap, figure_data
from grouproulette.bounds.cache import load_or_compute, lookup_cache, resolve_cache_dir, table_frame
from grouproulette.coupling.experiments import collision_experiment, round_pmfs, round_sweep_experiment, total_variation
from grouproulette.coupling.multiround import MultiRoundPlan, extinction_frequency, simulate_multiround, trajectory_frame
from grouproulette.decimals import format_decimal, parse_rational
from grouproulette.distribution import s_pmf_exact, y_pmf, z_pmf
from grouproulette.errors import CacheIntegrityError, CertificateError, DomainError, EnclosureError
from grouproulette.intervals import (
    IntervalSeqParams,
    build_interval_seq,
    extended_hills,
    extended_valleys,
    interval_table,
    interval_visit_bound,
    j_inclusion_report,
)
from grouproulette.intervals.certificate import nonconvergence_certificate
from grouproulette.logging_config import set_logging_level
from grouproulette.tails import domination_report, first_violation

# Set up logging
logger = logging.getLogger("grouproulette.cli")

# Capture warnings and redirect them to the logging system
logging.captureWarnings(True)

EXIT_OK = 0
EXIT_CHECK_FAILED = 3
EXIT_IO = 4
EXIT_DOMAIN = 5


@dataclass
class RunConfig:
    """One CLI invocation: shared flags over settings defaults, plus command-specific options"""

    command: str
    N: int
    scale: int
    precision: Fraction
    seed: int
    threads: int
    out: Optional[Path] = None
    force_recompute: bool = False
    cache_dir: Optional[Path] = None
    quiet: bool = False
    policy: str = "narrow"
    margin: int = 0
    subcommand: Optional[str] = None
    options: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        settings = get_settings()
        N = args.n if args.n is not None else settings["n_full" if args.full else "n_quick"]
        shared = {"command", "n", "full", "scale", "precision", "seed", "threads", "out", "force_recompute", "cache_dir",
                  "quiet", "log_level", "policy", "margin", "subcommand"}
        return cls(
            command=args.command,
            N=N,
            scale=args.scale if args.scale is not None else settings["scale"],
            precision=parse_rational(args.precision if args.precision is not None else settings["precision"]),
            seed=args.seed if args.seed is not None else settings["seed"],
            threads=args.threads if args.threads is not None else settings["threads"],
            out=Path(args.out) if args.out else None,
            force_recompute=args.force_recompute,
            cache_dir=Path(args.cache_dir) if args.cache_dir else None,
            quiet=args.quiet,
            policy=args.policy or settings["window_policy"],
            margin=args.margin if args.margin is not None else settings["window_margin"],
            subcommand=getattr(args, "subcommand", None),
            options={k: v for k, v in vars(args).items() if k not in shared},
        )


def _emit_frame(frame: pd.DataFrame, out: Optional[Path]):
    if out is None:
        frame.to_csv(sys.stdout, index=False, lineterminator="\n")
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {out}")


def _emit_text(text: str, out: Optional[Path]):
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    logger.info(f"Wrote report to {out}")


def _table(config: RunConfig, *, N: int, allow_compute: bool = True):
    return load_or_compute(
        N=N,
        scale=config.scale,
        policy=config.policy,
        margin=config.margin,
        threads=config.threads,
        cache_dir=config.cache_dir,
        force_recompute=config.force_recompute,
        allow_compute=allow_compute,
        quiet=config.quiet,
    )


def cmd_bounds(config: RunConfig) -> int:
    """Computes or loads the bounds table for n <= N and prints N, the widest gap and the wall time"""
    started = time.perf_counter()
    table = _table(config, N=config.N)
    elapsed = time.perf_counter() - started
    if config.out is not None:
        _emit_frame(table_frame(table), config.out)
    gap, at = bounds_gap(table=table)
    sys.stdout.write(
        f"N={table.N}\nscale={table.scale}\nmax_gap={format_decimal(value=gap, places=10, direction='up')}\n"
        f"max_gap_n={at}\nwall_time_s={elapsed:.1f}\n"
    )
    return EXIT_OK


def cmd_certify(config: RunConfig) -> int:
    """Builds the non-convergence certificate from a table covering H_0 and V_0"""
    hills, valleys = extended_hills(K=3), extended_valleys(K=2)
    needed = max(hills[0][1], valleys[0][1])
    table = _table(config, N=max(config.N, needed), allow_compute=not config.options.get("no_compute", False))
    report = nonconvergence_certificate(table=table, hills=hills, valleys=valleys, quiet=config.quiet)
    if config.out is not None:
        _emit_frame(report.frame(), config.out)
    sys.stdout.write(report.as_text())
    return EXIT_OK


def _simulate_round_sweep(config: RunConfig) -> int:
    opts = config.options
    report = round_sweep_experiment(n_min=opts["n_min"], n_max=opts["n_max"], realizations=opts["trials"],
                                    seed=config.seed, threads=config.threads, quiet=config.quiet)
    _emit_text(report.as_text(), config.out)
    return EXIT_OK if report.total_violations == 0 else EXIT_CHECK_FAILED


def _simulate_multiround(config: RunConfig) -> int:
    opts = config.options
    plan = MultiRoundPlan(seed=config.seed, trial=opts["trial"])
    trajectory = simulate_multiround(plan, start=opts["start"], max_rounds=opts["max_rounds"])
    _emit_frame(trajectory_frame(trajectory), config.out)
    return EXIT_OK


def _simulate_collision(config: RunConfig) -> int:
    opts = config.options
    report = collision_experiment(a=opts["a"], b=opts["b"], trials=opts["trials"], seed=config.seed,
                                  threads=config.threads, alpha=parse_rational(opts["alpha"]), quiet=config.quiet)
    _emit_text(report.as_text(), config.out)
    return EXIT_OK if report.verdict else EXIT_CHECK_FAILED


def _simulate_extinction(config: RunConfig) -> int:
    opts = config.options
    estimate = extinction_frequency(start=opts["start"], trials=opts["trials"], seed=config.seed,
                                    max_rounds=opts["max_rounds"], threads=config.threads,
                                    alpha=parse_rational(opts["alpha"]), quiet=config.quiet)
    lines = [
        f"start={estimate.start}",
        f"trials={estimate.trials}",
        f"extinct={estimate.extinct}",
        f"survivor={estimate.survivor}",
        f"unfinished={estimate.unfinished}",
        f"frequency={format_decimal(value=estimate.frequency, places=6)}",
        f"ci_lo={format_decimal(value=estimate.confidence.lo, places=6)}",
        f"ci_hi={format_decimal(value=estimate.pessimistic.hi, places=6, direction='up')}",
    ]
    table = lookup_cache(cache_dir=resolve_cache_dir(config.cache_dir), scale=config.scale, N=max(2, estimate.start),
                         policy=config.policy, margin=config.margin)
    status = EXIT_OK
    if table is not None and estimate.start <= table.N:
        lower, upper = table.lower(estimate.start), table.upper(estimate.start)
        consistent = estimate.consistent_with(lower, upper)
        lines += [
            f"lower={format_decimal(value=lower, places=10)}",
            f"upper={format_decimal(value=upper, places=10, direction='up')}",
            f"consistent={'yes' if consistent else 'no'}",
        ]
        status = EXIT_OK if consistent else EXIT_CHECK_FAILED
    _emit_text("\n".join(lines) + "\n", config.out)
    return status


def _simulate_pmf(config: RunConfig) -> int:
    opts = config.options
    n = opts["n_max"]
    empirical = round_pmfs(n=n, trials=opts["trials"], seed=config.seed, threads=config.threads, quiet=config.quiet)
    exact = {"s": s_pmf_exact(n=n), "y": y_pmf(n=n), "z": z_pmf(n=n)}
    frame = pd.DataFrame({
        "variable": list(exact),
        "n": [n] * len(exact),
        "trials": [opts["trials"]] * len(exact),
        "total_variation": [format_decimal(value=total_variation(exact[k], empirical[k]), places=6, direction="up")
                            for k in exact],
    })
    _emit_frame(frame, config.out)
    return EXIT_OK


SIMULATIONS: Dict[str, Callable[[RunConfig], int]] = {
    "round-sweep": _simulate_round_sweep,
    "multiround": _simulate_multiround,
    "collision": _simulate_collision,
    "extinction": _simulate_extinction,
    "pmf": _simulate_pmf,
}


# settings key of the default trial count per experiment
TRIAL_DEFAULTS: Dict[str, str] = {
    "round-sweep": "rounds_trials",
    "multiround": "rounds_trials",
    "collision": "collision_trials",
    "extinction": "rounds_trials",
    "pmf": "tv_trials",
}


def cmd_simulate(config: RunConfig) -> int:
    """Runs one coupled-simulation experiment; the exit status is nonzero when its check fails"""
    if config.subcommand not in SIMULATIONS:
        raise DomainError(f"Unknown simulation {config.subcommand}; choose from {', '.join(SIMULATIONS)}")
    if config.options.get("trials") is None:
        config.options["trials"] = get_settings()["simulation"][TRIAL_DEFAULTS[config.subcommand]]
    return SIMULATIONS[config.subcommand](config)


def cmd_figure(config: RunConfig) -> int:
    """Figure CSV n, log_n, lower, upper from the cached bounds; never computes them"""
    table = _table(config, N=config.N, allow_compute=False)
    _emit_frame(figure_data(table=table), config.out)
    return EXIT_OK


def cmd_intervals(config: RunConfig) -> int:
    """Hill, valley or custom interval tables, or the J_k inclusion report"""
    opts = config.options
    kind, K = opts["kind"], opts["K"]
    if kind == "hills":
        frame = pd.DataFrame(extended_hills(K=K), columns=["lo", "hi"])
        frame.insert(0, "k", range(len(frame)))
    elif kind == "valleys":
        frame = pd.DataFrame(extended_valleys(K=K), columns=["lo", "hi"])
        frame.insert(0, "k", range(len(frame)))
    elif kind == "seq":
        if opts["lo"] is None or opts["hi"] is None:
            raise DomainError("--lo and --hi are required for --kind seq")
        params = IntervalSeqParams(parse_rational(opts["lo"]), parse_rational(opts["hi"]), parse_rational(opts["gamma"]))
        frame = interval_table(build_interval_seq(params=params, K=K))
        bound = interval_visit_bound(params=params, precision=config.precision)
        logger.info(f"Visit bound for [{params.I0_minus}, {params.I0_plus}]: {float(bound.hi):.10f}")
    else:
        frame = j_inclusion_report(k0=opts["k0"], w=parse_rational(opts["w"]), K=K)
    _emit_frame(frame, config.out)
    return EXIT_OK


def cmd_tails(config: RunConfig) -> int:
    """Exact tails of Y_n against the concentration bounds, as CSV"""
    opts = config.options
    report = domination_report(n_min=opts["n_min"], n_max=opts["n_max"], precision=config.precision, quiet=config.quiet)
    _emit_frame(report, config.out)
    return EXIT_OK if first_violation(report) is None else EXIT_CHECK_FAILED


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "bounds": cmd_bounds,
    "certify": cmd_certify,
    "simulate": cmd_simulate,
    "figure": cmd_figure,
    "intervals": cmd_intervals,
    "tails": cmd_tails,
}


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    simulation = settings["simulation"]

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=None, help="largest n of the bounds table")
    common.add_argument("--full", action="store_true", help="use the full-run N instead of the quick one")
    common.add_argument("--scale", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--precision", default=None, help="target enclosure width, e.g. 1e-12")
    common.add_argument("--out", default=None, help="output path; stdout when absent")
    common.add_argument("--force-recompute", action="store_true")
    common.add_argument("--cache-dir", default=None)
    common.add_argument("--policy", choices=WINDOW_POLICIES, default=None)
    common.add_argument("--margin", type=int, default=None)
    common.add_argument("--log-level", default="WARNING")
    common.add_argument("--quiet", action="store_true", help="disable progress bars")

    parser = argparse.ArgumentParser(prog="grouproulette", description="Group Russian roulette: certified computation")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("bounds", parents=[common], help="certified bounds on p_n")
    certify = commands.add_parser("certify", parents=[common], help="non-convergence certificate")
    certify.add_argument("--no-compute", action="store_true", help="fail instead of computing a missing table")
    commands.add_parser("figure", parents=[common], help="p_n against log n, from the cache")

    simulate = commands.add_parser("simulate", parents=[common], help="coupled simulation experiments")
    simulate.add_argument("subcommand", choices=list(SIMULATIONS))
    simulate.add_argument("--n-min", type=int, default=simulation["sweep_n_min"])
    simulate.add_argument("--n-max", type=int, default=simulation["sweep_n_max"], help="largest n; the n of pmf")
    simulate.add_argument("--trials", type=int, default=None, help="defaults per experiment from settings")
    simulate.add_argument("--start", type=int, default=10)
    simulate.add_argument("--trial", type=int, default=0, help="trial index of a single multiround trajectory")
    simulate.add_argument("--max-rounds", type=int, default=simulation["max_rounds"])
    pair = simulation["collision_pairs"][0]
    simulate.add_argument("--a", type=int, default=pair[0])
    simulate.add_argument("--b", type=int, default=pair[1])
    simulate.add_argument("--alpha", default=simulation["confidence_alpha"],
                          help="miss probability of the Clopper-Pearson intervals")

    intervals = commands.add_parser("intervals", parents=[common], help="interval tables")
    intervals.add_argument("--kind", choices=["hills", "valleys", "seq", "j"], default="hills")
    intervals.add_argument("--K", type=int, default=6)
    intervals.add_argument("--lo", default=None)
    intervals.add_argument("--hi", default=None)
    intervals.add_argument("--gamma", default="1")
    intervals.add_argument("--k0", type=int, default=10)
    intervals.add_argument("--w", default="0")

    tails = commands.add_parser("tails", parents=[common], help="tail bounds against exact tails")
    tails.add_argument("--n-min", type=int, default=4)
    tails.add_argument("--n-max", type=int, default=60)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            set_logging_level(args.log_level)
        except ValueError as e:
            raise DomainError(str(e)) from e
        config = RunConfig.from_args(args)
        if config.threads < 1:
            raise DomainError(f"threads must be positive, got {config.threads}")
        return COMMANDS[config.command](config)
    except CertificateError as e:
        logger.error(str(e))
        if e.report is not None:
            sys.stdout.write(e.report.as_text())
        return EXIT_CHECK_FAILED
    except CacheIntegrityError as e:
        logger.error(f"Corrupted cache row n={e.n}: {e}")
        sys.stderr.write(f"cache integrity error at n={e.n}: {e}\n")
        return EXIT_IO
    except OSError as e:
        logger.error(str(e))
        sys.stderr.write(f"I/O error: {e}\n")
        return EXIT_IO
    except (DomainError, EnclosureError) as e:
        logger.error(str(e))
        sys.stderr.write(f"error: {e}\n")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
