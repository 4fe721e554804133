"""
Command-line entry point.

    prioritize  order MRs from a kill matrix or a coverage profile
    evaluate    run an experiment config and write report tables
    synth       generate a synthetic kill matrix (and optional cost profile)
    permtest    one-sided paired permutation test on a treatment,control file

Exit codes: 0 success, 1 usage error, 2 data/validation/IO error, 3 internal error.
"""

import argparse
import logging
import sys
from dataclasses import replace
from typing import List, Optional

from . import __version__
from .core_model import Criterion
from .errors import MRPrioError
from .experiment import emit_report, run_experiment
from .io_formats import (
    load_config,
    parse_coverage,
    parse_kill_matrix,
    parse_pairs,
    parse_synth_spec,
    write_costs,
    write_kill_matrix,
)
from .prioritize import coverage_based_order, fault_based_order, select_top, sub_seed
from .stats import DEFAULT_ALPHA, DEFAULT_MAX_EXACT_N, DEFAULT_RESAMPLES, paired_permutation_test, significance_flag
from .synth import SynthSpec, gen_costs, gen_kill_matrix

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with EXIT_USAGE instead of argparse's 2"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must lie in [0, 2**64), got {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_prioritize(args) -> int:
    if args.coverage is not None and args.criterion is None:
        args.parser.error("--criterion is required with --coverage")
    if args.kills is not None:
        ordering, _ = fault_based_order(parse_kill_matrix(args.kills), args.seed)
    else:
        ordering, _ = coverage_based_order(parse_coverage(args.coverage), Criterion(args.criterion), args.seed)

    chosen = select_top(ordering, args.top) if args.top is not None else ordering.order
    for mr in chosen:
        print(mr)
    print(f"# method={ordering.method.value} seed={ordering.seed}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = load_config(args.config)
    if args.killable_only:
        config = replace(config, killable_only=True)
    report = run_experiment(config)
    emit_report(report, args.format, args.out)

    for run in report:
        fault_based = run.curves.get("fault-based")
        first = f"{fault_based.at(1):.2f}%" if fault_based is not None and len(fault_based) else "n/a"
        print(f"{run.label}: mrs={run.num_mrs} fault-based@1={first} "
              f"not_computed={','.join(run.not_computed) or '-'}")
    return EXIT_OK


_INLINE_SYNTH = ("num_mrs", "num_faults", "mean", "sd")


def cmd_synth(args) -> int:
    if args.costs_out is not None and args.cost_mean is None:
        args.parser.error("--cost-mean is required with --costs-out")
    if args.spec is not None:
        spec = parse_synth_spec(args.spec)
        if args.seed is not None:
            spec = spec.with_seed(args.seed)
    else:
        missing = [f"--{name.replace('_', '-')}" for name in _INLINE_SYNTH if getattr(args, name) is None]
        if args.seed is None:
            missing.append("--seed")
        if missing:
            args.parser.error(f"without --spec these flags are required: {' '.join(missing)}")
        spec = SynthSpec(args.num_mrs, args.num_faults, args.mean, args.sd,
                         overlap_bias=args.overlap_bias, seed=args.seed)

    km = gen_kill_matrix(spec)
    costs = None
    if args.costs_out is not None:
        costs = gen_costs(km.mrs, args.cost_mean, args.cost_sd, sub_seed(spec.seed, 1))

    write_kill_matrix(km, args.out)
    logger.info("💾 Wrote %dx%d kill matrix to %s", km.num_mrs, km.num_faults, args.out)
    if costs is not None:
        write_costs(costs, args.costs_out)
        logger.info("💾 Wrote cost profile to %s", args.costs_out)
    return EXIT_OK


def cmd_permtest(args) -> int:
    sample = parse_pairs(args.pairs)
    p = paired_permutation_test(sample, max_exact_n=args.max_exact_n,
                                resamples=args.resamples, seed=args.seed)
    flag = significance_flag(p, args.alpha)
    print(f"p={p!r} significant={str(flag).lower()} n={sample.n}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mr-prioritizer",
                     description="Prioritize metamorphic relations and evaluate the orderings.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    noise = parser.add_mutually_exclusive_group()
    noise.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    noise.add_argument("-q", "--quiet", action="store_true", help="only warnings and errors on stderr")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = commands.add_parser("prioritize", help="order MRs by fault history or coverage")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--kills", metavar="PATH", help="prioritizing kill matrix (CSV)")
    source.add_argument("--coverage", metavar="PATH", help="coverage profile (JSON)")
    p.add_argument("--criterion", choices=[c.value for c in Criterion], help="coverage criterion")
    p.add_argument("--seed", type=_seed, required=True, help="tie-break seed")
    p.add_argument("--top", type=_positive_int, help="print only the first N MRs")
    p.set_defaults(func=cmd_prioritize, parser=p)

    p = commands.add_parser("evaluate", help="run an experiment config")
    p.add_argument("--config", metavar="PATH", required=True, help="experiment config (JSON)")
    p.add_argument("--out", metavar="DIR", required=True, help="report directory")
    p.add_argument("--format", choices=["csv", "json"], default="csv", help="report format (default: csv)")
    p.add_argument("--killable-only", action="store_true",
                   help="use killable faults as the detection denominator")
    p.set_defaults(func=cmd_evaluate, parser=p)

    p = commands.add_parser("synth", help="generate a synthetic kill matrix")
    p.add_argument("--spec", metavar="PATH", help="synth spec (JSON); replaces the inline flags")
    p.add_argument("--num-mrs", type=_positive_int)
    p.add_argument("--num-faults", type=_positive_int)
    p.add_argument("--mean", type=float, help="mean per-MR kill probability")
    p.add_argument("--sd", type=float, help="sd of per-MR kill probability")
    p.add_argument("--overlap-bias", type=float, default=0.0)
    p.add_argument("--seed", type=_seed, help="generator seed (overrides the spec file's)")
    p.add_argument("--out", metavar="PATH", required=True, help="kill matrix output (CSV)")
    p.add_argument("--costs-out", metavar="PATH", help="also write a cost profile (CSV)")
    p.add_argument("--cost-mean", type=float, help="mean MR cost in seconds")
    p.add_argument("--cost-sd", type=float, default=0.0, help="sd of MR cost in seconds")
    p.set_defaults(func=cmd_synth, parser=p)

    p = commands.add_parser("permtest", help="paired permutation test")
    p.add_argument("--pairs", metavar="PATH", required=True, help="treatment,control CSV")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--seed", type=_seed, required=True, help="Monte Carlo seed")
    p.add_argument("--max-exact-n", type=int, default=DEFAULT_MAX_EXACT_N)
    p.add_argument("--resamples", type=_positive_int, default=DEFAULT_RESAMPLES)
    p.set_defaults(func=cmd_permtest, parser=p)

    return parser


def _configure_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
                        force=True)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _configure_logging(args)
        return args.func(args)
    except SystemExit as e:
        if e.code is None:
            return EXIT_OK
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except (MRPrioError, OSError) as e:
        logger.error("❌ %s", e)
        return EXIT_DATA
    except Exception as e:
        logger.error("❌ Internal error: %s", e)
        logger.debug("traceback", exc_info=True)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
