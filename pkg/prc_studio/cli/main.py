import argparse
import os
import sys

from pydantic import ValidationError

from prc_studio.cli import commands
from prc_studio.configuration import GlobalConfiguration, PrcControls, SamplerControls
from prc_studio.errors.errors import (
    BoundaryError,
    ConfigurationError,
    DatasetValidationError,
    InvalidInputError,
    ModeNotFoundError,
    NumericalError,
    OutOfRegimeError,
    QuadratureRefusedError,
)
from prc_studio.message_handler.base import MessageHandler, set_message_handler
from prc_studio.message_handler.types import EventScope, EventType, LogEvent

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_MODEL = 3
EXIT_NUMERICAL = 4

SAMPLER_DEFAULTS = SamplerControls()
PRC_DEFAULTS = PrcControls()

EXIT_CODES = (
    (
        (InvalidInputError, DatasetValidationError, ConfigurationError, ValidationError, OSError),
        EXIT_INPUT,
    ),
    ((BoundaryError, OutOfRegimeError, QuadratureRefusedError), EXIT_MODEL),
    ((ModeNotFoundError, NumericalError), EXIT_NUMERICAL),
)


def _add_matches(parser: argparse.ArgumentParser, required: bool = True):
    parser.add_argument("--matches", required=required, help="Match table CSV.")
    parser.add_argument(
        "--relabel-qmax",
        type=int,
        default=None,
        help="Convert raw labels in 1..QMAX (1 best) to model labels (larger is better).",
    )


def _add_scheme(parser: argparse.ArgumentParser, default: str | None = None):
    parser.add_argument(
        "--scheme",
        default=default,
        required=default is None,
        help="`continuous` or `categorical:<qmax>`.",
    )


def _add_samples(parser: argparse.ArgumentParser):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--samples", help="Posterior samples CSV written by `posterior`.")
    source.add_argument("--preset", help="Use draws from a published posterior summary instead.")
    parser.add_argument("--R", type=int, default=SAMPLER_DEFAULTS.resamples, help="Draws taken from a --preset.")
    parser.add_argument("--m1", type=int, default=None)
    parser.add_argument("--m2", type=int, default=None)
    parser.add_argument("--labels", default=None, help="Comma-separated quality grid.")
    parser.add_argument("--mc", type=int, default=PRC_DEFAULTS.mc_draws, help="Monte Carlo draws per PRC.")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="CSV output path.")


def _add_simulation(parser: argparse.ArgumentParser):
    parser.add_argument("--preset", default=None, help="Simulate at a preset's posterior means.")
    parser.add_argument("--tau", nargs="+", type=float, default=None, help="True tau: theta..., beta0, log_sigma2.")
    _add_scheme(parser, default="categorical:3")
    parser.add_argument("--f", type=int, default=50, help="Number of fingers.")
    parser.add_argument("--l", type=int, default=4, help="Impressions per finger.")
    parser.add_argument("--m", type=int, default=38, help="Minutiae per impression without a preset.")
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prc-studio",
        description="Fingerprint individuality under varying image quality.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="Worker cap (default: PRC_THREADS or the machine's parallelism).",
    )
    parser.add_argument("--verbose", action="store_true", help="Log every EM iteration.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    summarize = subparsers.add_parser("summarize", help="Mean and SD tables per quality cell.")
    _add_matches(summarize)
    _add_scheme(summarize)
    summarize.add_argument("--bins", type=float, default=0.1, help="Continuous bin width.")
    summarize.add_argument("--out-dir", default=None)
    summarize.set_defaults(handler=commands.cmd_summarize)

    fit = subparsers.add_parser("fit", help="Fit tau by EM with the Laplace-expanded likelihood.")
    _add_matches(fit)
    _add_scheme(fit)
    fit.add_argument("--init", nargs="+", type=float, default=None, help="Starting tau, space-separated.")
    fit.add_argument("--fixed-log-sigma2", type=float, default=None)
    fit.add_argument("--tol", type=float, default=1e-8)
    fit.add_argument("--max-iter", type=int, default=200)
    fit.add_argument("--out", required=True, help="Model JSON output path.")
    fit.set_defaults(handler=commands.cmd_fit)

    posterior = subparsers.add_parser("posterior", help="Importance-resample the posterior of tau.")
    posterior.add_argument("--model", required=True)
    _add_matches(posterior)
    posterior.add_argument("--H", type=int, default=SAMPLER_DEFAULTS.proposals, help="Proposal draws.")
    posterior.add_argument("--R", type=int, default=SAMPLER_DEFAULTS.resamples, help="Resampled draws.")
    posterior.add_argument("--seed", type=int, default=0)
    posterior.add_argument("--alpha", type=float, default=PRC_DEFAULTS.alpha)
    posterior.add_argument("--out", required=True, help="Samples CSV output path.")
    posterior.set_defaults(handler=commands.cmd_posterior)

    prc = subparsers.add_parser("prc", help="Posterior inference on PRC(w | m1, m2).")
    _add_samples(prc)
    prc.add_argument("--w", type=int, required=True)
    prc.add_argument("--q1", type=float, default=None)
    prc.add_argument("--q2", type=float, default=None)
    prc.add_argument("--what-if", default=None, help="Q1,Q2 of an improved-quality query.")
    prc.add_argument("--grid", action="store_true", help="Report every pair of --labels.")
    prc.add_argument("--alpha", type=float, default=PRC_DEFAULTS.alpha)
    prc.set_defaults(handler=commands.cmd_prc)

    design = subparsers.add_parser("design-w", help="Smallest w reaching a target PRC.")
    _add_samples(design)
    design.add_argument("--target", type=float, default=0.01)
    design.set_defaults(handler=commands.cmd_design_w)

    match = subparsers.add_parser("match", help="Count minutia matches.")
    match.add_argument("--a", default=None, help="Minutia CSV of the first impression.")
    match.add_argument("--b", default=None, help="Minutia CSV of the second impression.")
    match.add_argument("--minutiae", nargs="*", default=None, help="Minutia files of a database.")
    match.add_argument("--qualities", default=None, help="Quality file of a database.")
    _add_scheme(match, default="categorical:3")
    match.add_argument("--relabel-qmax", type=int, default=None)
    match.add_argument("--r0", type=float, default=15.0)
    match.add_argument("--u0", type=float, default=0.3927)
    match.add_argument("--no-anchor-search", action="store_true")
    match.add_argument("--out", default=None, help="Match table output path.")
    match.set_defaults(handler=commands.cmd_match)

    simulate = subparsers.add_parser("simulate", help="Simulate a match table from known tau.")
    _add_simulation(simulate)
    simulate.add_argument("--out", required=True)
    simulate.add_argument("--truth", default=None, help="Truth CSV path (default: truth.csv next to --out).")
    simulate.set_defaults(handler=commands.cmd_simulate)

    validate = subparsers.add_parser("validate", help="Coverage of posterior intervals by simulation.")
    _add_simulation(validate)
    validate.add_argument("--config", default=None, help="Coverage configuration JSON.")
    validate.add_argument("--runs", type=int, default=50)
    validate.add_argument("--alpha", type=float, default=PRC_DEFAULTS.alpha)
    validate.add_argument("--query", action="append", default=None, help="w,m1,m2,q1,q2")
    validate.add_argument("--H", type=int, default=SAMPLER_DEFAULTS.proposals)
    validate.add_argument("--R", type=int, default=SAMPLER_DEFAULTS.resamples)
    validate.add_argument("--mc", type=int, default=20_000)
    validate.add_argument("--out", default=None)
    validate.set_defaults(handler=commands.cmd_validate)

    presets = subparsers.add_parser("presets", help="List or show published parameter presets.")
    presets.add_argument("--show", default=None, metavar="NAME")
    presets.set_defaults(handler=commands.cmd_presets)

    diagnose = subparsers.add_parser("diagnose", help="Compare preset PRCs with published tables.")
    diagnose.add_argument("--preset", required=True)
    diagnose.set_defaults(handler=commands.cmd_diagnose)

    return parser


def exit_code_for(error: Exception) -> int | None:
    for kinds, code in EXIT_CODES:
        if isinstance(error, kinds):
            return code
    return None


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        os.environ["PRC_THREADS"] = str(max(1, args.threads))
    msg_handler = MessageHandler(GlobalConfiguration(), verbose=args.verbose)
    set_message_handler(msg_handler)

    try:
        return args.handler(args, msg_handler)
    except Exception as e:
        code = exit_code_for(e)
        if code is None:
            raise
        msg_handler.send_message(
            LogEvent(
                "command_failed",
                EventType.ERROR,
                EventScope.CLI,
                getattr(e, "message", str(e)),
                {"error": type(e).__name__, "exit_code": code},
            )
        )
        return code


if __name__ == "__main__":
    sys.exit(main())
