"""
Command-line interface: ``simulate | fit | check | mc | crossval | ingest | predict | plot``.
"""

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from app import __version__
from app.cli.commands import COMMANDS, RunConfig
from app.core.exceptions import ConfigurationError, SglvError

logger = logging.getLogger(__name__)

EXIT_ERROR = 2


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output directory (default: $SGLV_OUTPUT_DIR/<command>)")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed")


def _add_params(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--params", required=required, help="parameter JSON {r, A, sigma[, x0]}")
    p.add_argument("--x0", type=float, nargs="+", help="initial abundances")
    p.add_argument("--sigma-scale", dest="sigma_scale", type=float,
                   help="multiply every sigma_k by this factor")


def _add_fit(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fit", help="fit.json from the fit command (default: fit the series)")
    p.add_argument("--model", choices=["sglv", "glv"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sglv",
        description="Stochastic generalized Lotka-Volterra simulation and inference",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate an irregularly observed path")
    _add_params(p)
    _add_output(p)
    p.add_argument("--n", dest="n_obs", type=int, help="number of observations (default 1000)")
    p.add_argument("--fine-dt", dest="fine_dt", type=float)

    p = sub.add_parser("fit", help="fit SGLV and GLV to a series")
    p.add_argument("--series", required=True)
    _add_output(p)
    p.add_argument("--level", type=float, help="confidence level (default 0.95)")
    p.add_argument("--B", type=int, help="bootstrap replicates for the GLV intervals")
    p.add_argument("--psd-tol", dest="psd_tol", type=float)

    p = sub.add_parser("check", help="check the stability assumptions of a parameter set")
    _add_params(p)
    _add_output(p)
    p.add_argument("--psd-tol", dest="psd_tol", type=float)

    p = sub.add_parser("mc", help="Monte Carlo MSE study")
    _add_params(p, required=False)
    _add_output(p)
    p.add_argument("--case", choices=["case1", "case2"])
    p.add_argument("--n", type=int, nargs="+", help="sample sizes (default 300 500 1000)")
    p.add_argument("--replicates", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--fine-dt", dest="fine_dt", type=float)

    p = sub.add_parser("crossval", help="cross-validated one-step prediction error")
    p.add_argument("--series", required=True)
    _add_output(p)
    p.add_argument("--k", type=int, nargs="+", help="folds (default 24 12 8)")
    p.add_argument("--splits", type=int, help="random splits per k (default 100)")
    p.add_argument("--jobs", type=int)

    p = sub.add_parser("ingest", help="counts and taxonomy to a proportion series")
    p.add_argument("--counts", required=True)
    p.add_argument("--taxonomy")
    _add_output(p)
    p.add_argument("--rank", help="aggregation rank, or 'none' (default family)")
    p.add_argument("--top", type=int, help="number of most abundant taxa kept (default 5)")
    p.add_argument("--pseudocount", type=float)
    p.add_argument("--renormalize", choices=["top", "full"])
    p.add_argument("--t-min", dest="t_min", type=float)
    p.add_argument("--t-max", dest="t_max", type=float)

    p = sub.add_parser("predict", help="one-step predictions under a fitted model")
    p.add_argument("--series", required=True)
    _add_fit(p)
    _add_output(p)

    p = sub.add_parser("plot", help="SVG figures of a series and its predictions")
    p.add_argument("--series", required=True)
    _add_fit(p)
    _add_output(p)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig.from_args(args)
        logger.info("running %s", config.command)
        out = COMMANDS[config.command](config)
    except SglvError as e:
        print(str(e), file=sys.stderr)
        return EXIT_ERROR
    except FileNotFoundError as e:
        print(f"[{ConfigurationError.code}] file not found: {e.filename}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"[{ConfigurationError.code}] {e.strerror}: {e.filename}", file=sys.stderr)
        return EXIT_ERROR
    except (ValidationError, ValueError) as e:
        print(f"[{ConfigurationError.code}] {e}", file=sys.stderr)
        return EXIT_ERROR
    logger.info("%s finished, outputs in %s", config.command, out)
    return 0
