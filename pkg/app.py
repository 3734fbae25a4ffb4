import argparse
import json
import logging
import os
import sys

import numpy as np
from tqdm import tqdm

from command.ct_command import FindCTCommand
from command.echo_command import EchoCommand
from command.levels_command import LevelsCommand
from command.run_config import build_run_config, load_config_file
from command.spectrum_command import SpectrumCommand
from command.t2_command import T2Command
from command.transitions_command import TransitionsCommand
from config.log_config import app_logger, set_console_level

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

COMMAND_MAP = {
    "levels": LevelsCommand,
    "transitions": TransitionsCommand,
    "find-ct": FindCTCommand,
    "spectrum": SpectrumCommand,
    "t2": T2Command,
    "echo": EchoCommand,
}


def parse_system(value):
    """Preset name, inline JSON object, or path to a JSON file."""
    if value is None:
        return None
    text = value.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise argparse.ArgumentTypeError(f"Invalid inline system JSON: {e}")
    if text.endswith(".json") and os.path.isfile(text):
        with open(text, "r", encoding="utf-8") as f:
            return json.load(f)
    return text


def add_common_arguments(parser):
    parser.add_argument("--config", help="JSON run config; flags override its values")
    parser.add_argument("--system", type=parse_system, help='Preset ("Si:Bi", "Si:P") or inline JSON {"S":..,"I":..,...}')
    parser.add_argument("--range", nargs=2, type=float, dest="field_range", metavar=("MIN_T", "MAX_T"), help="Field range in tesla")
    parser.add_argument("--grid", type=int, help="Number of grid points (>= 16)")
    parser.add_argument("-o", "--output", help="Output file (default: result/<command>.<format>)")
    parser.add_argument("--format", choices=["csv", "json"], help="Output format")
    parser.add_argument("--seed", type=int, help="Seed for stochastic fixtures")
    parser.add_argument("--no-progress", dest="progress", action="store_const", const=False, help="Hide the progress bar")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug output on the console")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="clocktransition",
        description="Donor spin levels, clock transitions, ESR field sweeps and coherence-time models.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    levels = subparsers.add_parser("levels", help="Tracked energy levels over a field grid")
    add_common_arguments(levels)

    transitions = subparsers.add_parser("transitions", help="All |dmF|=1 transitions at one field")
    add_common_arguments(transitions)
    transitions.add_argument("--field", type=float, help="Static field B0 in tesla")

    find_ct = subparsers.add_parser("find-ct", help="Clock transitions in a field range")
    add_common_arguments(find_ct)
    find_ct.add_argument("--quantity", choices=["dfdB", "dfdA"], help="Derivative that vanishes at the CT")
    find_ct.add_argument("--no-merge", dest="merge_doublets", action="store_const", const=False,
                         help="Report both members of every doublet")
    find_ct.add_argument("--cache", action="store_const", const=True, help="Reuse results from the local cache")
    find_ct.add_argument("--cache-db", help="Cache database path")

    spectrum = subparsers.add_parser("spectrum", help="Echo-detected field sweep at a fixed frequency")
    add_common_arguments(spectrum)
    spectrum.add_argument("--fmw", type=float, dest="f_mw", help="Microwave frequency in GHz")
    spectrum.add_argument("--linewidth", help="Linewidth preset (28Si, natSi, hyperfine)")
    spectrum.add_argument("--width-f0", type=float, dest="width_f0", help="Intrinsic FWHM in GHz")
    spectrum.add_argument("--width-A", type=float, dest="width_A", help="Hyperfine-constant spread (FWHM) in GHz")
    spectrum.add_argument("--width-B", type=float, dest="width_B", help="Field inhomogeneity (FWHM) in T")
    spectrum.add_argument("--shape", choices=["gaussian", "lorentzian"])

    t2 = subparsers.add_parser("t2", help="Fit or evaluate the coherence-time model")
    add_common_arguments(t2)
    t2.add_argument("--mode", choices=["fit", "eval"])
    t2.add_argument("--data", help="CSV/JSON with x or B_T, concentration_cm3, T2_s")
    t2.add_argument("--model", help="Bundled model name or model JSON file (eval mode)")
    t2.add_argument("--x", type=float, nargs="+", help="Normalized slopes |df/dB|/gamma_e (eval mode)")
    t2.add_argument("--concentration", type=float, help="Donor concentration in cm^-3 (eval mode)")
    t2.add_argument("--per-concentration", dest="shared", action="store_const", const=False,
                    help="Fit each concentration separately")
    t2.add_argument("--ct-frequency", type=float, dest="ct_frequency", help="f_mw in GHz for B_T rows without f_mw_GHz")

    echo = subparsers.add_parser("echo", help="Fit or simulate a Hahn-echo decay")
    add_common_arguments(echo)
    echo.add_argument("--data", help="CSV/JSON with delay_s (2tau) or tau_s, and amplitude")
    echo.add_argument("--simulate", action="store_const", const=True, help="Write a synthetic decay instead of fitting")
    echo.add_argument("--t2", type=float, dest="T2", help="T2 in seconds (simulate)")
    echo.add_argument("--n", type=float, help="Stretch exponent (simulate)")
    echo.add_argument("--noise", type=float, help="Gaussian noise level (simulate)")
    echo.add_argument("--magnitude", action="store_const", const=True, help="Magnitude-detected data (simulate and fit)")
    echo.add_argument("--max-delay", type=float, dest="max_delay", help="Longest 2tau in seconds (simulate)")
    return parser


CONTROL_KEYS = {"command", "config", "verbose", "quiet"}


def make_progress(enabled, desc):
    if not enabled:
        return None, None
    bar = tqdm(total=0, desc=desc, unit="pt", file=sys.stderr, leave=False)

    def progress_callback(done, total):
        if bar.total != total:
            bar.reset(total=total)
        bar.n = done
        bar.refresh()

    return progress_callback, bar


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.verbose:
        set_console_level(logging.DEBUG)
    elif args.quiet:
        set_console_level(logging.WARNING)

    overrides = {k: v for k, v in vars(args).items() if k not in CONTROL_KEYS}
    bar = None
    try:
        config = build_run_config(args.command, load_config_file(args.config), overrides)
        runner = COMMAND_MAP[args.command](config)
        progress_callback, bar = make_progress(config.progress and not args.quiet, args.command)
        output_path = runner.process(progress_callback=progress_callback)
    except (RuntimeError, ArithmeticError, np.linalg.LinAlgError) as e:
        app_logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERIC
    except (ValueError, KeyError) as e:
        app_logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    finally:
        if bar is not None:
            bar.close()

    app_logger.info(f"Output written to {output_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
