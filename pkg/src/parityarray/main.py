"""
Main entry point for parityarray
"""
import argparse
import asyncio
import logging
import os
import sys
from typing import List, Optional

from rich.console import Console
from rich.logging import RichHandler

from parityarray.batch.config import load_config, read_document, validate_document
from parityarray.batch.processor import capmat_rows, execute_run
from parityarray.core.errors import ConfigError, ConvergenceError, InvalidSpecError, ParityArrayError
from parityarray.ui.report_ui import show_capmat, show_run_summary, show_validation

console = Console()
logger = logging.getLogger("parityarray")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(
        prog="parityarray",
        description="parityarray - Spectra, spin models and giant-spin scans of parity-protected qubit arrays",
    )
    parser.add_argument("--verbose", action="store_true", help="Enable debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run the sweep described by a JSON configuration")
    run.add_argument("config", help="Path to the configuration (or a previous run's .meta.json)")
    run.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                     help="Worker processes for sweep points (default: logical cores)")
    run.add_argument("--out", help="Output path prefix, overrides the configuration's 'output'")

    validate = commands.add_parser("validate", help="Check a configuration without computing anything")
    validate.add_argument("config", help="Path to the configuration")

    capmat = commands.add_parser("capmat", help="Compare numerical and closed-form inverse capacitance")
    capmat.add_argument("-N", dest="n", type=int, required=True, help="Number of loops")
    capmat.add_argument("--cb", type=float, required=True, help="Big capacitance C_B in fF")
    capmat.add_argument("--cs", type=float, required=True, help="Shunt capacitance C_S in fF")
    return parser.parse_args(argv)


def setup_logging(verbose: bool) -> None:
    logger.handlers = [RichHandler(console=console, show_path=False, markup=False)]
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    logger.propagate = False


async def run_command(config_path: str, workers: int, prefix: Optional[str]) -> int:
    config = load_config(config_path)
    if workers < 1:
        raise InvalidSpecError(f"--workers must be >= 1, got {workers}")
    summary = await execute_run(config, workers=workers, prefix=prefix)
    show_run_summary(config.mode, summary)
    if summary["non_convergence"]:
        return EXIT_NOT_CONVERGED
    return EXIT_OK if not summary["results"]["failed"] else EXIT_FAILURE


def validate_command(config_path: str) -> int:
    try:
        document = read_document(config_path)
    except ConfigError as e:
        show_validation(e.issues, config_path)
        return EXIT_CONFIG
    _, issues = validate_document(document)
    show_validation(issues, config_path)
    return EXIT_CONFIG if issues else EXIT_OK


def capmat_command(n: int, c_big: float, c_small: float) -> int:
    numeric, closed, _ = capmat_rows(n, c_big, c_small)
    show_capmat(numeric, closed, c_big, c_small)
    return EXIT_OK


def run_cli(argv: Optional[List[str]] = None) -> int:
    """Run one command and return its exit code"""
    args = parse_args(argv)
    setup_logging(args.verbose)

    try:
        if args.command == "run":
            return asyncio.run(run_command(args.config, args.workers, args.out))
        if args.command == "validate":
            return validate_command(args.config)
        return capmat_command(args.n, args.cb, args.cs)
    except ConfigError as e:
        show_validation(e.issues, args.config)
        return EXIT_CONFIG
    except InvalidSpecError as e:
        console.print(f"[bold #f38ba8]❌ Invalid input: {e}[/bold #f38ba8]")
        return EXIT_CONFIG
    except ConvergenceError as e:
        console.print(f"[bold #f38ba8]❌ Eigensolver did not converge: {e}[/bold #f38ba8]")
        return EXIT_NOT_CONVERGED
    except ParityArrayError as e:
        console.print(f"[bold #f38ba8]❌ Error: {e}[/bold #f38ba8]")
        return EXIT_FAILURE


def main():
    """Main entry point for the application"""
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
