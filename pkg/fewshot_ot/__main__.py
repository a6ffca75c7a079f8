#!/usr/bin/env python3
"""Command-line entry point for fewshot-ot."""

import argparse
import logging
import sys
import traceback
from pathlib import Path
from typing import List, Optional

from fewshot_ot.cli.commands import EXIT_FAILURE, EXIT_USAGE, create_parser, process_command
from fewshot_ot.utils.config import get_config


def setup_logging(verbose: bool = False, log_file: Optional[Path] = None, level: str = "INFO") -> None:
    """
    Configure logging for the application.

    Args:
        verbose: Log DEBUG and above to stderr
        log_file: Optional log file
        level: Level name used when not verbose
    """
    handlers: List[logging.Handler] = []
    if verbose:
        handlers.append(logging.StreamHandler(sys.stderr))
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    if not handlers:
        handlers.append(logging.NullHandler())

    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, str(level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )

    # Set third-party library logging to WARNING level
    logging.getLogger('numpy').setLevel(logging.WARNING)
    logging.getLogger('scipy').setLevel(logging.WARNING)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for the command-line interface.

    Args:
        argv: Command line arguments (defaults to sys.argv[1:])

    Returns:
        Exit code (0 success, 1 runtime failure, 2 usage error, 130 interrupted)
    """
    # First-level argument parsing for global options
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('-v', '--verbose', action='store_true')
    parser.add_argument('--config', type=Path)
    global_args, _ = parser.parse_known_args(argv)

    config = get_config(global_args.config)
    logging_config = config.get_logging_config()
    setup_logging(global_args.verbose, logging_config.get("file"), logging_config.get("level", "INFO"))
    logger = logging.getLogger(__name__)

    try:
        full_parser = create_parser()
        try:
            args = full_parser.parse_args(argv)
        except SystemExit as e:
            return e.code if isinstance(e.code, int) else EXIT_USAGE

        if not hasattr(args, "func"):
            full_parser.print_help(sys.stderr)
            return EXIT_USAGE

        return process_command(args)

    except KeyboardInterrupt:
        print("\nOperation cancelled.", file=sys.stderr)
        return 130  # Standard exit code for SIGINT
    except Exception as e:
        logger.error(f"Unexpected error: {e}")
        logger.error(traceback.format_exc())
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
