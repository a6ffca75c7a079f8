"""Command-line interface for fewshot-ot."""

from fewshot_ot.cli.commands import create_parser, process_command

__all__ = ["create_parser", "process_command"]
