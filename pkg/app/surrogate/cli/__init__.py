"""Command-line surface: panel ingestion, result emission and subcommands."""

from app.surrogate.cli.runner import build_parser, run

__all__ = ["build_parser", "run"]
