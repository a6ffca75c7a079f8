"""Text formatting utilities for CLI output."""

from typing import Any, Dict, List, Optional


class TextFormatter:
    """Formats text for display in CLI."""

    @staticmethod
    def format_table(
        data: List[Dict[str, Any]],
        columns: List[str],
        headers: Optional[List[str]] = None,
        max_width: int = 40,
    ) -> str:
        """
        Format a list of dictionaries as a text table.

        Args:
            data: List of dictionaries to format
            columns: List of dictionary keys to include as columns
            headers: Optional custom headers (defaults to column names)
            max_width: Upper bound on any column width

        Returns:
            Formatted table as string
        """
        if not data:
            return "No data available."

        headers = headers or columns

        widths = []
        for header, col in zip(headers, columns):
            col_width = max([len(header)] + [len(str(row.get(col, ""))) for row in data])
            widths.append(min(col_width, max_width))

        header_row = " | ".join(f"{header:<{width}}" for header, width in zip(headers, widths))
        separator = "-+-".join("-" * width for width in widths)
        rows = [
            " | ".join(f"{str(row.get(col, '')):<{width}}" for col, width in zip(columns, widths))
            for row in data
        ]
        return "\n".join([header_row, separator] + rows)

    @staticmethod
    def format_store_summary(store: Any) -> str:
        """
        Format the header of a feature store.

        The provenance tag is left out so that the same data read from
        different files prints the same summary.

        Args:
            store: FeatureStore

        Returns:
            Multi-line summary with a per-class count table
        """
        lines = [
            f"dim: {store.dim}",
            f"classes: {store.num_classes}",
            f"vectors: {store.total_vectors}",
            "",
        ]
        table = [{"class_id": block.class_id, "count": block.count} for block in store.classes]
        lines.append(TextFormatter.format_table(table, ["class_id", "count"]))
        return "\n".join(lines)

    @staticmethod
    def format_report(report: Any) -> str:
        """
        Format an evaluation report for humans.

        Args:
            report: EvalReport

        Returns:
            Short multi-line summary
        """
        return "\n".join([
            f"Method: {report.method} ({report.n_way}-way {report.shots}-shot, q={report.queries})",
            f"Episodes: {report.episodes} (seed {report.seed})",
            f"Accuracy: {100 * report.mean_accuracy:.2f} +- {100 * report.ci95:.2f} %",
            f"Time per episode: {1000 * report.mean_episode_seconds:.2f} ms",
        ])

    @staticmethod
    def format_error(message: str) -> str:
        """
        Format an error message for display.

        Args:
            message: Error message

        Returns:
            Formatted error message
        """
        return f"ERROR: {message}"

    @staticmethod
    def format_success(message: str) -> str:
        """
        Format a success message for display.

        Args:
            message: Success message

        Returns:
            Formatted success message
        """
        return f"SUCCESS: {message}"
