"""Run logging utilities: a CSV trail of completed evaluations."""

import csv
import datetime
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

logger = logging.getLogger(__name__)

RUN_LOG_COLUMNS = [
    "timestamp", "method", "n_way", "shots", "queries", "episodes",
    "seed", "mean_accuracy", "ci95",
]


class RunLogger:
    """Logger for the history of evaluation runs.

    Each finished evaluation appends one row to a CSV file so that
    benchmark numbers can be traced back to their seed and settings.

    Attributes:
        log_file_path: Path of the CSV file, or None when disabled
    """

    def __init__(self, log_file_path: Optional[Union[str, Path]] = None) -> None:
        """
        Initialize the run logger.

        Args:
            log_file_path: CSV destination; None disables logging
        """
        self.log_file_path = Path(log_file_path) if log_file_path else None

    @property
    def enabled(self) -> bool:
        """Whether rows are written at all."""
        return self.log_file_path is not None

    def log_run(self, report: Any) -> None:
        """
        Append an evaluation report to the run log.

        Args:
            report: EvalReport (anything exposing the report attributes)
        """
        if not self.enabled:
            return

        try:
            self.log_file_path.parent.mkdir(parents=True, exist_ok=True)
            log_exists = self.log_file_path.exists()

            with open(self.log_file_path, "a", newline="") as f:
                writer = csv.writer(f)

                if not log_exists:
                    writer.writerow(RUN_LOG_COLUMNS)

                writer.writerow([
                    datetime.datetime.now().isoformat(),
                    report.method,
                    report.n_way,
                    report.shots,
                    report.queries,
                    report.episodes,
                    report.seed,
                    f"{report.mean_accuracy:.6f}",
                    f"{report.ci95:.6f}",
                ])

        except OSError as e:
            logger.warning(f"Failed to write run log {self.log_file_path}: {e}")

    def get_recent_runs(self, limit: int = 50) -> List[Dict[str, str]]:
        """
        Get the most recent runs from the log.

        Args:
            limit: Maximum number of runs to return

        Returns:
            List of rows, newest first
        """
        if not self.enabled or not self.log_file_path.exists():
            return []

        try:
            with open(self.log_file_path, "r", newline="") as f:
                runs = [dict(row) for row in csv.DictReader(f)]
        except OSError as e:
            logger.warning(f"Error reading run log: {e}")
            return []

        runs.sort(key=lambda x: x.get("timestamp", ""), reverse=True)
        return runs[:limit]
