"""Progress indicator utilities for long-running evaluations."""

import sys
import time
from typing import Callable, Optional, TextIO


class ProgressIndicator:
    """
    Progress indicator for episode loops.

    Rendered on stderr so that standard output stays machine-readable.
    Supported styles are 'bar', 'percent' and 'simple'.

    Attributes:
        total: Total number of steps
        width: Width of the progress bar
        style: Style of the progress indicator
        description: Description text
        _current: Current progress value
        _start_time: Time when the progress started
    """

    def __init__(
        self,
        total: int = 100,
        width: int = 40,
        style: str = 'bar',
        description: str = 'Progress',
        completed_char: str = '█',
        remaining_char: str = '░',
        stream: Optional[TextIO] = None,
    ):
        """
        Initialize the progress indicator.

        Args:
            total: Total number of steps
            width: Width of the progress bar
            style: Style of the progress indicator ('bar', 'percent', 'simple')
            description: Description text
            completed_char: Character to use for completed progress
            remaining_char: Character to use for remaining progress
            stream: Output stream (defaults to stderr)
        """
        self.total = max(1, total)  # Minimum of 1 to avoid division by zero
        self.width = width
        self.style = style
        self.description = description
        self.completed_char = completed_char
        self.remaining_char = remaining_char
        self.stream = stream or sys.stderr

        self._current = 0
        self._start_time = 0.0
        self._last_update = 0.0
        self._last_line_length = 0
        self._is_terminal = hasattr(self.stream, "isatty") and self.stream.isatty()

    @staticmethod
    def _format_time(seconds: float) -> str:
        """
        Format seconds into a human-readable time string.

        Args:
            seconds: Number of seconds

        Returns:
            Formatted time string
        """
        if seconds < 60:
            return f"{seconds:.1f}s"
        elif seconds < 3600:
            minutes, seconds = divmod(seconds, 60)
            return f"{int(minutes)}m {int(seconds)}s"
        else:
            hours, rest = divmod(seconds, 3600)
            return f"{int(hours)}h {int(rest // 60)}m"

    def _calculate_eta(self) -> str:
        """Estimated time remaining."""
        if self._current == 0:
            return "calculating..."

        elapsed = time.time() - self._start_time
        rate = self._current / elapsed if elapsed > 0 else 0
        remaining = (self.total - self._current) / rate if rate > 0 else 0
        return self._format_time(remaining)

    def format_line(self) -> str:
        """
        Format the current progress line according to the style.

        Returns:
            Progress line without trailing newline
        """
        percent = min(100, int(self._current / self.total * 100))

        if self.style == 'simple':
            return f"{self.description}: {self._current}/{self.total}"
        if self.style == 'percent':
            return f"{self.description}: {percent}% ({self._current}/{self.total})"

        filled_width = int(self.width * self._current / self.total)
        bar = self.completed_char * filled_width + self.remaining_char * (self.width - filled_width)
        elapsed = time.time() - self._start_time
        speed = self._current / elapsed if elapsed > 0 else 0
        return (
            f"{self.description}: |{bar}| {percent}% ({self._current}/{self.total}) "
            f"{speed:.1f} ep/s ETA: {self._calculate_eta()}"
        )

    def _update_display(self) -> None:
        """Update the progress display."""
        # Throttle updates to avoid excessive screen refreshes
        current_time = time.time()
        if current_time - self._last_update < 0.1 and self._current < self.total:
            return
        self._last_update = current_time

        line = self.format_line()
        if self._is_terminal:
            padding = max(0, self._last_line_length - len(line))
            self.stream.write(f"\r{line}{' ' * padding}")
            self.stream.flush()
        elif self._current == 0 or self._current == self.total:
            self.stream.write(line + "\n")
        self._last_line_length = len(line)

    def start(self) -> None:
        """Start the progress indicator."""
        self._current = 0
        self._start_time = time.time()
        self._update_display()

    def update(self, current: Optional[int] = None, advance: int = 1) -> None:
        """
        Update the progress indicator.

        Args:
            current: New current value (if None, advance by increment)
            advance: Amount to advance if current is None
        """
        if current is not None:
            self._current = min(current, self.total)
        else:
            self._current = min(self._current + advance, self.total)
        self._update_display()

    def finish(self) -> None:
        """Complete the progress and clean up."""
        self._current = self.total
        self._last_update = 0.0
        self._update_display()
        if self._is_terminal:
            self.stream.write("\n")
            self.stream.flush()

    def __enter__(self) -> 'ProgressIndicator':
        self.start()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.finish()


class ProgressCallback:
    """
    Adapter turning a ProgressIndicator into a ``(current, total)`` callback.

    Attributes:
        progress: ProgressIndicator instance
    """

    def __init__(self, progress: ProgressIndicator):
        self.progress = progress

    def __call__(self, current: int, total: int, message: Optional[str] = None) -> None:
        """
        Update progress when the callback is called.

        Args:
            current: Current progress value
            total: Total number of steps
            message: Optional message to display
        """
        if total != self.progress.total:
            self.progress.total = max(1, total)
        if message:
            self.progress.description = message
        self.progress.update(current)

    def finish(self) -> None:
        self.progress.finish()


def create_progress_bar(total: int, description: str = "Progress", style: str = "bar") -> ProgressIndicator:
    """
    Create a progress bar for a task.

    Args:
        total: Total number of steps
        description: Description of the task
        style: Style of progress indicator

    Returns:
        ProgressIndicator instance
    """
    return ProgressIndicator(total=total, description=description, style=style)


def get_progress_callback(description: str = "Progress", total: int = 100, style: str = "bar") -> Callable:
    """
    Get a started callback function for progress updates.

    Args:
        description: Description of the task
        total: Total number of steps
        style: Style of progress indicator

    Returns:
        ProgressCallback with a ``finish()`` method
    """
    progress = create_progress_bar(total, description, style)
    progress.start()
    return ProgressCallback(progress)
