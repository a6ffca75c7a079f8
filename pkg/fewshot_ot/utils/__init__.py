"""Utility modules for fewshot-ot."""

from fewshot_ot.utils.logging import RunLogger
from fewshot_ot.utils.formatting import TextFormatter

__all__ = ["RunLogger", "TextFormatter"]
