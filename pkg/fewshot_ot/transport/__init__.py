"""Optimal-transport allocation."""

from fewshot_ot.transport.sinkhorn import (
    Marginals,
    SinkhornError,
    cost_matrix,
    min_size_sinkhorn,
    row_normalize_final,
)

__all__ = [
    "Marginals",
    "SinkhornError",
    "cost_matrix",
    "min_size_sinkhorn",
    "row_normalize_final",
]
