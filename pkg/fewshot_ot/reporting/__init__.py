"""Distribution diagnostics and exports."""

from fewshot_ot.reporting.statistics import (
    GaussianityRow,
    NormalityError,
    NormalityResult,
    Transform,
    dagostino_pearson,
    dagostino_pearson_columns,
    feature_histogram,
    gaussianity_pass_rate,
    gaussianity_table,
    principal_projection,
    sample_kurtosis,
    sample_skewness,
)

__all__ = [
    "GaussianityRow",
    "NormalityError",
    "NormalityResult",
    "Transform",
    "dagostino_pearson",
    "dagostino_pearson_columns",
    "feature_histogram",
    "gaussianity_pass_rate",
    "gaussianity_table",
    "principal_projection",
    "sample_kurtosis",
    "sample_skewness",
]
