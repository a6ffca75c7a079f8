"""Episode classifiers and the evaluation harness."""

from fewshot_ot.classify.evaluation import (
    EvalReport,
    EvaluationError,
    Method,
    TSV_COLUMNS,
    evaluate,
    summarize,
)
from fewshot_ot.classify.kmeans import kmeans_classify
from fewshot_ot.classify.ncm import class_means, ncm_classify

__all__ = [
    "EvalReport",
    "EvaluationError",
    "Method",
    "TSV_COLUMNS",
    "class_means",
    "evaluate",
    "kmeans_classify",
    "ncm_classify",
    "summarize",
]
