"""Feature preprocessing (PEME and simpler normalization chains) and QR reduction."""

from fewshot_ot.preprocess.reduction import qr_reduce
from fewshot_ot.preprocess.transforms import (
    CenterMode,
    NormMethod,
    PreprocessConfig,
    PreprocessError,
    ProcessedEpisode,
    batch_standardize,
    compute_projection_center,
    euclidean_normalize,
    mean_subtract,
    peme,
    power_transform,
    preprocess_episode,
)

__all__ = [
    "CenterMode",
    "NormMethod",
    "PreprocessConfig",
    "PreprocessError",
    "ProcessedEpisode",
    "batch_standardize",
    "compute_projection_center",
    "euclidean_normalize",
    "mean_subtract",
    "peme",
    "power_transform",
    "preprocess_episode",
    "qr_reduce",
]
