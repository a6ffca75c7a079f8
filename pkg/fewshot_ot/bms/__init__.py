"""Boosted Min-size Sinkhorn classifier."""

from fewshot_ot.bms.refine import (
    RefinementError,
    logistic_gradients,
    logistic_loss,
    logistic_refine,
)
from fewshot_ot.bms.solver import (
    BmsConfig,
    BmsMode,
    BmsState,
    estimate_min_size,
    predict,
    run_bms,
    solve,
)
from fewshot_ot.bms.weights import DegenerateWeightsError, init_weights, prototype_update

__all__ = [
    "BmsConfig",
    "BmsMode",
    "BmsState",
    "DegenerateWeightsError",
    "RefinementError",
    "estimate_min_size",
    "init_weights",
    "logistic_gradients",
    "logistic_loss",
    "logistic_refine",
    "predict",
    "prototype_update",
    "run_bms",
    "solve",
]
