"""
fewshot-ot

Few-shot classification on precomputed feature vectors: PEME preprocessing,
nearest-class-mean and Boosted Min-size Sinkhorn classifiers, and a
Monte-Carlo evaluation harness.
"""

__version__ = "0.1.0"

from fewshot_ot.classify.evaluation import EvalReport, Method, evaluate
from fewshot_ot.features.episodes import EpisodeSpec
from fewshot_ot.features.store import FeatureStore, load_feature_store

__all__ = [
    "EpisodeSpec",
    "EvalReport",
    "FeatureStore",
    "Method",
    "evaluate",
    "load_feature_store",
]
