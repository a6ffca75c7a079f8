"""Monte-Carlo evaluation over random episodes."""

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from fewshot_ot.bms.solver import BmsConfig, BmsMode, run_bms
from fewshot_ot.classify.kmeans import kmeans_classify
from fewshot_ot.classify.ncm import ncm_classify
from fewshot_ot.features.episodes import EpisodeSpec, derive_episode_seed, sample_episode
from fewshot_ot.features.store import FeatureStore
from fewshot_ot.preprocess.transforms import (
    CenterMode,
    PreprocessConfig,
    PreprocessError,
    compute_projection_center,
    preprocess_episode,
)

logger = logging.getLogger(__name__)

Z_95 = 1.96

TSV_COLUMNS = [
    "method", "n", "s", "q", "N", "mean", "ci95", "secs_per_episode", "seed",
]


class Method(Enum):
    """Classification method run on every episode."""

    NCM = "ncm"
    BMS = "bms"
    BMS_STAR = "bms_star"
    KMEANS = "kmeans"

    @classmethod
    def from_string(cls, value: str) -> "Method":
        """
        Convert a string to a Method ('ncm', 'bms', 'bms_star', 'kmeans').

        Raises:
            ValueError: If value is not a known method
        """
        normalized = value.lower().replace("*", "_star").replace("-", "_")
        try:
            return cls(normalized)
        except ValueError:
            valid = [m.value for m in cls]
            raise ValueError(f"Invalid method: {value}. Valid methods are: {', '.join(valid)}")

    @property
    def transductive(self) -> bool:
        return self is not Method.NCM

    @property
    def default_center(self) -> CenterMode:
        """Base-mean centering for inductive runs, novel-mean for transductive ones."""
        return CenterMode.NOVEL_MEAN if self.transductive else CenterMode.BASE_MEAN


class EvaluationError(RuntimeError):
    """An episode failed; carries the index and seed needed to replay it."""

    def __init__(self, message: str, episode_index: int, seed: int) -> None:
        super().__init__(f"{message} (episode {episode_index}, seed {seed})")
        self.episode_index = episode_index
        self.seed = seed


@dataclass
class EvalReport:
    """Aggregated result of an evaluation run.

    Attributes:
        method: Method name
        n_way: Classes per episode
        shots: Support samples per class
        queries: Query samples per class (uniform q)
        episodes: Number of episodes N
        seed: Master seed
        mean_accuracy: Mean per-episode query accuracy
        ci95: 1.96 * sample standard deviation / sqrt(N)
        mean_episode_seconds: Mean wall-clock time per episode
        config: Fully resolved configuration
    """

    method: str
    n_way: int
    shots: int
    queries: int
    episodes: int
    seed: int
    mean_accuracy: float
    ci95: float
    mean_episode_seconds: float = 0.0
    config: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        """Serializable view; timing is left out unless asked for."""
        data = {
            "method": self.method,
            "n_way": self.n_way,
            "shots": self.shots,
            "queries": self.queries,
            "episodes": self.episodes,
            "seed": self.seed,
            "mean_accuracy": self.mean_accuracy,
            "ci95": self.ci95,
            "config": self.config,
        }
        if include_timing:
            data["mean_episode_seconds"] = self.mean_episode_seconds
        return data

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True) + "\n"

    def tsv_row(self) -> str:
        """One tab-separated line in TSV_COLUMNS order."""
        return "\t".join([
            self.method,
            str(self.n_way),
            str(self.shots),
            str(self.queries),
            str(self.episodes),
            f"{self.mean_accuracy:.6f}",
            f"{self.ci95:.6f}",
            f"{self.mean_episode_seconds:.6f}",
            str(self.seed),
        ])


def summarize(accuracies) -> Tuple[float, float]:
    """
    Mean and 95% confidence half-width of per-episode accuracies.

    Returns:
        (mean, ci95); ci95 is 0 for a single episode
    """
    values = np.asarray(accuracies, dtype=np.float64)
    n = values.shape[0]
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    return mean, Z_95 * float(np.std(values, ddof=1)) / math.sqrt(n)


def resolve_method_config(method: Method, spec: EpisodeSpec, method_cfg: Optional[BmsConfig]) -> BmsConfig:
    """Method settings with the mode and, for bms_star, the exact class sizes filled in."""
    cfg = method_cfg or BmsConfig()
    if method is Method.BMS_STAR:
        return replace(cfg, mode=BmsMode.BMS_STAR, exact_targets=cfg.exact_targets or spec.class_totals)
    if method is Method.BMS:
        return replace(cfg, mode=BmsMode.BMS, exact_targets=None)
    return cfg


def classify_episode(processed, method: Method, cfg: BmsConfig) -> np.ndarray:
    """Query predictions of one preprocessed episode."""
    if method is Method.NCM:
        return ncm_classify(processed)
    if method is Method.KMEANS:
        return kmeans_classify(processed, cfg.outer_iters)
    return run_bms(processed, cfg)


def evaluate(
    store: FeatureStore,
    base_store: Optional[FeatureStore],
    spec: EpisodeSpec,
    prep: PreprocessConfig,
    method: Method,
    method_cfg: Optional[BmsConfig] = None,
    episodes: int = 10000,
    seed: int = 0,
    threads: int = 1,
    progress_callback: Optional[Callable[[int, int], None]] = None,
) -> EvalReport:
    """
    Evaluate a method over random episodes.

    Episode i is drawn with seed ``derive_episode_seed(seed, i)``, so the
    report does not depend on the number of worker threads.

    Args:
        store: Novel-class features
        base_store: Base-class features (needed for base-mean centering)
        spec: Episode shape; its seed is replaced per episode
        prep: Preprocessing settings
        method: Classification method
        method_cfg: BMS / K-Means settings
        episodes: Number of episodes N
        seed: Master seed
        threads: Worker threads
        progress_callback: Called with (completed, total) after each episode

    Returns:
        EvalReport

    Raises:
        EpisodeError: If the episode shape does not fit the store
        PreprocessError: If base-mean centering lacks a base store
        EvaluationError: If an episode fails
    """
    if episodes < 1:
        raise ValueError(f"episodes must be at least 1, got {episodes}")
    if threads < 1:
        raise ValueError(f"threads must be at least 1, got {threads}")
    spec.check_feasible(store)
    cfg = resolve_method_config(method, spec, method_cfg)

    center = None
    if prep.needs_base_store:
        if base_store is None:
            raise PreprocessError("base-mean centering needs a base feature store (--base)")
        if base_store.dim != store.dim:
            raise PreprocessError(f"base store dim {base_store.dim} differs from novel dim {store.dim}")
        center = compute_projection_center(base_store, CenterMode.BASE_MEAN, prep)

    def run_one(index: int) -> Tuple[float, float]:
        episode_seed = derive_episode_seed(seed, index)
        started = time.perf_counter()
        try:
            episode = sample_episode(store, spec.with_seed(episode_seed))
            processed = preprocess_episode(episode, prep, center=center)
            predictions = classify_episode(processed, method, cfg)
        except Exception as e:
            logger.error(f"Episode {index} (seed {episode_seed}) failed: {e}")
            raise EvaluationError(str(e), index, episode_seed) from e
        accuracy = float(np.mean(predictions == processed.hidden_labels))
        return accuracy, time.perf_counter() - started

    logger.info(f"Evaluating {method.value} on {episodes} episodes ({threads} threads, seed {seed})")
    accuracies = np.empty(episodes)
    seconds = np.empty(episodes)
    with ThreadPoolExecutor(max_workers=threads) as executor:
        for index, (accuracy, elapsed) in enumerate(executor.map(run_one, range(episodes))):
            accuracies[index] = accuracy
            seconds[index] = elapsed
            if progress_callback:
                progress_callback(index + 1, episodes)

    mean, ci95 = summarize(accuracies)
    config = {
        "episode": {
            "n_way": spec.n_way,
            "shots": spec.shots,
            "queries": spec.queries_per_class,
            "query_counts": list(spec.query_counts) if spec.query_counts else None,
        },
        "preprocess": prep.to_dict(),
        "method": method.value,
    }
    if method.transductive:
        config["bms"] = {**cfg.to_dict(), "epochs_resolved": cfg.resolve_epochs(spec.shots)}

    report = EvalReport(
        method=method.value,
        n_way=spec.n_way,
        shots=spec.shots,
        queries=spec.queries_per_class,
        episodes=episodes,
        seed=seed,
        mean_accuracy=mean,
        ci95=ci95,
        mean_episode_seconds=math.fsum(seconds) / episodes,
        config=config,
    )
    logger.info(f"{method.value}: accuracy {mean:.4f} +- {ci95:.4f}")
    return report
