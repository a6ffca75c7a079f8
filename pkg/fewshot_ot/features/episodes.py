"""Few-shot episode specification and reproducible sampling."""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from fewshot_ot.features.store import FeatureStore

logger = logging.getLogger(__name__)

_TWO64 = 1 << 64
_MASK64 = _TWO64 - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class EpisodeError(ValueError):
    """Raised when an episode specification cannot be met by a store."""


def splitmix64(x: int) -> int:
    """SplitMix64 step: advance x by the golden gamma, then mix to 64 bits."""
    z = (x + _GOLDEN_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_episode_seed(master_seed: int, index: int) -> int:
    """
    Seed of the index-th episode of a run.

    ``seed_i = splitmix64(master_seed + (i + 1) * 0x9E3779B97F4A7C15 mod 2^64)``

    Args:
        master_seed: Run seed (u64)
        index: Episode index, starting at 0

    Returns:
        64-bit episode seed
    """
    return splitmix64((master_seed + (index + 1) * _GOLDEN_GAMMA) & _MASK64)


class EpisodeRng:
    """Portable random source for episode draws.

    Wraps numpy's PCG64 bit generator and only consumes its raw 64-bit
    outputs, so draws do not depend on numpy's sampling helpers.
    """

    def __init__(self, seed: int) -> None:
        if not 0 <= seed < _TWO64:
            raise EpisodeError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self._bitgen = np.random.PCG64(seed)

    def next_u64(self) -> int:
        return int(self._bitgen.random_raw())

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection on raw 64-bit draws."""
        limit = _TWO64 - (_TWO64 % bound)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound

    def shuffle_prefix(self, items: Sequence[int], k: int) -> List[int]:
        """
        First k elements of a Fisher-Yates shuffle of ``items``.

        Position i (i = 0..k-1) is swapped with a uniform position in [i, len).
        """
        pool = list(items)
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


@dataclass(frozen=True)
class EpisodeSpec:
    """Shape of a few-shot task.

    Attributes:
        n_way: Number of classes n
        shots: Labelled samples per class s
        queries_per_class: Unlabelled samples per class q
        seed: 64-bit seed of the draw
        query_counts: Optional per-class query counts replacing q
    """

    n_way: int
    shots: int
    queries_per_class: int
    seed: int = 0
    query_counts: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if self.n_way < 1 or self.shots < 1 or self.queries_per_class < 1:
            raise EpisodeError(
                f"n_way, shots and queries_per_class must be positive "
                f"(got {self.n_way}, {self.shots}, {self.queries_per_class})"
            )
        if not 0 <= self.seed < _TWO64:
            raise EpisodeError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.query_counts is not None:
            counts = tuple(int(c) for c in self.query_counts)
            if len(counts) != self.n_way:
                raise EpisodeError(
                    f"query_counts has {len(counts)} entries for a {self.n_way}-way episode"
                )
            if min(counts) < 1:
                raise EpisodeError("every class needs at least one query")
            object.__setattr__(self, "query_counts", counts)

    @property
    def per_class_queries(self) -> Tuple[int, ...]:
        if self.query_counts is not None:
            return self.query_counts
        return (self.queries_per_class,) * self.n_way

    @property
    def support_size(self) -> int:
        return self.n_way * self.shots

    @property
    def query_size(self) -> int:
        return sum(self.per_class_queries)

    @property
    def class_totals(self) -> Tuple[int, ...]:
        """Exact number of support plus query rows per class."""
        return tuple(self.shots + q for q in self.per_class_queries)

    def with_seed(self, seed: int) -> "EpisodeSpec":
        return replace(self, seed=seed)

    def check_feasible(self, store: FeatureStore) -> None:
        """
        Check the episode shape against a store.

        The per-class requirement is checked against every class of the store
        so that feasibility does not depend on which classes are drawn.

        Raises:
            EpisodeError: If some draw could not be served
        """
        if self.n_way > store.num_classes:
            raise EpisodeError(
                f"{self.n_way}-way episodes need {self.n_way} classes, store has {store.num_classes}"
            )
        needed = self.shots + max(self.per_class_queries)
        smallest = min(block.count for block in store.classes)
        if needed > smallest:
            raise EpisodeError(
                f"episodes need {needed} vectors per class (s={self.shots}, "
                f"q={max(self.per_class_queries)}) but the smallest class holds {smallest}"
            )


@dataclass(frozen=True, eq=False)
class Episode:
    """One few-shot task.

    Support and query rows are grouped by episode class (0..n-1).

    Attributes:
        support: l x d matrix
        support_labels: length-l labels in [0, n)
        query: u x d matrix
        hidden_labels: length-u ground truth, only read by the evaluator
        class_ids: Store class id behind each episode class
    """

    support: np.ndarray
    support_labels: np.ndarray
    query: np.ndarray
    hidden_labels: np.ndarray
    class_ids: Tuple[int, ...]

    @property
    def n_way(self) -> int:
        return len(self.class_ids)

    @property
    def dim(self) -> int:
        return int(self.support.shape[1])

    @property
    def shots(self) -> int:
        return int(np.bincount(self.support_labels, minlength=self.n_way).min())

    def stacked(self) -> np.ndarray:
        """Support rows followed by query rows."""
        return np.vstack([self.support, self.query])


def sample_episode(store: FeatureStore, spec: EpisodeSpec) -> Episode:
    """
    Draw an episode from a store.

    Classes are drawn without replacement from the sorted class ids; within
    each drawn class, s + q vectors are drawn without replacement, the first
    s going to the support set and the rest to the query set.

    Args:
        store: Source of feature vectors
        spec: Episode shape and seed

    Returns:
        Episode, deterministic given (store, spec)

    Raises:
        EpisodeError: If the episode shape is infeasible for the store
    """
    spec.check_feasible(store)
    rng = EpisodeRng(spec.seed)

    class_ids = rng.shuffle_prefix(sorted(store.class_ids), spec.n_way)

    support, support_labels, query, hidden_labels = [], [], [], []
    for label, (class_id, n_queries) in enumerate(zip(class_ids, spec.per_class_queries)):
        block = store.block(class_id)
        picked = rng.shuffle_prefix(range(block.count), spec.shots + n_queries)
        support.append(block.vectors[picked[:spec.shots]])
        query.append(block.vectors[picked[spec.shots:]])
        support_labels.append(np.full(spec.shots, label, dtype=np.int64))
        hidden_labels.append(np.full(n_queries, label, dtype=np.int64))

    return Episode(
        support=np.vstack(support),
        support_labels=np.concatenate(support_labels),
        query=np.vstack(query),
        hidden_labels=np.concatenate(hidden_labels),
        class_ids=tuple(class_ids),
    )
