"""Feature ingestion, synthetic generation and episode sampling."""

from fewshot_ot.features.store import (
    ClassBlock,
    FeatureFormat,
    FeatureFormatError,
    FeatureStore,
    StoreMismatchError,
    concat_stores,
    load_feature_store,
    store_from_arrays,
    write_feature_store,
)
from fewshot_ot.features.episodes import (
    Episode,
    EpisodeError,
    EpisodeSpec,
    derive_episode_seed,
    sample_episode,
)
from fewshot_ot.features.synthetic import SkewMode, generate_synthetic_store

__all__ = [
    "ClassBlock",
    "Episode",
    "EpisodeError",
    "EpisodeSpec",
    "FeatureFormat",
    "FeatureFormatError",
    "FeatureStore",
    "SkewMode",
    "StoreMismatchError",
    "concat_stores",
    "derive_episode_seed",
    "generate_synthetic_store",
    "load_feature_store",
    "sample_episode",
    "store_from_arrays",
    "write_feature_store",
]
