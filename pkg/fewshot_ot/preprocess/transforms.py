"""PEME feature preprocessing: Power transform, Euclidean normalization,
Mean subtraction, Euclidean normalization. The L2N, CL2N and batch
standardization chains share its final normalization and QR step."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from fewshot_ot.features.episodes import Episode
from fewshot_ot.features.store import FeatureStore
from fewshot_ot.preprocess.reduction import qr_reduce

logger = logging.getLogger(__name__)


class PreprocessError(ValueError):
    """Raised when a preprocessing step receives invalid input."""


class CenterMode(Enum):
    """Projection center used by the mean-subtraction step."""

    BASE_MEAN = "base"
    NOVEL_MEAN = "novel"
    NONE = "none"

    @classmethod
    def from_string(cls, value: str) -> "CenterMode":
        """
        Convert a string to a CenterMode ('base', 'novel', 'none').

        Raises:
            ValueError: If value is not a known mode
        """
        aliases = {"base_mean": "base", "novel_mean": "novel", "m_b": "base", "m_n": "novel"}
        try:
            return cls(aliases.get(value.lower(), value.lower()))
        except ValueError:
            valid = [m.value for m in cls]
            raise ValueError(f"Invalid center mode: {value}. Valid modes are: {', '.join(valid)}")


class NormMethod(Enum):
    """Normalization chain applied to the vectors of an episode."""

    PEME = "peme"
    L2N = "l2n"
    CL2N = "cl2n"
    BN = "bn"

    @classmethod
    def from_string(cls, value: str) -> "NormMethod":
        """
        Convert a string to a NormMethod ('peme', 'l2n', 'cl2n', 'bn').

        Raises:
            ValueError: If value is not a known method
        """
        aliases = {"batchnorm": "bn", "batch_norm": "bn", "l2": "l2n"}
        try:
            return cls(aliases.get(value.lower(), value.lower()))
        except ValueError:
            valid = [m.value for m in cls]
            raise ValueError(f"Invalid preprocessing method: {value}. Valid methods are: {', '.join(valid)}")

    @property
    def centered(self) -> bool:
        """Whether the chain subtracts a projection center."""
        return self in (NormMethod.PEME, NormMethod.CL2N)


@dataclass(frozen=True)
class PreprocessConfig:
    """Settings of the preprocessing chain.

    Attributes:
        method: Normalization chain (PEME by default)
        beta: Power transform exponent
        epsilon: Offset added before exponentiation
        center_mode: Projection center for mean subtraction
        apply_qr: Re-express each episode in an orthonormal basis of its span
        power: Apply the power transform (False gives the E-M-E chain)
        base_center_space: 'pe' averages P+E-processed base vectors,
            'raw' averages raw base vectors then applies P and E to the mean
    """

    method: NormMethod = NormMethod.PEME
    beta: float = 0.5
    epsilon: float = 1e-6
    center_mode: CenterMode = CenterMode.NOVEL_MEAN
    apply_qr: bool = True
    power: bool = True
    base_center_space: str = "pe"

    def __post_init__(self) -> None:
        if self.beta == 0:
            raise PreprocessError("beta must be nonzero")
        if self.epsilon <= 0:
            raise PreprocessError(f"epsilon must be positive, got {self.epsilon}")
        if self.base_center_space not in ("pe", "raw"):
            raise PreprocessError(
                f"base_center_space must be 'pe' or 'raw', got {self.base_center_space!r}"
            )
        if not isinstance(self.center_mode, CenterMode):
            object.__setattr__(self, "center_mode", CenterMode.from_string(self.center_mode))
        if not isinstance(self.method, NormMethod):
            object.__setattr__(self, "method", NormMethod.from_string(self.method))

    @property
    def needs_base_store(self) -> bool:
        """Whether episodes are centered on the base-class mean."""
        return self.method.centered and self.center_mode is CenterMode.BASE_MEAN

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "beta": self.beta,
            "epsilon": self.epsilon,
            "center_mode": self.center_mode.value,
            "apply_qr": self.apply_qr,
            "power": self.power,
            "base_center_space": self.base_center_space,
        }


@dataclass(frozen=True, eq=False)
class ProcessedEpisode:
    """Episode after preprocessing; every row has unit norm.

    Attributes:
        support: l x d' matrix
        support_labels: length-l labels in [0, n)
        query: u x d' matrix
        hidden_labels: length-u ground truth
        n_way: Number of classes
    """

    support: np.ndarray
    support_labels: np.ndarray
    query: np.ndarray
    hidden_labels: np.ndarray
    n_way: int

    @property
    def dim(self) -> int:
        return int(self.support.shape[1])

    @property
    def shots(self) -> int:
        return int(np.bincount(self.support_labels, minlength=self.n_way).min())

    def stacked(self) -> np.ndarray:
        """Support rows followed by query rows."""
        return np.vstack([self.support, self.query])


def power_transform(v: np.ndarray, beta: float = 0.5, epsilon: float = 1e-6) -> np.ndarray:
    """
    Elementwise ``(v + epsilon) ** beta``.

    Args:
        v: Nonnegative vector or matrix
        beta: Exponent
        epsilon: Positive offset

    Returns:
        Transformed array (strictly positive when beta > 0)

    Raises:
        PreprocessError: On negative entries
    """
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0):
        raise PreprocessError(f"power transform needs nonnegative input, got {float(v.min())}")
    return np.power(v + epsilon, beta)


def euclidean_normalize(v: np.ndarray) -> np.ndarray:
    """
    Scale a vector (or every row of a matrix) to unit Euclidean norm.

    Raises:
        PreprocessError: If a vector has zero norm
    """
    v = np.asarray(v, dtype=np.float64)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms <= 0) or not np.all(np.isfinite(norms)):
        raise PreprocessError("cannot normalize a zero or non-finite vector")
    return v / norms


def mean_subtract(v: np.ndarray, m: np.ndarray) -> np.ndarray:
    """
    Translate a vector (or every row of a matrix) by the projection center.

    Raises:
        PreprocessError: On dimension mismatch
    """
    v = np.asarray(v, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 1 or v.shape[-1] != m.shape[0]:
        raise PreprocessError(f"dimension mismatch: vectors {v.shape}, center {m.shape}")
    return v - m


def _power_normalize(rows: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """The P and first E steps."""
    if cfg.power:
        rows = power_transform(rows, cfg.beta, cfg.epsilon)
    return euclidean_normalize(rows)


def _center_space(rows: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Vectors in the space the projection center lives in."""
    if cfg.method is NormMethod.CL2N:
        return np.asarray(rows, dtype=np.float64)
    return _power_normalize(rows, cfg)


def compute_projection_center(
    source: Union[FeatureStore, Episode],
    mode: Union[str, CenterMode],
    cfg: Optional[PreprocessConfig] = None,
) -> np.ndarray:
    """
    Projection center for the mean-subtraction step.

    ``base``: mean of the power-transformed and normalized base vectors.
    ``novel``: mean of the power-transformed and normalized l + u episode vectors.
    For the CL2N chain both means are taken over the raw vectors.

    Args:
        source: Base FeatureStore (base mode) or Episode (novel mode)
        mode: Center mode
        cfg: Preprocessing settings (method, beta, epsilon, power, base_center_space)

    Returns:
        Center vector of dimension d

    Raises:
        PreprocessError: If the mode is 'none' or the source does not match it
    """
    cfg = cfg or PreprocessConfig()
    mode = mode if isinstance(mode, CenterMode) else CenterMode.from_string(mode)

    if mode is CenterMode.NONE:
        raise PreprocessError("no projection center for center mode 'none'")

    if mode is CenterMode.BASE_MEAN:
        if not isinstance(source, FeatureStore):
            raise PreprocessError("base-mean centering needs a base feature store")
        vectors, _ = source.stacked()
        if cfg.base_center_space == "raw" and cfg.method is NormMethod.PEME:
            return _power_normalize(vectors.mean(axis=0), cfg)
        return _center_space(vectors, cfg).mean(axis=0)

    if not isinstance(source, Episode):
        raise PreprocessError("novel-mean centering needs an episode")
    return _center_space(source.stacked(), cfg).mean(axis=0)


def batch_standardize(rows: np.ndarray) -> np.ndarray:
    """
    Shift every dimension to zero mean and scale it to unit variance over
    the given rows. Constant dimensions are only shifted.
    """
    rows = np.asarray(rows, dtype=np.float64)
    std = rows.std(axis=0)
    return (rows - rows.mean(axis=0)) / np.where(std > 0, std, 1.0)


def _subtract_center(
    rows: np.ndarray,
    cfg: PreprocessConfig,
    base_store: Optional[FeatureStore],
    center: Optional[np.ndarray],
) -> np.ndarray:
    if cfg.center_mode is CenterMode.NOVEL_MEAN:
        return mean_subtract(rows, rows.mean(axis=0))
    if cfg.center_mode is CenterMode.BASE_MEAN:
        if center is None:
            if base_store is None:
                raise PreprocessError("base-mean centering needs a base feature store")
            center = compute_projection_center(base_store, CenterMode.BASE_MEAN, cfg)
        return mean_subtract(rows, center)
    return rows


def _finish(episode: Episode, rows: np.ndarray, cfg: PreprocessConfig) -> ProcessedEpisode:
    if cfg.apply_qr:
        rows = qr_reduce(rows)

    n_support = episode.support.shape[0]
    return ProcessedEpisode(
        support=rows[:n_support],
        support_labels=episode.support_labels,
        query=rows[n_support:],
        hidden_labels=episode.hidden_labels,
        n_way=episode.n_way,
    )


def peme(
    episode: Episode,
    cfg: PreprocessConfig,
    base_store: Optional[FeatureStore] = None,
    center: Optional[np.ndarray] = None,
) -> ProcessedEpisode:
    """
    Apply P -> E -> M -> E to every support and query vector, then the
    optional QR reduction of the stacked l + u rows.

    Args:
        episode: Raw episode
        cfg: Preprocessing settings
        base_store: Base features, required for base-mean centering unless
            ``center`` is given
        center: Precomputed base-mean center (reused across episodes)

    Returns:
        ProcessedEpisode with unit-norm rows

    Raises:
        PreprocessError: On invalid input or a missing base store
    """
    rows = _power_normalize(episode.stacked(), cfg)
    rows = euclidean_normalize(_subtract_center(rows, cfg, base_store, center))
    return _finish(episode, rows, cfg)


def preprocess_episode(
    episode: Episode,
    cfg: PreprocessConfig,
    base_store: Optional[FeatureStore] = None,
    center: Optional[np.ndarray] = None,
) -> ProcessedEpisode:
    """
    Apply the normalization chain named by ``cfg.method``.

    ``peme``: power transform, normalize, center, normalize.
    ``l2n``: normalize only.
    ``cl2n``: center the raw vectors, then normalize.
    ``bn``: standardize each dimension over the l + u rows, then normalize.

    Every chain ends on unit-norm rows and the optional QR reduction.
    Arguments are those of :func:`peme`.
    """
    if cfg.method is NormMethod.PEME:
        return peme(episode, cfg, base_store, center)

    rows = np.asarray(episode.stacked(), dtype=np.float64)
    if cfg.method is NormMethod.CL2N:
        rows = _subtract_center(rows, cfg, base_store, center)
    elif cfg.method is NormMethod.BN:
        rows = batch_standardize(rows)
    return _finish(episode, euclidean_normalize(rows), cfg)
