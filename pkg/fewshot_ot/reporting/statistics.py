"""Distribution diagnostics for feature stores.

Skewness, kurtosis and the D'Agostino-Pearson omnibus normality test,
evaluated per class and per feature dimension, plus the raw data behind
per-feature histograms and principal-direction scatter plots.

The omnibus statistic combines two normalizing transformations:

* skewness: D'Agostino (1970), Johnson SU approximation of sqrt(b1);
* kurtosis: Anscombe and Glynn (1983), Wilson-Hilferty cube root of b2.

K2 = Z1^2 + Z2^2 is referred to a chi-square distribution with 2 degrees
of freedom. The constants below match the formulation used by
``scipy.stats.skewtest`` and ``scipy.stats.kurtosistest``.
"""

import csv
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from fewshot_ot.features.store import FeatureStore
from fewshot_ot.preprocess.transforms import euclidean_normalize, power_transform

logger = logging.getLogger(__name__)

MIN_SAMPLES = 20
DEFAULT_ALPHA = 1e-3

GAUSSIANITY_COLUMNS = ["class_id", "dim_index", "k2", "p", "pass"]


class NormalityError(ValueError):
    """Raised when a sample is too small or constant for the test."""


class Transform(Enum):
    """Feature transform applied before the diagnostics."""

    NONE = "none"
    POWER = "p"
    POWER_NORMALIZE = "pe"

    @classmethod
    def from_string(cls, value: Optional[str]) -> "Transform":
        """
        Convert a string to a Transform ('none', 'p', 'pe').

        Raises:
            ValueError: If value is not a known transform
        """
        if value is None:
            return cls.NONE
        try:
            return cls(value.lower())
        except ValueError:
            valid = [t.value for t in cls]
            raise ValueError(f"Invalid transform: {value}. Valid transforms are: {', '.join(valid)}")


def apply_transform(
    vectors: np.ndarray,
    transform: Union[str, Transform, None] = None,
    beta: float = 0.5,
    epsilon: float = 1e-6,
) -> np.ndarray:
    """Apply the power transform (p) and the row normalization (pe) to raw vectors."""
    transform = transform if isinstance(transform, Transform) else Transform.from_string(transform)
    vectors = np.asarray(vectors, dtype=np.float64)
    if transform is Transform.NONE:
        return vectors
    vectors = power_transform(vectors, beta, epsilon)
    if transform is Transform.POWER_NORMALIZE:
        vectors = euclidean_normalize(vectors)
    return vectors


def _central_moments(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    centered = X - X.mean(axis=0)
    return (
        (centered ** 2).mean(axis=0),
        (centered ** 3).mean(axis=0),
        (centered ** 4).mean(axis=0),
    )


def _as_columns(xs: np.ndarray, min_samples: int) -> np.ndarray:
    X = np.asarray(xs, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < min_samples:
        raise NormalityError(f"need at least {min_samples} samples, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise NormalityError("sample contains non-finite values")
    constant = np.flatnonzero(np.ptp(X, axis=0) == 0)
    if constant.size:
        raise NormalityError(f"sample column {int(constant[0])} is constant")
    return X


def sample_skewness(xs) -> float:
    """
    Moment skewness g1 = m3 / m2^(3/2).

    Raises:
        NormalityError: With fewer than 3 samples or a constant sample
    """
    X = _as_columns(xs, 3)[:, 0]
    m2, m3, _ = _central_moments(X)
    return float(m3 / m2 ** 1.5)


def sample_kurtosis(xs) -> float:
    """
    Excess moment kurtosis g2 = m4 / m2^2 - 3.

    Raises:
        NormalityError: With fewer than 4 samples or a constant sample
    """
    X = _as_columns(xs, 4)[:, 0]
    m2, _, m4 = _central_moments(X)
    return float(m4 / m2 ** 2 - 3.0)


def skewness_z(b1: np.ndarray, n: int) -> np.ndarray:
    """Normal deviate of the sample skewness b1 (D'Agostino transformation)."""
    y = b1 * np.sqrt((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0)))
    beta2 = (
        3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0)
        / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0))
    )
    w2 = -1.0 + np.sqrt(2.0 * (beta2 - 1.0))
    delta = 1.0 / np.sqrt(0.5 * np.log(w2))
    alpha = np.sqrt(2.0 / (w2 - 1.0))
    # log(t + sqrt(t^2 + 1)) == arcsinh(t)
    return delta * np.arcsinh(y / alpha)


def kurtosis_z(b2: np.ndarray, n: int) -> np.ndarray:
    """Normal deviate of the (non-excess) sample kurtosis b2 (Anscombe-Glynn transformation)."""
    expected = 3.0 * (n - 1.0) / (n + 1.0)
    variance = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) ** 2 * (n + 3.0) * (n + 5.0))
    x = (b2 - expected) / np.sqrt(variance)
    sqrt_beta1 = (
        6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0))
        * np.sqrt(6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0)))
    )
    A = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + np.sqrt(1.0 + 4.0 / sqrt_beta1 ** 2))
    term1 = 1.0 - 2.0 / (9.0 * A)
    denom = 1.0 + x * np.sqrt(2.0 / (A - 4.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        term2 = np.sign(denom) * np.cbrt((1.0 - 2.0 / A) / np.abs(denom))
    term2 = np.where(denom == 0, np.nan, term2)
    return (term1 - term2) / np.sqrt(2.0 / (9.0 * A))


@dataclass(frozen=True)
class NormalityResult:
    """Outcome of one omnibus test.

    Attributes:
        k2: Omnibus statistic
        p_value: Chi-square(2) survival probability of k2
        n_samples: Sample size
    """

    k2: float
    p_value: float
    n_samples: int

    def passes(self, alpha: float = DEFAULT_ALPHA) -> bool:
        """Fail-to-reject at level alpha."""
        return self.p_value > alpha


def dagostino_pearson_columns(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Omnibus test applied to every column of X.

    Args:
        X: n x m matrix, n >= 20

    Returns:
        (k2, p) arrays of length m

    Raises:
        NormalityError: Too few samples or a constant column
    """
    X = _as_columns(X, MIN_SAMPLES)
    n = X.shape[0]
    m2, m3, m4 = _central_moments(X)
    z1 = skewness_z(m3 / m2 ** 1.5, n)
    z2 = kurtosis_z(m4 / m2 ** 2, n)
    k2 = z1 ** 2 + z2 ** 2
    return k2, stats.chi2.sf(k2, 2)


def dagostino_pearson(xs) -> NormalityResult:
    """
    D'Agostino-Pearson omnibus normality test.

    Args:
        xs: Real sample of length >= 20

    Returns:
        NormalityResult

    Raises:
        NormalityError: Too few samples or a constant sample
    """
    X = np.asarray(xs, dtype=np.float64).ravel()
    k2, p = dagostino_pearson_columns(X)
    return NormalityResult(k2=float(k2[0]), p_value=float(p[0]), n_samples=X.shape[0])


@dataclass(frozen=True)
class GaussianityRow:
    """Test outcome for one (class, dimension) cell."""

    class_id: int
    dim_index: int
    k2: float
    p_value: float
    passed: bool


def gaussianity_table(
    store: FeatureStore,
    transform: Union[str, Transform, None] = None,
    alpha: float = DEFAULT_ALPHA,
    beta: float = 0.5,
    epsilon: float = 1e-6,
) -> List[GaussianityRow]:
    """
    Run the omnibus test on every dimension of every class.

    Args:
        store: Feature store; every class needs at least 20 vectors
        transform: none, p or pe
        alpha: Significance level; pass means p > alpha
        beta: Power transform exponent
        epsilon: Power transform offset

    Returns:
        Rows ordered by class id then dimension

    Raises:
        NormalityError: On a class that is too small or a constant dimension
    """
    rows = []
    for block in sorted(store.classes, key=lambda b: b.class_id):
        vectors = apply_transform(block.vectors, transform, beta, epsilon)
        try:
            k2, p = dagostino_pearson_columns(vectors)
        except NormalityError as e:
            raise NormalityError(f"class {block.class_id}: {e}") from e
        rows.extend(
            GaussianityRow(block.class_id, dim, float(k2[dim]), float(p[dim]), bool(p[dim] > alpha))
            for dim in range(vectors.shape[1])
        )
    return rows


def gaussianity_pass_rate(
    store: FeatureStore,
    transform: Union[str, Transform, None] = None,
    alpha: float = DEFAULT_ALPHA,
    beta: float = 0.5,
    epsilon: float = 1e-6,
) -> float:
    """Fraction of (class, dimension) cells that pass the omnibus test."""
    rows = gaussianity_table(store, transform, alpha, beta, epsilon)
    rate = sum(row.passed for row in rows) / len(rows)
    logger.info(f"Gaussianity pass rate {rate:.4f} over {len(rows)} tests")
    return rate


def feature_histogram(
    store: FeatureStore,
    class_id: int,
    dim_index: int,
    bins: int = 30,
    transform: Union[str, Transform, None] = None,
    beta: float = 0.5,
    epsilon: float = 1e-6,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Histogram of one feature dimension within one class, after the
    transform with exponent beta and offset epsilon.

    Returns:
        (counts, bin_edges) as returned by numpy.histogram

    Raises:
        KeyError: Unknown class id
        ValueError: Dimension out of range or bins < 1
    """
    if not 0 <= dim_index < store.dim:
        raise ValueError(f"dimension {dim_index} out of range [0, {store.dim})")
    if bins < 1:
        raise ValueError(f"bins must be positive, got {bins}")
    vectors = apply_transform(store.block(class_id).vectors, transform, beta, epsilon)
    return np.histogram(vectors[:, dim_index], bins=bins)


def principal_projection(
    store: FeatureStore,
    class_ids: Optional[Sequence[int]] = None,
    components: int = 3,
    transform: Union[str, Transform, None] = None,
    beta: float = 0.5,
    epsilon: float = 1e-6,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Coordinates of the vectors of some classes on their top principal directions.

    Args:
        store: Feature store
        class_ids: Classes to include (default: all, sorted)
        components: Number of principal directions
        transform: none, p or pe
        beta: Power transform exponent
        epsilon: Power transform offset

    Returns:
        (coordinates as an m x components matrix, class id of each row)
    """
    class_ids = sorted(store.class_ids) if class_ids is None else list(class_ids)
    blocks = [store.block(cid) for cid in class_ids]
    vectors = apply_transform(np.vstack([b.vectors for b in blocks]), transform, beta, epsilon)
    labels = np.concatenate([np.full(b.count, b.class_id, dtype=np.int64) for b in blocks])
    if not 1 <= components <= min(vectors.shape):
        raise ValueError(f"components must be in [1, {min(vectors.shape)}], got {components}")

    centered = vectors - vectors.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return centered @ vt[:components].T, labels


def _write_tsv(output_path: Union[str, Path], header: List[str], rows: Iterable[Sequence]) -> bool:
    try:
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, "w", newline="") as f:
            writer = csv.writer(f, delimiter="\t", lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        logger.info(f"Wrote {output_path}")
        return True
    except OSError as e:
        logger.error(f"Error writing {output_path}: {e}")
        return False


def format_gaussianity_rows(rows: Iterable[GaussianityRow]) -> List[List[str]]:
    return [
        [str(r.class_id), str(r.dim_index), f"{r.k2:.6g}", f"{r.p_value:.6g}", str(int(r.passed))]
        for r in rows
    ]


def export_gaussianity_table(rows: Iterable[GaussianityRow], output_path: Union[str, Path]) -> bool:
    """Write class_id, dim_index, k2, p, pass rows as TSV."""
    return _write_tsv(output_path, GAUSSIANITY_COLUMNS, format_gaussianity_rows(rows))


def export_histograms(
    histograms: Iterable[Tuple[int, int, np.ndarray, np.ndarray]],
    output_path: Union[str, Path],
) -> bool:
    """Write (class_id, dim_index, counts, edges) histograms as one TSV row per bin."""
    rows = []
    for class_id, dim_index, counts, edges in histograms:
        for b, count in enumerate(counts):
            rows.append([class_id, dim_index, f"{edges[b]:.6g}", f"{edges[b + 1]:.6g}", int(count)])
    return _write_tsv(output_path, ["class_id", "dim_index", "bin_low", "bin_high", "count"], rows)


def export_projection(coords: np.ndarray, labels: np.ndarray, output_path: Union[str, Path]) -> bool:
    """Write principal coordinates with their class ids as TSV."""
    header = ["class_id"] + [f"pc{i + 1}" for i in range(coords.shape[1])]
    rows = ([int(label)] + [f"{v:.6g}" for v in row] for label, row in zip(labels, coords))
    return _write_tsv(output_path, header, rows)
