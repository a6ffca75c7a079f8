"""Feature stores: class-indexed collections of raw backbone features."""

import csv
import logging
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

MAGIC = b"FVS1"
_HEADER = struct.Struct("<4sII")
_CLASS_HEADER = struct.Struct("<II")
_FLOAT = np.dtype("<f4")


class FeatureFormatError(ValueError):
    """Raised when feature data violates the file format or store invariants."""


class StoreMismatchError(ValueError):
    """Raised when stores cannot be combined."""


class FeatureFormat(Enum):
    """On-disk encodings of a feature store."""

    BINARY = "binary"
    CSV = "csv"

    @classmethod
    def from_string(cls, value: str) -> "FeatureFormat":
        """
        Convert a string to a FeatureFormat.

        Args:
            value: 'binary' or 'csv' (case-insensitive)

        Returns:
            FeatureFormat enum value

        Raises:
            ValueError: If value is not a known format
        """
        try:
            return cls(value.lower())
        except ValueError:
            valid = [f.value for f in cls]
            raise ValueError(f"Invalid feature format: {value}. Valid formats are: {', '.join(valid)}")

    @classmethod
    def infer(cls, path: Union[str, Path]) -> "FeatureFormat":
        """Guess the format from the file extension (.csv, anything else is binary)."""
        return cls.CSV if Path(path).suffix.lower() == ".csv" else cls.BINARY


@dataclass(frozen=True, eq=False)
class ClassBlock:
    """All vectors of one class, stored row-major as float64."""

    class_id: int
    vectors: np.ndarray

    def __post_init__(self) -> None:
        vectors = np.array(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise FeatureFormatError(f"class {self.class_id}: vectors must be a 2-D matrix")
        if vectors.shape[0] < 1:
            raise FeatureFormatError(f"class {self.class_id} is empty")
        if not np.all(np.isfinite(vectors)):
            raise FeatureFormatError(f"class {self.class_id} contains non-finite values")
        if np.any(vectors < 0):
            bad = float(vectors.min())
            raise FeatureFormatError(
                f"class {self.class_id} contains negative feature value {bad}; "
                "raw features must be nonnegative"
            )
        vectors.flags.writeable = False
        object.__setattr__(self, "class_id", int(self.class_id))
        object.__setattr__(self, "vectors", vectors)

    @property
    def count(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


@dataclass(frozen=True, eq=False)
class FeatureStore:
    """Immutable class-indexed collection of nonnegative feature vectors.

    Attributes:
        dim: Feature dimensionality d
        classes: Class blocks in storage order
        source_tag: Free-text provenance
    """

    dim: int
    classes: Tuple[ClassBlock, ...]
    source_tag: str = ""

    def __post_init__(self) -> None:
        classes = tuple(self.classes)
        if self.dim < 1:
            raise FeatureFormatError(f"dimension must be positive, got {self.dim}")
        if not classes:
            raise FeatureFormatError("a feature store needs at least one class")

        seen = set()
        for block in classes:
            if block.dim != self.dim:
                raise FeatureFormatError(
                    f"class {block.class_id} has dimension {block.dim}, expected {self.dim}"
                )
            if block.class_id in seen:
                raise FeatureFormatError(f"duplicate class id {block.class_id}")
            seen.add(block.class_id)
        object.__setattr__(self, "classes", classes)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def class_ids(self) -> List[int]:
        return [block.class_id for block in self.classes]

    @property
    def counts(self) -> Dict[int, int]:
        return {block.class_id: block.count for block in self.classes}

    @property
    def total_vectors(self) -> int:
        return sum(block.count for block in self.classes)

    def block(self, class_id: int) -> ClassBlock:
        """
        Look up a class block by id.

        Raises:
            KeyError: If the class is not in the store
        """
        for block in self.classes:
            if block.class_id == class_id:
                return block
        raise KeyError(f"class {class_id} not in store")

    def stacked(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        All vectors stacked in storage order.

        Returns:
            Tuple of (vectors, class ids per row)
        """
        vectors = np.vstack([block.vectors for block in self.classes])
        labels = np.concatenate(
            [np.full(block.count, block.class_id, dtype=np.int64) for block in self.classes]
        )
        return vectors, labels


def store_from_arrays(
    vectors_by_class: Dict[int, np.ndarray], source_tag: str = ""
) -> FeatureStore:
    """
    Build a store from a ``{class_id: matrix}`` mapping.

    Args:
        vectors_by_class: Per-class matrices, all with the same column count
        source_tag: Provenance text

    Returns:
        FeatureStore
    """
    blocks = tuple(ClassBlock(cid, vecs) for cid, vecs in vectors_by_class.items())
    if not blocks:
        raise FeatureFormatError("a feature store needs at least one class")
    return FeatureStore(blocks[0].dim, blocks, source_tag)


def load_feature_store(
    path: Union[str, Path], format: Union[str, FeatureFormat, None] = None
) -> FeatureStore:
    """
    Load a feature store from disk.

    Args:
        path: File to read
        format: 'binary', 'csv' or None to infer from the extension

    Returns:
        FeatureStore satisfying all store invariants

    Raises:
        FileNotFoundError: If the file does not exist
        FeatureFormatError: On malformed content or negative features
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Feature file not found: {path}")

    if format is None:
        fmt = FeatureFormat.infer(path)
    elif isinstance(format, FeatureFormat):
        fmt = format
    else:
        fmt = FeatureFormat.from_string(format)

    if fmt is FeatureFormat.BINARY:
        store = _read_binary(path)
    else:
        store = _read_csv(path)

    logger.debug(
        f"Loaded {store.total_vectors} vectors in {store.num_classes} classes "
        f"(dim {store.dim}) from {path}"
    )
    return store


def _read_binary(path: Path) -> FeatureStore:
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise FeatureFormatError(f"{path}: file too short for header")

    magic, dim, num_classes = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if dim == 0:
        raise FeatureFormatError(f"{path}: header declares dimension 0")
    if num_classes == 0:
        raise FeatureFormatError(f"{path}: header declares no classes")

    offset = _HEADER.size
    blocks = []
    for _ in range(num_classes):
        if offset + _CLASS_HEADER.size > len(data):
            raise FeatureFormatError(f"{path}: truncated class header at byte {offset}")
        class_id, count = _CLASS_HEADER.unpack_from(data, offset)
        offset += _CLASS_HEADER.size
        if count == 0:
            raise FeatureFormatError(f"{path}: class {class_id} is empty")

        nbytes = count * dim * _FLOAT.itemsize
        if offset + nbytes > len(data):
            raise FeatureFormatError(f"{path}: truncated vectors for class {class_id}")
        values = np.frombuffer(data, dtype=_FLOAT, count=count * dim, offset=offset)
        offset += nbytes
        blocks.append(ClassBlock(class_id, values.reshape(count, dim)))

    if offset != len(data):
        raise FeatureFormatError(f"{path}: {len(data) - offset} trailing bytes after last class")

    return FeatureStore(dim, tuple(blocks), str(path))


def _read_csv(path: Path) -> FeatureStore:
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0].strip() != "class" or len(header) < 2:
            raise FeatureFormatError(f"{path}: header must be 'class,f0,...,f{{d-1}}'")

        dim = len(header) - 1
        expected = [f"f{i}" for i in range(dim)]
        if [h.strip() for h in header[1:]] != expected:
            raise FeatureFormatError(f"{path}: feature columns must be named f0..f{dim - 1}")

        rows_by_class: Dict[int, List[List[float]]] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise FeatureFormatError(
                    f"{path}:{line_no}: dimension mismatch, expected {dim} features, got {len(row) - 1}"
                )
            try:
                class_id = int(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError as e:
                raise FeatureFormatError(f"{path}:{line_no}: {e}")
            rows_by_class.setdefault(class_id, []).append(values)

    if not rows_by_class:
        raise FeatureFormatError(f"{path}: no feature rows")

    # Same precision as the binary format
    blocks = tuple(
        ClassBlock(cid, np.asarray(rows, dtype=np.float32))
        for cid, rows in rows_by_class.items()
    )
    return FeatureStore(dim, blocks, str(path))


def write_feature_store(
    store: FeatureStore,
    path: Union[str, Path],
    format: Union[str, FeatureFormat, None] = None,
) -> Path:
    """
    Write a store in the binary or CSV format.

    Values are written as 32-bit floats.

    Args:
        store: Store to write
        path: Destination file
        format: 'binary', 'csv' or None to infer from the extension

    Returns:
        The written path
    """
    path = Path(path)
    if format is None:
        fmt = FeatureFormat.infer(path)
    elif isinstance(format, FeatureFormat):
        fmt = format
    else:
        fmt = FeatureFormat.from_string(format)

    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt is FeatureFormat.BINARY:
        with open(path, "wb") as f:
            f.write(_HEADER.pack(MAGIC, store.dim, store.num_classes))
            for block in store.classes:
                f.write(_CLASS_HEADER.pack(block.class_id, block.count))
                f.write(block.vectors.astype(_FLOAT).tobytes(order="C"))
    else:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["class"] + [f"f{i}" for i in range(store.dim)])
            for block in store.classes:
                for row in block.vectors.astype(np.float32).tolist():
                    writer.writerow([block.class_id] + [f"{v:.9g}" for v in row])

    logger.debug(f"Wrote {store.total_vectors} vectors to {path} ({fmt.value})")
    return path


def concat_stores(stores: Sequence[FeatureStore]) -> FeatureStore:
    """
    Concatenate features of the same samples extracted by several backbones.

    Vector i of class c in the result is the concatenation of vector i of
    class c from each input, in order.

    Args:
        stores: Stores sharing class ids and per-class counts

    Returns:
        Store of dimension sum(dims)

    Raises:
        StoreMismatchError: On differing class sets or counts
    """
    if not stores:
        raise StoreMismatchError("nothing to concatenate")
    if len(stores) == 1:
        return stores[0]

    reference = stores[0]
    for other in stores[1:]:
        if set(other.class_ids) != set(reference.class_ids):
            raise StoreMismatchError(
                f"class sets differ: {sorted(reference.class_ids)} vs {sorted(other.class_ids)}"
            )
        for block in reference.classes:
            if other.block(block.class_id).count != block.count:
                raise StoreMismatchError(
                    f"class {block.class_id}: {block.count} vs "
                    f"{other.block(block.class_id).count} vectors"
                )

    blocks = tuple(
        ClassBlock(
            block.class_id,
            np.hstack([store.block(block.class_id).vectors for store in stores]),
        )
        for block in reference.classes
    )
    dim = sum(store.dim for store in stores)
    tag = "+".join(store.source_tag for store in stores)
    return FeatureStore(dim, blocks, tag)
