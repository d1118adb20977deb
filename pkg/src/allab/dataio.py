"""Dataset ingestion: MNIST-style IDX files, CSV tables, synthetic blobs.

Parsers reject malformed input with positional diagnostics (byte offsets for
IDX, row/column numbers for CSV) and never silently truncate.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError

__all__ = [
    "Dataset",
    "IMAGE_MAGIC",
    "LABEL_MAGIC",
    "load_mnist_idx",
    "load_mnist",
    "write_idx_images",
    "write_idx_labels",
    "load_csv",
    "synth_blobs",
    "standardize",
]

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass
class Dataset:
    name: str
    features: np.ndarray  # (n, d) float64, finite
    labels: np.ndarray  # (n,) int64 in [0, class_count)
    class_count: int
    designated_test_idx: np.ndarray | None = None
    label_names: list[str] | None = None  # original CSV label strings, index = class id


def _read_u32s(raw: bytes, path, offset: int, count: int) -> tuple[int, ...]:
    end = offset + 4 * count
    if end > len(raw):
        raise FormatError(f"{path}: byte {offset}: truncated header (need {end} bytes)")
    return struct.unpack_from(f">{count}I", raw, offset)


def _read_bytes(path) -> bytes:
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise FormatError(f"{path}: cannot read: {e.strerror or e}") from None


def load_mnist_idx(images_path, labels_path) -> Dataset:
    """Parse a big-endian IDX image/label file pair.

    Pixels are flattened row-major and scaled to [0, 1] by /255.  The image
    and label counts must agree.
    """
    raw = _read_bytes(images_path)
    (magic,) = _read_u32s(raw, images_path, 0, 1)
    if magic != IMAGE_MAGIC:
        raise FormatError(
            f"{images_path}: byte 0: bad magic 0x{magic:08x} (expected 0x{IMAGE_MAGIC:08x})"
        )
    count, rows, cols = _read_u32s(raw, images_path, 4, 3)
    expected = 16 + count * rows * cols
    if len(raw) != expected:
        raise FormatError(
            f"{images_path}: byte {min(len(raw), expected)}: "
            f"expected {expected} bytes for {count} images of {rows}x{cols}, got {len(raw)}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(count, rows * cols)

    raw_l = _read_bytes(labels_path)
    (magic_l,) = _read_u32s(raw_l, labels_path, 0, 1)
    if magic_l != LABEL_MAGIC:
        raise FormatError(
            f"{labels_path}: byte 0: bad magic 0x{magic_l:08x} (expected 0x{LABEL_MAGIC:08x})"
        )
    (count_l,) = _read_u32s(raw_l, labels_path, 4, 1)
    if len(raw_l) != 8 + count_l:
        raise FormatError(
            f"{labels_path}: byte {min(len(raw_l), 8 + count_l)}: "
            f"expected {8 + count_l} bytes for {count_l} labels, got {len(raw_l)}"
        )
    if count_l != count:
        raise FormatError(
            f"{labels_path}: byte 4: label count {count_l} does not match image count {count}"
        )
    labels = np.frombuffer(raw_l, dtype=np.uint8, offset=8).astype(np.int64)

    return Dataset(
        name="mnist-idx",
        features=pixels.astype(np.float64) / 255.0,
        labels=labels,
        class_count=int(labels.max()) + 1 if count else 0,
    )


def load_mnist(images_path, labels_path, test_images_path=None, test_labels_path=None) -> Dataset:
    """Train files plus an optional designated test split, concatenated."""
    train = load_mnist_idx(images_path, labels_path)
    if test_images_path is None:
        return train
    test = load_mnist_idx(test_images_path, test_labels_path)
    n_train = train.features.shape[0]
    return Dataset(
        name="mnist-idx",
        features=np.vstack([train.features, test.features]),
        labels=np.concatenate([train.labels, test.labels]),
        class_count=max(train.class_count, test.class_count),
        designated_test_idx=np.arange(n_train, n_train + test.features.shape[0]),
    )


def write_idx_images(path, pixels: np.ndarray) -> None:
    """Serialize (n, rows, cols) uint8 pixels to IDX; inverse of the parser."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    n, rows, cols = pixels.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols))
        f.write(pixels.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, len(labels)))
        f.write(labels.tobytes())


def load_csv(path, label_column: str = "last") -> Dataset:
    """Parse a rectangular CSV with a header row.

    Feature cells must be numeric.  Label values (any strings) are mapped to
    0..C-1 in first-appearance order; the mapping is kept on the dataset as
    ``label_names``.  Row/column positions in error messages are 1-based, with
    the header as row 1.
    """
    try:
        with open(path, newline="") as f:
            reader = csv.reader(f)
            rows = list(reader)
    except OSError as e:
        raise FormatError(f"{path}: cannot read: {e.strerror or e}") from None
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = rows[0]
    if all(_is_number(c) for c in header):
        raise FormatError(f"{path}: row 1: expected a header row, found only numbers")
    if label_column == "last":
        label_pos = len(header) - 1
    else:
        if label_column not in header:
            raise FormatError(f"{path}: row 1: no column named {label_column!r}")
        label_pos = header.index(label_column)

    feature_pos = [i for i in range(len(header)) if i != label_pos]
    features = np.empty((len(rows) - 1, len(feature_pos)))
    label_names: list[str] = []
    mapping: dict[str, int] = {}
    labels = np.empty(len(rows) - 1, dtype=np.int64)
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(
                f"{path}: row {r}: has {len(row)} cells, header has {len(header)}"
            )
        for j, c in enumerate(feature_pos):
            cell = row[c]
            try:
                features[r - 2, j] = float(cell)
            except ValueError:
                raise FormatError(
                    f"{path}: row {r}, column {c + 1}: non-numeric feature cell {cell!r}"
                ) from None
        raw_label = row[label_pos]
        if raw_label not in mapping:
            mapping[raw_label] = len(label_names)
            label_names.append(raw_label)
        labels[r - 2] = mapping[raw_label]
    if features.shape[0] == 0:
        raise FormatError(f"{path}: no data rows after the header")

    return Dataset(
        name=f"csv:{path}",
        features=features,
        labels=labels,
        class_count=len(label_names),
        label_names=label_names,
    )


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def synth_blobs(
    class_count: int,
    per_class: int,
    dim: int,
    separation: float,
    rng: np.random.Generator,
) -> Dataset:
    """Isotropic unit-variance Gaussian blobs at seeded random centers.

    Centers are standard normal draws scaled by ``separation``; points are
    generated class-blocked (all of class 0 first, and so on).
    """
    if class_count < 1 or per_class < 1 or dim < 1:
        raise ValueError("class_count, per_class and dim must all be >= 1")
    centers = rng.standard_normal((class_count, dim)) * separation
    features = np.empty((class_count * per_class, dim))
    labels = np.empty(class_count * per_class, dtype=np.int64)
    for c in range(class_count):
        block = slice(c * per_class, (c + 1) * per_class)
        features[block] = centers[c] + rng.standard_normal((per_class, dim))
        labels[block] = c
    return Dataset(
        name=f"blobs-{class_count}x{per_class}d{dim}",
        features=features,
        labels=labels,
        class_count=class_count,
    )


def standardize(
    dataset: Dataset, stats_rows: np.ndarray | None = None
) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Per-feature standardization x' = (x - mean) / std applied to all rows.

    Statistics come from ``stats_rows`` (default: every row); std is the
    population convention (divide by n).  Features with zero std are left
    untouched (neither centered nor scaled).
    """
    X = dataset.features
    src = X if stats_rows is None else X[np.asarray(stats_rows)]
    mean = src.mean(axis=0)
    std = src.std(axis=0)  # population: ddof=0
    constant = std == 0.0
    use_mean = np.where(constant, 0.0, mean)
    use_std = np.where(constant, 1.0, std)
    scaled = (X - use_mean) / use_std
    out = Dataset(
        name=dataset.name,
        features=scaled,
        labels=dataset.labels,
        class_count=dataset.class_count,
        designated_test_idx=dataset.designated_test_idx,
        label_names=dataset.label_names,
    )
    return out, mean, std
