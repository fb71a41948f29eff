"""Streaming data model: feature columns, sparse buffers, labels, masking.

Missing entries are stored as NaN; the known-entry mask is always kept
alongside so that a genuine NaN can never be confused with a known value.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import DataError, ParseError, ValidationError

DEFAULT_MISSING_TOKENS = ("NA",)


@dataclass(frozen=True)
class FeatureColumn:
    index: int
    values: np.ndarray

    @property
    def known(self) -> np.ndarray:
        return ~np.isnan(self.values)


@dataclass
class FeatureBuffer:
    """An N x L block of consecutive stream columns starting at ``start``."""

    values: np.ndarray
    mask: np.ndarray = None
    start: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValidationError("buffer values must be a 2-D array")
        if self.values.shape[0] < 1:
            raise ValidationError("buffer must have at least one row")
        if self.mask is None:
            self.mask = ~np.isnan(self.values)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.values.shape:
                raise ValidationError("mask shape does not match values")
            self.values = np.where(self.mask, self.values, np.nan)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def indices(self) -> range:
        return range(self.start, self.start + self.n_cols)

    def loss_rates(self) -> np.ndarray:
        """Per-column loss rate 1 - |known| / N."""
        return 1.0 - self.mask.sum(axis=0) / self.n_rows

    def loss_rate(self) -> float:
        return 1.0 - self.mask.sum() / self.mask.size

    def known_entries(self):
        """Return (rows, cols, vals) of the known entries, row-major."""
        rows, cols = np.nonzero(self.mask)
        return rows.astype(np.int64), cols.astype(np.int64), self.values[rows, cols]

    def column(self, j: int) -> FeatureColumn:
        return FeatureColumn(self.start + j, self.values[:, j].copy())

    def to_csv(self, path, missing_token="NA"):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row, known in zip(self.values, self.mask):
                writer.writerow([repr(float(v)) if k else missing_token for v, k in zip(row, known)])


@dataclass(frozen=True)
class LabelVector:
    labels: np.ndarray
    classes: tuple = field(default=())

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise ValidationError("labels must be one-dimensional")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.isfinite(labels)) or not np.all(labels == np.round(labels)):
                raise DataError("labels must be integer class codes with no missing values")
            labels = labels.astype(np.int64)
        object.__setattr__(self, "labels", labels)
        if not self.classes:
            object.__setattr__(self, "classes", tuple(range(int(labels.max()) + 1 if labels.size else 0)))
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.classes)):
            raise DataError("label codes must lie in 0..class_count-1")
        if len(np.unique(labels)) < 2:
            raise DataError("need at least two distinct classes")

    @property
    def class_count(self) -> int:
        return len(self.classes)

    def __len__(self):
        return len(self.labels)

    def take(self, idx) -> "LabelVector":
        return LabelVector(self.labels[idx], self.classes)


def _is_float(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def _encode_labels(raw: Sequence[str]) -> LabelVector:
    if all(_is_float(v) for v in raw):
        values = np.array([float(v) for v in raw])
        uniq, codes = np.unique(values, return_inverse=True)
        classes = tuple(int(u) if float(u).is_integer() else float(u) for u in uniq)
    else:
        uniq, codes = np.unique(np.array(raw, dtype=str), return_inverse=True)
        classes = tuple(str(u) for u in uniq)
    if len(uniq) < 2:
        raise DataError(f"need at least two distinct labels, found {len(uniq)}")
    return LabelVector(codes.astype(np.int64), classes)


def load_csv(path, missing_token="NA", label_col=-1):
    """Read a comma-separated dataset.

    Returns ``(table, labels, header)`` where ``table`` is an N x D float
    array with NaN at missing cells (``missing_token`` or empty), labels are
    re-encoded to 0-based codes and ``header`` holds the feature names or
    ``None`` when the file has no header row.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    tokens = {missing_token, ""}
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")

    width = len(rows[0])
    if width < 2:
        raise ParseError("need at least one feature column and a label column", row=1)
    label_pos = label_col % width

    header = None
    first = [c.strip() for i, c in enumerate(rows[0]) if i != label_pos]
    if all(not _is_float(c) and c not in tokens for c in first):
        header = first
        rows = rows[1:]
        offset = 2
    else:
        offset = 1

    table = np.empty((len(rows), width - 1))
    raw_labels = []
    for r, row in enumerate(rows):
        lineno = r + offset
        if len(row) != width:
            raise ParseError(f"expected {width} columns, got {len(row)}", row=lineno)
        label = row[label_pos].strip()
        if label in tokens:
            raise ParseError("missing class label", row=lineno)
        raw_labels.append(label)
        feats = [c.strip() for i, c in enumerate(row) if i != label_pos]
        for j, cell in enumerate(feats):
            if cell in tokens:
                table[r, j] = np.nan
                continue
            try:
                table[r, j] = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric value {cell!r} in column {j}", row=lineno) from None
    return table, _encode_labels(raw_labels), header


def write_csv(path, table, labels, header=None, missing_token="NA"):
    labels = labels.labels if isinstance(labels, LabelVector) else np.asarray(labels)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header is not None:
            writer.writerow(list(header) + ["label"])
        for row, y in zip(np.asarray(table, dtype=float), labels):
            writer.writerow([missing_token if math.isnan(v) else repr(float(v)) for v in row] + [int(y)])


def inject_missing(table, zeta: float, seed: int, max_attempts: int = 1000) -> FeatureBuffer:
    """Mark floor(zeta * N * D) cells missing uniformly at random.

    Draws are repeated until no column is left without a known entry.  At
    extreme rates where that rarely happens, one known cell per column is
    reserved first and the rest are hidden among the remaining cells.
    """
    table = np.asarray(table, dtype=float)
    if not 0.0 <= zeta < 1.0:
        raise ValidationError(f"loss rate must lie in [0, 1), got {zeta}")
    if np.isnan(table).any():
        raise DataError("inject_missing expects a fully known table")
    n, d = table.shape
    n_missing = int(math.floor(zeta * n * d))
    if n_missing > n * d - d:
        raise ValidationError(f"cannot hide {n_missing} cells and keep one known entry per column")
    rng = np.random.default_rng(seed)
    mask = np.ones(n * d, dtype=bool)
    if n_missing:
        for _ in range(max_attempts):
            mask[:] = True
            mask[rng.choice(n * d, size=n_missing, replace=False)] = False
            if mask.reshape(n, d).any(axis=0).all():
                break
        else:
            keep = rng.integers(0, n, size=d) * d + np.arange(d)
            pool = np.setdiff1d(np.arange(n * d), keep)
            mask[:] = True
            mask[rng.choice(pool, size=n_missing, replace=False)] = False
    return FeatureBuffer(table.copy(), mask.reshape(n, d), start=0)


def stream_columns(source, buffer_len: int) -> Iterator[FeatureBuffer]:
    """Yield consecutive groups of ``buffer_len`` columns in arrival order."""
    if buffer_len < 1:
        raise ValidationError("buffer length must be >= 1")
    if not isinstance(source, FeatureBuffer):
        source = FeatureBuffer(np.asarray(source, dtype=float))
    d = source.n_cols
    for lo in range(0, d, buffer_len):
        hi = min(lo + buffer_len, d)
        yield FeatureBuffer(source.values[:, lo:hi].copy(), source.mask[:, lo:hi].copy(), start=source.start + lo)


def concat_buffers(buffers) -> FeatureBuffer:
    buffers = list(buffers)
    return FeatureBuffer(
        np.hstack([b.values for b in buffers]),
        np.hstack([b.mask for b in buffers]),
        start=buffers[0].start,
    )
