"""Labeled feature datasets and train-fitted min-max normalization."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ABNORMAL = 1
NORMAL = -1
LABEL_NAMES = {ABNORMAL: "abnormal", NORMAL: "normal"}
LABEL_VALUES = {v: k for k, v in LABEL_NAMES.items()}


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix ``X`` (n x D), labels in {+1 abnormal, -1 normal}, and case ids."""

    X: np.ndarray
    y: np.ndarray
    ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=int).ravel()
        ids = tuple(str(i) for i in self.ids) if len(self.ids) else tuple(str(k) for k in range(len(y)))
        if X.shape[0] != y.shape[0] or len(ids) != y.shape[0]:
            raise FeatureError(f"inconsistent lengths: X {X.shape[0]}, y {y.shape[0]}, ids {len(ids)}")
        if y.size and not np.all(np.isin(y, (ABNORMAL, NORMAL))):
            raise FeatureError("labels must be +1 (abnormal) or -1 (normal)")
        if not np.all(np.isfinite(X)):
            raise FeatureError("feature matrix contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> LabeledDataset:
        rows = np.asarray(rows, dtype=np.intp)
        return LabeledDataset(self.X[rows], self.y[rows], tuple(self.ids[r] for r in rows))

    def select(self, columns) -> LabeledDataset:
        return LabeledDataset(self.X[:, list(columns)], self.y, self.ids)


@dataclass(frozen=True)
class NormalizationParams:
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.minimum, dtype=float).ravel()
        hi = np.asarray(self.maximum, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise FeatureError("minimum and maximum must have equal length")
        if np.any(lo > hi):
            raise FeatureError("minimum exceeds maximum for some feature")
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)

    def to_dict(self) -> dict:
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> NormalizationParams:
        return cls(np.array(d["min"], dtype=float), np.array(d["max"], dtype=float))


def fit_normalizer(train) -> NormalizationParams:
    """Column-wise min and max of the training vectors."""
    X = train.X if isinstance(train, LabeledDataset) else np.atleast_2d(np.asarray(train, dtype=float))
    if X.shape[0] == 0:
        raise FeatureError("cannot fit normalization on an empty dataset")
    return NormalizationParams(X.min(axis=0), X.max(axis=0))


def apply_normalizer(params: NormalizationParams, v) -> np.ndarray:
    """Clamp to the training range, then rescale to [0, 1].

    Works on a single vector or a matrix of row vectors. Columns whose training
    range is degenerate (min == max) map to 0.
    """
    x = np.asarray(v, dtype=float)
    if x.shape[-1] != params.minimum.shape[0]:
        raise FeatureError(f"dimension mismatch: got {x.shape[-1]}, normalizer has {params.minimum.shape[0]}")
    span = params.maximum - params.minimum
    safe = np.where(span > 0, span, 1.0)
    out = (np.clip(x, params.minimum, params.maximum) - params.minimum) / safe
    return np.where(span > 0, out, 0.0)


def normalize_dataset(params: NormalizationParams, data: LabeledDataset) -> LabeledDataset:
    return LabeledDataset(apply_normalizer(params, data.X), data.y, data.ids)


# --- CSV --------------------------------------------------------------------


def feature_columns(dim: int) -> list[str]:
    return [f"f{k:02d}" for k in range(dim)]


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def dataset_to_csv(data: LabeledDataset, labels: bool = True) -> str:
    """``block_id,label,f00..`` rows; 17 significant digits so values round-trip exactly."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block_id", "label", *feature_columns(data.dim)])
    for k in range(len(data)):
        label = LABEL_NAMES[int(data.y[k])] if labels else ""
        w.writerow([data.ids[k], label, *(format_float(v) for v in data.X[k])])
    return buf.getvalue()


def dataset_from_csv(text: str) -> LabeledDataset:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:2] != ["block_id", "label"]:
        raise FeatureError("feature CSV must start with a 'block_id,label,...' header")
    ids, y, X = [], [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if row[1] not in LABEL_VALUES:
            raise FeatureError(f"line {line_no}: unknown label {row[1]!r}")
        ids.append(row[0])
        y.append(LABEL_VALUES[row[1]])
        X.append([float(v) for v in row[2:]])
    return LabeledDataset(np.array(X, dtype=float).reshape(len(ids), -1), np.array(y), tuple(ids))


def read_dataset(path: str | Path) -> LabeledDataset:
    return dataset_from_csv(Path(path).read_text())
