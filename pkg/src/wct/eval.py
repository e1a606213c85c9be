"""Confusion matrices, sensitivity/specificity/accuracy, cross-validation and ROC analysis.

Abnormal (+1) is the positive class throughout.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .features import LabeledDataset


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def correct(self) -> int:
        return self.tp + self.tn

    def __add__(self, other: ConfusionMatrix) -> ConfusionMatrix:
        return ConfusionMatrix(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class Metrics:
    """Ratios of a confusion matrix; a ratio with a zero denominator is ``None``."""

    sensitivity: float | None
    specificity: float | None
    accuracy: float


def confusion(predictions, labels) -> ConfusionMatrix:
    p = np.asarray(predictions).ravel()
    t = np.asarray(labels).ravel()
    if p.shape != t.shape:
        raise EvalError(f"length mismatch: {p.shape[0]} predictions vs {t.shape[0]} labels")
    pos_p, pos_t = p > 0, t > 0
    return ConfusionMatrix(
        tp=int(np.sum(pos_p & pos_t)),
        tn=int(np.sum(~pos_p & ~pos_t)),
        fp=int(np.sum(pos_p & ~pos_t)),
        fn=int(np.sum(~pos_p & pos_t)),
    )


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def metrics(cm: ConfusionMatrix) -> Metrics:
    if cm.total == 0:
        raise EvalError("empty confusion matrix")
    return Metrics(
        sensitivity=_ratio(cm.tp, cm.tp + cm.fn),
        specificity=_ratio(cm.tn, cm.fp + cm.tn),
        accuracy=cm.correct / cm.total,
    )


def format_percent(value: float | None, decimals: int = 2, truncate: bool = True) -> str:
    """Render a ratio as a percentage.

    Digits are truncated rather than rounded by default, e.g. 49/51 is
    printed as 96.07%. Pass ``truncate=False`` to round.
    """
    if value is None:
        return "n/a"
    scaled = value * 100 * 10**decimals
    # guard against 0.92*100*100 = 9199.999...
    scaled = math.floor(scaled + 1e-9) if truncate else round(scaled)
    text = f"{scaled / 10**decimals:.{decimals}f}"
    return text.rstrip("0").rstrip(".") + "%" if "." in text else text + "%"


# --- cross-validation plans ------------------------------------------------


@dataclass(frozen=True)
class CvPlan:
    scheme: str  # "kfold" or "loocv"
    folds: np.ndarray  # fold index per case
    k: int
    stratified: bool = True
    seed: int | None = None

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = np.flatnonzero(self.folds == fold)
        train = np.flatnonzero(self.folds != fold)
        return train, test

    def fold_class_counts(self, labels) -> list[tuple[int, int]]:
        """(normal, abnormal) counts for each fold."""
        y = np.asarray(labels)
        return [(int(np.sum((self.folds == f) & (y < 0))), int(np.sum((self.folds == f) & (y > 0)))) for f in range(self.k)]


def _labels_of(data) -> np.ndarray:
    return data.y if isinstance(data, LabeledDataset) else np.asarray(data)


def kfold_plan(data, k: int = 10, seed: int = 0, stratified: bool = True) -> CvPlan:
    """Seeded shuffle, then round-robin fold assignment (per class when stratified).

    The round-robin continues across classes, so total fold sizes also differ by
    at most one.
    """
    y = _labels_of(data)
    n = y.shape[0]
    if k < 2:
        raise EvalError(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=np.intp)
    if stratified:
        groups = [np.flatnonzero(y == c) for c in (-1, 1)]
        for c, g in zip((-1, 1), groups):
            if g.size < k:
                raise EvalError(f"class {c:+d} has {g.size} cases, fewer than k={k} folds")
    else:
        if n < k:
            raise EvalError(f"{n} cases cannot fill k={k} folds")
        groups = [np.arange(n)]
    offset = 0
    for g in groups:
        perm = rng.permutation(g)
        folds[perm] = (offset + np.arange(perm.size)) % k
        offset = (offset + perm.size) % k
    return CvPlan("kfold", folds, k, stratified, seed)


def loocv_plan(data) -> CvPlan:
    n = _labels_of(data).shape[0]
    if n < 2:
        raise EvalError("leave-one-out needs at least two cases")
    return CvPlan("loocv", np.arange(n), n, stratified=False)


class Scorer(Protocol):
    def scores(self, X) -> np.ndarray: ...

    def predict(self, X) -> np.ndarray: ...


Trainer = Callable[[LabeledDataset, int], Scorer]


@dataclass
class CvResult:
    fold_matrices: list[ConfusionMatrix]
    fold_metrics: list[Metrics]
    pooled: ConfusionMatrix
    scores: np.ndarray  # out-of-fold score per case
    predictions: np.ndarray
    fitted: list = field(default_factory=list, repr=False)

    @property
    def accuracy(self) -> float:
        """Pooled correct / total over all held-out cases."""
        return self.pooled.correct / self.pooled.total

    @property
    def mean_fold_accuracy(self) -> float:
        return float(np.mean([m.accuracy for m in self.fold_metrics]))


def cross_validate(data: LabeledDataset, plan: CvPlan, trainer: Trainer, keep_models: bool = False) -> CvResult:
    """Train on each fold's complement and score the held-out cases.

    ``trainer(train, fold)`` must do all fitting (normalization included) on the
    training split it is given.
    """
    if plan.folds.shape[0] != len(data):
        raise EvalError(f"plan covers {plan.folds.shape[0]} cases, dataset has {len(data)}")
    scores = np.full(len(data), np.nan)
    preds = np.zeros(len(data), dtype=int)
    cms, mets, fitted = [], [], []
    for f in range(plan.k):
        train_idx, test_idx = plan.split(f)
        if test_idx.size == 0:
            continue
        train = data.subset(train_idx)
        if np.unique(train.y).size < 2:
            raise EvalError(f"fold {f}: training split contains a single class")
        model = trainer(train, f)
        X_test = data.X[test_idx]
        scores[test_idx] = model.scores(X_test)
        preds[test_idx] = model.predict(X_test)
        cm = confusion(preds[test_idx], data.y[test_idx])
        cms.append(cm)
        mets.append(metrics(cm))
        if keep_models:
            fitted.append(model)
    pooled = sum(cms, ConfusionMatrix())
    return CvResult(cms, mets, pooled, scores, preds, fitted)


# --- ROC ---------------------------------------------------------------------


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # +inf first, then distinct scores in descending order
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc(scores, labels) -> RocCurve:
    """Threshold sweep over the distinct scores; a case is positive when score >= threshold."""
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise EvalError("scores and labels differ in length")
    if not np.all(np.isfinite(s)):
        raise EvalError("scores must be finite")
    n_pos, n_neg = int(np.sum(y > 0)), int(np.sum(y <= 0))
    if n_pos == 0 or n_neg == 0:
        raise EvalError("ROC needs both classes")
    order = np.argsort(-s, kind="stable")
    s_sorted, pos_sorted = s[order], (y[order] > 0)
    tp_cum = np.cumsum(pos_sorted)
    fp_cum = np.cumsum(~pos_sorted)
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    tpr = np.r_[0.0, tp_cum[ends] / n_pos]
    fpr = np.r_[0.0, fp_cum[ends] / n_neg]
    thresholds = np.r_[np.inf, s_sorted[ends]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1])) / 2.0)  # trapezoid rule
    return RocCurve(thresholds, fpr, tpr, auc)


def roc_to_csv(curve: RocCurve) -> str:
    out = io.StringIO()
    out.write("threshold,fpr,tpr\n")
    for t, f, p in zip(curve.thresholds, curve.fpr, curve.tpr):
        out.write(f"{'inf' if np.isinf(t) else format(float(t), '.17g')},{f:.17g},{p:.17g}\n")
    return out.getvalue()


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def roc_svg(curves: dict[str, RocCurve], title: str = "ROC", size: int = 400) -> str:
    """Standalone SVG plot of one or more ROC curves (sensitivity vs 1 - specificity)."""
    pad = 50
    plot = size - 2 * pad
    sx = lambda f: pad + f * plot
    sy = lambda t: size - pad - t * plot
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 20 * len(curves)}" '
        f'viewBox="0 0 {size} {size + 20 * len(curves)}">',
        f'<rect x="0" y="0" width="{size}" height="{size + 20 * len(curves)}" fill="white"/>',
        f'<text x="{size / 2:.1f}" y="25" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>',
        f'<rect x="{pad}" y="{pad}" width="{plot}" height="{plot}" fill="none" stroke="black"/>',
        f'<line x1="{sx(0):.1f}" y1="{sy(0):.1f}" x2="{sx(1):.1f}" y2="{sy(1):.1f}" stroke="#999" stroke-dasharray="4 4"/>',
        f'<text x="{size / 2:.1f}" y="{size - 15}" text-anchor="middle" font-family="sans-serif" font-size="12">1 - specificity</text>',
        f'<text x="15" y="{size / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 15 {size / 2:.1f})">sensitivity</text>',
    ]
    for k, (name, c) in enumerate(curves.items()):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{sx(f):.2f},{sy(t):.2f}" for f, t in zip(c.fpr, c.tpr))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        y = size + 5 + 20 * k
        parts.append(f'<rect x="{pad}" y="{y - 10}" width="12" height="12" fill="{color}"/>')
        parts.append(
            f'<text x="{pad + 18}" y="{y}" font-family="sans-serif" font-size="12">{name} (AUC {c.auc:.3f})</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def metrics_rows(columns: dict[str, ConfusionMatrix]) -> list[list[str]]:
    """Rows TP/TN/FP/FN/sensitivity/specificity/accuracy with one column per named matrix."""
    rows = [["Parameter", *columns]]
    for name in ("tp", "tn", "fp", "fn"):
        rows.append([name.upper(), *(str(getattr(cm, name)) for cm in columns.values())])
    ms = [metrics(cm) for cm in columns.values()]
    rows.append(["Sensitivity in %", *(format_percent(m.sensitivity) for m in ms)])
    rows.append(["Specificity in %", *(format_percent(m.specificity) for m in ms)])
    rows.append(["Accuracy in %", *(format_percent(m.accuracy) for m in ms)])
    return rows


def aligned_text(rows: list[list[str]]) -> str:
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows) + "\n"
