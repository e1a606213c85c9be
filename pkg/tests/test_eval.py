from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import mann_whitney_auc
from wct.eval import (
    ConfusionMatrix,
    EvalError,
    aligned_text,
    confusion,
    cross_validate,
    format_percent,
    kfold_plan,
    loocv_plan,
    metrics,
    metrics_rows,
    roc,
    roc_svg,
    roc_to_csv,
)
from wct.features import LabeledDataset


def test_confusion_examples():
    assert confusion([1, 1, 1, -1, -1], [1, 1, 1, -1, -1]) == ConfusionMatrix(3, 2, 0, 0)
    assert confusion([1] * 4, [-1] * 4) == ConfusionMatrix(0, 0, 4, 0)
    with pytest.raises(EvalError):
        confusion([1], [1, -1])


def test_confusion_matches_counting_loop():
    rng = np.random.default_rng(0)
    p, t = rng.choice([-1, 1], 50), rng.choice([-1, 1], 50)
    counts = {"tp": 0, "tn": 0, "fp": 0, "fn": 0}
    for a, b in zip(p, t):
        key = ("t" if a == b else "f") + ("p" if a == 1 else "n")
        counts[key] += 1
    assert confusion(p, t) == ConfusionMatrix(**counts)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_metrics_ratios_exact(tp, tn, fp, fn):
    cm = ConfusionMatrix(tp, tn, fp, fn)
    if cm.total == 0:
        with pytest.raises(EvalError):
            metrics(cm)
        return
    m = metrics(cm)
    assert Fraction(m.accuracy).limit_denominator(1000) == Fraction(tp + tn, cm.total)
    assert m.sensitivity is None if tp + fn == 0 else Fraction(m.sensitivity).limit_denominator(1000) == Fraction(tp, tp + fn)
    assert m.specificity is None if tn + fp == 0 else Fraction(m.specificity).limit_denominator(1000) == Fraction(tn, tn + fp)


def test_format_percent():
    assert format_percent(49 / 51) == "96.07%"
    assert format_percent(49 / 51, truncate=False) == "96.08%"
    assert format_percent(0.92) == "92%"
    assert format_percent(1.0) == "100%"
    assert format_percent(None) == "n/a"


def test_fold_plans():
    y = np.array([1] * 50 + [-1] * 50)
    plan = kfold_plan(y, 10, seed=3)
    assert plan.fold_class_counts(y) == [(5, 5)] * 10
    small = np.array([1] * 5 + [-1] * 5)
    assert kfold_plan(small, 5).fold_class_counts(small) == [(1, 1)] * 5
    with pytest.raises(EvalError):
        kfold_plan(np.array([1] * 3 + [-1] * 20), 5)
    assert np.array_equal(kfold_plan(y, 10, 1).folds, kfold_plan(y, 10, 1).folds)


def test_fold_balance_exhaustive():
    for n_pos in range(1, 16):
        for n_neg in range(1, 16):
            y = np.array([1] * n_pos + [-1] * n_neg)
            for k in range(2, 6):
                if min(n_pos, n_neg) < k:
                    continue
                counts = np.array(kfold_plan(y, k, seed=n_pos * 31 + n_neg).fold_class_counts(y))
                assert counts.max(axis=0).tolist() == [c for c in np.ceil([n_neg / k, n_pos / k]).astype(int)]
                assert (counts.max(axis=0) - counts.min(axis=0)).max() <= 1
                assert counts.sum(axis=1).max() - counts.sum(axis=1).min() <= 1


class OneNN:
    def __init__(self, train):
        self.train = train

    def predict(self, X):
        d = ((X[:, None, :] - self.train.X[None]) ** 2).sum(-1)
        return self.train.y[d.argmin(1)]

    def scores(self, X):
        return self.predict(X).astype(float)


def test_memorizer_on_duplicated_points():
    rng = np.random.default_rng(1)
    base = rng.normal(size=(10, 2))
    X = np.vstack([base, base])
    y = np.tile(np.where(base[:, 0] > 0, 1, -1), 2)
    y[:2] = [1, -1]
    y[10:12] = [1, -1]
    d = LabeledDataset(X, y)
    plan = kfold_plan(d, 2, seed=0, stratified=False)
    # keep duplicates in different folds
    plan.folds[:] = np.r_[np.zeros(10, int), np.ones(10, int)]
    res = cross_validate(d, plan, lambda train, f: OneNN(train))
    assert res.accuracy == 1.0 and res.pooled.total == len(d)


def test_worked_pooled_accuracy():
    cms = [ConfusionMatrix(5, 3, 2, 0), ConfusionMatrix(5, 4, 1, 0), ConfusionMatrix(4, 5, 0, 1)] + [ConfusionMatrix(5, 5, 0, 0)] * 7
    pooled = sum(cms, ConfusionMatrix())
    assert pooled.correct / pooled.total == 0.96


def test_loocv_equals_kfold_n():
    rng = np.random.default_rng(2)
    d = LabeledDataset(rng.normal(size=(6, 2)), [1, 1, 1, -1, -1, -1])
    plan = loocv_plan(d)
    assert plan.k == 6 and sorted(plan.folds.tolist()) == list(range(6))
    a = cross_validate(d, plan, lambda t, f: OneNN(t))
    kplan = kfold_plan(d, 6, stratified=False)
    b = cross_validate(d, kplan, lambda t, f: OneNN(t))
    assert a.pooled == b.pooled and np.array_equal(a.predictions, b.predictions)


def test_cross_validate_single_class_fold():
    d = LabeledDataset(np.arange(4.0)[:, None], [1, 1, 1, -1])
    plan = kfold_plan(d, 2, stratified=False)
    plan.folds[:] = [0, 0, 0, 1]
    with pytest.raises(EvalError):
        cross_validate(d, plan, lambda t, f: OneNN(t))


def test_roc_examples():
    assert roc([0.9, 0.8, 0.2, 0.1], [1, 1, -1, -1]).auc == 1.0
    assert roc([0.1, 0.2, 0.8, 0.9], [1, 1, -1, -1]).auc == 0.0
    c = roc([0.9, 0.4, 0.6, 0.2], [1, 1, -1, -1])
    assert c.auc == 0.75
    assert c.points[0] == (0.0, 0.0) and c.points[-1] == (1.0, 1.0)
    with pytest.raises(EvalError):
        roc([0.1, 0.2], [1, 1])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 40))
def test_auc_equals_mann_whitney_and_monotone_invariance(seed, n):
    rng = np.random.default_rng(seed)
    s = rng.integers(0, 6, size=n).astype(float)  # many ties
    y = rng.choice([-1, 1], n)
    y[:2] = [1, -1]
    c = roc(s, y)
    assert abs(c.auc - mann_whitney_auc(s, y)) < 1e-12
    assert np.all(np.diff(c.fpr) >= 0) and np.all(np.diff(c.tpr) >= 0)
    t = roc(np.exp(s) * 3 - 7, y)
    assert np.array_equal(t.fpr, c.fpr) and np.array_equal(t.tpr, c.tpr)


def test_reports_render():
    c = roc([0.9, 0.4, 0.6, 0.2], [1, 1, -1, -1])
    assert roc_to_csv(c).splitlines()[:2] == ["threshold,fpr,tpr", "inf,0,0"]
    svg = roc_svg({"a": c})
    assert svg.startswith("<svg") and "AUC 0.750" in svg
    rows = metrics_rows({"wavelet domain": ConfusionMatrix(49, 47, 2, 2)})
    assert rows[-3:] == [["Sensitivity in %", "96.07%"], ["Specificity in %", "95.91%"], ["Accuracy in %", "96%"]]
    assert aligned_text([["a", "bb"], ["ccc", "d"]]) == "a    bb\nccc  d\n"
