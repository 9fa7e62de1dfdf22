"""Stratified k-fold cross-validation, metrics and the entropy-ablation report."""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from ._rng import substream
from .classifiers import ALGORITHMS, DISPLAY_NAMES, HyperParams, TrainingError, predict_many, score_many, train
from .featurizer import WITH_ENTROPY, WITHOUT_ENTROPY, FeatureSetConfig

REPORT_COLUMNS = ("TP", "FP", "Precision", "Recall", "ROC")
CSV_HEADER = "algorithm,entropy,tp_rate,fp_rate,precision,recall,roc_auc"
NA = "N/A"


def _labels_of(ds) -> np.ndarray:
    if isinstance(ds, tuple):
        return np.asarray(ds[1], dtype=np.int64)
    if hasattr(ds, "labels"):
        return np.asarray(ds.labels, dtype=np.int64)
    return np.asarray(ds, dtype=np.int64)


def _arrays_of(ds) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(ds, tuple):
        X, y = ds
        return np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.int64)
    return ds.arrays()


# --- fold planning --------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: tuple[int, ...]  # fold index per row; -1 = left out (parity mode)
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignments) == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        a = np.asarray(self.assignments)
        return np.flatnonzero((a != fold) & (a >= 0))

    def digest(self) -> str:
        text = f"k={self.k};seed={self.seed};" + ",".join(map(str, self.assignments))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def stratified_folds(ds, k: int = 10, seed: int = 0, parity: bool = False) -> FoldPlan:
    """Shuffle each class with ``seed`` and deal its rows round-robin into k folds.

    Dealing continues from where the previous class stopped, so overall fold
    sizes stay within one row as well. With ``parity`` the larger class is
    first subsampled to the size of the smaller, and the surplus rows are
    marked -1 (never trained on or tested).
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    labels = _labels_of(ds)
    rng = substream(seed, "folds")
    members = {c: np.flatnonzero(labels == c) for c in (0, 1)}
    for c, idx in members.items():
        if len(idx) < k:
            raise ValueError(f"class {c} has {len(idx)} rows, fewer than k={k}")
    assignments = np.full(len(labels), -1, dtype=np.int64)
    if parity:
        n = min(len(v) for v in members.values())
        members = {c: np.sort(rng.choice(idx, size=n, replace=False)) for c, idx in members.items()}
    offset = 0
    for c in (0, 1):
        shuffled = rng.permutation(members[c])
        assignments[shuffled] = (offset + np.arange(len(shuffled))) % k
        offset = (offset + len(shuffled)) % k
    return FoldPlan(k, tuple(int(a) for a in assignments), seed)


# --- metrics --------------------------------------------------------------

@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> ConfusionMatrix:
        t = np.asarray(y_true) == 1
        p = np.asarray(y_pred) == 1
        return cls(int((t & p).sum()), int((~t & p).sum()), int((~t & ~p).sum()), int((t & ~p).sum()))

    def __add__(self, other: ConfusionMatrix) -> ConfusionMatrix:
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class EvalMetrics:
    """Rates for the malicious (positive) class. ``None`` marks an undefined value."""

    tp_rate: float | None
    fp_rate: float | None
    precision: float | None
    recall: float | None
    roc_auc: float | None = None

    def cells(self) -> tuple[str, ...]:
        return tuple(
            NA if v is None else f"{v:.3f}"
            for v in (self.tp_rate, self.fp_rate, self.precision, self.recall, self.roc_auc)
        )


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def compute_metrics(cm: ConfusionMatrix, roc_auc: float | None = None) -> EvalMetrics:
    if cm.total <= 0:
        raise ValueError("empty confusion matrix")
    tpr = _ratio(cm.tp, cm.tp + cm.fn)
    return EvalMetrics(
        tp_rate=tpr,
        fp_rate=_ratio(cm.fp, cm.fp + cm.tn),
        precision=_ratio(cm.tp, cm.tp + cm.fp),
        recall=tpr,
        roc_auc=roc_auc,
    )


def _split_pairs(scores, labels):
    if labels is None:
        pairs = list(scores)
        scores = [s for s, _ in pairs]
        labels = [c for _, c in pairs]
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC AUC needs at least one positive and one negative instance")
    return s, y, n_pos, n_neg


def roc_auc(scores, labels=None) -> float:
    """Mann-Whitney AUC: P(positive outscores negative), ties counting one half.

    Accepts parallel ``scores``/``labels`` sequences or one sequence of
    ``(score, label)`` pairs.
    """
    s, y, n_pos, n_neg = _split_pairs(scores, labels)
    ranks = rankdata(s)  # average ranks give tied pairs half credit
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_auc_trapezoid(scores, labels=None) -> float:
    """Area under the empirical ROC curve by the trapezoid rule."""
    s, y, n_pos, n_neg = _split_pairs(scores, labels)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # one curve vertex per distinct score, so tied blocks become diagonal segments
    last_of_block = np.concatenate([s[1:] != s[:-1], [True]])
    tps = np.concatenate([[0], np.cumsum(y == 1)[last_of_block]])
    fps = np.concatenate([[0], np.cumsum(y == 0)[last_of_block]])
    area = np.sum((fps[1:] - fps[:-1]) * (tps[1:] + tps[:-1])) / 2.0
    return float(area / (n_pos * n_neg))


# --- cross-validation -----------------------------------------------------

@dataclass(frozen=True)
class CVResult:
    metrics: EvalMetrics  # from pooled counts and pooled scores
    confusion: ConfusionMatrix
    per_fold: tuple[EvalMetrics, ...]
    fold_mean: EvalMetrics
    plan_digest: str


def _mean_defined(values):
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


def _run_fold(X, y, hp, fs, plan, fold):
    train_idx = plan.train_indices(fold)
    test_idx = plan.test_indices(fold)
    try:
        model = train((X[train_idx][:, : fs.dimension], y[train_idx]), hp, fs)
    except TrainingError as exc:
        raise TrainingError(f"fold {fold}: {exc}") from exc
    Xt = X[test_idx][:, : fs.dimension]
    s = score_many(model, Xt)
    pred = predict_many(model, Xt)
    return test_idx, s, pred


def cross_validate(ds, hp: HyperParams, fs: FeatureSetConfig, plan: FoldPlan, workers: int = 1) -> CVResult:
    """Train on k-1 folds, test on the held-out fold, for every fold.

    Metrics are computed from the pooled confusion counts and pooled scores;
    per-fold metrics and their fold mean are kept alongside.
    """
    X, y = _arrays_of(ds)
    if len(plan.assignments) != len(y):
        raise ValueError("fold plan was built for a different dataset")
    folds = range(plan.k)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(lambda f: _run_fold(X, y, hp, fs, plan, f), folds))
    else:
        outs = [_run_fold(X, y, hp, fs, plan, f) for f in folds]

    pooled = ConfusionMatrix()
    per_fold = []
    all_scores, all_labels = [], []
    for test_idx, s, pred in outs:
        yt = y[test_idx]
        cm = ConfusionMatrix.from_predictions(yt, pred)
        pooled = pooled + cm
        auc = roc_auc(s, yt) if 0 < yt.sum() < len(yt) else None
        per_fold.append(compute_metrics(cm, auc))
        all_scores.append(s)
        all_labels.append(yt)
    auc = roc_auc(np.concatenate(all_scores), np.concatenate(all_labels))
    fold_mean = EvalMetrics(
        *(_mean_defined(getattr(m, name) for m in per_fold) for name in ("tp_rate", "fp_rate", "precision", "recall", "roc_auc"))
    )
    return CVResult(compute_metrics(pooled, auc), pooled, tuple(per_fold), fold_mean, plan.digest())


# --- comparison report ----------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    algorithm: str
    entropy: bool
    metrics: EvalMetrics
    fold_mean: EvalMetrics
    plan_digest: str

    @property
    def label(self) -> str:
        return f"{DISPLAY_NAMES[self.algorithm]} ({'with' if self.entropy else 'without'} entropy)"


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ReportRow, ...]
    dataset_fingerprint: str
    seed: int
    k: int
    plan_digest: str
    notes: tuple[tuple[str, str], ...] = ()
    timestamp: str = field(default="", compare=False)

    def provenance_lines(self) -> list[str]:
        lines = [
            f"# dataset=sha256:{self.dataset_fingerprint}",
            f"# seed={self.seed} folds={self.k} plan={self.plan_digest} aggregation=pooled",
        ]
        lines += [f"# {k}={v}" for k, v in self.notes]
        return lines

    def render_text(self) -> str:
        width = max(len(r.label) for r in self.rows)
        lines = self.provenance_lines()
        lines.append(f"{'':<{width}} | " + " | ".join(REPORT_COLUMNS))
        for r in self.rows:
            lines.append(f"{r.label:<{width}} | " + " | ".join(r.metrics.cells()))
        return "\n".join(lines) + "\n"

    def render_csv(self) -> str:
        def cell(v):
            return NA if v is None else repr(float(v))

        lines = self.provenance_lines()
        lines.append(CSV_HEADER)
        for r in self.rows:
            m = r.metrics
            vals = (m.tp_rate, m.fp_rate, m.precision, m.recall, m.roc_auc)
            lines.append(f"{r.algorithm},{int(r.entropy)}," + ",".join(cell(v) for v in vals))
        return "\n".join(lines) + "\n"


def _fingerprint(ds) -> str:
    if hasattr(ds, "fingerprint"):
        return ds.fingerprint()
    X, y = _arrays_of(ds)
    h = hashlib.sha256(np.ascontiguousarray(X, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(y, dtype="<i8").tobytes())
    return h.hexdigest()


def compare_report(
    ds,
    algorithms: Sequence[str] = ALGORITHMS,
    seed: int = 0,
    k: int = 10,
    hyper: dict[str, HyperParams] | None = None,
    ablation: bool = True,
    parity: bool = False,
    workers: int = 1,
) -> ComparisonReport:
    """Cross-validate each algorithm with and without entropy over one fold plan.

    Rows follow the canonical order svm, knn, naive_bayes, logistic, adaboost,
    the with-entropy arm first.
    """
    if not algorithms:
        raise ValueError("no algorithms requested")
    unknown = set(algorithms) - set(ALGORITHMS)
    if unknown:
        raise ValueError(f"unknown algorithms: {sorted(unknown)}")
    hyper = hyper or {}
    plan = stratified_folds(ds, k, seed, parity=parity)
    arms = (WITH_ENTROPY, WITHOUT_ENTROPY) if ablation else (WITH_ENTROPY,)
    rows = []
    for name in (a for a in ALGORITHMS if a in algorithms):
        hp = hyper.get(name) or HyperParams(name, seed=seed)
        for fs in arms:
            res = cross_validate(ds, hp, fs, plan, workers=workers)
            rows.append(ReportRow(name, fs.include_entropy, res.metrics, res.fold_mean, res.plan_digest))
    notes = tuple(getattr(getattr(ds, "provenance", None), "notes", ()))
    if parity:
        notes += (("fold-mode", "per-fold class parity"),)
    return ComparisonReport(
        rows=tuple(rows),
        dataset_fingerprint=_fingerprint(ds),
        seed=seed,
        k=k,
        plan_digest=plan.digest(),
        notes=notes,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
