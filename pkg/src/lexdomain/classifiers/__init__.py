"""Five binary classifiers behind one train / predict / score contract.

Labels are 1 for malicious and 0 for benign. kNN and SVM see features
min-max scaled to the training ranges (test values clamped); naive Bayes,
logistic regression and AdaBoost consume raw features.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from ..featurizer import WITH_ENTROPY, FeatureSetConfig, FeatureVector, feature_matrix
from . import _algorithms as alg

ALGORITHMS = ("svm", "knn", "naive_bayes", "logistic", "adaboost")
DISPLAY_NAMES = {
    "svm": "SVM",
    "knn": "kNN",
    "naive_bayes": "Naive Bayes",
    "logistic": "Logistic Regression",
    "adaboost": "AdaBoostM1",
}
NORMALIZED = frozenset({"knn", "svm"})
# predict() is 1 iff score > threshold; equality goes to class 0.
THRESHOLDS = {"svm": 0.0, "knn": 0.5, "naive_bayes": 0.5, "logistic": 0.5, "adaboost": 0.0}
_DEFAULT_MAX_ITERS = {"svm": 100_000, "logistic": 10_000}
_DEFAULT_TOL = {"svm": 1e-3, "logistic": 1e-8}


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class HyperParams:
    algorithm: str
    k: int = 1
    c: float = 1.0
    ridge: float = 1e-8
    rounds: int = 10
    max_iters: int | None = None  # None: per-algorithm default
    tolerance: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.c > 0:
            raise ValueError("c must be > 0")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")

    @property
    def iteration_limit(self) -> int:
        return self.max_iters if self.max_iters is not None else _DEFAULT_MAX_ITERS.get(self.algorithm, 0)

    @property
    def tol(self) -> float:
        return self.tolerance if self.tolerance is not None else _DEFAULT_TOL.get(self.algorithm, 0.0)

    def with_seed(self, seed: int) -> HyperParams:
        return replace(self, seed=seed)


def _frozen(arr) -> np.ndarray:
    a = np.array(arr)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TrainedModel:
    algorithm: str
    feature_set: FeatureSetConfig
    hyper: HyperParams
    lo: np.ndarray
    hi: np.ndarray
    params: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "lo", _frozen(self.lo))
        object.__setattr__(self, "hi", _frozen(self.hi))
        object.__setattr__(self, "params", MappingProxyType({k: _frozen(v) for k, v in self.params.items()}))

    @property
    def threshold(self) -> float:
        return THRESHOLDS[self.algorithm]

    def prepare(self, X: np.ndarray) -> np.ndarray:
        """Map raw feature rows into the space the fitted parameters live in."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.feature_set.dimension:
            raise ValueError(
                f"dimension mismatch: model expects {self.feature_set.dimension} features, got shape {X.shape}"
            )
        if not np.isfinite(X).all():
            raise ValueError("non-finite feature value")
        if self.algorithm not in NORMALIZED:
            return X
        return min_max(X, self.lo, self.hi)


def min_max(X, lo, hi):
    span = hi - lo
    scaled = np.divide(X - lo, span, out=np.zeros_like(X), where=span > 0)
    return np.clip(scaled, 0.0, 1.0)


def _as_xy(ds, fs: FeatureSetConfig):
    if isinstance(ds, tuple) and len(ds) == 2:
        X, y = ds
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
    else:
        vectors = list(getattr(ds, "vectors", ds))
        if any(v.label is None for v in vectors):
            raise TrainingError("all training rows must be labelled")
        X = feature_matrix(vectors, fs)
        y = np.array([v.label for v in vectors])
    if X.ndim != 2 or X.shape[1] != fs.dimension:
        raise TrainingError(f"dimension mismatch: feature set needs {fs.dimension} columns, data has shape {X.shape}")
    return X, y.astype(np.int64)


def train(ds, hp: HyperParams, fs: FeatureSetConfig = WITH_ENTROPY) -> TrainedModel:
    """Fit one classifier.

    ``ds`` is a LabeledDataset, a sequence of labelled FeatureVectors, or an
    ``(X, y)`` pair whose column count already matches ``fs``.
    """
    X, y = _as_xy(ds, fs)
    if len(y) < 2:
        raise TrainingError("need at least 2 training rows")
    if not np.isin(y, (0, 1)).all():
        raise TrainingError("labels must be 0 or 1")
    if len(np.unique(y)) < 2:
        raise TrainingError("single-class dataset")
    if not np.isfinite(X).all():
        raise TrainingError("non-finite feature value")

    lo, hi = X.min(axis=0), X.max(axis=0)
    Xn = min_max(X, lo, hi) if hp.algorithm in NORMALIZED else X
    a = hp.algorithm
    if a == "knn":
        if hp.k > len(y):
            raise TrainingError(f"k={hp.k} exceeds the {len(y)} training rows")
        params = alg.fit_knn(Xn, y, hp.k)
    elif a == "naive_bayes":
        params = alg.fit_naive_bayes(Xn, y)
    elif a == "logistic":
        params = alg.fit_logistic(Xn, y, hp.ridge, hp.iteration_limit, hp.tol)
    elif a == "svm":
        params = alg.fit_svm(Xn, y, hp.c, hp.iteration_limit, hp.tol)
    else:
        params = alg.fit_adaboost(Xn, y, hp.rounds)
    return TrainedModel(a, fs, hp, lo, hi, params)


_SCORERS = {
    "knn": alg.score_knn,
    "naive_bayes": alg.score_naive_bayes,
    "logistic": alg.score_logistic,
    "svm": alg.score_svm,
    "adaboost": alg.score_adaboost,
}


def score_many(m: TrainedModel, X) -> np.ndarray:
    """Ranking scores, higher meaning more likely malicious.

    kNN: malicious fraction of the k neighbours. Naive Bayes and logistic:
    P(malicious). SVM: signed margin. AdaBoost: weighted vote in [-1, 1].
    """
    return _SCORERS[m.algorithm](m.params, m.prepare(X))


def predict_many(m: TrainedModel, X) -> np.ndarray:
    return (score_many(m, X) > m.threshold).astype(np.int64)


def _row(m: TrainedModel, fv: FeatureVector | Sequence[float]) -> np.ndarray:
    if isinstance(fv, FeatureVector):
        return np.array([fv.values(m.feature_set)])
    return np.asarray([fv], dtype=np.float64)


def score(m: TrainedModel, fv: FeatureVector | Sequence[float]) -> float:
    return float(score_many(m, _row(m, fv))[0])


def predict(m: TrainedModel, fv: FeatureVector | Sequence[float]) -> int:
    return int(score(m, fv) > m.threshold)


from .persist import dumps_model, load_model, loads_model, save_model  # noqa: E402

__all__ = [
    "ALGORITHMS",
    "DISPLAY_NAMES",
    "HyperParams",
    "TrainedModel",
    "TrainingError",
    "dumps_model",
    "load_model",
    "loads_model",
    "predict",
    "predict_many",
    "save_model",
    "score",
    "score_many",
    "train",
]
