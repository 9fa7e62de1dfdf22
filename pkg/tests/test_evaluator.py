import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import auc_by_pairs, confusion_by_loop, two_blobs

from lexdomain.classifiers import ALGORITHMS, HyperParams, TrainingError
from lexdomain.evaluator import (
    CSV_HEADER,
    NA,
    ConfusionMatrix,
    EvalMetrics,
    compare_report,
    compute_metrics,
    cross_validate,
    roc_auc,
    roc_auc_trapezoid,
    stratified_folds,
)
from lexdomain.featurizer import WITH_ENTROPY, WITHOUT_ENTROPY


def labels(n_benign, n_malicious):
    return np.r_[np.zeros(n_benign, dtype=int), np.ones(n_malicious, dtype=int)]


def check_plan(plan, y):
    a = np.asarray(plan.assignments)
    assert a.min() >= 0 and a.max() == plan.k - 1
    seen = np.concatenate([plan.test_indices(f) for f in range(plan.k)])
    assert sorted(seen) == list(range(len(y)))  # disjoint and exhaustive
    for f in range(plan.k):
        assert set(plan.train_indices(f)).isdisjoint(plan.test_indices(f))
        assert len(plan.train_indices(f)) + len(plan.test_indices(f)) == len(y)
    for c in (0, 1):
        sizes = [int((y[plan.test_indices(f)] == c).sum()) for f in range(plan.k)]
        assert max(sizes) - min(sizes) <= 1
    totals = [len(plan.test_indices(f)) for f in range(plan.k)]
    assert max(totals) - min(totals) <= 1


# --- folds ----------------------------------------------------------------

@pytest.mark.parametrize("n_benign, n_malicious", [(10, 10), (20, 80), (1573, 6292), (13, 29)])
def test_fold_properties(n_benign, n_malicious):
    y = labels(n_benign, n_malicious)
    check_plan(stratified_folds(y, 10, seed=3), y)


def test_fold_sizes_for_1573_benign():
    y = labels(1573, 6292)
    plan = stratified_folds(y, 10, seed=0)
    sizes = sorted(int((y[plan.test_indices(f)] == 0).sum()) for f in range(10))
    assert sizes == [157] * 7 + [158] * 3


def test_twenty_rows_one_per_class_per_fold():
    y = labels(10, 10)
    plan = stratified_folds(y, 10)
    for f in range(10):
        assert sorted(y[plan.test_indices(f)]) == [0, 1]


def test_too_few_rows_per_class():
    with pytest.raises(ValueError, match="fewer than k"):
        stratified_folds(labels(9, 50), 10)


def test_plan_is_seeded():
    y = labels(40, 60)
    assert stratified_folds(y, 10, seed=5) == stratified_folds(y, 10, seed=5)
    assert stratified_folds(y, 10, seed=5).digest() != stratified_folds(y, 10, seed=6).digest()


def test_parity_plan_balances_each_fold():
    y = labels(30, 120)
    plan = stratified_folds(y, 10, seed=1, parity=True)
    a = np.asarray(plan.assignments)
    assert (a[y == 0] >= 0).all()
    assert (a[y == 1] >= 0).sum() == 30 and (a == -1).sum() == 90
    for f in range(10):
        test = y[plan.test_indices(f)]
        assert (test == 0).sum() == (test == 1).sum() == 3
        assert not set(plan.train_indices(f)) & set(np.flatnonzero(a == -1))


# --- metrics --------------------------------------------------------------

def test_metrics_worked_example():
    m = compute_metrics(ConfusionMatrix(tp=97, fp=2, tn=98, fn=3))
    assert (m.tp_rate, m.fp_rate) == (0.97, 0.02)
    assert m.precision == pytest.approx(97 / 99) and m.recall == m.tp_rate
    assert m.cells()[:4] == ("0.970", "0.020", "0.980", "0.970")


def test_no_positive_predictions_gives_undefined_precision():
    m = compute_metrics(ConfusionMatrix(tp=0, fp=0, tn=5, fn=5))
    assert m.precision is None and m.tp_rate == 0.0
    assert m.cells()[2] == NA


def test_single_class_truth_gives_undefined_rate():
    m = compute_metrics(ConfusionMatrix(tp=0, fp=2, tn=8, fn=0))
    assert m.tp_rate is None and m.recall is None and m.fp_rate == 0.2


def test_empty_confusion_rejected():
    with pytest.raises(ValueError):
        compute_metrics(ConfusionMatrix())


def test_confusion_matches_loop_on_random_vectors():
    rng = np.random.default_rng(9)
    for _ in range(200):
        n = int(rng.integers(1, 60))
        t, p = rng.integers(0, 2, n), rng.integers(0, 2, n)
        cm = ConfusionMatrix.from_predictions(t, p)
        assert (cm.tp, cm.fp, cm.tn, cm.fn) == confusion_by_loop(t, p)


def test_auc_four_instance_example():
    assert roc_auc([0.9, 0.8, 0.7, 0.1], [1, 0, 1, 0]) == 0.75
    assert roc_auc_trapezoid([0.9, 0.8, 0.7, 0.1], [1, 0, 1, 0]) == 0.75
    assert roc_auc([(0.9, 1), (0.8, 0), (0.7, 1), (0.1, 0)]) == 0.75


def test_auc_all_ties_is_half():
    assert roc_auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
    assert roc_auc_trapezoid([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


def test_auc_needs_both_classes():
    with pytest.raises(ValueError, match="positive and one negative"):
        roc_auc([0.1, 0.2], [1, 1])


scored = st.lists(
    st.tuples(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]) | st.floats(-5, 5), st.integers(0, 1)),
    min_size=2,
    max_size=40,
).filter(lambda ps: len({y for _, y in ps}) == 2)


@given(scored)
def test_auc_paths_agree(pairs):
    s = [a for a, _ in pairs]
    y = [b for _, b in pairs]
    mw = roc_auc(s, y)
    assert abs(mw - roc_auc_trapezoid(s, y)) <= 1e-9
    assert abs(mw - auc_by_pairs(s, y)) <= 1e-9
    assert abs((1 - mw) - roc_auc([-v for v in s], y)) <= 1e-9


# --- cross-validation -----------------------------------------------------

@pytest.fixture(scope="module")
def small_blobs():
    return two_blobs(60, seed=4)


def test_cv_on_separable_data(small_blobs):
    plan = stratified_folds(small_blobs, 10, seed=0)
    res = cross_validate(small_blobs, HyperParams("knn"), WITH_ENTROPY, plan)
    assert res.confusion == ConfusionMatrix(tp=60, fp=0, tn=60, fn=0)
    assert res.metrics.roc_auc == 1.0
    assert len(res.per_fold) == 10 and res.fold_mean.tp_rate == 1.0
    assert res.plan_digest == plan.digest()


def test_cv_constant_features_predict_everything_malicious():
    # no stump can beat the majority vote, so every row is called malicious
    X = np.ones((100, 4))
    y = labels(20, 80)
    plan = stratified_folds(y, 10)
    res = cross_validate((X, y), HyperParams("adaboost"), WITH_ENTROPY, plan)
    assert res.confusion == ConfusionMatrix(tp=80, fp=20, tn=0, fn=0)
    m = res.metrics
    assert (m.recall, m.fp_rate, m.precision) == (1.0, 1.0, 0.8)
    assert m.roc_auc == 0.5


def test_cv_pooled_counts_cover_every_row(small_blobs):
    plan = stratified_folds(small_blobs, 5, seed=2)
    res = cross_validate(small_blobs, HyperParams("naive_bayes"), WITHOUT_ENTROPY, plan)
    assert res.confusion.total == 120


def test_cv_threads_match_serial(small_blobs):
    plan = stratified_folds(small_blobs, 10, seed=8)
    a = cross_validate(small_blobs, HyperParams("svm"), WITH_ENTROPY, plan)
    b = cross_validate(small_blobs, HyperParams("svm"), WITH_ENTROPY, plan, workers=4)
    assert a == b


def test_cv_plan_must_match_dataset(small_blobs):
    plan = stratified_folds(labels(10, 10), 10)
    with pytest.raises(ValueError, match="different dataset"):
        cross_validate(small_blobs, HyperParams("knn"), WITH_ENTROPY, plan)


def test_cv_fold_errors_name_the_fold():
    X = np.random.default_rng(0).normal(size=(20, 4))
    y = labels(10, 10)
    plan = stratified_folds(y, 10)
    with pytest.raises(TrainingError, match=r"fold \d+: .*k=19"):
        cross_validate((X, y), HyperParams("knn", k=19), WITH_ENTROPY, plan)


# --- comparison report ----------------------------------------------------

@pytest.fixture(scope="module")
def report():
    return compare_report(two_blobs(40, seed=1), seed=3)


def test_report_has_ten_rows_in_order(report):
    assert len(report.rows) == 10
    assert [(r.algorithm, r.entropy) for r in report.rows] == [(a, e) for a in ALGORITHMS for e in (True, False)]
    assert {r.plan_digest for r in report.rows} == {report.plan_digest}


def test_report_text_layout(report):
    lines = report.render_text().splitlines()
    header = next(ln for ln in lines if not ln.startswith("#"))
    assert header.endswith(" | TP | FP | Precision | Recall | ROC")
    body = lines[lines.index(header) + 1 :]
    assert body[0].startswith("SVM (with entropy)") and body[1].startswith("SVM (without entropy)")
    assert body[-1].startswith("AdaBoostM1 (without entropy)")
    assert all(len(ln.split(" | ")) == 6 for ln in body)


def test_report_csv(report):
    lines = [ln for ln in report.render_csv().splitlines() if not ln.startswith("#")]
    assert lines[0] == CSV_HEADER and len(lines) == 11
    assert lines[1].startswith("svm,1,") and lines[2].startswith("svm,0,")


def test_report_is_deterministic(report):
    again = compare_report(two_blobs(40, seed=1), seed=3)
    assert again.render_text() == report.render_text()
    assert again.render_csv() == report.render_csv()


def test_report_without_ablation_and_subset():
    r = compare_report(two_blobs(30, seed=2), algorithms=["logistic", "knn"], ablation=False)
    assert [(x.algorithm, x.entropy) for x in r.rows] == [("knn", True), ("logistic", True)]


def test_report_rejects_unknown_algorithm():
    with pytest.raises(ValueError, match="unknown"):
        compare_report(two_blobs(30), algorithms=["svm", "forest"])


def test_report_parity_note():
    r = compare_report(two_blobs(30, seed=2), algorithms=["knn"], parity=True)
    assert ("fold-mode", "per-fold class parity") in r.notes


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_na_cells_render_only_for_missing(seed):
    rng = np.random.default_rng(seed)
    cm = ConfusionMatrix(*(int(v) for v in rng.integers(0, 4, 4)))
    if cm.total == 0:
        return
    m = compute_metrics(cm)
    for value, cell in zip((m.tp_rate, m.fp_rate, m.precision, m.recall), m.cells()):
        assert (value is None) == (cell == NA)
    assert isinstance(m, EvalMetrics)
