"""Fitting and scoring routines for the five supported classifiers.

Every ``fit_*`` takes a float matrix ``X`` and a 0/1 label vector ``y`` and
returns a dict of numpy arrays; every ``score_*`` maps that dict and a query
matrix to one score per row.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

NB_VARIANCE_FLOOR = 1e-9
ADABOOST_ZERO_ERROR = 1e-10


# --- k nearest neighbours -------------------------------------------------

def fit_knn(X, y, k):
    if k > len(y):
        raise ValueError(f"k={k} exceeds the {len(y)} training rows")
    return {"X": X.copy(), "y": y.astype(np.int64), "k": np.array(k)}


def knn_neighbours(params, Q, chunk=256):
    """Indices of the k nearest training rows; ties go to the lower row index."""
    X, k = params["X"], int(params["k"])
    out = np.empty((len(Q), k), dtype=np.int64)
    for start in range(0, len(Q), chunk):
        q = Q[start : start + chunk]
        d = ((q[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
        if k == 1:
            out[start : start + chunk, 0] = d.argmin(axis=1)
        else:
            out[start : start + chunk] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def score_knn(params, Q):
    return params["y"][knn_neighbours(params, Q)].mean(axis=1)


# --- Gaussian naive Bayes ------------------------------------------------

def fit_naive_bayes(X, y):
    means, variances, priors = [], [], []
    for label in (0, 1):
        rows = X[y == label]
        means.append(rows.mean(axis=0))
        variances.append(np.maximum(rows.var(axis=0), NB_VARIANCE_FLOOR))
        priors.append(len(rows) / len(y))
    return {
        "mean": np.array(means),
        "var": np.array(variances),
        "prior": np.array(priors),
    }


def naive_bayes_log_odds(params, Q):
    mean, var, prior = params["mean"], params["var"], params["prior"]
    loglik = -0.5 * (np.log(2 * np.pi * var)[:, None, :] + (Q[None] - mean[:, None, :]) ** 2 / var[:, None, :])
    joint = loglik.sum(axis=2) + np.log(prior)[:, None]
    return joint[1] - joint[0]


def score_naive_bayes(params, Q):
    return expit(naive_bayes_log_odds(params, Q))


# --- logistic regression --------------------------------------------------

def logistic_loss(coef, intercept, X, y, ridge):
    """Mean log-loss plus ``ridge/2 * |coef|^2``."""
    z = X @ coef + intercept
    return np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * ridge * coef @ coef


def logistic_grad(coef, intercept, X, y, ridge):
    resid = expit(X @ coef + intercept) - y
    return X.T @ resid / len(y) + ridge * coef, resid.mean()


def fit_logistic(X, y, ridge, max_iters, tol):
    # Gradient descent on centred features. Centring only shifts the
    # unpenalised intercept, so the optimum is unchanged, but conditioning
    # improves enough for a fixed 1/L step to make progress.
    y = y.astype(np.float64)
    center = X.mean(axis=0)
    Xc = X - center
    design = np.hstack([Xc, np.ones((len(y), 1))])
    lipschitz = np.linalg.norm(design, 2) ** 2 / (4 * len(y)) + ridge
    step = 1.0 / lipschitz
    coef = np.zeros(X.shape[1])
    b = 0.0
    iters = 0
    converged = False
    for iters in range(1, max_iters + 1):
        g_coef, g_b = logistic_grad(coef, b, Xc, y, ridge)
        if max(np.abs(g_coef).max(initial=0.0), abs(g_b)) <= tol:
            converged = True
            iters -= 1
            break
        coef = coef - step * g_coef
        b = b - step * g_b
    return {
        "coef": coef,
        "intercept": np.array(b - center @ coef),
        "iterations": np.array(iters),
        "converged": np.array(int(converged)),
    }


def score_logistic(params, Q):
    return expit(Q @ params["coef"] + params["intercept"])


# --- linear SVM -----------------------------------------------------------

def fit_svm(X, y, c, max_iters, tol):
    """Soft-margin linear SVM dual solved by maximal-violating-pair SMO.

    With a linear kernel the weight vector is kept explicitly, so each pair
    update costs O(d) and the violation scan one matrix-vector product.
    """
    s = np.where(y == 1, 1.0, -1.0)
    n = len(s)
    alpha = np.zeros(n)
    w = np.zeros(X.shape[1])
    sq = (X * X).sum(axis=1)
    upper = np.where(s > 0, c, 0.0)  # bounds on s_t * alpha_t
    lower = np.where(s > 0, 0.0, -c)
    iters = 0
    gap = np.inf
    for iters in range(max_iters):
        g = s - X @ w
        sa = s * alpha
        up = sa < upper
        low = sa > lower
        i = np.flatnonzero(up)[np.argmax(g[up])]
        j = np.flatnonzero(low)[np.argmin(g[low])]
        gap = g[i] - g[j]
        if gap < tol:
            break
        curvature = max(sq[i] + sq[j] - 2 * X[i] @ X[j], 1e-12)
        lam = min(upper[i] - sa[i], sa[j] - lower[j], gap / curvature)
        alpha[i] += s[i] * lam
        alpha[j] -= s[j] * lam
        w += lam * (X[i] - X[j])
    else:
        iters = max_iters

    g = s - X @ w
    free = (alpha > 1e-12) & (alpha < c - 1e-12)
    if free.any():
        b = g[free].mean()
    else:
        sa = s * alpha
        up, low = sa < upper, sa > lower
        b = (g[up].max(initial=-np.inf) + g[low].min(initial=np.inf)) / 2
        if not np.isfinite(b):
            b = 0.0
    return {
        "w": w,
        "b": np.array(b),
        "alpha": alpha,
        "n_support": np.array(int((alpha > 1e-12).sum())),
        "iterations": np.array(iters),
        "kkt_gap": np.array(gap),
    }


def score_svm(params, Q):
    return Q @ params["w"] + params["b"]


# --- AdaBoost over decision stumps ---------------------------------------

def best_stump(X, s, w):
    """Lowest weighted-error stump ``polarity if x[f] > thr else -polarity``.

    Returns (error, feature, threshold, polarity). Ties keep the first
    candidate in (feature, threshold, polarity=+1 first) order.
    """
    best = (np.inf, 0, -np.inf, 1.0)
    total = w.sum()
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs, ss, ws = X[order, f], s[order], w[order]
        # err_pos[i]: rows 0..i-1 predicted -1, rows i.. predicted +1
        miss_if_neg = np.concatenate([[0.0], np.cumsum(ws * (ss > 0))])
        miss_if_pos = np.concatenate([np.cumsum((ws * (ss < 0))[::-1])[::-1], [0.0]])
        err_pos = miss_if_neg + miss_if_pos
        cut = np.concatenate([[True], xs[1:] != xs[:-1], [True]])
        thresholds = np.concatenate([[-np.inf], (xs[1:] + xs[:-1]) / 2, [np.inf]])
        for polarity, errs in ((1.0, err_pos), (-1.0, total - err_pos)):
            errs = np.where(cut, errs, np.inf)
            i = int(np.argmin(errs))
            if errs[i] < best[0]:
                best = (float(errs[i]), f, float(thresholds[i]), polarity)
    return best


def stump_predict(Q, feature, threshold, polarity):
    return np.where(Q[:, feature] > threshold, polarity, -polarity)


def fit_adaboost(X, y, rounds):
    s = np.where(y == 1, 1.0, -1.0)
    w = np.full(len(s), 1.0 / len(s))
    stages = []
    for _ in range(rounds):
        _, f, thr, pol = best_stump(X, s, w)
        h = stump_predict(X, f, thr, pol)
        err = float(w[h != s].sum())
        if err >= 0.5:
            break
        if err <= 0.0:
            stages.append((f, thr, pol, 0.5 * np.log((1 - ADABOOST_ZERO_ERROR) / ADABOOST_ZERO_ERROR), err))
            break
        a = 0.5 * np.log((1 - err) / err)
        stages.append((f, thr, pol, a, err))
        w = w * np.exp(-a * s * h)
        w /= w.sum()
    cols = list(zip(*stages)) if stages else [(), (), (), (), ()]
    return {
        "feature": np.array(cols[0], dtype=np.int64),
        "threshold": np.array(cols[1], dtype=np.float64),
        "polarity": np.array(cols[2], dtype=np.float64),
        "alpha": np.array(cols[3], dtype=np.float64),
        "stage_error": np.array(cols[4], dtype=np.float64),
    }


def score_adaboost(params, Q):
    alpha = params["alpha"]
    if len(alpha) == 0:
        return np.zeros(len(Q))
    vote = np.zeros(len(Q))
    for f, thr, pol, a in zip(params["feature"], params["threshold"], params["polarity"], alpha):
        vote += a * stump_predict(Q, int(f), thr, pol)
    return vote / alpha.sum()
