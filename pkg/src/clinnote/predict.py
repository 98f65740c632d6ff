"""Readmission text classifier: TF-IDF features, L2 logistic regression,
stratified cross-validation with rank-based AUROC.

Vectorizer and classifier are fitted per fold on the training split only,
so the vocabulary can never leak from test documents.
"""

from __future__ import annotations

import hashlib
import logging
import math
import re
import statistics
from dataclasses import dataclass, field

import numpy as np

from .errors import CVInfeasible, InvalidInput, VectorizerDegenerate

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[a-z0-9]+")
MIN_TOKEN_LEN = 2
MIN_DF = 2


def tokenize(text):
    """Lowercased maximal alphanumeric runs of length >= 2."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= MIN_TOKEN_LEN]


@dataclass
class Vectorizer:
    vocabulary: dict  # term -> column index
    idf: np.ndarray

    @property
    def vocabulary_hash(self) -> str:
        terms = sorted(self.vocabulary, key=self.vocabulary.get)
        return hashlib.sha256("\x00".join(terms).encode()).hexdigest()

    def transform(self, docs) -> np.ndarray:
        """tf * idf rows, L2-normalized (empty documents stay zero)."""
        X = np.zeros((len(docs), len(self.vocabulary)))
        for i, doc in enumerate(docs):
            for tok in tokenize(doc):
                j = self.vocabulary.get(tok)
                if j is not None:
                    X[i, j] += 1.0
        X *= self.idf
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return X / norms


def fit_vectorizer(train_docs) -> Vectorizer:
    """Vocabulary = tokens in >= 2 training docs; idf = ln((1+N)/(1+df)) + 1."""
    if len(train_docs) < 2:
        raise InvalidInput("need at least 2 training documents")
    df: dict = {}
    for doc in train_docs:
        for tok in set(tokenize(doc)):
            df[tok] = df.get(tok, 0) + 1
    terms = sorted(t for t, c in df.items() if c >= MIN_DF)
    if not terms:
        raise VectorizerDegenerate("no token appears in >= 2 training documents")
    n = len(train_docs)
    vocabulary = {t: i for i, t in enumerate(terms)}
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in terms])
    return Vectorizer(vocabulary=vocabulary, idf=idf)


# --- classifier ------------------------------------------------------------

def _objective(w, X1, y, lam):
    eta = X1 @ w
    nll = float(np.sum(np.logaddexp(0.0, eta) - y * eta))
    return nll + 0.5 * lam * float(np.dot(w[1:], w[1:]))


def train_classifier(X, y, l2_lambda=1.0, tol=1e-6, max_iter=1000):
    """L2-penalized logistic regression by gradient descent with
    backtracking line search; the intercept is unpenalized.

    Returns (weights, info). weights[0] is the intercept. On
    non-convergence the best iterate is returned with converged=False.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.any(y == 0) and np.any(y == 1)):
        raise InvalidInput("training fold must contain both classes")
    n, d = X.shape
    X1 = np.column_stack([np.ones(n), X])
    w = np.zeros(d + 1)
    best_w, best_obj = w.copy(), _objective(w, X1, y, l2_lambda)
    grad_norm = np.inf
    converged = False
    for _ in range(max_iter):
        eta = X1 @ w
        p = 1.0 / (1.0 + np.exp(-np.clip(eta, -500, 500)))
        grad = X1.T @ (p - y)
        grad[1:] += l2_lambda * w[1:]
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < tol:
            converged = True
            break
        obj = _objective(w, X1, y, l2_lambda)
        step = 1.0 / max(1.0, l2_lambda)
        # Armijo backtracking
        for _ in range(50):
            cand = w - step * grad
            if _objective(cand, X1, y, l2_lambda) <= obj - 1e-4 * step * grad_norm**2:
                break
            step /= 2.0
        w = w - step * grad
        obj_new = _objective(w, X1, y, l2_lambda)
        if obj_new < best_obj:
            best_obj, best_w = obj_new, w.copy()
    if not converged:
        log.warning("classifier did not converge; final gradient norm %.3g", grad_norm)
        w = best_w
    return w, {"converged": converged, "grad_norm": grad_norm}


def predict_proba(weights, X):
    eta = weights[0] + np.asarray(X, dtype=float) @ weights[1:]
    return 1.0 / (1.0 + np.exp(-np.clip(eta, -500, 500)))


# --- metrics ---------------------------------------------------------------

def _midranks(values):
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auroc(scores, labels):
    """Mann-Whitney rank AUROC with midrank tie handling."""
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise InvalidInput("AUROC needs both classes")
    ranks = _midranks(scores)
    pos_rank_sum = float(np.sum(ranks[labels == 1]))
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auprc(scores, labels):
    """Average precision by step integration of the PR curve."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0:
        raise InvalidInput("AUPRC needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    ap = 0.0
    tp = fp = 0
    prev_recall = 0.0
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        tp += int(np.sum(sorted_labels[i : j + 1] == 1))
        fp += (j - i + 1) - int(np.sum(sorted_labels[i : j + 1] == 1))
        precision = tp / (tp + fp)
        recall = tp / n_pos
        ap += precision * (recall - prev_recall)
        prev_recall = recall
        i = j + 1
    return ap


def accuracy_f1(scores, labels, threshold=0.5):
    preds = (np.asarray(scores) >= threshold).astype(int)
    labels = np.asarray(labels)
    acc = float(np.mean(preds == labels))
    tp = int(np.sum((preds == 1) & (labels == 1)))
    fp = int(np.sum((preds == 1) & (labels == 0)))
    fn = int(np.sum((preds == 0) & (labels == 1)))
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    return acc, f1


# --- cross-validation ------------------------------------------------------

def stratified_folds(labels, n_folds, seed):
    """Round-robin deal within each class after a seeded shuffle.

    Each fold's positive count differs from the ideal by at most one
    sample. Retries with seed offsets if a fold misses a class.
    """
    labels = np.asarray(labels)
    for offset in range(5):
        rng = np.random.default_rng(seed + offset)
        folds = [[] for _ in range(n_folds)]
        for cls in (0, 1):
            idx = np.flatnonzero(labels == cls)
            rng.shuffle(idx)
            for pos, i in enumerate(idx):
                folds[pos % n_folds].append(int(i))
        if all(
            any(labels[i] == 0 for i in f) and any(labels[i] == 1 for i in f)
            for f in folds
        ):
            if offset:
                log.warning("stratification needed seed offset %d", offset)
            return [sorted(f) for f in folds]
    raise CVInfeasible(f"could not build {n_folds} folds with both classes")


@dataclass
class PredictionReport:
    input_variant: str
    n_folds: int
    seed: int
    per_fold: list = field(default_factory=list)
    vocabulary_sizes: list = field(default_factory=list)
    vocabulary_hashes: list = field(default_factory=list)

    def _stat(self, metric):
        vals = [f[metric] for f in self.per_fold]
        return {
            "mean": statistics.mean(vals),
            "sd": statistics.stdev(vals) if len(vals) > 1 else 0.0,
        }

    def to_dict(self) -> dict:
        return {
            "input_variant": self.input_variant,
            "n_folds": self.n_folds,
            "seed": self.seed,
            "per_fold": self.per_fold,
            "vocabulary_sizes": self.vocabulary_sizes,
            "summary": {m: self._stat(m) for m in ("auroc", "auprc", "accuracy", "f1")},
        }


def evaluate_cv(docs, labels, n_folds=5, seed=0, l2_lambda=1.0, variant="raw"):
    """Stratified k-fold evaluation of the TF-IDF + logistic arm."""
    if len(docs) != len(labels):
        raise InvalidInput("docs and labels must align")
    if len(docs) < n_folds * 2:
        raise InvalidInput(f"need at least {n_folds * 2} labeled documents")
    folds = stratified_folds(labels, n_folds, seed)
    labels = np.asarray(labels)
    report = PredictionReport(input_variant=variant, n_folds=n_folds, seed=seed)
    for fold_idx, test_idx in enumerate(folds):
        test_set = set(test_idx)
        train_idx = [i for i in range(len(docs)) if i not in test_set]
        vec = fit_vectorizer([docs[i] for i in train_idx])
        X_train = vec.transform([docs[i] for i in train_idx])
        X_test = vec.transform([docs[i] for i in test_idx])
        w, _ = train_classifier(X_train, labels[train_idx], l2_lambda=l2_lambda)
        scores = predict_proba(w, X_test)
        y_test = labels[test_idx]
        acc, f1 = accuracy_f1(scores, y_test)
        report.per_fold.append(
            {
                "fold": fold_idx,
                "auroc": auroc(scores, y_test),
                "auprc": auprc(scores, y_test),
                "accuracy": acc,
                "f1": f1,
                "n_test": len(test_idx),
            }
        )
        report.vocabulary_sizes.append(len(vec.vocabulary))
        report.vocabulary_hashes.append(vec.vocabulary_hash)
    return report
