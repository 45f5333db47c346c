"""Soft-margin linear SVM for the link classifier, and stratified k-fold
cross-validation around it.

Training solves the dual with SMO (second-order working-set selection, as in
LIBSVM) while keeping the primal weight vector explicit, so each iteration
costs O(n d).  Afterwards the bias is re-optimized exactly for the final
weights, which can only lower the primal objective.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .links import FEATURE_NAMES, LinkFeatureVector

TAU = 1e-12


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray                  # 0 marks a feature that was constant in training
    feature_names: tuple[str, ...] = FEATURE_NAMES
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        d = len(self.feature_names)
        if not (self.weights.shape == self.mean.shape == self.scale.shape == (d,)):
            raise ValueError("weights and normalization stats must match the feature list")
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise ValueError("non-finite weights")

    def standardize(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        live = self.scale > 0
        return np.where(live, (X - self.mean) / np.where(live, self.scale, 1.0), 0.0)

    def decision(self, X: np.ndarray) -> np.ndarray:
        # row-wise reduction rather than a matrix product, so a margin does not
        # depend on how many rows are scored together
        return (self.standardize(X) * self.weights).sum(axis=1) + self.bias


def _as_xy(examples, feature_names: Sequence[str] = FEATURE_NAMES):
    """(X, y) with y in {-1, +1} from (LinkFeatureVector | array, label) pairs or
    from an ``(X, labels)`` tuple of arrays."""
    if isinstance(examples, tuple) and len(examples) == 2 and isinstance(examples[0], np.ndarray):
        X, lab = examples
        X = np.asarray(X, dtype=np.float64)
    else:
        rows, lab = [], []
        for fv, label in examples:
            rows.append(fv.to_array() if isinstance(fv, LinkFeatureVector) else np.asarray(fv, np.float64))
            lab.append(label)
        X = np.vstack(rows) if rows else np.zeros((0, len(FEATURE_NAMES)))
    y = np.where(np.asarray(lab, dtype=np.float64) > 0, 1.0, -1.0)
    if list(feature_names) != list(FEATURE_NAMES):
        X = X[:, [FEATURE_NAMES.index(f) for f in feature_names]]
    return X, y


def _fit_stats(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    spread = np.abs(X - mean).max(axis=0)
    sd[spread <= 1e-12 * np.maximum(1.0, np.abs(mean))] = 0.0
    return mean, sd


def smo_linear(Z: np.ndarray, y: np.ndarray, C: float, eps: float = 1e-6,
               max_iter: int | None = None) -> tuple[np.ndarray, np.ndarray, float, int]:
    """Dual coordinate ascent on two variables at a time.

    Returns ``(alpha, w, b, iterations)`` with ``w = sum alpha_i y_i z_i``.
    Stops when the maximal KKT violation drops below ``eps``.
    """
    n = Z.shape[0]
    max_iter = max_iter or max(100_000, 100 * n)
    alpha = np.zeros(n)
    w = np.zeros(Z.shape[1])
    G = -np.ones(n)                            # gradient of 1/2 a'Qa - e'a
    Kdiag = np.einsum("ij,ij->i", Z, Z)
    pos = y > 0
    it = 0
    for it in range(1, max_iter + 1):
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        minus_yG = -y * G
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(minus_yG[up])])
        gmax = minus_yG[i]
        gmax2 = np.max(-minus_yG[low])
        if gmax + gmax2 < eps:
            break
        Ki = Z @ Z[i]
        b_it = gmax + y * G                   # gmax - (-y_t G_t)
        a_it = Kdiag[i] + Kdiag - 2.0 * Ki
        a_it = np.where(a_it > 0, a_it, TAU)
        cand = low & (b_it > 0)
        if not cand.any():
            break
        obj = np.where(cand, -(b_it ** 2) / a_it, np.inf)
        j = int(np.argmin(obj))

        ai, aj = alpha[i], alpha[j]
        Qij = y[i] * y[j] * Ki[j]
        if y[i] != y[j]:
            quad = Kdiag[i] + Kdiag[j] + 2.0 * Qij
            quad = quad if quad > 0 else TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = Kdiag[i] + Kdiag[j] - 2.0 * Qij
            quad = quad if quad > 0 else TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        dai, daj = ni - ai, nj - aj
        alpha[i], alpha[j] = ni, nj
        dw = dai * y[i] * Z[i] + daj * y[j] * Z[j]
        w += dw
        G += y * (Z @ dw)
        if it % 1000 == 0:
            G = y * (Z @ w) - 1.0
    G = y * (Z @ w) - 1.0
    return alpha, w, _smo_bias(alpha, y, G, C), it


def _smo_bias(alpha, y, G, C) -> float:
    free = (alpha > 0) & (alpha < C)
    yG = y * G
    if free.any():
        rho = float(np.mean(yG[free]))
    else:
        up = np.where(y > 0, alpha < C, alpha > 0)
        low = np.where(y > 0, alpha > 0, alpha < C)
        hi = np.min(yG[up]) if up.any() else 0.0
        lo = np.max(yG[low]) if low.any() else 0.0
        rho = float((hi + lo) / 2)
    return -rho


def hinge_sum(margins: np.ndarray) -> float:
    return float(np.maximum(0.0, 1.0 - margins).sum())


def best_bias(f: np.ndarray, y: np.ndarray, b0: float) -> float:
    """The bias minimizing ``sum max(0, 1 - y (f + b))``, nearest to ``b0``
    among minimizers.  The loss is convex and piecewise linear with kinks at
    ``b = y_i - f_i``, so a minimizer is found among the kinks."""
    kinks = np.unique(y - f)
    t = np.sort(1.0 - f[y > 0])            # positives active while b < t
    u = np.sort(-1.0 - f[y < 0])           # negatives active while b > u
    ct = np.concatenate([[0.0], np.cumsum(t)])
    cu = np.concatenate([[0.0], np.cumsum(u)])

    def loss(b: np.ndarray) -> np.ndarray:
        kt = np.searchsorted(t, b, side="right")        # t[:kt] <= b
        nt = t.size - kt
        pos = (ct[-1] - ct[kt]) - nt * b
        ku = np.searchsorted(u, b, side="left")         # u[:ku] < b
        neg = ku * b - cu[ku]
        return pos + neg

    cand = np.concatenate([kinks, [b0]])
    vals = loss(cand)
    best = vals.min()
    tol = 1e-12 * max(1.0, abs(best))
    if vals[-1] <= best + tol:
        return float(b0)
    ok = cand[vals <= best + tol]
    return float(ok[np.argmin(np.abs(ok - b0))])


def primal_objective(w: np.ndarray, b: float, Z: np.ndarray, y: np.ndarray, C: float) -> float:
    return 0.5 * float(w @ w) + C * hinge_sum(y * (Z @ w + b))


def train_linker(examples, C: float = 1.0, seed: int = 0, eps: float = 1e-6,
                 feature_names: Sequence[str] = FEATURE_NAMES) -> LinearModel:
    """Standardize the features and fit a soft-margin linear SVM.

    ``examples`` is a sequence of ``(LinkFeatureVector, label)`` pairs with
    labels in {0, 1} (1 = equivalent clusters), or an ``(X, labels)`` tuple.
    The solver is deterministic; ``seed`` is recorded for provenance.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    X, y = _as_xy(examples, feature_names)
    if X.shape[0] < 2:
        raise ValueError("need at least two training examples")
    if np.all(y > 0) or np.all(y < 0):
        raise ValueError("training data contains a single class")
    mean, scale = _fit_stats(X)
    model = LinearModel(np.zeros(X.shape[1]), 0.0, mean, scale, tuple(feature_names),
                        {"C": C, "seed": seed, "eps": eps})
    Z = model.standardize(X)
    alpha, w, b, iters = smo_linear(Z, y, C, eps)
    b = best_bias(Z @ w, y, b)
    model.weights, model.bias = w, b
    model.config["iterations"] = iters
    return model


def predict_link(model: LinearModel, fv) -> tuple[bool, float]:
    x = fv.to_array() if isinstance(fv, LinkFeatureVector) else np.asarray(fv, np.float64)
    if list(model.feature_names) != list(FEATURE_NAMES) and x.size == len(FEATURE_NAMES):
        x = x[[FEATURE_NAMES.index(f) for f in model.feature_names]]
    margin = float(model.decision(x[None, :])[0])
    return margin >= 0.0, margin


def predict_links(model: LinearModel, fvs) -> tuple[np.ndarray, np.ndarray]:
    """Batch form of :func:`predict_link`: ``(decisions, margins)``."""
    X = np.vstack([fv.to_array() if isinstance(fv, LinkFeatureVector) else np.asarray(fv, np.float64)
                   for fv in fvs]) if not isinstance(fvs, np.ndarray) else np.asarray(fvs, np.float64)
    if list(model.feature_names) != list(FEATURE_NAMES) and X.shape[1] == len(FEATURE_NAMES):
        X = X[:, [FEATURE_NAMES.index(f) for f in model.feature_names]]
    m = model.decision(X)
    return m >= 0.0, m


# --- cross-validation ----------------------------------------------------------

def stratified_folds(y: np.ndarray, folds: int, seed: int = 0) -> np.ndarray:
    """Fold number for every example.  Each class is shuffled and dealt out
    round-robin, continuing where the previous class stopped, so class counts
    and fold sizes differ by at most one between folds."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if len(y) < folds:
        raise ValueError(f"{len(y)} examples cannot fill {folds} folds")
    rng = np.random.default_rng(seed)
    out = np.empty(len(y), np.int64)
    start = 0
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        out[idx] = (start + np.arange(idx.size)) % folds
        start = (start + idx.size) % folds
    return out


def binary_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> dict[str, float]:
    tp = int(np.sum((y_true > 0) & (y_pred > 0)))
    fp = int(np.sum((y_true <= 0) & (y_pred > 0)))
    fn = int(np.sum((y_true > 0) & (y_pred <= 0)))
    acc = float(np.mean((y_true > 0) == (y_pred > 0)))
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return {"accuracy": acc, "precision": prec, "recall": rec, "f1": f1}


@dataclass
class CVResult:
    per_fold: list[dict[str, float]]
    folds: np.ndarray

    def mean(self, metric: str) -> float:
        return float(np.mean([f[metric] for f in self.per_fold]))

    def std(self, metric: str) -> float:
        """Sample standard deviation over folds."""
        return float(np.std([f[metric] for f in self.per_fold], ddof=1))

    def summary(self) -> dict[str, tuple[float, float]]:
        return {m: (self.mean(m), self.std(m)) for m in ("accuracy", "precision", "recall", "f1")}


def kfold_cv(examples, folds: int = 10, seed: int = 0, C: float = 1.0,
             feature_names: Sequence[str] = FEATURE_NAMES) -> CVResult:
    X, y = _as_xy(examples)
    assign = stratified_folds(y, folds, seed)
    per_fold = []
    for f in range(folds):
        test = assign == f
        model = train_linker((X[~test], (y[~test] > 0).astype(int)), C, seed,
                             feature_names=feature_names)
        Xt = X[test][:, [FEATURE_NAMES.index(n) for n in feature_names]]
        pred = model.decision(Xt) >= 0
        per_fold.append(binary_metrics(y[test], np.where(pred, 1.0, -1.0)))
    return CVResult(per_fold, assign)
