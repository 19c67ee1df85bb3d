"""Full-batch gradient-descent linear classifiers and their metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata


class SingleClassError(ValueError):
    pass


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    loss: str = "logistic"
    l2_lambda: float = 0.0
    columns: tuple = ()
    loss_history: list = field(default_factory=list)

    def decision(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return expit(self.decision(X))


def objective(params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float = 0.0, loss: str = "logistic"):
    """(loss, gradient) with ``params = [weights..., bias]``; bias is not penalised."""
    w, b = params[:-1], params[-1]
    z = X @ w + b
    s = 2.0 * y - 1.0
    n = y.size
    if loss == "logistic":
        value = float(np.logaddexp(0.0, -s * z).mean())
        dz = -s * expit(-s * z) / n
    elif loss == "hinge":
        margin = 1.0 - s * z
        value = float(np.maximum(margin, 0.0).mean())
        dz = np.where(margin > 0, -s, 0.0) / n
    else:
        raise ValueError(f"unknown loss {loss!r}")
    value += 0.5 * l2 * float(w @ w)
    grad = np.empty_like(params)
    grad[:-1] = X.T @ dz + l2 * w
    grad[-1] = dz.sum()
    return value, grad


def train(X: np.ndarray, y: np.ndarray, loss: str = "logistic", l2_lambda: float = 1.0,
          epochs: int = 400, learning_rate: float = 0.2, columns=()) -> LinearModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0 or y.min() == y.max():
        raise SingleClassError("training needs at least one row of each label")
    params = np.zeros(X.shape[1] + 1)
    history = []
    for _ in range(epochs):
        value, grad = objective(params, X, y, l2_lambda, loss)
        history.append(value)
        params -= learning_rate * grad
    history.append(objective(params, X, y, l2_lambda, loss)[0])
    return LinearModel(params[:-1].copy(), float(params[-1]), loss, l2_lambda, tuple(columns), history)


def auc(scores, labels) -> float:
    """Rank-statistic AUC with midranks for ties; NaN when a class is absent."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(scores, method="average")
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def evaluate(model: LinearModel, X: np.ndarray, y: np.ndarray) -> dict:
    scores = model.decision(X)
    pred = scores >= 0.0  # sigmoid(score) >= 0.5
    y = np.asarray(y).astype(bool)
    tp = int((pred & y).sum())
    fp = int((pred & ~y).sum())
    fn = int((~pred & y).sum())
    return {
        "accuracy": float((pred == y).mean()) if y.size else float("nan"),
        "precision": tp / (tp + fp) if tp + fp else 0.0,
        "recall": tp / (tp + fn) if tp + fn else 0.0,
        "auc": auc(scores, y),
    }
