"""Closed-form ridge training and alpha-scaled fine-tuning.

Training solves the regularized least-squares normal equations directly;
no iterative optimizer is involved.  The target-side fine-tune of a source
classifier ``w_src`` with scaling ``alpha`` is

    w_alpha = w_tgt + alpha * gamma * (X X'/n + gamma I)^{-1} w_src

which is algebraically identical to ``alpha*w_src + adapter`` where the
adapter is ridge-trained on the residual task.  All solves go through a
symmetric positive-definite factorization; gamma > 0 guarantees the system
is well posed, so a factorization failure signals bad (non-finite) input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .gmm import LabeledDataset


@dataclass(frozen=True)
class LinearClassifier:
    """Weight vector of a linear decision rule sign(w'x), with sign(0) := +1."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(w)):
            raise ValueError("classifier weights contain non-finite entries")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def p(self) -> int:
        return self.weights.shape[0]


def _spd_solve(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return cho_solve(cho_factor(mat, lower=True, check_finite=False), rhs,
                         check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise ValueError(f"ridge system is not positive definite: {exc}") from exc


def train_ridge(data: LabeledDataset, gamma: float, route: str = "auto") -> LinearClassifier:
    """Ridge classifier (1/m) * (XX'/m + gamma I)^{-1} X y.

    ``route`` selects the linear system actually factorized: ``"primal"``
    is the p x p system above, ``"dual"`` the equivalent m x m system
    (XX'/m + gamma I)^{-1} X = X (X'X/m + gamma I)^{-1}; ``"auto"`` picks
    whichever is smaller.  Both agree to solver precision.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    X, y = data.features, data.labels
    p, m = X.shape
    if route == "auto":
        route = "primal" if p <= m else "dual"
    if route == "primal":
        w = _spd_solve(X @ X.T / m + gamma * np.eye(p), X @ y) / m
    elif route == "dual":
        w = X @ _spd_solve(X.T @ X / m + gamma * np.eye(m), y) / m
    else:
        raise ValueError(f"unknown route {route!r}")
    return LinearClassifier(weights=w)


def fine_tune_direction(
    target: LabeledDataset, gamma: float, source: LinearClassifier
) -> tuple[LinearClassifier, np.ndarray]:
    """Base classifier and per-unit-alpha update for a fine-tune family.

    Returns ``(w0, d)`` with w_alpha = w0.weights + alpha * d; d is
    gamma * (XX'/n + gamma I)^{-1} w_src.  Useful when sweeping alpha:
    the expensive factorizations happen once.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if source.p != target.p:
        raise ValueError(
            f"source dimension {source.p} != target dimension {target.p}"
        )
    X, y = target.features, target.labels
    p, n = X.shape
    A = X @ X.T / n + gamma * np.eye(p)
    chol = cho_factor(A, lower=True, check_finite=False)
    w0 = cho_solve(chol, X @ y, check_finite=False) / n
    d = gamma * cho_solve(chol, source.weights, check_finite=False)
    return LinearClassifier(weights=w0), d


def fine_tune(
    source: LinearClassifier, target: LabeledDataset, gamma: float, alpha: float
) -> LinearClassifier:
    """Alpha-scaled fine-tune of ``source`` on ``target``; alpha = 0 recovers
    plain target-only ridge training."""
    w0, d = fine_tune_direction(target, gamma, source)
    return LinearClassifier(weights=w0.weights + alpha * d)


def fine_tune_multi(
    sources: Sequence[LinearClassifier],
    alphas: np.ndarray,
    target: LabeledDataset,
    gamma: float,
) -> LinearClassifier:
    """Fine-tune a mixture sum_t alphas[t]*sources[t]: the result is
    w_tgt + gamma * (XX'/n + gamma I)^{-1} sum_t alphas[t] w_t, which for a
    single source reduces exactly to :func:`fine_tune`."""
    alphas = np.asarray(alphas, dtype=np.float64).reshape(-1)
    if len(sources) == 0:
        raise ValueError("need at least one source classifier")
    if len(sources) != alphas.shape[0]:
        raise ValueError(f"{len(sources)} sources but {alphas.shape[0]} alphas")
    mix = np.zeros(target.p)
    for a, src in zip(alphas, sources):
        if src.p != target.p:
            raise ValueError("source dimension mismatch")
        mix += a * src.weights
    combined = fine_tune(LinearClassifier(weights=mix), target, gamma, 1.0)
    return combined


def decision_scores(model: LinearClassifier, data: LabeledDataset) -> np.ndarray:
    """Raw scores w'x_i for every sample; the induced label is
    sign(score) with sign(0) := +1."""
    if model.p != data.p:
        raise ValueError(f"model dimension {model.p} != data dimension {data.p}")
    return model.weights @ data.features


def predict_labels(model: LinearClassifier, data: LabeledDataset) -> np.ndarray:
    scores = decision_scores(model, data)
    return np.where(scores >= 0.0, 1.0, -1.0)


def empirical_accuracy(model: LinearClassifier, test: LabeledDataset) -> float:
    """Fraction of test samples whose predicted sign matches the label."""
    if test.m == 0:
        raise ValueError("empty test set")
    return float(np.mean(predict_labels(model, test) == test.labels))


def save_classifier(model: LinearClassifier, path) -> None:
    """Single CSV line of p floats, shortest round-trip decimals, in
    coordinate order."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(repr(float(v)) for v in model.weights))
        fh.write("\n")


def load_classifier(path) -> LinearClassifier:
    with open(path, "r", encoding="ascii") as fh:
        line = fh.readline().strip()
    return LinearClassifier(weights=np.array([float(v) for v in line.split(",")]))
