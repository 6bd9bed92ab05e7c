"""Attention-based embedding aggregation.

Each pass builds the cosine affinity of the current embeddings, turns every
row of ``temperature * affinity`` into softmax weights and replaces each
embedding by the weighted combination of all embeddings. Repeating this
pulls embeddings of the same speaker together and suppresses noisy
cross-speaker affinities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import DataError, as_matrix
from .embeddings import SessionEmbeddings

__all__ = ["AggregationConfig", "AttentionAggregator", "attention_aggregate", "cosine_affinity"]


@dataclass(frozen=True)
class AggregationConfig:
    repetitions: int = 5
    temperature: float = 15.0

    def __post_init__(self):
        if self.repetitions < 0:
            raise ValueError("repetitions must be >= 0")
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")


def cosine_affinity(X) -> np.ndarray:
    """Pairwise cosine similarity, symmetric with a unit diagonal.

    Raises
    ------
    DataError
        If any embedding has zero norm.
    """
    X = as_matrix(X)
    norms = np.linalg.norm(X, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DataError(f"embedding at window {zero[0]} has zero norm")
    U = X / norms[:, None]
    A = U @ U.T
    A = 0.5 * (A + A.T)
    np.clip(A, -1.0, 1.0, out=A)
    np.fill_diagonal(A, 1.0)
    return A


def _aggregate(X: np.ndarray, repetitions: int, temperature: float) -> np.ndarray:
    for _ in range(repetitions):
        weights = softmax(temperature * cosine_affinity(X), axis=1)
        # rows of `weights` sum to one, so this equals weights @ X; taking
        # differences to a reference row keeps identical rows bit-exact
        ref = X[0]
        X = weights @ (X - ref) + ref
    return X


def attention_aggregate(X, config: AggregationConfig | None = None):
    """Apply ``config.repetitions`` rounds of softmax-attention aggregation.

    Accepts a :class:`SessionEmbeddings` (timestamps are kept) or an array.
    """
    config = config or AggregationConfig()
    out = _aggregate(as_matrix(X), config.repetitions, config.temperature)
    if isinstance(X, SessionEmbeddings):
        return X.with_vectors(out)
    return out


class AttentionAggregator(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`attention_aggregate`.

    Stateless: ``fit`` only validates input; ``transform`` aggregates the
    embeddings it is given, which must be a whole session.

    Parameters
    ----------
    n_iter : int, default=5
        Number of aggregation rounds.
    temperature : float, default=15.0
        Multiplier applied to cosine affinities before the row softmax.
    """

    def __init__(self, n_iter: int = 5, temperature: float = 15.0):
        self.n_iter = n_iter
        self.temperature = temperature

    def fit(self, X, y=None):
        X = as_matrix(X)
        AggregationConfig(self.n_iter, self.temperature)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = as_matrix(X)
        return _aggregate(X, self.n_iter, self.temperature)
