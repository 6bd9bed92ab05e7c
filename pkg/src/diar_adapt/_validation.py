"""Input validation helpers shared by the estimators and functional API."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


class DataError(ValueError):
    """Raised when input data is malformed (bad file, wrong shape, bad values)."""


def as_matrix(X, *, min_samples: int = 1, name: str = "X") -> np.ndarray:
    """Return ``X`` as a finite 2-D float64 array.

    Accepts a :class:`~diar_adapt.embeddings.SessionEmbeddings` or anything
    array-like.
    """
    vectors = getattr(X, "vectors", X)
    return check_array(
        vectors,
        dtype=np.float64,
        ensure_min_samples=min_samples,
        input_name=name,
    )


def check_labels(labels, n_samples: int | None = None, *, name: str = "labels") -> np.ndarray:
    labels = np.asarray(getattr(labels, "labels", labels))
    if labels.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {labels.shape}")
    if labels.size and not np.issubdtype(labels.dtype, np.integer):
        if not np.all(np.equal(np.mod(labels, 1), 0)):
            raise DataError(f"{name} must be integers")
    labels = labels.astype(np.int64)
    if labels.size and labels.min() < 0:
        raise DataError(f"{name} must be non-negative")
    if n_samples is not None and labels.shape[0] != n_samples:
        raise DataError(f"{name} has length {labels.shape[0]}, expected {n_samples}")
    return labels


def check_binary(values, n_samples: int | None = None, *, name: str = "sad") -> np.ndarray:
    values = check_labels(values, n_samples, name=name)
    if values.size and values.max() > 1:
        raise DataError(f"{name} must contain only 0 and 1")
    return values


def canonical_labels(labels) -> np.ndarray:
    """Renumber labels 0..k-1 in order of first occurrence."""
    labels = np.asarray(labels)
    _, first = np.unique(labels, return_index=True)
    order = labels[np.sort(first)]
    mapping = {int(old): new for new, old in enumerate(order)}
    return np.array([mapping[int(v)] for v in labels], dtype=np.int64)
