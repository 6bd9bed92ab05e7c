"""Non-speech clustering.

Clustering is run with one extra cluster slot that is meant to capture
non-speech windows. After the non-speech cluster is identified and given
label 0, centroids are re-estimated from the *reliable* windows only, those
whose SAD decision agrees with the cluster label (SAD non-speech in cluster
0, or SAD speech in a speaker cluster), and every window is mapped to its
nearest centroid. Windows that end in cluster 0 are treated as non-speech
regardless of what SAD said, and SAD non-speech windows that land in a
speaker cluster become speech.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import DataError, as_matrix, canonical_labels, check_binary, check_labels
from .aggregate import cosine_affinity

logger = logging.getLogger(__name__)

__all__ = [
    "ClusterAssignment",
    "identify_nonspeech_cluster",
    "build_reliable_set",
    "refine",
]


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """Per-window labels where 0 is non-speech and 1..S are speakers."""

    labels: np.ndarray

    def __post_init__(self):
        labels = check_labels(self.labels).copy()
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def num_speakers(self) -> int:
        speakers = self.labels[self.labels > 0]
        return int(np.unique(speakers).size)

    def __len__(self):
        return self.labels.shape[0]

    @classmethod
    def from_speaker_labels(cls, labels) -> "ClusterAssignment":
        """Wrap clustering output with no non-speech cluster (all labels become >= 1)."""
        return cls(canonical_labels(labels) + 1)


def identify_nonspeech_cluster(labels, sad=None, prototype=None, X=None) -> ClusterAssignment:
    """Relabel one raw cluster as non-speech (0) and the rest as 1..S.

    With a ``prototype`` embedding, the cluster whose centroid has the highest
    cosine similarity to it is chosen (``X`` is then required). Otherwise the
    cluster with the lowest fraction of SAD-speech windows is chosen. Ties go
    to the smaller raw label, with a warning.
    """
    labels = check_labels(labels)
    raw = np.unique(labels)
    if prototype is not None:
        if X is None:
            raise ValueError("X is required when a prototype is given")
        X = as_matrix(X)
        if X.shape[0] != labels.shape[0]:
            raise DataError(f"X has {X.shape[0]} rows, labels have {labels.shape[0]}")
        prototype = np.asarray(prototype, dtype=np.float64).reshape(1, -1)
        centroids = np.array([X[labels == r].mean(axis=0) for r in raw])
        scores = cosine_affinity(np.vstack([prototype, centroids]))[0, 1:]
        best = scores.max()
    else:
        if sad is None:
            raise ValueError("either sad or prototype must be given")
        sad = check_binary(sad, labels.shape[0])
        scores = -np.array([sad[labels == r].mean() for r in raw])
        best = scores.max()
    winners = raw[scores == best]
    if winners.size > 1:
        warnings.warn(f"non-speech cluster tie between raw labels {winners.tolist()}; using {winners[0]}",
                      stacklevel=2)
    chosen = winners[0]

    out = np.zeros_like(labels)
    speech = labels != chosen
    if speech.any():
        out[speech] = canonical_labels(labels[speech]) + 1
    return ClusterAssignment(out)


def build_reliable_set(sad, labels) -> np.ndarray:
    """Indices where SAD and cluster label agree, as a sorted index array."""
    labels = check_labels(labels)
    sad = check_binary(sad, labels.shape[0])
    agree = ((sad == 0) & (labels == 0)) | ((sad == 1) & (labels > 0))
    return np.flatnonzero(agree)


def refine(X, sad, assignment) -> ClusterAssignment:
    """Nearest-centroid reassignment with centroids from the reliable set.

    A cluster with no reliable member falls back to the mean of all its
    members. Speaker labels that have no member at all are dropped and the
    remaining speakers renumbered 1..S (label 0 stays non-speech).
    """
    X = as_matrix(X)
    labels = check_labels(assignment, X.shape[0])
    sad = check_binary(sad, X.shape[0])

    present = np.unique(labels)
    expected = np.arange(labels.max() + 1) if labels.size else present
    missing = np.setdiff1d(expected[expected > 0], present)
    if missing.size:
        warnings.warn(f"empty speaker clusters {missing.tolist()} dropped", stacklevel=2)

    reliable = np.zeros(labels.shape[0], dtype=bool)
    reliable[build_reliable_set(sad, labels)] = True

    centroids = []
    for j in present:
        members = labels == j
        chosen = members & reliable
        if not chosen.any():
            logger.info("cluster %d has no reliable member; using all members", j)
            chosen = members
        centroids.append(X[chosen].mean(axis=0))
    centroids = np.array(centroids)

    sims = cosine_affinity(np.vstack([X, centroids]))[: X.shape[0], X.shape[0]:]
    # argmax returns the first maximum, i.e. the smaller cluster index
    new = present[np.argmax(sims, axis=1)]

    out = np.zeros_like(new)
    speech = new > 0
    if speech.any():
        # keep the original speaker ordering while closing gaps
        kept = np.unique(new[speech])
        out[speech] = np.searchsorted(kept, new[speech]) + 1
    return ClusterAssignment(out)
