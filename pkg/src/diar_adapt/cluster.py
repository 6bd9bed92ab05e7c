"""Clustering back-ends: average-linkage AHC and affinity spectral clustering.

All label arrays returned here are canonical: ``0..k-1`` in order of first
occurrence.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import linkage
from scipy.spatial.distance import squareform
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.metrics import silhouette_samples

from ._validation import as_matrix, canonical_labels
from .aggregate import cosine_affinity

logger = logging.getLogger(__name__)

__all__ = [
    "SpectralConfig",
    "AHCClustering",
    "SpectralClustering",
    "ahc",
    "ahc_linkage",
    "cut_linkage",
    "cosine_distances",
    "mean_silhouette",
    "estimate_k_silhouette",
    "spectral",
    "spectral_from_affinity",
    "kmeans",
    "kmeans_plusplus",
    "lloyd",
    "inertia",
]

# the sessions we diarise hold ten or fewer speakers
DEFAULT_K_MAX = 10


@dataclass(frozen=True)
class SpectralConfig:
    eigen_threshold: float = 20.0
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 300
    seed: int = 0

    def __post_init__(self):
        if not self.eigen_threshold > 0:
            raise ValueError("eigen_threshold must be > 0")
        if self.kmeans_restarts < 1 or self.kmeans_max_iter < 1:
            raise ValueError("kmeans_restarts and kmeans_max_iter must be >= 1")


def cosine_distances(X) -> np.ndarray:
    D = 1.0 - cosine_affinity(X)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


# --- AHC ---------------------------------------------------------------------

def ahc_linkage(X) -> np.ndarray:
    """Average-linkage dendrogram (scipy format) on cosine distance."""
    D = cosine_distances(X)
    return linkage(squareform(D, checks=False), method="average")


def cut_linkage(Z: np.ndarray, n_samples: int, k: int) -> np.ndarray:
    """Labels after replaying the first ``n_samples - k`` merges of ``Z``."""
    if not 1 <= k <= n_samples:
        raise ValueError(f"k must be in [1, {n_samples}], got {k}")
    parent = list(range(2 * n_samples - 1))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for step in range(n_samples - k):
        a, b = int(Z[step, 0]), int(Z[step, 1])
        new = n_samples + step
        parent[find(a)] = new
        parent[find(b)] = new
    roots = [find(i) for i in range(n_samples)]
    return canonical_labels(roots)


def mean_silhouette(D: np.ndarray, labels) -> float:
    """Mean silhouette coefficient over all points for a precomputed distance matrix."""
    return float(np.mean(silhouette_samples(D, labels, metric="precomputed")))


def _silhouette_sweep(X, k_min, k_max):
    X = as_matrix(X)
    n = X.shape[0]
    D = cosine_distances(X)
    Z = linkage(squareform(D, checks=False), method="average")
    scores = {}
    for k in range(k_min, k_max + 1):
        scores[k] = mean_silhouette(D, cut_linkage(Z, n, k))
    return D, Z, scores


def estimate_k_silhouette(X, k_min: int = 2, k_max: int | None = None) -> int:
    """Number of clusters maximising the mean silhouette of the AHC cut.

    Returns 1 for sessions with fewer than three points or whose points are
    all identical. Ties go to the smaller ``k``.
    """
    X = as_matrix(X)
    n = X.shape[0]
    if n < 3:
        return 1
    if k_max is None:
        k_max = min(DEFAULT_K_MAX, n - 1)
    k_max = min(k_max, n - 1)
    if not 2 <= k_min <= k_max:
        raise ValueError(f"need 2 <= k_min <= k_max <= L-1, got k_min={k_min}, k_max={k_max}, L={n}")
    D = cosine_distances(X)
    if D.max() < 1e-12:
        return 1
    _, _, scores = _silhouette_sweep(X, k_min, k_max)
    best = max(scores.values())
    return min(k for k, s in scores.items() if s == best)


def ahc(X, k="auto", *, k_min: int = 2, k_max: int | None = None) -> np.ndarray:
    """Average-linkage agglomerative clustering on cosine distance.

    Parameters
    ----------
    X : array-like of shape (L, D) or SessionEmbeddings
    k : int or "auto"
        Number of clusters; ``"auto"`` picks it with
        :func:`estimate_k_silhouette`.
    """
    X = as_matrix(X)
    n = X.shape[0]
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    if k == "auto":
        k = estimate_k_silhouette(X, k_min, k_max)
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    return cut_linkage(ahc_linkage(X), n, k)


class AHCClustering(ClusterMixin, BaseEstimator):
    """Average-linkage AHC with optional silhouette-based cluster count.

    Parameters
    ----------
    n_clusters : int or "auto", default="auto"
    k_min, k_max : int
        Silhouette sweep range used when ``n_clusters="auto"``; ``k_max=None``
        means ``min(10, L - 1)``.
    distance_threshold : float, optional
        If given (and ``n_clusters="auto"``), stop merging once the average
        cosine distance between the closest clusters exceeds this value.
    """

    def __init__(self, n_clusters="auto", k_min=2, k_max=None, distance_threshold=None):
        self.n_clusters = n_clusters
        self.k_min = k_min
        self.k_max = k_max
        self.distance_threshold = distance_threshold

    def fit(self, X, y=None):
        X = as_matrix(X)
        n = X.shape[0]
        self.n_features_in_ = X.shape[1]
        if n == 1:
            self.linkage_ = np.zeros((0, 4))
            self.labels_ = np.zeros(1, dtype=np.int64)
            self.n_clusters_ = 1
            return self
        self.linkage_ = ahc_linkage(X)
        if self.n_clusters != "auto":
            k = int(self.n_clusters)
        elif self.distance_threshold is not None:
            k = n - int(np.sum(self.linkage_[:, 2] <= self.distance_threshold))
        else:
            k = estimate_k_silhouette(X, self.k_min, self.k_max)
        self.labels_ = cut_linkage(self.linkage_, n, k)
        self.n_clusters_ = k
        return self


# --- k-means -------------------------------------------------------------------

def inertia(points: np.ndarray, labels: np.ndarray, centers: np.ndarray | None = None) -> float:
    """Sum of squared distances to cluster means (or to ``centers`` if given)."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    if centers is None:
        centers = np.array([points[labels == j].mean(axis=0) for j in np.unique(labels)])
        labels = np.searchsorted(np.unique(labels), labels)
    return float(np.sum((points - centers[labels]) ** 2))


def kmeans_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = [points[rng.integers(n)]]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(points[idx])
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return np.array(centers)


def _assign(points, centers):
    d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(len(points)), labels]


def lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int = 300):
    """Run Lloyd iterations from ``centers``.

    An empty cluster is re-seeded at the point farthest from its current
    centre.

    Returns
    -------
    labels, centers, history
        ``history`` holds the inertia after every assignment step.
    """
    points = np.asarray(points, dtype=np.float64)
    centers = np.array(centers, dtype=np.float64)
    k = centers.shape[0]
    history = []
    labels, d2 = _assign(points, centers)
    history.append(float(d2.sum()))
    for _ in range(max_iter):
        new_centers = centers.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_centers[j] = points[members].mean(axis=0)
            else:
                far = int(np.argmax(d2))
                new_centers[j] = points[far]
                labels[far] = j
                d2[far] = 0.0
        new_labels, d2 = _assign(points, new_centers)
        history.append(float(d2.sum()))
        converged = np.array_equal(new_labels, labels) and np.allclose(new_centers, centers)
        centers, labels = new_centers, new_labels
        if converged:
            break
    return labels, centers, history


def kmeans(points, k: int, seed=0, restarts: int = 10, max_iter: int = 300) -> np.ndarray:
    """k-means++ seeded Lloyd's algorithm, best of ``restarts`` by inertia."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    best_labels, best_inertia = None, np.inf
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        labels, centers, history = lloyd(points, kmeans_plusplus(points, k, rng), max_iter)
        if history[-1] < best_inertia:
            best_labels, best_inertia = labels, history[-1]
    return canonical_labels(best_labels)


# --- spectral ------------------------------------------------------------------

def spectral_from_affinity(A, config: SpectralConfig | None = None, k="auto"):
    """Spectral clustering of a symmetric affinity matrix.

    Returns ``(labels, eigenvalues)`` with eigenvalues sorted descending.
    """
    config = config or SpectralConfig()
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    eigvals, eigvecs = np.linalg.eigh(A)
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    if k == "auto":
        k = int(np.sum(eigvals > config.eigen_threshold))
        if k == 0:
            warnings.warn(
                f"no eigenvalue exceeds threshold {config.eigen_threshold}; using a single cluster",
                stacklevel=2,
            )
        k = min(max(k, 1), n)
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if k == 1:
        return np.zeros(n, dtype=np.int64), eigvals
    labels = kmeans(eigvecs[:, :k], k, seed=config.seed, restarts=config.kmeans_restarts,
                    max_iter=config.kmeans_max_iter)
    return labels, eigvals


def spectral(X, config: SpectralConfig | None = None, k="auto") -> np.ndarray:
    """Spectral clustering on the raw cosine affinity of ``X``."""
    X = as_matrix(X)
    if X.shape[0] < 2:
        return np.zeros(X.shape[0], dtype=np.int64)
    return spectral_from_affinity(cosine_affinity(X), config, k)[0]


class SpectralClustering(ClusterMixin, BaseEstimator):
    """Eigen-threshold spectral clustering on an unrefined cosine affinity.

    Parameters
    ----------
    n_clusters : int or "auto", default="auto"
        With "auto", count eigenvalues above ``eigen_threshold``.
    eigen_threshold : float, default=20.0
    n_init : int, default=10
        k-means restarts.
    max_iter : int, default=300
    random_state : int, default=0
    """

    def __init__(self, n_clusters="auto", eigen_threshold=20.0, n_init=10, max_iter=300, random_state=0):
        self.n_clusters = n_clusters
        self.eigen_threshold = eigen_threshold
        self.n_init = n_init
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = as_matrix(X)
        self.n_features_in_ = X.shape[1]
        config = SpectralConfig(self.eigen_threshold, self.n_init, self.max_iter, self.random_state)
        self.affinity_matrix_ = cosine_affinity(X)
        if X.shape[0] < 2:
            self.labels_ = np.zeros(X.shape[0], dtype=np.int64)
            self.eigenvalues_ = np.diag(self.affinity_matrix_)
        else:
            self.labels_, self.eigenvalues_ = spectral_from_affinity(
                self.affinity_matrix_, config, self.n_clusters
            )
        self.n_clusters_ = int(self.labels_.max()) + 1
        return self
