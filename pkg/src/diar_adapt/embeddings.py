"""Session embedding container, segment-level averaging and SEG file I/O.

A SEG file holds one window per line::

    <start_seconds> <end_seconds> <v0> <v1> ... <vD-1>

Fields are whitespace separated, ``D`` is taken from the first data line and
lines starting with ``#`` are comments.
"""

from __future__ import annotations

import logging
import os
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np

from ._validation import DataError

logger = logging.getLogger(__name__)

__all__ = [
    "SessionEmbeddings",
    "average_windows",
    "segment_embeddings",
    "read_embeddings",
    "write_embeddings",
    "read_embedding_vector",
    "disjoint_spans",
]


@dataclass(frozen=True, eq=False)
class SessionEmbeddings:
    """Timestamped, fixed-dimension embeddings of one session.

    Parameters
    ----------
    starts, ends : array-like of shape (L,)
        Window boundaries in seconds. Starts must be strictly increasing.
    vectors : array-like of shape (L, D)
        One embedding per window. Stored as given (not normalised).
    dim : int, optional
        Embedding dimension; only needed when ``L == 0``.
    """

    starts: np.ndarray
    ends: np.ndarray
    vectors: np.ndarray
    dim: int = -1

    def __post_init__(self):
        starts = np.array(self.starts, dtype=np.float64).reshape(-1)
        ends = np.array(self.ends, dtype=np.float64).reshape(-1)
        vectors = np.array(self.vectors, dtype=np.float64)
        if vectors.ndim == 1 and vectors.size == 0:
            vectors = vectors.reshape(0, max(self.dim, 0))
        if vectors.ndim != 2:
            raise DataError(f"vectors must be 2-D, got shape {vectors.shape}")
        n = vectors.shape[0]
        if starts.shape[0] != n or ends.shape[0] != n:
            raise DataError(
                f"got {starts.shape[0]} starts, {ends.shape[0]} ends for {n} vectors"
            )
        if self.dim >= 0 and vectors.shape[1] != self.dim:
            raise DataError(f"vectors have dimension {vectors.shape[1]}, expected {self.dim}")
        if not (np.all(np.isfinite(vectors)) and np.all(np.isfinite(starts)) and np.all(np.isfinite(ends))):
            raise DataError("embeddings and timestamps must be finite")
        if n and starts.min() < 0:
            raise DataError("window start times must be >= 0")
        if np.any(ends <= starts):
            bad = int(np.flatnonzero(ends <= starts)[0])
            raise DataError(f"window {bad} has end <= start")
        if np.any(np.diff(starts) <= 0):
            bad = int(np.flatnonzero(np.diff(starts) <= 0)[0]) + 1
            raise DataError(f"window {bad} does not start after window {bad - 1}")
        for arr in (starts, ends, vectors):
            arr.setflags(write=False)
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "ends", ends)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "dim", int(vectors.shape[1]))

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def windows(self) -> Iterator[tuple[float, float, np.ndarray]]:
        for s, e, v in zip(self.starts, self.ends, self.vectors):
            yield float(s), float(e), v

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.starts + self.ends)

    def with_vectors(self, vectors) -> "SessionEmbeddings":
        """Same timestamps, new embedding values (dimension may change)."""
        return SessionEmbeddings(self.starts, self.ends, vectors)

    def subset(self, index) -> "SessionEmbeddings":
        index = np.asarray(index)
        return SessionEmbeddings(self.starts[index], self.ends[index], self.vectors[index], dim=self.dim)


def disjoint_spans(starts, ends) -> tuple[np.ndarray, np.ndarray]:
    """Window spans with overlaps between neighbours split at the overlap midpoint."""
    starts = np.array(starts, dtype=np.float64)
    ends = np.array(ends, dtype=np.float64)
    eff_start, eff_end = starts.copy(), ends.copy()
    if starts.size > 1:
        overlapping = starts[1:] < ends[:-1]
        cut = 0.5 * (starts[1:] + ends[:-1])
        eff_start[1:] = np.where(overlapping, cut, starts[1:])
        eff_end[:-1] = np.where(overlapping, np.minimum(ends[:-1], cut), ends[:-1])
    return eff_start, eff_end


def average_windows(windows: Sequence) -> np.ndarray:
    """Elementwise mean of a non-empty list of equal-length vectors."""
    if len(windows) == 0:
        raise DataError("no embeddings to aggregate")
    stacked = np.asarray([np.asarray(w, dtype=np.float64) for w in windows])
    if stacked.ndim != 2:
        raise DataError("embeddings to aggregate must share one dimension")
    return stacked.mean(axis=0)


def segment_embeddings(session: SessionEmbeddings, segments, *, return_kept: bool = False):
    """Average window embeddings per segment.

    A window belongs to a segment when its midpoint lies in ``[start, end)``.
    Segments that receive no window are dropped (and logged).

    Parameters
    ----------
    session : SessionEmbeddings
    segments : sequence of (start, end)
        Sorted, non-overlapping.
    return_kept : bool, default=False
        Also return the indices of the segments that were kept.
    """
    segs = np.asarray(segments, dtype=np.float64).reshape(-1, 2)
    if np.any(segs[:, 1] <= segs[:, 0]):
        raise DataError("segments must have end > start")
    if len(segs) > 1 and np.any(segs[1:, 0] < segs[:-1, 1]):
        raise DataError("segments must be sorted and non-overlapping")

    mids = session.midpoints
    lo = np.searchsorted(mids, segs[:, 0], side="left")
    hi = np.searchsorted(mids, segs[:, 1], side="left")
    kept = np.flatnonzero(hi > lo)
    dropped = len(segs) - len(kept)
    if dropped:
        logger.info("%d of %d segments contain no window midpoint and were dropped", dropped, len(segs))

    vectors = np.empty((len(kept), session.dim))
    for row, j in enumerate(kept):
        vectors[row] = average_windows(session.vectors[lo[j]:hi[j]])
    out = SessionEmbeddings(segs[kept, 0], segs[kept, 1], vectors, dim=session.dim)
    if return_kept:
        return out, kept
    return out


def _parse_seg_lines(lines, source) -> tuple[list[float], list[float], list[list[float]]]:
    starts, ends, vecs = [], [], []
    dim = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise DataError(f"{source}:{lineno}: non-numeric field") from None
        if len(values) < 3:
            raise DataError(f"{source}:{lineno}: expected start, end and at least one value")
        if dim is None:
            dim = len(values) - 2
        elif len(values) - 2 != dim:
            raise DataError(
                f"{source}:{lineno}: expected {dim} embedding values, got {len(values) - 2}"
            )
        start, end = values[0], values[1]
        if not all(np.isfinite(values)):
            raise DataError(f"{source}:{lineno}: non-finite value")
        if start < 0 or end <= start:
            raise DataError(f"{source}:{lineno}: invalid window [{start}, {end}]")
        if starts and start <= starts[-1]:
            raise DataError(f"{source}:{lineno}: start time not increasing")
        starts.append(start)
        ends.append(end)
        vecs.append(values[2:])
    return starts, ends, vecs


def read_embeddings(path) -> SessionEmbeddings:
    """Read a SEG file."""
    with open(path, encoding="utf-8") as fh:
        starts, ends, vecs = _parse_seg_lines(fh, os.fspath(path))
    if not vecs:
        raise DataError(f"{os.fspath(path)}: no embeddings found")
    return SessionEmbeddings(starts, ends, vecs)


def read_embedding_vector(path) -> np.ndarray:
    """Read the single vector of a one-line SEG file (e.g. a non-speech prototype)."""
    session = read_embeddings(path)
    if len(session) != 1:
        raise DataError(f"{os.fspath(path)}: expected exactly one line, got {len(session)}")
    return session.vectors[0].copy()


def write_embeddings(session: SessionEmbeddings, path) -> None:
    """Write a SEG file. Values are written with 10 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        for start, end, vec in session.windows:
            values = " ".join(format(v, ".10g") for v in vec)
            fh.write(f"{start:.6f} {end:.6f} {values}\n")
