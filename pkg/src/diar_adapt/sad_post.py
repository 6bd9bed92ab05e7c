"""Turn frame-level speech probabilities into speech segments.

A window of ``window_seconds`` slides one frame at a time. In the
non-speech state an onset is declared at the first window whose fraction of
speech frames reaches ``on_ratio``; in the speech state an offset is
declared, symmetrically, at the first window whose fraction of non-speech
frames reaches ``on_ratio``.

Boundary placement: the boundary is the first frame of the triggering
window that is already in the new state, which for a clean step is the step
itself. A window of ``w`` frames triggers once ``m = ceil(on_ratio * w)`` of
its frames are active, so runs shorter than ``m`` frames (segments, or gaps
between segments) cannot be re-detected by the same rule and are removed.
Together these make :func:`smooth` idempotent on its own output.

SADP files hold ``hop <frame_hop_seconds>`` on the first line and one
probability per line after it.
"""

from __future__ import annotations

import math
import os

import numpy as np

from ._validation import DataError

__all__ = [
    "FrameProbs",
    "binarize",
    "smooth",
    "segments_to_frames",
    "read_sad_probs",
    "write_sad_probs",
]

DEFAULT_HOP = 0.010


class FrameProbs:
    """Per-frame speech probabilities with their frame hop."""

    def __init__(self, probs, frame_hop_seconds: float = DEFAULT_HOP):
        probs = np.asarray(probs, dtype=np.float64).reshape(-1)
        if probs.size and (np.any(~np.isfinite(probs)) or probs.min() < 0 or probs.max() > 1):
            raise DataError("speech probabilities must lie in [0, 1]")
        if not frame_hop_seconds > 0:
            raise DataError("frame hop must be > 0")
        self.probs = probs
        self.frame_hop_seconds = float(frame_hop_seconds)

    def __len__(self):
        return self.probs.shape[0]

    @property
    def duration(self) -> float:
        return len(self) * self.frame_hop_seconds


def binarize(probs, threshold: float = 0.5) -> np.ndarray:
    """Speech flag per frame: ``prob >= threshold``."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must be in (0, 1)")
    values = probs.probs if isinstance(probs, FrameProbs) else np.asarray(probs, dtype=np.float64)
    return values >= threshold


def _cleanup(segments: list[list[int]], min_frames: int) -> list[list[int]]:
    merged: list[list[int]] = []
    for seg in segments:
        if merged and seg[0] - merged[-1][1] < min_frames:
            merged[-1][1] = seg[1]
        else:
            merged.append(list(seg))
    return [s for s in merged if s[1] - s[0] >= min_frames]


def smooth_frames(frames, window_frames: int, on_ratio: float) -> list[tuple[int, int]]:
    """Frame-index version of :func:`smooth`; returns ``(start, stop)`` pairs."""
    frames = np.asarray(frames, dtype=bool)
    n = frames.size
    w = int(window_frames)
    if w < 1:
        raise ValueError("window must cover at least one frame")
    if not 0 < on_ratio <= 1:
        raise ValueError("on_ratio must be in (0, 1]")
    if n == 0:
        return []
    if n < w:
        return [(0, n)] if 2 * frames.sum() > n else []

    need = math.ceil(on_ratio * w - 1e-9)
    speech_count = np.convolve(frames.astype(np.int64), np.ones(w, dtype=np.int64), mode="valid")
    # first speech / non-speech frame at or after each position
    idx = np.arange(n)
    next_speech = np.minimum.accumulate(np.where(frames, idx, n)[::-1])[::-1]
    next_silence = np.minimum.accumulate(np.where(~frames, idx, n)[::-1])[::-1]

    segments: list[list[int]] = []
    in_speech = False
    onset = 0
    for p in range(n - w + 1):
        if not in_speech and speech_count[p] >= need:
            onset = int(next_speech[p])
            in_speech = True
        elif in_speech and w - speech_count[p] >= need:
            offset = int(next_silence[p])
            if offset > onset:
                segments.append([onset, offset])
            in_speech = False
    if in_speech:
        segments.append([onset, n])
    return [tuple(s) for s in _cleanup(segments, need)]


def smooth(frames, window_seconds: float = 0.100, on_ratio: float = 0.7,
           frame_hop_seconds: float = DEFAULT_HOP) -> list[tuple[float, float]]:
    """Speech segments ``[(start, end), ...]`` in seconds from per-frame speech flags.

    Parameters
    ----------
    frames : array-like of bool
    window_seconds : float, default=0.100
    on_ratio : float, default=0.7
        Fraction of active frames required to switch state.
    frame_hop_seconds : float, default=0.010
    """
    if not window_seconds > 0:
        raise ValueError("window_seconds must be > 0")
    w = max(1, int(round(window_seconds / frame_hop_seconds)))
    return [(a * frame_hop_seconds, b * frame_hop_seconds) for a, b in smooth_frames(frames, w, on_ratio)]


def segments_to_frames(segments, num_frames: int, frame_hop_seconds: float = DEFAULT_HOP) -> np.ndarray:
    """Per-frame speech flags; frame ``i`` is speech when its start lies in a segment."""
    frames = np.zeros(num_frames, dtype=bool)
    for start, end in segments:
        # rounding guards against hop multiples that are not exact in binary
        lo = int(math.ceil(round(start / frame_hop_seconds, 6)))
        hi = int(math.ceil(round(end / frame_hop_seconds, 6)))
        frames[max(lo, 0):min(hi, num_frames)] = True
    return frames


def read_sad_probs(path) -> FrameProbs:
    source = os.fspath(path)
    hop = None
    probs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if hop is None:
                fields = line.split()
                if len(fields) != 2 or fields[0] != "hop":
                    raise DataError(f"{source}:{lineno}: expected header 'hop <seconds>'")
                try:
                    hop = float(fields[1])
                except ValueError:
                    raise DataError(f"{source}:{lineno}: bad hop value") from None
                continue
            try:
                p = float(line)
            except ValueError:
                raise DataError(f"{source}:{lineno}: bad probability {line!r}") from None
            if not 0 <= p <= 1:
                raise DataError(f"{source}:{lineno}: probability {p} outside [0, 1]")
            probs.append(p)
    if hop is None:
        raise DataError(f"{source}: missing 'hop' header")
    return FrameProbs(probs, hop)


def write_sad_probs(probs: FrameProbs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"hop {probs.frame_hop_seconds:g}\n")
        for p in probs.probs:
            fh.write(f"{p:.4f}\n")
