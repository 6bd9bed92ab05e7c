"""Seeded synthetic sessions for tests, benchmarks and the ``synth`` command.

Speakers (and one extra non-speech source) get centroids drawn uniformly on
the unit sphere with pairwise cosine similarity below 0.5. Each window is
its source centroid plus isotropic Gaussian noise, renormalised to unit
length. Windows are 1.5 s wide at a 0.5 s hop, and sources speak in
contiguous turns of a few windows laid out in random order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import DataError
from .embeddings import SessionEmbeddings, disjoint_spans, write_embeddings
from .nonspeech import ClusterAssignment
from .sad_post import FrameProbs, write_sad_probs
from .scoring import Timeline, assignment_to_timeline, emit_rttm

__all__ = [
    "SyntheticSessionSpec",
    "SadNoiseSpec",
    "BenchmarkSession",
    "generate_synthetic_session",
    "synthetic_sad_probs",
    "make_benchmark",
    "write_dataset",
]

WINDOW_HOP = 0.5
WINDOW_WIDTH = 1.5
MAX_CENTROID_COSINE = 0.5
MAX_RESAMPLES = 1000
SPEAKER_TURN_WINDOWS = (4, 12)
NONSPEECH_RUN_WINDOWS = (1, 4)


@dataclass(frozen=True)
class SyntheticSessionSpec:
    num_speakers: int = 2
    windows_per_speaker: int = 50
    noise_sigma: float = 0.1
    nonspeech_fraction: float = 0.0
    dim: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.num_speakers < 1 or self.windows_per_speaker < 1:
            raise ValueError("num_speakers and windows_per_speaker must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 <= self.nonspeech_fraction < 1:
            raise ValueError("nonspeech_fraction must be in [0, 1)")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")


def _unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _centroids(rng, count, dim):
    accepted: list[np.ndarray] = []
    failures = 0
    while len(accepted) < count:
        cand = _unit(rng, dim)
        if all(float(cand @ c) < MAX_CENTROID_COSINE for c in accepted):
            accepted.append(cand)
        else:
            failures += 1
            if failures >= MAX_RESAMPLES:
                raise DataError(
                    f"could not place {count} centroids with cosine < {MAX_CENTROID_COSINE} in {dim} dimensions"
                )
    return np.array(accepted)


def _chunks(rng, total, bounds):
    out = []
    while total > 0:
        size = min(int(rng.integers(bounds[0], bounds[1] + 1)), total)
        out.append(size)
        total -= size
    return out


def generate_synthetic_session(spec: SyntheticSessionSpec, session_id: str = "synth"):
    """Build one synthetic session.

    Returns
    -------
    session : SessionEmbeddings
    truth : ClusterAssignment
        0 for non-speech windows, ``1..num_speakers`` for speakers.
    reference : Timeline
    """
    rng = np.random.default_rng(spec.seed)
    n_speech = spec.num_speakers * spec.windows_per_speaker
    n_nonspeech = int(round(n_speech * spec.nonspeech_fraction / (1 - spec.nonspeech_fraction)))
    centroids = _centroids(rng, spec.num_speakers + 1, spec.dim)  # row 0: non-speech

    runs = []
    for spk in range(1, spec.num_speakers + 1):
        runs += [(spk, n) for n in _chunks(rng, spec.windows_per_speaker, SPEAKER_TURN_WINDOWS)]
    runs += [(0, n) for n in _chunks(rng, n_nonspeech, NONSPEECH_RUN_WINDOWS)]
    order = rng.permutation(len(runs))
    labels = np.concatenate([np.full(runs[i][1], runs[i][0], dtype=np.int64) for i in order])

    vectors = centroids[labels] + spec.noise_sigma * rng.standard_normal((labels.size, spec.dim))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    starts = WINDOW_HOP * np.arange(labels.size)
    session = SessionEmbeddings(starts, starts + WINDOW_WIDTH, vectors)
    truth = ClusterAssignment(labels)
    return session, truth, assignment_to_timeline(session, truth, session_id)


@dataclass(frozen=True)
class SadNoiseSpec:
    """How a synthetic SAD track deviates from the truth.

    Each window's own stretch of time (its span with neighbour overlaps
    split) is flipped as a whole with probability ``miss_rate`` (speech
    turned non-speech) or ``false_alarm_rate`` (non-speech turned speech).
    On top, single frames flip with probability ``frame_flip``.
    """

    miss_rate: float = 0.0
    false_alarm_rate: float = 0.0
    frame_flip: float = 0.0
    frame_hop: float = 0.010


def synthetic_sad_probs(session: SessionEmbeddings, truth, noise: SadNoiseSpec | None = None,
                        seed=0) -> FrameProbs:
    """Frame-level speech probabilities consistent with ``truth`` up to ``noise``."""
    noise = noise or SadNoiseSpec()
    rng = np.random.default_rng(seed)
    speech = np.asarray(getattr(truth, "labels", truth)) > 0
    flip_p = np.where(speech, noise.miss_rate, noise.false_alarm_rate)
    sad_speech = speech ^ (rng.random(speech.size) < flip_p)

    hop = noise.frame_hop
    n_frames = int(np.ceil(session.ends[-1] / hop - 1e-9))
    frame_start = np.arange(n_frames) * hop
    eff_start, eff_end = disjoint_spans(session.starts, session.ends)
    window_of_frame = np.clip(np.searchsorted(eff_start, frame_start + 1e-9, side="right") - 1, 0, None)
    active = sad_speech[window_of_frame] & (frame_start < eff_end[window_of_frame])
    active ^= rng.random(n_frames) < noise.frame_flip
    probs = np.where(active, rng.uniform(0.6, 1.0, n_frames), rng.uniform(0.0, 0.4, n_frames))
    return FrameProbs(probs, hop)


@dataclass(frozen=True)
class BenchmarkSession:
    session_id: str
    embeddings: SessionEmbeddings
    sad: FrameProbs
    reference: Timeline
    truth: ClusterAssignment


def make_benchmark(n_sessions: int = 20, seed: int = 42, noise_sigma: float = 0.25,
                   nonspeech_fraction: float = 0.1, speakers=(2, 4), windows_per_speaker=(100, 250),
                   dim: int = 32, sad_noise: SadNoiseSpec | None = None) -> list[BenchmarkSession]:
    """A reproducible list of synthetic sessions with noisy SAD tracks.

    Speaker counts and per-speaker window counts are drawn uniformly from
    the inclusive ranges ``speakers`` and ``windows_per_speaker``.
    """
    if sad_noise is None:
        sad_noise = SadNoiseSpec(miss_rate=0.05, false_alarm_rate=0.3, frame_flip=0.05)
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_sessions):
        spec = SyntheticSessionSpec(
            num_speakers=int(rng.integers(speakers[0], speakers[1] + 1)),
            windows_per_speaker=int(rng.integers(windows_per_speaker[0], windows_per_speaker[1] + 1)),
            noise_sigma=noise_sigma,
            nonspeech_fraction=nonspeech_fraction,
            dim=dim,
            seed=int(rng.integers(2**31)),
        )
        sid = f"synth{i:03d}"
        session, truth, reference = generate_synthetic_session(spec, sid)
        sad = synthetic_sad_probs(session, truth, sad_noise, seed=int(rng.integers(2**31)))
        out.append(BenchmarkSession(sid, session, sad, reference, truth))
    return out


def write_dataset(sessions: list[BenchmarkSession], directory) -> list[Path]:
    """Write ``<id>.seg``, ``<id>.sadp`` and ``<id>.rttm`` for every session."""
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    written = []
    for s in sessions:
        write_embeddings(s.embeddings, directory / f"{s.session_id}.seg")
        write_sad_probs(s.sad, directory / f"{s.session_id}.sadp")
        emit_rttm(s.reference, directory / f"{s.session_id}.rttm")
        written.append(directory / s.session_id)
    return written
