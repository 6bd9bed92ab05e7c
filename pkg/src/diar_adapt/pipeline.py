"""End-to-end diarisation and ablation runs.

Stage order: SAD smoothing -> segment averaging -> [autoencoder reduction]
-> [attention aggregation] -> AHC or spectral clustering -> [non-speech
refinement] -> timeline. Each bracketed stage is switched independently.

When SAD is available, speech segments are cut into sub-segments of at most
``subsegment_seconds`` and windows are averaged per sub-segment. With
non-speech clustering on, the gaps between speech segments are cut and
averaged the same way and carried along with SAD label 0, so the clusterer
can move them back to speech (or move SAD speech to non-speech).
"""

from __future__ import annotations

import contextlib
import csv
import itertools
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ._validation import DataError
from .aggregate import AggregationConfig, attention_aggregate, cosine_affinity
from .cluster import AHCClustering, SpectralConfig, ahc, estimate_k_silhouette, spectral_from_affinity
from .dim_reduce import TrainConfig, reduce_session
from .embeddings import (
    SessionEmbeddings,
    read_embedding_vector,
    read_embeddings,
    segment_embeddings,
)
from .nonspeech import ClusterAssignment, identify_nonspeech_cluster, refine
from .sad_post import FrameProbs, binarize, read_sad_probs, smooth
from .scoring import (
    DerReport,
    Timeline,
    assignment_to_timeline,
    emit_rttm,
    parse_rttm,
    score,
)

logger = logging.getLogger(__name__)

__all__ = [
    "PipelineConfig",
    "DiariseResult",
    "AblationRow",
    "run_diarise",
    "run_ablation",
    "technique_combinations",
    "load_dataset",
    "write_ablation_csv",
    "read_ablation_csv",
    "format_ablation",
    "read_config_file",
]

THREADS_ENV = "DIAR_ADAPT_THREADS"


@dataclass(frozen=True)
class PipelineConfig:
    clusterer: str = "ahc"
    use_dr: bool = False
    use_aa: bool = False
    use_ns: bool = False
    nonspeech_prototype: tuple[float, ...] | None = None
    num_speakers: int | str = "auto"
    train: TrainConfig = field(default_factory=TrainConfig)
    aggregation: AggregationConfig = field(default_factory=AggregationConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    ahc_distance_threshold: float | None = None
    collar: float = 0.0
    sad_threshold: float = 0.5
    sad_window: float = 0.100
    sad_ratio: float = 0.7
    subsegment_seconds: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.clusterer not in ("ahc", "spc"):
            raise ValueError(f"clusterer must be 'ahc' or 'spc', got {self.clusterer!r}")
        if self.num_speakers != "auto" and int(self.num_speakers) < 1:
            raise ValueError("num_speakers must be 'auto' or >= 1")
        if not self.subsegment_seconds > 0:
            raise ValueError("subsegment_seconds must be > 0")

    def stage_seeds(self) -> dict[str, int]:
        """Per-stage seeds derived from ``seed``."""
        dr, km = np.random.SeedSequence(self.seed).generate_state(2)
        return {"dim_reduce": int(dr), "kmeans": int(km)}

    @property
    def techniques(self) -> str:
        names = [n for n, on in (("DR", self.use_dr), ("AA", self.use_aa), ("NS", self.use_ns)) if on]
        return "+".join(names) if names else "baseline"


@dataclass
class DiariseResult:
    timeline: Timeline
    items: SessionEmbeddings
    features: np.ndarray
    sad_labels: np.ndarray | None
    assignment: ClusterAssignment


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except DataError as exc:
        raise DataError(f"{name}: {exc}") from exc


def _subdivide(segments, max_len: float) -> list[tuple[float, float]]:
    out = []
    for start, end in segments:
        n = max(1, math.ceil((end - start) / max_len - 1e-9))
        edges = np.linspace(start, end, n + 1)
        out += [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]
    return out


def _complement(segments, end: float) -> list[tuple[float, float]]:
    gaps, cursor = [], 0.0
    for a, b in segments:
        if a > cursor:
            gaps.append((cursor, a))
        cursor = max(cursor, b)
    if end > cursor:
        gaps.append((cursor, end))
    return gaps


def _build_items(session: SessionEmbeddings, speech, session_end: float, with_gaps: bool, max_len: float):
    chunks = [(a, b, 1) for a, b in _subdivide(speech, max_len)]
    if with_gaps:
        chunks += [(a, b, 0) for a, b in _subdivide(_complement(speech, session_end), max_len)]
    chunks.sort()
    items, kept = segment_embeddings(session, [(a, b) for a, b, _ in chunks], return_kept=True)
    sad = np.array([chunks[j][2] for j in kept], dtype=np.int64)
    return items, sad


def _spectral_k(X, threshold: float) -> int:
    eig = np.linalg.eigvalsh(cosine_affinity(X))
    return max(1, int(np.sum(eig > threshold)))


def _cluster(X: np.ndarray, config: PipelineConfig, sad: np.ndarray | None) -> np.ndarray:
    n = X.shape[0]
    if n < 2:
        return np.zeros(n, dtype=np.int64)
    spectral_cfg = replace(config.spectral, seed=config.stage_seeds()["kmeans"])
    k = config.num_speakers
    if config.use_ns:
        if k == "auto":
            speech = X[sad == 1] if sad is not None and np.sum(sad == 1) >= 1 else X
            if config.clusterer == "ahc":
                k = estimate_k_silhouette(speech) if speech.shape[0] >= 3 else 1
            else:
                k = _spectral_k(speech, config.spectral.eigen_threshold)
        k = int(k) + 1  # reserve the non-speech slot
    if k != "auto":
        k = min(int(k), n)
    if config.clusterer == "ahc":
        if k == "auto" and config.ahc_distance_threshold is not None:
            return AHCClustering(distance_threshold=config.ahc_distance_threshold).fit(X).labels_
        return ahc(X, k)
    return spectral_from_affinity(cosine_affinity(X), spectral_cfg, k)[0]


def run_diarise(embeddings, sad=None, config: PipelineConfig | None = None, *,
                speech_segments=None, session_id: str | None = None, out_path=None) -> DiariseResult:
    """Diarise one session.

    Parameters
    ----------
    embeddings : SessionEmbeddings or path to a SEG file
    sad : FrameProbs or path to a SADP file, optional
    config : PipelineConfig
    speech_segments : list of (start, end) or Timeline, optional
        Use these speech regions instead of smoothing ``sad`` (e.g. the
        reference speech of a track-1 style evaluation). Frame SAD is then
        not needed.
    session_id : str, optional
        Defaults to the SEG file stem, or ``"session"``.
    out_path : path, optional
        Write the resulting RTTM here.
    """
    config = config or PipelineConfig()
    if session_id is None:
        session_id = Path(embeddings).stem if isinstance(embeddings, (str, os.PathLike)) else "session"
    with _stage("embeddings"):
        session = read_embeddings(embeddings) if isinstance(embeddings, (str, os.PathLike)) else embeddings
    with _stage("sad_post"):
        if isinstance(sad, (str, os.PathLike)):
            sad = read_sad_probs(sad)
        if isinstance(speech_segments, Timeline):
            speech_segments = speech_segments.speech_segments()
        if speech_segments is None and sad is not None:
            frames = binarize(sad, config.sad_threshold)
            speech_segments = smooth(frames, config.sad_window, config.sad_ratio, sad.frame_hop_seconds)
    if config.use_ns and speech_segments is None:
        raise DataError("nonspeech: non-speech clustering needs SAD input")

    with _stage("segment_embeddings"):
        if speech_segments is None:
            items, sad_labels = session, None
        else:
            session_end = float(session.ends[-1])
            if isinstance(sad, FrameProbs):
                session_end = max(session_end, sad.duration)
            items, sad_labels = _build_items(session, speech_segments, session_end,
                                             config.use_ns, config.subsegment_seconds)
    if len(items) == 0:
        timeline = Timeline(session_id)
        result = DiariseResult(timeline, items, np.zeros((0, session.dim)), sad_labels,
                               ClusterAssignment(np.zeros(0, dtype=np.int64)))
        if out_path is not None:
            emit_rttm(timeline, out_path)
        return result

    X = items.vectors
    if config.use_dr:
        with _stage("dim_reduce"):
            if X.shape[0] >= 2:
                X = reduce_session(X, replace(config.train, seed=config.stage_seeds()["dim_reduce"]))
            else:
                logger.warning("single item; skipping dimensionality reduction")
    if config.use_aa:
        with _stage("aggregate"):
            X = attention_aggregate(X, config.aggregation)

    with _stage("cluster"):
        raw = _cluster(X, config, sad_labels)

    with _stage("nonspeech"):
        if config.use_ns:
            assignment = identify_nonspeech_cluster(
                raw, sad=sad_labels, prototype=config.nonspeech_prototype, X=X
            )
            if assignment.num_speakers >= 1:
                assignment = refine(X, sad_labels, assignment)
        else:
            assignment = ClusterAssignment.from_speaker_labels(raw)

    timeline = assignment_to_timeline(items, assignment, session_id)
    if out_path is not None:
        emit_rttm(timeline, out_path)
    return DiariseResult(timeline, items, X, sad_labels, assignment)


# --- ablation --------------------------------------------------------------------

def technique_combinations() -> list[tuple[bool, bool, bool]]:
    """All (DR, AA, NS) switches: baseline, singles, pairs, then all three."""
    combos = list(itertools.product((False, True), repeat=3))
    return sorted(combos, key=lambda c: (sum(c), [not x for x in c]))


@dataclass
class AblationRow:
    clusterer: str
    dr: bool
    aa: bool
    ns: bool
    sessions: int
    ms: float
    fa: float
    sc: float
    der: float
    mean_der: float

    @property
    def techniques(self) -> str:
        names = [n for n, on in (("DR", self.dr), ("AA", self.aa), ("NS", self.ns)) if on]
        return "+".join(names) if names else "baseline"


@dataclass(frozen=True)
class DatasetSession:
    session_id: str
    embeddings: SessionEmbeddings
    sad: FrameProbs | None
    reference: Timeline


def load_dataset(directory) -> list[DatasetSession]:
    """Sessions from ``<id>.seg`` files with optional ``<id>.sadp`` and required ``<id>.rttm``."""
    directory = Path(directory)
    out = []
    for seg in sorted(directory.glob("*.seg")):
        sid = seg.stem
        rttm = directory / f"{sid}.rttm"
        if not rttm.exists():
            logger.warning("no reference for %s; skipped", sid)
            continue
        refs = [t for t in parse_rttm(rttm) if t.session_id == sid] or parse_rttm(rttm)
        sadp = directory / f"{sid}.sadp"
        out.append(DatasetSession(
            sid,
            read_embeddings(seg),
            read_sad_probs(sadp) if sadp.exists() else None,
            Timeline(sid, refs[0].turns) if refs else Timeline(sid),
        ))
    return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _score_one(session, config: PipelineConfig) -> DerReport | None:
    try:
        hyp = run_diarise(session.embeddings, session.sad, config, session_id=session.session_id).timeline
        return score(session.reference, hyp, config.collar)
    except DataError as exc:
        logger.warning("session %s skipped: %s", session.session_id, exc)
        return None


def run_ablation(dataset, config_base: PipelineConfig | None = None,
                 clusterers=("ahc", "spc")) -> list[AblationRow]:
    """Score every technique combination for each clusterer.

    ``dataset`` is a directory (see :func:`load_dataset`) or a list of
    objects with ``session_id``, ``embeddings``, ``sad`` and ``reference``.
    """
    config_base = config_base or PipelineConfig()
    sessions = load_dataset(dataset) if isinstance(dataset, (str, os.PathLike)) else list(dataset)
    rows = []
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        for clusterer in clusterers:
            for dr, aa, ns in technique_combinations():
                config = replace(config_base, clusterer=clusterer, use_dr=dr, use_aa=aa, use_ns=ns)
                reports = [r for r in pool.map(lambda s: _score_one(s, config), sessions) if r is not None]
                if not reports:
                    logger.warning("no scorable session for %s %s", clusterer, config.techniques)
                    continue
                total = reports[0]
                for r in reports[1:]:
                    total = total + r
                rows.append(AblationRow(
                    clusterer, dr, aa, ns, len(reports),
                    total.missed_pct, total.false_alarm_pct, total.confusion_pct, total.der,
                    float(np.mean([r.der for r in reports])),
                ))
    return rows


_CSV_FIELDS = [f.name for f in fields(AblationRow)]


def write_ablation_csv(rows: list[AblationRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            record = asdict(row)
            for key in ("ms", "fa", "sc", "der", "mean_der"):
                record[key] = repr(record[key])
            writer.writerow(record)


def read_ablation_csv(path) -> list[AblationRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(AblationRow(
                rec["clusterer"],
                rec["dr"] == "True", rec["aa"] == "True", rec["ns"] == "True",
                int(rec["sessions"]),
                *(float(rec[k]) for k in ("ms", "fa", "sc", "der", "mean_der")),
            ))
    return rows


def format_ablation(rows: list[AblationRow]) -> str:
    lines = [f"{'clusterer':<9} {'techniques':<10} {'n':>3} {'MS':>7} {'FA':>7} {'SC':>7} {'DER':>7} {'meanDER':>8}"]
    for r in rows:
        lines.append(
            f"{r.clusterer:<9} {r.techniques:<10} {r.sessions:>3} {r.ms:7.2f} {r.fa:7.2f} "
            f"{r.sc:7.2f} {r.der:7.2f} {r.mean_der:8.2f}"
        )
    return "\n".join(lines)


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{os.fspath(path)}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def prototype_from_file(path) -> tuple[float, ...]:
    return tuple(float(v) for v in read_embedding_vector(path))
