"""Diarisation error rate with collar handling and optimal speaker mapping.

Scoring follows md-eval conventions. Around every reference turn boundary a
zone of ``collar / 2`` on each side is excluded. On the remaining time, with
``n_ref`` reference and ``n_hyp`` hypothesis speakers active and ``n_hit``
of them matched by the speaker mapping, each second contributes

* missed speech  ``max(0, n_ref - n_hyp)``
* false alarm    ``max(0, n_hyp - n_ref)``
* confusion      ``min(n_ref, n_hyp) - n_hit``

and DER is their sum over the total scored reference speaker time. The
mapping is the one-to-one speaker correspondence that maximises matched
time, which makes it the DER-minimising mapping.
"""

from __future__ import annotations

import itertools
import os
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._validation import DataError, check_labels
from .embeddings import disjoint_spans

__all__ = [
    "Turn",
    "Timeline",
    "DerReport",
    "parse_rttm",
    "emit_rttm",
    "score",
    "score_many",
    "optimal_mapping",
    "assignment_to_timeline",
    "format_report",
]

# exhaustive search up to this many speakers on the larger side
EXHAUSTIVE_MAX_SPEAKERS = 8


@dataclass(frozen=True)
class Turn:
    speaker: str
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Timeline:
    """Labelled speaker turns of one session."""

    session_id: str
    turns: tuple[Turn, ...] = ()

    def __post_init__(self):
        turns = tuple(sorted(self.turns, key=lambda t: (t.start, t.end, t.speaker)))
        for t in turns:
            if not t.end > t.start:
                raise DataError(f"turn of {t.speaker} at {t.start} has end <= start")
        object.__setattr__(self, "turns", turns)
        for spk, ivs in self.by_speaker().items():
            if len(ivs) > 1 and np.any(ivs[1:, 0] < ivs[:-1, 1]):
                raise DataError(f"overlapping turns for speaker {spk} in {self.session_id}")

    @property
    def speakers(self) -> list[str]:
        return sorted({t.speaker for t in self.turns})

    def by_speaker(self) -> dict[str, np.ndarray]:
        """Sorted ``(n, 2)`` interval arrays keyed by speaker."""
        out: dict[str, list] = {}
        for t in self.turns:
            out.setdefault(t.speaker, []).append((t.start, t.end))
        return {k: np.array(sorted(v), dtype=np.float64) for k, v in out.items()}

    def speech_segments(self) -> list[tuple[float, float]]:
        """Union of all turns regardless of speaker."""
        merged: list[list[float]] = []
        for t in self.turns:
            if merged and t.start <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], t.end)
            else:
                merged.append([t.start, t.end])
        return [tuple(m) for m in merged]

    @property
    def total_speech(self) -> float:
        return float(sum(t.duration for t in self.turns))


@dataclass
class DerReport:
    """Error components in seconds; percentages are relative to ``total``."""

    missed: float
    false_alarm: float
    confusion: float
    total: float
    mapping: dict[str, str] = field(default_factory=dict)
    session_id: str = ""

    def _pct(self, seconds: float) -> float:
        if self.total <= 0:
            raise DataError("no reference speech")
        # divide first so that seconds == total gives exactly 100
        return 100.0 * (seconds / self.total)

    @property
    def missed_pct(self) -> float:
        return self._pct(self.missed)

    @property
    def false_alarm_pct(self) -> float:
        return self._pct(self.false_alarm)

    @property
    def confusion_pct(self) -> float:
        return self._pct(self.confusion)

    @property
    def der(self) -> float:
        return self.missed_pct + self.false_alarm_pct + self.confusion_pct

    def __add__(self, other: "DerReport") -> "DerReport":
        return DerReport(
            self.missed + other.missed,
            self.false_alarm + other.false_alarm,
            self.confusion + other.confusion,
            self.total + other.total,
            session_id="TOTAL",
        )


# --- RTTM ----------------------------------------------------------------------

def parse_rttm(path) -> list[Timeline]:
    """Read SPEAKER lines of an RTTM file, one :class:`Timeline` per file id."""
    source = os.fspath(path)
    sessions: dict[str, list[Turn]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            fields = raw.split()
            if not fields or fields[0] != "SPEAKER":
                continue
            if len(fields) not in (9, 10):
                raise DataError(f"{source}:{lineno}: expected 10 fields, got {len(fields)}")
            try:
                onset, dur = float(fields[3]), float(fields[4])
            except ValueError:
                raise DataError(f"{source}:{lineno}: bad onset or duration") from None
            if onset < 0 or not dur > 0:
                raise DataError(f"{source}:{lineno}: onset must be >= 0 and duration > 0")
            sessions.setdefault(fields[1], []).append(Turn(fields[7], onset, onset + dur))
    try:
        return [Timeline(sid, tuple(turns)) for sid, turns in sessions.items()]
    except DataError as exc:
        raise DataError(f"{source}: {exc}") from None


def rttm_lines(timeline: Timeline) -> list[str]:
    return [
        f"SPEAKER {timeline.session_id} 1 {t.start:.3f} {t.duration:.3f} <NA> <NA> {t.speaker} <NA> <NA>"
        for t in timeline.turns
    ]


def emit_rttm(timelines, path) -> None:
    if isinstance(timelines, Timeline):
        timelines = [timelines]
    with open(path, "w", encoding="utf-8") as fh:
        for tl in timelines:
            for line in rttm_lines(tl):
                fh.write(line + "\n")


# --- scoring -------------------------------------------------------------------

def optimal_mapping(overlap: np.ndarray) -> list[tuple[int, int]]:
    """One-to-one (row, col) pairs maximising the summed ``overlap``."""
    overlap = np.asarray(overlap, dtype=np.float64)
    n_r, n_h = overlap.shape
    if n_r == 0 or n_h == 0:
        return []
    if max(n_r, n_h) <= EXHAUSTIVE_MAX_SPEAKERS:
        transpose = n_r > n_h
        mat = overlap.T if transpose else overlap
        rows = np.arange(mat.shape[0])
        best, best_cols = -1.0, None
        for cols in itertools.permutations(range(mat.shape[1]), mat.shape[0]):
            total = mat[rows, cols].sum()
            if total > best:
                best, best_cols = total, cols
        pairs = list(zip(rows.tolist(), best_cols))
        if transpose:
            pairs = [(c, r) for r, c in pairs]
        return sorted(pairs)
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    return sorted(zip(rows.tolist(), cols.tolist()))


def _active(intervals: np.ndarray, points: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(intervals[:, 0], points, side="right") - 1
    ok = idx >= 0
    out = np.zeros(points.shape[0], dtype=bool)
    out[ok] = points[ok] < intervals[idx[ok], 1]
    return out


def score(reference: Timeline, hypothesis: Timeline, collar: float = 0.0) -> DerReport:
    """Score ``hypothesis`` against ``reference``.

    Raises
    ------
    DataError
        If the reference contains no scored speech.
    """
    if collar < 0:
        raise ValueError("collar must be >= 0")
    ref = reference.by_speaker()
    hyp = hypothesis.by_speaker()
    ref_ids, hyp_ids = sorted(ref), sorted(hyp)

    edges = [np.array([0.0])]
    for ivs in itertools.chain(ref.values(), hyp.values()):
        edges.append(ivs.ravel())
    half = collar / 2.0
    ref_bounds = np.concatenate([ivs.ravel() for ivs in ref.values()]) if ref else np.zeros(0)
    if half > 0 and ref_bounds.size:
        edges += [ref_bounds - half, ref_bounds + half]
    points = np.unique(np.concatenate(edges))
    points = points[points >= 0]
    if points.size < 2:
        raise DataError("no reference speech")
    mids = 0.5 * (points[:-1] + points[1:])
    dur = np.diff(points)

    if half > 0 and ref_bounds.size:
        zones = np.column_stack([ref_bounds - half, ref_bounds + half])
        zones = zones[np.argsort(zones[:, 0])]
        # merge collar zones so the interval lookup sees disjoint intervals
        merged = [zones[0].copy()]
        for z in zones[1:]:
            if z[0] <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], z[1])
            else:
                merged.append(z.copy())
        dur = np.where(_active(np.array(merged), mids), 0.0, dur)

    R = np.array([_active(ref[s], mids) for s in ref_ids], dtype=bool).reshape(len(ref_ids), mids.size)
    H = np.array([_active(hyp[s], mids) for s in hyp_ids], dtype=bool).reshape(len(hyp_ids), mids.size)
    n_ref = R.sum(axis=0)
    n_hyp = H.sum(axis=0)
    total = float(np.sum(dur * n_ref))
    if total <= 0:
        raise DataError("no reference speech")

    overlap = (R * dur) @ H.T.astype(np.float64)
    pairs = optimal_mapping(overlap)
    # per-segment count of correctly mapped speakers, so confusion is a sum of
    # non-negative terms (exactly zero for a perfect hypothesis)
    n_hit = np.zeros(mids.size, dtype=int)
    for r, h in pairs:
        n_hit += R[r] & H[h]
    missed = float(np.sum(dur * np.maximum(n_ref - n_hyp, 0)))
    false_alarm = float(np.sum(dur * np.maximum(n_hyp - n_ref, 0)))
    confusion = float(np.sum(dur * (np.minimum(n_ref, n_hyp) - n_hit)))
    return DerReport(
        missed=missed,
        false_alarm=false_alarm,
        confusion=confusion,
        total=total,
        mapping={ref_ids[r]: hyp_ids[h] for r, h in pairs},
        session_id=reference.session_id,
    )


def score_many(references: Iterable[Timeline], hypotheses: Iterable[Timeline],
               collar: float = 0.0) -> tuple[list[DerReport], DerReport]:
    """Per-session reports and a pooled TOTAL report (seconds summed first)."""
    hyp_by_id = {h.session_id: h for h in hypotheses}
    reports = []
    for ref in references:
        hyp = hyp_by_id.get(ref.session_id, Timeline(ref.session_id))
        reports.append(score(ref, hyp, collar))
    if not reports:
        raise DataError("no reference speech")
    total = reports[0]
    for r in reports[1:]:
        total = total + r
    total = DerReport(total.missed, total.false_alarm, total.confusion, total.total, session_id="TOTAL")
    return reports, total


def format_report(reports: list[DerReport], total: DerReport) -> str:
    lines = [f"{'session':<24} {'MS':>7} {'FA':>7} {'SC':>7} {'DER':>7}"]
    for r in [*reports, total]:
        lines.append(
            f"{r.session_id:<24} {r.missed_pct:7.2f} {r.false_alarm_pct:7.2f} "
            f"{r.confusion_pct:7.2f} {r.der:7.2f}"
        )
    return "\n".join(lines)


# --- clustering output to timeline ---------------------------------------------

def speaker_name(label: int) -> str:
    return f"spk{int(label):02d}"


def assignment_to_timeline(session, assignment, session_id: str = "session") -> Timeline:
    """Merge runs of equal non-zero labels into speaker turns.

    A run spans from its first window's start to its last window's end.
    Where neighbouring windows overlap (e.g. 1.5 s windows at 0.5 s hop),
    the overlap is split at its midpoint so each instant belongs to one
    window. Label 0 produces no turn.
    """
    labels = check_labels(assignment, len(session))
    n = labels.shape[0]
    if n == 0:
        return Timeline(session_id)
    eff_start, eff_end = disjoint_spans(session.starts, session.ends)

    turns = []
    run_start = 0
    for i in range(1, n + 1):
        if i == n or labels[i] != labels[run_start]:
            lab = labels[run_start]
            a, b = eff_start[run_start], eff_end[i - 1]
            if lab > 0 and b > a:
                turns.append(Turn(speaker_name(lab), float(a), float(b)))
            run_start = i
    return Timeline(session_id, tuple(turns))
