"""Slow, obviously-correct reference implementations used only by the tests."""

import itertools
import math

import numpy as np


def canon(labels):
    """Relabel to first-occurrence order so partitions compare with ==."""
    seen = {}
    return [seen.setdefault(int(v), len(seen)) for v in labels]


def cosine_loop(X):
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    A = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            num = sum(X[i, d] * X[j, d] for d in range(X.shape[1]))
            A[i, j] = num / (math.sqrt(sum(v * v for v in X[i])) * math.sqrt(sum(v * v for v in X[j])))
    return A


def naive_average_linkage(X, k):
    """Average linkage on cosine distance, recomputing every cluster pair each step."""
    D = 1.0 - cosine_loop(X)
    clusters = [[i] for i in range(len(X))]
    while len(clusters) > k:
        best, pair = math.inf, None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                d = np.mean([D[i, j] for i in clusters[a] for j in clusters[b]])
                if d < best:
                    best, pair = d, (a, b)
        a, b = pair
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]
    labels = np.empty(len(X), dtype=int)
    for c, members in enumerate(clusters):
        labels[members] = c
    return canon(labels)


def best_inertia_exhaustive(points, k):
    """Minimum k-means objective over every labelling of the points."""
    points = np.asarray(points, dtype=float)
    best = math.inf
    for labels in itertools.product(range(k), repeat=len(points)):
        labels = np.array(labels)
        total = 0.0
        for c in range(k):
            members = points[labels == c]
            if len(members):
                total += ((members - members.mean(axis=0)) ** 2).sum()
        best = min(best, total)
    return best


def silhouette_by_hand(D, labels):
    D = np.asarray(D, dtype=float)
    labels = list(labels)
    out = []
    for i in range(len(labels)):
        same = [D[i, j] for j in range(len(labels)) if labels[j] == labels[i] and j != i]
        if not same:
            out.append(0.0)
            continue
        a = sum(same) / len(same)
        b = min(
            np.mean([D[i, j] for j in range(len(labels)) if labels[j] == c])
            for c in set(labels) if c != labels[i]
        )
        out.append((b - a) / max(a, b))
    return float(np.mean(out))


def sad_state_machine(frames, w, ratio):
    """Frame-by-frame onset/offset scan with the same cleanup rule, written as plain loops."""
    frames = [bool(f) for f in frames]
    n = len(frames)
    need = math.ceil(ratio * w - 1e-9)
    if n < w:
        return [(0, n)] if 2 * sum(frames) > n else []
    segs = []
    state, onset = False, 0
    for p in range(n - w + 1):
        window = frames[p:p + w]
        if not state and sum(window) >= need:
            onset = p + window.index(True)
            state = True
        elif state and window.count(False) >= need:
            off = p + window.index(False)
            if off > onset:
                segs.append([onset, off])
            state = False
    if state:
        segs.append([onset, n])
    merged = []
    for s in segs:
        if merged and s[0] - merged[-1][1] < need:
            merged[-1][1] = s[1]
        else:
            merged.append(s)
    return [tuple(s) for s in merged if s[1] - s[0] >= need]


def frame_der(ref_turns, hyp_turns, collar=0.0, step=0.01):
    """DER components on a fixed frame grid with exhaustive speaker mapping.

    Turns are (speaker, start, end). Frames whose centre lies within
    ``collar / 2`` of any reference boundary are not scored.
    """
    end = max([t[2] for t in ref_turns] + [t[2] for t in hyp_turns])
    n = int(math.ceil(end / step)) + 1
    centres = (np.arange(n) + 0.5) * step
    ref_spk = sorted({t[0] for t in ref_turns})
    hyp_spk = sorted({t[0] for t in hyp_turns})

    def activity(turns, speakers):
        act = np.zeros((len(speakers), n), dtype=bool)
        for spk, a, b in turns:
            act[speakers.index(spk)] |= (centres >= a) & (centres < b)
        return act

    R, H = activity(ref_turns, ref_spk), activity(hyp_turns, hyp_spk)
    scored = np.ones(n, dtype=bool)
    if collar > 0:
        for _, a, b in ref_turns:
            for x in (a, b):
                scored &= np.abs(centres - x) >= collar / 2
    R, H = R[:, scored], H[:, scored]
    n_ref, n_hyp = R.sum(0), H.sum(0)
    total = n_ref.sum() * step

    best_hit = 0.0
    size = max(len(ref_spk), len(hyp_spk))
    # pad to a square problem; padded rows/columns never hit
    Rp = np.vstack([R, np.zeros((size - len(ref_spk), R.shape[1]), bool)])
    Hp = np.vstack([H, np.zeros((size - len(hyp_spk), H.shape[1]), bool)])
    for perm in itertools.permutations(range(size)):
        hit = sum((Rp[r] & Hp[perm[r]]).sum() for r in range(size)) * step
        best_hit = max(best_hit, hit)
    ms = np.maximum(n_ref - n_hyp, 0).sum() * step
    fa = np.maximum(n_hyp - n_ref, 0).sum() * step
    sc = np.minimum(n_ref, n_hyp).sum() * step - best_hit
    return ms, fa, sc, total
