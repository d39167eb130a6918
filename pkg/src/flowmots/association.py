"""Identity vectors, cross-frame matching and track bookkeeping."""

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import FrameOrderError

IDENTITY_DIM = 128


@lru_cache(maxsize=32)
def _identity_matrix(seed, in_dim, out_dim):
    rng = np.random.default_rng([seed, in_dim, out_dim])
    m = rng.standard_normal((out_dim, in_dim)) / np.sqrt(in_dim)
    m.setflags(write=False)
    return m


def embed_roi(roi_features, seed=0, dim=IDENTITY_DIM):
    """Map a (C, P, P) ROI to a unit-length identity vector.

    The map is a fixed random linear layer drawn from ``seed`` followed by L2
    normalization. An all-zero ROI yields the zero vector, which every
    similarity treats as 0.
    """
    flat = np.asarray(roi_features, dtype=np.float64).ravel()
    if flat.size == 0:
        raise ValueError("empty ROI")
    v = _identity_matrix(int(seed), flat.size, int(dim)) @ flat
    norm = np.linalg.norm(v)
    if norm == 0:
        return np.zeros(dim)
    return v / norm


def cosine(u, v):
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def cosine_matrix(a, b):
    """Pairwise cosine between the rows of ``a`` (N, D) and ``b`` (M, D)."""
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    a = np.asarray(a, dtype=np.float64).reshape(len(a), -1)
    b = np.asarray(b, dtype=np.float64).reshape(len(b), -1)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = np.outer(na, nb)
    dots = a @ b.T
    out = np.zeros_like(dots)
    ok = denom > 0
    out[ok] = dots[ok] / denom[ok]
    return np.clip(out, -1.0, 1.0)


@dataclass(frozen=True)
class Track:
    track_id: int
    class_id: int
    last_vector: np.ndarray = field(repr=False)
    last_seen: int
    first_seen: int
    hits: int = 1


@dataclass(frozen=True)
class TrackerParams:
    beta: float = 0.5
    max_age: int = 2

    def __post_init__(self):
        if not -1.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (-1, 1]")
        if self.max_age < 0:
            raise ValueError("max_age must be >= 0")


@dataclass(frozen=True)
class TrackerState:
    params: TrackerParams = TrackerParams()
    tracks: tuple = ()
    next_id: int = 1
    last_frame: int = None


def similarity_matrix(tracks, detections):
    if not tracks or not len(detections):
        return np.zeros((len(tracks), len(detections)))
    return cosine_matrix([t.last_vector for t in tracks], detections)


def _best_total(m):
    if m.size == 0:
        return 0.0
    r, c = linear_sum_assignment(m, maximize=True)
    return float(m[r, c].sum())


def optimal_pairs(sim):
    """Maximum-total one-to-one assignment of rows to columns.

    Every row or column that can be matched is (the cardinality is
    ``min(n, m)``). Among optimal assignments the lexicographically smallest
    is returned: row 0 takes the lowest column it can without losing
    optimality, then row 1, and so on.
    """
    sim = np.asarray(sim, dtype=np.float64)
    n, m = sim.shape
    if n == 0 or m == 0:
        return []
    N = max(n, m)
    padded = np.zeros((N, N))
    padded[:n, :m] = sim
    best = _best_total(padded)
    tol = 1e-11 * N * max(1.0, float(np.abs(sim).max()))
    rows = list(range(N))
    cols = list(range(N))
    fixed = 0.0
    pairs = []
    for i in range(N):
        rows.remove(i)
        for j in cols:
            rest_cols = [c for c in cols if c != j]
            rest = padded[np.ix_(rows, rest_cols)]
            if fixed + padded[i, j] + _best_total(rest) >= best - tol:
                break
        else:  # pragma: no cover - some column always attains the optimum
            raise RuntimeError("assignment refinement failed")
        cols.remove(j)
        fixed += padded[i, j]
        if i < n and j < m:
            pairs.append((i, j))
    return pairs


def assign(sim, beta):
    """Optimal assignment with pairs of similarity ``<= beta`` dropped afterwards."""
    sim = np.asarray(sim, dtype=np.float64)
    return [(i, j) for i, j in optimal_pairs(sim) if sim[i, j] > beta]


def step(state, detections, frame):
    """Advance the tracker by one frame.

    ``detections`` is a sequence of ``(identity_vector, class_id)``. Returns
    the new state and one track id per detection, in input order. Matching
    only happens within a class. Tracks missing for more than
    ``params.max_age`` consecutive frames are dropped.
    """
    frame = int(frame)
    if state.last_frame is not None and frame <= state.last_frame:
        raise FrameOrderError(f"frame {frame} is not after {state.last_frame}")
    params = state.params
    alive = [t for t in state.tracks if frame - t.last_seen - 1 <= params.max_age]
    ids = [None] * len(detections)
    updated = {}
    classes = sorted({int(c) for _, c in detections})
    for cls in classes:
        t_idx = [k for k, t in enumerate(alive) if t.class_id == cls]
        d_idx = [k for k, (_, c) in enumerate(detections) if int(c) == cls]
        sim = similarity_matrix([alive[k] for k in t_idx], [detections[k][0] for k in d_idx])
        for i, j in assign(sim, params.beta):
            track = alive[t_idx[i]]
            det = d_idx[j]
            ids[det] = track.track_id
            updated[track.track_id] = replace(
                track,
                last_vector=np.asarray(detections[det][0], dtype=np.float64),
                last_seen=frame,
                hits=track.hits + 1,
            )
    next_id = state.next_id
    new_tracks = []
    for k, (vec, cls) in enumerate(detections):
        if ids[k] is None:
            ids[k] = next_id
            new_tracks.append(
                Track(next_id, int(cls), np.asarray(vec, dtype=np.float64), frame, frame)
            )
            next_id += 1
    tracks = [updated.get(t.track_id, t) for t in alive]
    tracks = [t for t in tracks if frame - t.last_seen <= params.max_age] + new_tracks
    tracks.sort(key=lambda t: t.track_id)
    return replace(state, tracks=tuple(tracks), next_id=next_id, last_frame=frame), ids
