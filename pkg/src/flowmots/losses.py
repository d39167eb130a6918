"""Value-only training objectives: classification, box, mask and tracking terms."""

from dataclasses import dataclass

import numpy as np

from .association import cosine_matrix
from .errors import UndefinedLoss

EPS = 1e-12
DEFAULT_MARGIN = 0.2


@dataclass(frozen=True)
class DetectionSample:
    probs: np.ndarray
    true_class: int
    offsets: np.ndarray
    true_offsets: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("class probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "offsets", np.asarray(self.offsets, dtype=np.float64))
        object.__setattr__(self, "true_offsets", np.asarray(self.true_offsets, dtype=np.float64))


@dataclass(frozen=True)
class MaskSample:
    """``probs`` is (c, m, m) per-class sigmoid output; ``target`` is the (m, m) binary mask."""

    probs: np.ndarray
    target: np.ndarray
    true_class: int


def _nonempty(samples):
    samples = list(samples)
    if not samples:
        raise ValueError("need at least one sample")
    return samples


def classification_loss(samples):
    """Mean negative log-likelihood of the true class (probabilities clamped at 1e-12)."""
    samples = _nonempty(samples)
    vals = [-np.log(max(s.probs[s.true_class], EPS)) for s in samples]
    return float(np.mean(vals))


def smooth_l1(d):
    d = np.abs(d)
    return np.where(d < 1.0, 0.5 * d * d, d - 0.5)


def box_regression_loss(samples):
    samples = _nonempty(samples)
    vals = [smooth_l1(s.offsets - s.true_offsets).sum() for s in samples]
    return float(np.mean(vals))


def mask_loss(samples):
    """Average binary cross-entropy on the true-class channel only."""
    samples = _nonempty(samples)
    vals = []
    for s in samples:
        p = np.clip(np.asarray(s.probs, dtype=np.float64)[s.true_class], EPS, 1.0 - EPS)
        y = np.asarray(s.target, dtype=np.float64)
        vals.append(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).mean())
    return float(np.mean(vals))


def triplet_track_loss(vectors, ids, margin=DEFAULT_MARGIN, similarity=None):
    """Batch-hard triplet loss over identity vectors.

    For every anchor with at least one positive (same id, other sample) and
    one negative, the term is ``max(margin + hardest_neg - hardest_pos, 0)``
    where the hardest negative is the most similar one and the hardest
    positive the least similar one. Anchors without both are skipped and do
    not count towards the mean. ``similarity`` maps two (N, D) arrays to an
    (N, N) matrix and defaults to cosine.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    vectors = np.asarray(vectors, dtype=np.float64)
    ids = np.asarray(ids)
    if vectors.shape[0] == 0:
        raise UndefinedLoss("empty batch")
    sim = (similarity or cosine_matrix)(vectors, vectors)
    same = ids[:, None] == ids[None, :]
    np.fill_diagonal(same, False)
    diff = ids[:, None] != ids[None, :]
    valid = same.any(axis=1) & diff.any(axis=1)
    if not valid.any():
        raise UndefinedLoss("no anchor has both a positive and a negative")
    hard_pos = np.where(same, sim, np.inf).min(axis=1)
    hard_neg = np.where(diff, sim, -np.inf).max(axis=1)
    # mean(max(m + d, 0)) written as m + mean(max(d, -m)) so that equal
    # similarities give exactly m instead of an averaged rounding of it
    gaps = np.maximum(hard_neg[valid] - hard_pos[valid], -margin)
    return float(margin + gaps.mean())


def total_loss(cls, box, mask, track):
    return cls + box + mask + track
