import numpy as np

from flowmots.geometry import BinaryMask
from flowmots.metrics import FrameAnnotations, ObjectAnnotation


def disjoint_masks(rng, h, w, k):
    """``k`` disjoint random blobs on an h x w canvas (some may come out empty)."""
    labels = np.zeros((h, w), dtype=int)
    for j in range(1, k + 1):
        y, x = rng.integers(0, h), rng.integers(0, w)
        dy, dx = rng.integers(1, h // 2 + 2), rng.integers(1, w // 2 + 2)
        region = np.zeros((h, w), dtype=bool)
        region[y:y + dy, x:x + dx] = True
        labels[region & (labels == 0)] = j
    return [labels == j for j in range(1, k + 1)]


def jitter(rng, arr, p):
    """Flip each pixel of ``arr`` with probability ``p``."""
    return arr ^ (rng.random(arr.shape) < p)


def random_sequence(rng, max_frames=10, max_objects=5, h=12, w=12):
    """Random (gt, pred) frame pairs as dense ``(id, cls, array)`` triples."""
    T = int(rng.integers(1, max_frames + 1))
    K = int(rng.integers(1, max_objects + 1))
    classes = rng.integers(1, 3, K)
    frames = []
    for t in range(T):
        blobs = disjoint_masks(rng, h, w, K)
        gt = [(int(classes[k] * 1000 + k + 1), int(classes[k]), blobs[k])
              for k in range(K) if blobs[k].any() and rng.random() > 0.1]
        pred = []
        taken = np.zeros((h, w), dtype=bool)
        for gid, cls, arr in gt:
            if rng.random() < 0.15:
                continue
            a = jitter(rng, arr, 0.1) & ~taken
            if not a.any():
                continue
            taken |= a
            pid = int(rng.integers(1, 4))
            pred.append((cls * 1000 + pid + 10 * (gid % 1000), cls, a))
        if rng.random() < 0.3:
            a = ~taken & (rng.random((h, w)) < 0.2)
            if a.any():
                pred.append((1999, 1, a))
        frames.append((gt, pred))
    return frames


def to_annotations(t, objs):
    return FrameAnnotations(t, [ObjectAnnotation(i, c, BinaryMask.from_array(a)) for i, c, a in objs])
