"""Slow, obviously-correct reference implementations used as test oracles."""

import itertools
import math

import numpy as np


def bilinear_point(feat, y, x):
    """Bilinear read of one point, out-of-grid corners contributing zero."""
    C, H, W = feat.shape
    y0, x0 = math.floor(y), math.floor(x)
    fy, fx = y - y0, x - x0
    out = np.zeros(C)
    for yy, wy in ((y0, 1 - fy), (y0 + 1, fy)):
        for xx, wx in ((x0, 1 - fx), (x0 + 1, fx)):
            if 0 <= yy < H and 0 <= xx < W:
                out += wy * wx * feat[:, yy, xx]
    return out


def warp_oracle(feat, flow):
    C, H, W = feat.shape
    out = np.zeros_like(feat, dtype=np.float64)
    for r in range(H):
        for c in range(W):
            out[:, r, c] = bilinear_point(feat, r + flow[1, r, c], c + flow[0, r, c])
    return out


# --- RLE ---------------------------------------------------------------------


def counts_of(arr):
    """Column-major runs of a 2-D 0/1 array, starting with a zero run."""
    flat = [int(v) for v in np.asarray(arr, dtype=bool).T.ravel()]
    counts = []
    cur, run = 0, 0
    for v in flat:
        if v != cur:
            counts.append(run)
            cur, run = v, 0
        run += 1
    counts.append(run)
    return counts


def rle_string_oracle(counts):
    """Compressed string built with explicit 64-bit two's complement arithmetic."""
    chars = []
    for i, cnt in enumerate(counts):
        x = cnt - counts[i - 2] if i > 2 else cnt
        u = x & ((1 << 64) - 1)
        while True:
            c = u & 0x1F
            # arithmetic shift of the signed 64-bit value
            signed = u - (1 << 64) if u >> 63 else u
            signed >>= 5
            u = signed & ((1 << 64) - 1)
            more = signed != -1 if c & 0x10 else signed != 0
            chars.append(chr(48 + (c | 0x20 if more else c)))
            if not more:
                break
    return "".join(chars)


# --- metrics -------------------------------------------------------------------


def dense_iou(a, b):
    inter = np.logical_and(a, b).sum()
    union = np.logical_or(a, b).sum()
    return inter / union if union else 0.0


def evaluate_oracle(frames):
    """Brute-force CLEAR-MOTS counts over ``[(gt_objs, pred_objs)]`` per frame.

    Objects are ``(obj_id, class_id, dense_bool_array)``. Returns a dict of
    per-class ``[n_gt, tp, soft_tp, fp, fn, ids]``.
    """
    out = {}
    last = {}
    for gt, pred in frames:
        for cls in sorted({o[1] for o in gt} | {o[1] for o in pred}):
            g = [o for o in gt if o[1] == cls]
            p = [o for o in pred if o[1] == cls]
            acc = out.setdefault(cls, [0, 0, 0.0, 0, 0, 0])
            tp = 0
            for gid, _, ga in g:
                hits = [(pid, dense_iou(ga, pa)) for pid, _, pa in p if dense_iou(ga, pa) > 0.5]
                assert len(hits) <= 1  # disjoint masks make the match unique
                if hits:
                    pid, iou = hits[0]
                    tp += 1
                    acc[2] += iou
                    if (cls, gid) in last and last[(cls, gid)] != pid:
                        acc[5] += 1
                    last[(cls, gid)] = pid
            acc[0] += len(g)
            acc[1] += tp
            acc[3] += len(p) - tp
            acc[4] += len(g) - tp
    return out


# --- assignment ------------------------------------------------------------------


def assignment_oracle(sim, tol=1e-9):
    """Lexicographically first permutation of the zero-padded square matrix reaching the max."""
    sim = np.asarray(sim, dtype=float)
    n, m = sim.shape
    N = max(n, m)
    pad = np.zeros((N, N))
    pad[:n, :m] = sim
    perms = list(itertools.permutations(range(N)))
    totals = [sum(pad[i, p[i]] for i in range(N)) for p in perms]
    best = max(totals)
    first = next(p for p, t in zip(perms, totals) if t >= best - tol)
    pairs = [(i, first[i]) for i in range(n) if first[i] < m]
    return best, pairs


# --- triplet loss ------------------------------------------------------------------


def _cos(u, v):
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    if nu == 0 or nv == 0:
        return 0.0
    return sum(a * b for a, b in zip(u, v)) / (nu * nv)


def triplet_oracle(vectors, ids, margin):
    """Enumerate every (anchor, positive, negative) and keep the hardest per anchor."""
    n = len(vectors)
    terms = []
    for a in range(n):
        pos = [_cos(vectors[a], vectors[p]) for p in range(n) if p != a and ids[p] == ids[a]]
        neg = [_cos(vectors[a], vectors[q]) for q in range(n) if ids[q] != ids[a]]
        if not pos or not neg:
            continue
        worst = max(max(margin + s_n - s_p, 0.0) for s_p in pos for s_n in neg)
        terms.append(worst)
    if not terms:
        return None
    return sum(terms) / len(terms)
