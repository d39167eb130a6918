"""Hot numeric kernels with two interchangeable backends.

Every kernel exists twice: an explicit-loop version compiled with numba
``@njit`` and a vectorized pure-numpy version. The public names dispatch to
the numba version unless numba is missing or the environment variable
``FLOWMOTS_DISABLE_NUMBA`` is set to a non-empty value other than ``0``.
Both versions are always importable (as ``*_numba`` / ``*_numpy``) so tests
and the benchmark can compare them directly.
"""

import os
import warnings

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda func: func


_flag = os.environ.get("FLOWMOTS_DISABLE_NUMBA", "")
USE_NUMBA = HAVE_NUMBA and _flag in ("", "0")

if not HAVE_NUMBA and _flag in ("", "0"):  # pragma: no cover
    warnings.warn("numba is not importable; using the pure-numpy kernels")

BACKEND = "numba" if USE_NUMBA else "numpy"


# --- bilinear sampling -----------------------------------------------------


def bilinear_sample_numpy(feat, ys, xs):
    """Sample every channel of ``feat`` (C, H, W) at index-space points.

    ``ys``/``xs`` are 1-D float arrays of equal length N. Integer coordinates
    hit pixel values exactly. Each of the four interpolation corners that
    falls outside the grid contributes zero. Returns an array (C, N).
    """
    C, H, W = feat.shape
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    wy = ys - y0
    wx = xs - x0
    y0 = y0.astype(np.int64)
    x0 = x0.astype(np.int64)
    out = np.zeros((C, ys.shape[0]), dtype=np.float64)
    for dy, dx in ((0, 0), (0, 1), (1, 0), (1, 1)):
        yi = y0 + dy
        xi = x0 + dx
        w = (wy if dy else 1.0 - wy) * (wx if dx else 1.0 - wx)
        ok = (yi >= 0) & (yi < H) & (xi >= 0) & (xi < W)
        if ok.any():
            out[:, ok] += w[ok] * feat[:, yi[ok], xi[ok]]
    return out


@njit(cache=True)
def bilinear_sample_numba(feat, ys, xs):
    C, H, W = feat.shape
    N = ys.shape[0]
    out = np.zeros((C, N), dtype=np.float64)
    for i in range(N):
        y0 = int(np.floor(ys[i]))
        x0 = int(np.floor(xs[i]))
        wy = ys[i] - y0
        wx = xs[i] - x0
        in_y0 = 0 <= y0 < H
        in_y1 = 0 <= y0 + 1 < H
        in_x0 = 0 <= x0 < W
        in_x1 = 0 <= x0 + 1 < W
        for c in range(C):
            acc = 0.0
            if in_y0 and in_x0:
                acc += (1.0 - wy) * (1.0 - wx) * feat[c, y0, x0]
            if in_y0 and in_x1:
                acc += (1.0 - wy) * wx * feat[c, y0, x0 + 1]
            if in_y1 and in_x0:
                acc += wy * (1.0 - wx) * feat[c, y0 + 1, x0]
            if in_y1 and in_x1:
                acc += wy * wx * feat[c, y0 + 1, x0 + 1]
            out[c, i] = acc
    return out


# --- run-length counts -----------------------------------------------------


def encode_counts_numpy(flat):
    """Run lengths of a flat 0/1 raster, first run counting zeros."""
    flat = flat.astype(bool)
    n = flat.shape[0]
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [n]))
    counts = np.diff(bounds).astype(np.int64)
    if n and flat[0]:
        counts = np.concatenate((np.zeros(1, np.int64), counts))
    return counts


@njit(cache=True)
def encode_counts_numba(flat):
    n = flat.shape[0]
    out = np.empty(n + 1, dtype=np.int64)
    k = 0
    run = 0
    cur = 0
    for i in range(n):
        v = 1 if flat[i] else 0
        if v != cur:
            out[k] = run
            k += 1
            run = 0
            cur = v
        run += 1
    out[k] = run
    k += 1
    return out[:k].copy()


def decode_counts_numpy(counts, n):
    values = np.arange(counts.shape[0]) % 2
    return np.repeat(values.astype(np.uint8), counts)[:n]


@njit(cache=True)
def decode_counts_numba(counts, n):
    out = np.zeros(n, dtype=np.uint8)
    pos = 0
    for k in range(counts.shape[0]):
        c = counts[k]
        if k % 2 == 1:
            out[pos:pos + c] = 1
        pos += c
    return out


def intersection_area_numpy(counts_a, counts_b, n):
    a = decode_counts_numpy(counts_a, n)
    b = decode_counts_numpy(counts_b, n)
    return int(np.count_nonzero(a & b))


@njit(cache=True)
def intersection_area_numba(counts_a, counts_b, n):
    # merge the two run sequences without materializing rasters
    ia = 0
    ib = 0
    ra = counts_a[0] if counts_a.shape[0] > 0 else n
    rb = counts_b[0] if counts_b.shape[0] > 0 else n
    pos = 0
    inter = 0
    while pos < n and ia < counts_a.shape[0] and ib < counts_b.shape[0]:
        step = ra if ra < rb else rb
        if ia % 2 == 1 and ib % 2 == 1:
            inter += step
        pos += step
        ra -= step
        rb -= step
        while ra == 0 and ia < counts_a.shape[0]:
            ia += 1
            if ia < counts_a.shape[0]:
                ra = counts_a[ia]
        while rb == 0 and ib < counts_b.shape[0]:
            ib += 1
            if ib < counts_b.shape[0]:
                rb = counts_b[ib]
    return inter


# --- per-pixel cosine under a linear projection ---------------------------------


def gram_cosine_numpy(a, b, gram):
    """Per-pixel cosine of ``P a`` and ``P b`` for grids (C, H, W), given ``gram = P^T P``.

    Pixels where either projected vector is zero get 0.
    """
    ga = np.einsum("ij,jhw->ihw", gram, a)
    dot = np.einsum("ihw,ihw->hw", b, ga)
    na = np.einsum("ihw,ihw->hw", a, ga)
    nb = np.einsum("ihw,ihw->hw", b, np.einsum("ij,jhw->ihw", gram, b))
    denom = np.sqrt(np.maximum(na, 0.0) * np.maximum(nb, 0.0))
    out = np.zeros_like(dot)
    ok = denom > 0
    out[ok] = dot[ok] / denom[ok]
    return np.clip(out, -1.0, 1.0)


@njit(cache=True)
def gram_cosine_numba(a, b, gram):
    C, H, W = a.shape
    out = np.zeros((H, W), dtype=np.float64)
    ga = np.empty(C)
    gb = np.empty(C)
    for y in range(H):
        for x in range(W):
            for i in range(C):
                sa = 0.0
                sb = 0.0
                for j in range(C):
                    sa += gram[i, j] * a[j, y, x]
                    sb += gram[i, j] * b[j, y, x]
                ga[i] = sa
                gb[i] = sb
            dot = 0.0
            na = 0.0
            nb = 0.0
            for i in range(C):
                dot += b[i, y, x] * ga[i]
                na += a[i, y, x] * ga[i]
                nb += b[i, y, x] * gb[i]
            denom = np.sqrt(max(na, 0.0) * max(nb, 0.0))
            if denom > 0:
                v = dot / denom
                out[y, x] = min(1.0, max(-1.0, v))
    return out


if USE_NUMBA:
    bilinear_sample = bilinear_sample_numba
    encode_counts = encode_counts_numba
    decode_counts = decode_counts_numba
    intersection_area = intersection_area_numba
    gram_cosine = gram_cosine_numba
else:
    bilinear_sample = bilinear_sample_numpy
    encode_counts = encode_counts_numpy
    decode_counts = decode_counts_numpy
    intersection_area = intersection_area_numpy
    gram_cosine = gram_cosine_numpy
