"""Flow-guided feature aggregation.

Feature grids are float arrays shaped ``(C, H, W)``; flow fields are arrays
shaped ``(2, H, W)`` holding ``(dx, dy)`` in grid cells. A warp is backward:
the output at pixel ``p`` reads the source grid at ``p + flow(p)``.
"""

import numpy as np

from . import kernels
from .errors import ShapeError

DEFAULT_TEMPORAL_RANGE = 8


def as_feature_grid(x):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise ShapeError(f"feature grid must be (C, H, W) with positive sizes, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("feature grid contains non-finite values")
    return arr


def as_flow_field(x):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 2:
        raise ShapeError(f"flow field must be (2, H, W), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("flow field contains non-finite values")
    return arr


def warp(feat, flow):
    feat = as_feature_grid(feat)
    flow = as_flow_field(flow)
    C, H, W = feat.shape
    if flow.shape[1:] != (H, W):
        raise ShapeError(f"flow {flow.shape[1:]} does not match grid {(H, W)}")
    yy, xx = np.mgrid[0:H, 0:W]
    ys = (yy + flow[1]).ravel()
    xs = (xx + flow[0]).ravel()
    return kernels.bilinear_sample(feat, ys, xs).reshape(C, H, W)


def downsample_flow(flow, factor):
    """Shrink a flow field by an integer factor.

    Both components are resampled bilinearly at the centers of the coarse
    cells and the displacements are divided by ``factor`` so they stay in
    units of the (now coarser) grid.
    """
    flow = as_flow_field(flow)
    factor = int(factor)
    if factor < 1:
        raise ValueError("factor must be a positive integer")
    _, H, W = flow.shape
    if H % factor or W % factor:
        raise ShapeError(f"flow size {(H, W)} is not divisible by {factor}")
    if factor == 1:
        return flow.copy()
    h, w = H // factor, W // factor
    ys = (np.arange(h) + 0.5) * factor - 0.5
    xs = (np.arange(w) + 0.5) * factor - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    out = kernels.bilinear_sample(flow, yy.ravel(), xx.ravel()).reshape(2, h, w)
    return out / factor


class EmbeddingProjector:
    """Fixed random linear map from C feature channels to ``dim`` embedding channels."""

    def __init__(self, channels, dim=16, seed=0):
        rng = np.random.default_rng(seed)
        matrix = rng.standard_normal((dim, channels)) / np.sqrt(channels)
        # a zero matrix would make every similarity vanish
        if not np.any(matrix):
            matrix[0, 0] = 1.0
        matrix.setflags(write=False)
        self.matrix = matrix
        self.seed = seed
        self.gram = matrix.T @ matrix

    @classmethod
    def from_matrix(cls, matrix):
        obj = cls.__new__(cls)
        matrix = np.array(matrix, dtype=np.float64)
        if matrix.ndim != 2 or not np.any(matrix):
            raise ValueError("projection matrix must be 2-D with a nonzero entry")
        matrix.setflags(write=False)
        obj.matrix = matrix
        obj.seed = None
        obj.gram = matrix.T @ matrix
        return obj

    @property
    def channels(self):
        return self.matrix.shape[1]

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __call__(self, grid):
        grid = as_feature_grid(grid)
        if grid.shape[0] != self.channels:
            raise ShapeError(f"projector expects {self.channels} channels, got {grid.shape[0]}")
        return np.tensordot(self.matrix, grid, axes=(1, 0))

    def cosine(self, a, b):
        """Per-pixel cosine between the embeddings of grids ``a`` and ``b``."""
        return kernels.gram_cosine(a, b, self.gram)


def pixel_cosine(a, b):
    """Per-pixel cosine between two (E, H, W) stacks; 0 where either vector is zero."""
    dot = np.einsum("ehw,ehw->hw", a, b)
    na = np.sqrt(np.einsum("ehw,ehw->hw", a, a))
    nb = np.sqrt(np.einsum("ehw,ehw->hw", b, b))
    denom = na * nb
    out = np.zeros_like(dot)
    ok = denom > 0
    out[ok] = dot[ok] / denom[ok]
    return np.clip(out, -1.0, 1.0)


def _check_stack(warped, current):
    current = as_feature_grid(current)
    grids = [as_feature_grid(g) for g in warped]
    for g in grids:
        if g.shape != current.shape:
            raise ShapeError(f"warped grid {g.shape} does not match current {current.shape}")
    return grids, current


def fusion_weights(warped, current, proj, include_current=False):
    """Per-pixel weight maps ``exp(cos(embed(warped_k), embed(current)))``, normalized.

    With ``include_current`` the current frame gets its own map (appended
    last) and takes part in the normalization.
    """
    grids, current = _check_stack(warped, current)
    if not grids and not include_current:
        raise ShapeError("need at least one warped grid")
    if current.shape[0] != proj.channels:
        raise ShapeError(f"projector expects {proj.channels} channels, got {current.shape[0]}")
    raw = [np.exp(proj.cosine(g, current)) for g in grids]
    if include_current:
        raw.append(np.exp(proj.cosine(current, current)))
    total = np.sum(raw, axis=0)
    return [r / total for r in raw]


def fuse(warped, weights, current, include_current=False):
    """Weighted sum of warped grids plus the current grid.

    By default the current grid is added with unit weight on top of the
    normalized sum. With ``include_current`` the last weight map belongs to
    the current grid and nothing is added outside the weighted sum.
    """
    grids, current = _check_stack(warped, current)
    expected = len(grids) + (1 if include_current else 0)
    if len(weights) != expected:
        raise ShapeError(f"expected {expected} weight maps, got {len(weights)}")
    H, W = current.shape[1:]
    for w in weights:
        if np.shape(w) != (H, W):
            raise ShapeError(f"weight map {np.shape(w)} does not match {(H, W)}")
    if include_current:
        out = weights[-1] * current
        weights = weights[:-1]
    else:
        out = current.copy()
    for g, w in zip(grids, weights):
        out = out + w * g
    return out


def flow_guided_fusion(context, current, proj, include_current=False):
    """Warp every ``(grid, flow)`` pair in ``context`` onto ``current`` and fuse.

    An empty context returns a copy of ``current``.
    """
    current = as_feature_grid(current)
    if not context:
        return current.copy()
    warped = [warp(g, f) for g, f in context]
    weights = fusion_weights(warped, current, proj, include_current=include_current)
    return fuse(warped, weights, current, include_current=include_current)
