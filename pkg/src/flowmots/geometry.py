"""Boxes, run-length masks, overlap measures, ROI sampling and box fusion.

Boxes use continuous, half-open pixel coordinates: pixel ``(row r, col c)``
covers ``[c, c + 1) x [r, r + 1)`` and its center sits at ``(c + 0.5, r + 0.5)``.
"""

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

from . import kernels
from .errors import DegenerateBox, EmptyMask, ShapeError


@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box coordinates {vals}")
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(f"inverted box {vals}")

    @property
    def width(self):
        return self.x2 - self.x1

    @property
    def height(self):
        return self.y2 - self.y1

    @property
    def area(self):
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_array(self):
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=np.float64)

    @classmethod
    def from_array(cls, arr):
        x1, y1, x2, y2 = (float(v) for v in arr)
        return cls(x1, y1, x2, y2)

    def clip(self, width, height):
        """Clamp to the canvas ``[0, width] x [0, height]``."""
        x1 = min(max(self.x1, 0.0), width)
        x2 = min(max(self.x2, 0.0), width)
        y1 = min(max(self.y1, 0.0), height)
        y2 = min(max(self.y2, 0.0), height)
        return BBox(x1, y1, max(x1, x2), max(y1, y2))

    def scale(self, factor):
        return BBox(self.x1 * factor, self.y1 * factor, self.x2 * factor, self.y2 * factor)


class BinaryMask:
    """Instance mask stored as column-major run lengths.

    ``counts[0]`` is the number of leading zeros (possibly 0), after which
    runs alternate between ones and zeros. Values are immutable; the dense
    raster is decoded lazily and cached.
    """

    __slots__ = ("height", "width", "counts", "__dict__")

    def __init__(self, height, width, counts):
        height = int(height)
        width = int(width)
        if height <= 0 or width <= 0:
            raise ShapeError(f"mask dimensions must be positive, got {height}x{width}")
        counts = np.asarray(counts, dtype=np.int64).ravel()
        if counts.size and counts.min() < 0:
            raise ValueError("run-length counts must be nonnegative")
        if int(counts.sum()) != height * width:
            raise ValueError(
                f"run-length counts sum to {int(counts.sum())}, expected {height * width}"
            )
        if counts.size > 1 and (counts[1:] == 0).any():
            # zero-length interior runs: re-encode to the canonical form
            flat = kernels.decode_counts(counts, height * width)
            counts = kernels.encode_counts(flat)
        if counts.size == 0:
            counts = np.array([height * width], dtype=np.int64)
        counts.setflags(write=False)
        self.height = height
        self.width = width
        self.counts = counts

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ShapeError(f"mask raster must be 2-D, got shape {arr.shape}")
        flat = np.ascontiguousarray(arr.astype(bool).ravel(order="F"))
        mask = cls(arr.shape[0], arr.shape[1], kernels.encode_counts(flat))
        return mask

    @classmethod
    def empty(cls, height, width):
        return cls(height, width, [height * width])

    @property
    def shape(self):
        return (self.height, self.width)

    @cached_property
    def array(self):
        flat = kernels.decode_counts(self.counts, self.height * self.width)
        out = flat.reshape((self.height, self.width), order="F").astype(bool)
        out.setflags(write=False)
        return out

    def to_array(self):
        return self.array.copy()

    @cached_property
    def area(self):
        return int(self.counts[1::2].sum())

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.counts, other.counts)

    def __hash__(self):
        return hash((self.height, self.width, self.counts.tobytes()))

    def __repr__(self):
        return f"BinaryMask({self.height}x{self.width}, area={self.area})"


@dataclass(frozen=True)
class FusionParams:
    reference_area: float = 1024.0

    def __post_init__(self):
        if not self.reference_area > 0:
            raise ValueError("reference_area must be positive")


def mask_to_bbox(mask):
    """Tightest half-open box around the foreground of ``mask``."""
    if mask.area == 0:
        raise EmptyMask("cannot bound an empty mask")
    arr = mask.array
    rows = np.flatnonzero(arr.any(axis=1))
    cols = np.flatnonzero(arr.any(axis=0))
    return BBox(float(cols[0]), float(rows[0]), float(cols[-1] + 1), float(rows[-1] + 1))


def bbox_iou(a, b):
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def mask_iou(a, b):
    """Intersection over union of two masks; 0 when both are empty."""
    if a.shape != b.shape:
        raise ShapeError(f"mask shapes differ: {a.shape} vs {b.shape}")
    inter = kernels.intersection_area(a.counts, b.counts, a.height * a.width)
    union = a.area + b.area - inter
    if union == 0:
        return 0.0
    return inter / union


def fusion_alpha(box, params):
    """Weight of the detection box; shrinks as the box area grows."""
    return params.reference_area / (params.reference_area + box.area)


def blend_boxes(b, b_mk, alpha):
    """Componentwise ``alpha * b + (1 - alpha) * b_mk``, kept inside the input envelope."""
    p = b.as_array()
    q = b_mk.as_array()
    out = alpha * p + (1.0 - alpha) * q
    out = np.clip(out, np.minimum(p, q), np.maximum(p, q))
    return BBox.from_array(out)


def fuse_boxes(b, b_mk, params):
    return blend_boxes(b, b_mk, fusion_alpha(b, params))


def roi_extract(grid, box, out_size, spatial_scale=1.0):
    """Bilinear crop-and-resize of ``box`` to ``out_size x out_size`` per channel.

    One sample is taken at the center of every output cell, with no
    quantization of the box. ``spatial_scale`` maps box pixels onto grid
    cells (``1 / stride``). Samples outside the grid read as zero.
    """
    if out_size < 1:
        raise ValueError("out_size must be >= 1")
    if box.area <= 0:
        raise DegenerateBox(f"box {box} has zero area")
    grid = np.asarray(grid, dtype=np.float64)
    C = grid.shape[0]
    P = int(out_size)
    offs = (np.arange(P) + 0.5) / P
    ys = (box.y1 + offs * box.height) * spatial_scale - 0.5
    xs = (box.x1 + offs * box.width) * spatial_scale - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    out = kernels.bilinear_sample(grid, yy.ravel(), xx.ravel())
    return out.reshape(C, P, P)
