"""Deterministic synthetic scenes with exact ground truth, plus a detector stand-in.

Objects are rectangles or ellipses moving at constant velocity over a
canvas. Lower object index is drawn in front. Every object owns one feature
channel (channel 0 is background), so appearance signatures are orthogonal.
Ground-truth flow from frame ``j`` to frame ``t`` holds, for each pixel of an
object at ``t``, the displacement back to where that pixel was at ``j``.
"""

from dataclasses import dataclass, asdict, replace
import math

import numpy as np
from scipy import ndimage

from .errors import SpecError
from .geometry import BBox, BinaryMask, mask_to_bbox
from .metrics import FrameAnnotations, ObjectAnnotation

SHAPES = ("rect", "ellipse")


@dataclass(frozen=True)
class ObjectSpec:
    class_id: int
    shape: str
    width: float
    height: float
    x: float  # top-left corner at frame 0
    y: float
    vx: float
    vy: float

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise SpecError(f"unknown shape {self.shape!r}")
        if not (self.width > 0 and self.height > 0):
            raise SpecError("object sizes must be positive")
        if not all(math.isfinite(v) for v in (self.x, self.y, self.vx, self.vy)):
            raise SpecError("object position and velocity must be finite")

    def position(self, t):
        return self.x + self.vx * t, self.y + self.vy * t

    def box(self, t):
        x, y = self.position(t)
        return BBox(x, y, x + self.width, y + self.height)


@dataclass(frozen=True)
class SceneSpec:
    width: int = 192
    height: int = 160
    frames: int = 20
    n_objects: int = 4
    seed: int = 0
    objects: tuple = None
    max_speed: float = 2.5
    background: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.frames < 1:
            raise SpecError("canvas size and frame count must be positive")
        if self.objects is not None:
            object.__setattr__(self, "objects", tuple(self.objects))


@dataclass(frozen=True)
class PerturbationModel:
    """Observation noise applied on top of a clean synthetic scene.

    ``box_scale`` inflates detection boxes about their center before
    ``box_jitter`` (px, per coordinate) is added. ``erode``/``dilate`` are
    square-structuring-element radii applied to masks. ``feature_noise`` is
    the std of Gaussian noise on feature grids, the input of every embedding.
    Flow error for a frame gap ``d`` is a per-object offset with std
    ``flow_noise * d ** flow_noise_power`` px. ``burst_prob`` is the per-frame
    chance that an object's appearance degrades for ``burst_len`` frames
    (blur, defocus, partial occlusion): its signature channel is multiplied
    by ``burst_gain`` inside the mask.
    """

    box_jitter: float = 0.0
    box_scale: float = 1.0
    erode: int = 0
    dilate: int = 0
    miss_prob: float = 0.0
    fp_rate: float = 0.0
    feature_noise: float = 0.0
    flow_noise: float = 0.0
    flow_noise_power: float = 1.0
    burst_prob: float = 0.0
    burst_len: int = 3
    burst_gain: float = 0.0

    def __post_init__(self):
        for name in ("miss_prob", "burst_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("box_jitter", "erode", "dilate", "fp_rate", "feature_noise", "flow_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.box_scale <= 0:
            raise ValueError("box_scale must be positive")
        if self.burst_len < 1:
            raise ValueError("burst_len must be >= 1")

    @property
    def is_zero(self):
        return self == PerturbationModel()


NOISE_PRESETS = {
    "none": PerturbationModel(),
    "low": PerturbationModel(
        box_jitter=1.0, box_scale=1.1, miss_prob=0.02, fp_rate=0.1,
        feature_noise=0.3, flow_noise=0.1,
    ),
    "medium": PerturbationModel(
        box_jitter=2.5, box_scale=1.2, erode=1, miss_prob=0.05, fp_rate=0.3,
        feature_noise=1.0, flow_noise=0.25,
    ),
    "high": PerturbationModel(
        box_jitter=4.0, box_scale=1.3, erode=1, dilate=1, miss_prob=0.1, fp_rate=0.5,
        feature_noise=2.0, flow_noise=0.5,
    ),
    # suite for comparing box modes: loose, jittered detector boxes
    "boxes": PerturbationModel(
        box_jitter=2.5, box_scale=1.2, erode=1, miss_prob=0.05, fp_rate=0.3,
        feature_noise=1.0, flow_noise=0.25,
    ),
    # suite for the temporal range sweep: flow error grows fast with frame gap,
    # short appearance dropouts reward looking back a few frames
    "temporal": PerturbationModel(
        feature_noise=0.3, flow_noise=0.004, flow_noise_power=3.0,
        burst_prob=0.08, burst_len=4,
    ),
}


def _random_object(rng, spec):
    if rng.random() < 0.5:
        cls, shape = 1, "rect"
        w, h = rng.uniform(40, 56), rng.uniform(24, 32)
    else:
        cls, shape = 2, "ellipse"
        w, h = rng.uniform(20, 26), rng.uniform(44, 58)
    speed = rng.uniform(0.5, spec.max_speed)
    angle = rng.uniform(0, 2 * np.pi)
    vx, vy = speed * np.cos(angle), speed * np.sin(angle)
    # keep the whole trajectory on the canvas
    T = spec.frames - 1
    lo_x = max(0.0, -vx * T)
    hi_x = min(spec.width - w, spec.width - w - vx * T)
    lo_y = max(0.0, -vy * T)
    hi_y = min(spec.height - h, spec.height - h - vy * T)
    if hi_x < lo_x or hi_y < lo_y:
        return None
    return ObjectSpec(cls, shape, w, h, rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y), vx, vy)


def _trajectories_disjoint(objs, frames, gap=2.0):
    for t in range(frames):
        boxes = [o.box(t) for o in objs]
        for i in range(len(boxes)):
            a = boxes[i]
            for b in boxes[i + 1:]:
                if (
                    a.x1 < b.x2 + gap and b.x1 < a.x2 + gap
                    and a.y1 < b.y2 + gap and b.y1 < a.y2 + gap
                ):
                    return False
    return True


def sample_objects(spec, attempts=2000):
    """Draw ``spec.n_objects`` objects whose trajectories stay apart and on canvas."""
    rng = np.random.default_rng(spec.seed)
    for _ in range(attempts):
        objs = []
        for _ in range(spec.n_objects):
            o = _random_object(rng, spec)
            if o is None:
                break
            objs.append(o)
        if len(objs) == spec.n_objects and _trajectories_disjoint(objs, spec.frames):
            return tuple(objs)
    raise SpecError(f"could not place {spec.n_objects} objects on a {spec.width}x{spec.height} canvas")


def _rasterize(obj, t, height, width):
    x, y = obj.position(t)
    cy = np.arange(height) + 0.5
    cx = np.arange(width) + 0.5
    if obj.shape == "rect":
        rows = (cy >= y) & (cy < y + obj.height)
        cols = (cx >= x) & (cx < x + obj.width)
        return rows[:, None] & cols[None, :]
    ry, rx = obj.height / 2, obj.width / 2
    dy = ((cy - (y + ry)) / ry) ** 2
    dx = ((cx - (x + rx)) / rx) ** 2
    return dy[:, None] + dx[None, :] <= 1.0


class SyntheticSequence:
    """Clean ground truth for one scene: label maps, masks, features, flows."""

    def __init__(self, spec):
        objs = spec.objects if spec.objects is not None else sample_objects(spec)
        for o in objs:
            if o.width > spec.width or o.height > spec.height:
                raise SpecError("object larger than the canvas")
            x, y = o.position(0)
            if x < 0 or y < 0 or x + o.width > spec.width or y + o.height > spec.height:
                raise SpecError("object does not fit the canvas at frame 0")
        self.spec = replace(spec, objects=tuple(objs))
        self.objects = tuple(objs)
        H, W = spec.height, spec.width
        labels = np.zeros((spec.frames, H, W), dtype=np.int16)
        for t in range(spec.frames):
            # paint back to front so that lower indices end up on top
            for k in range(len(objs) - 1, -1, -1):
                labels[t][_rasterize(objs[k], t, H, W)] = k + 1
        labels.setflags(write=False)
        self.labels = labels

    @property
    def n_frames(self):
        return self.spec.frames

    @property
    def channels(self):
        return len(self.objects) + 1

    def object_id(self, k):
        return self.objects[k].class_id * 1000 + k + 1

    def gt(self, t):
        objs = []
        lab = self.labels[t]
        for k, o in enumerate(self.objects):
            m = lab == k + 1
            if m.any():
                mask = BinaryMask.from_array(m)
                objs.append(ObjectAnnotation(self.object_id(k), o.class_id, mask, mask_to_bbox(mask)))
        return FrameAnnotations(t, objs)

    def features(self, t):
        lab = self.labels[t]
        C = self.channels
        out = np.zeros((C, lab.shape[0], lab.shape[1]))
        out[0] = np.where(lab == 0, self.spec.background, 0.0)
        for k in range(len(self.objects)):
            out[k + 1] = lab == k + 1
        return out

    def flow(self, src, dst):
        """Flow on frame ``dst`` pointing back to frame ``src`` (2, H, W)."""
        lab = self.labels[dst]
        out = np.zeros((2,) + lab.shape)
        gap = dst - src
        for k, o in enumerate(self.objects):
            m = lab == k + 1
            out[0][m] = -o.vx * gap
            out[1][m] = -o.vy * gap
        return out


def generate_sequence(spec):
    return SyntheticSequence(spec)


# --- detector stand-in ---------------------------------------------------------


def _square(radius):
    return np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)


def _perturb_box(box, model, rng, width, height):
    cx, cy = (box.x1 + box.x2) / 2, (box.y1 + box.y2) / 2
    hw, hh = box.width / 2 * model.box_scale, box.height / 2 * model.box_scale
    coords = np.array([cx - hw, cy - hh, cx + hw, cy + hh])
    if model.box_jitter > 0:
        coords = coords + rng.normal(0.0, model.box_jitter, 4)
    x1, x2 = sorted((coords[0], coords[2]))
    y1, y2 = sorted((coords[1], coords[3]))
    out = BBox(x1, y1, x2, y2).clip(width, height)
    if out.area <= 0:
        return box
    return out


def perturb(gt, model, seed):
    """Turn ground truth into imperfect detections, deterministically in ``seed``.

    Each kept object gets an eroded/dilated mask and an inflated, jittered
    box. Masks are then clipped against masks of lower-id objects so they
    stay disjoint; objects whose mask vanishes count as missed. False
    positives are small rectangles placed on free canvas.
    """
    if model.is_zero:
        return FrameAnnotations(gt.frame, [
            replace(o, box=o.box if o.box is not None else mask_to_bbox(o.mask)) for o in gt
        ])
    rng = np.random.default_rng([int(seed), int(gt.frame), 1])
    objs = sorted(gt.objects, key=lambda o: o.obj_id)
    if not objs and model.fp_rate == 0:
        return FrameAnnotations(gt.frame, [])
    shape = objs[0].mask.shape if objs else None
    taken = None
    out = []
    for o in objs:
        # draw every random number up front so a miss does not shift the stream
        missed = rng.random() < model.miss_prob
        box_rng = np.random.default_rng(rng.integers(2**63))
        if missed:
            continue
        arr = o.mask.to_array()
        if model.erode:
            arr = ndimage.binary_erosion(arr, _square(model.erode))
        if model.dilate:
            arr = ndimage.binary_dilation(arr, _square(model.dilate))
        if taken is None:
            taken = np.zeros_like(arr)
        arr = arr & ~taken
        if not arr.any():
            continue
        taken |= arr
        H, W = arr.shape
        gt_box = o.box if o.box is not None else mask_to_bbox(o.mask)
        box = _perturb_box(gt_box, model, box_rng, W, H)
        out.append(ObjectAnnotation(o.obj_id, o.class_id, BinaryMask.from_array(arr), box))
    if model.fp_rate > 0 and shape is not None:
        H, W = shape
        if taken is None:
            taken = np.zeros(shape, dtype=bool)
        n_fp = rng.poisson(model.fp_rate)
        for k in range(n_fp):
            cls = int(rng.integers(1, 3))
            w, h = (int(v) for v in rng.integers(8, 17, 2))
            x, y = int(rng.integers(0, W - w + 1)), int(rng.integers(0, H - h + 1))
            arr = np.zeros(shape, dtype=bool)
            arr[y:y + h, x:x + w] = True
            arr &= ~taken
            if not arr.any():
                continue
            taken |= arr
            mask = BinaryMask.from_array(arr)
            box = _perturb_box(mask_to_bbox(mask), model, rng, W, H)
            out.append(ObjectAnnotation(cls * 1000 + 900 + k, cls, mask, box))
    return FrameAnnotations(gt.frame, out)


def degraded_frames(seq, k, model, seed):
    """Boolean per-frame flags telling when object ``k`` is in a degradation burst."""
    T = seq.n_frames
    flags = np.zeros(T, dtype=bool)
    if model.burst_prob > 0:
        rng = np.random.default_rng([int(seed), int(k), 4])
        starts = np.flatnonzero(rng.random(T) < model.burst_prob)
        for s0 in starts:
            flags[s0:s0 + model.burst_len] = True
    return flags


def noisy_features(seq, t, model, seed):
    grid = seq.features(t)
    if model.burst_prob > 0:
        lab = seq.labels[t]
        for k in range(len(seq.objects)):
            if degraded_frames(seq, k, model, seed)[t]:
                m = lab == k + 1
                grid[k + 1][m] *= model.burst_gain
    if model.feature_noise > 0:
        rng = np.random.default_rng([int(seed), int(t), 2])
        grid = grid + rng.normal(0.0, model.feature_noise, grid.shape)
    return grid


def noisy_flow(seq, src, dst, model, seed):
    """Ground-truth flow plus a per-object offset whose spread grows with the frame gap."""
    flow = seq.flow(src, dst)
    if model.flow_noise > 0:
        gap = dst - src
        sigma = model.flow_noise * gap ** model.flow_noise_power
        rng = np.random.default_rng([int(seed), int(src), int(dst), 3])
        offsets = rng.normal(0.0, sigma, (len(seq.objects), 2))
        lab = seq.labels[dst]
        for k in range(len(seq.objects)):
            m = lab == k + 1
            flow[0][m] += offsets[k, 0]
            flow[1][m] += offsets[k, 1]
    return flow


def spec_to_dict(spec):
    d = asdict(spec)
    d["objects"] = [asdict(o) for o in spec.objects] if spec.objects is not None else None
    return d


def spec_from_dict(d):
    d = dict(d)
    objs = d.pop("objects", None)
    if objs is not None:
        objs = tuple(ObjectSpec(**o) for o in objs)
    return SceneSpec(objects=objs, **d)
