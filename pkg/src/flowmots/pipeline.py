"""Online per-frame inference and the runtime cost model.

Each frame: fuse flow-warped features of up to ``n`` previous frames into the
current grid, derive a box from every detected mask, blend it with the
detector's box, pool ROI features on the blended box, embed them and hand
the vectors to the tracker.
"""

from collections import deque
from dataclasses import dataclass, field
import logging
import time

import numpy as np

from .association import TrackerParams, TrackerState, embed_roi, step
from .errors import DegenerateBox, EmptyMask, FrameOrderError
from .fusion import DEFAULT_TEMPORAL_RANGE, EmbeddingProjector, downsample_flow, flow_guided_fusion
from .geometry import BBox, FusionParams, blend_boxes, fuse_boxes, mask_to_bbox, roi_extract
from .metrics import FrameAnnotations, ObjectAnnotation, match_frame, accumulate_by_class
from . import synthetic

log = logging.getLogger(__name__)

BOX_MODES = ("adaptive", "fixed", "detection", "mask")


@dataclass(frozen=True)
class PipelineParams:
    temporal_range: int = DEFAULT_TEMPORAL_RANGE
    fusion: FusionParams = FusionParams()
    box_mode: str = "adaptive"
    fixed_alpha: float = 0.5
    roi_size: int = 7
    feature_stride: int = 1
    include_current: bool = False
    embed_dim: int = 16
    projector_seed: int = 0
    identity_seed: int = 0
    tracker: TrackerParams = TrackerParams()

    def __post_init__(self):
        if self.temporal_range < 0:
            raise ValueError("temporal_range must be >= 0")
        if self.box_mode not in BOX_MODES:
            raise ValueError(f"box_mode must be one of {BOX_MODES}")
        if not 0.0 <= self.fixed_alpha <= 1.0:
            raise ValueError("fixed_alpha must lie in [0, 1]")
        if self.roi_size < 1 or self.feature_stride < 1:
            raise ValueError("roi_size and feature_stride must be >= 1")


@dataclass(frozen=True)
class FrameResult:
    frame: int
    classes: tuple = ()
    boxes: tuple = ()
    masks: tuple = ()
    track_ids: tuple = ()
    fused_boxes: tuple = ()

    def __len__(self):
        return len(self.track_ids)

    def to_annotations(self):
        objs = [
            ObjectAnnotation(c * 1000 + t, c, m, b)
            for c, b, m, t in zip(self.classes, self.boxes, self.masks, self.track_ids)
        ]
        return FrameAnnotations(self.frame, objs)


def tracking_box(b, b_mk, params):
    if params.box_mode == "adaptive":
        return fuse_boxes(b, b_mk, params.fusion)
    if params.box_mode == "fixed":
        return blend_boxes(b, b_mk, params.fixed_alpha)
    if params.box_mode == "detection":
        return b
    return b_mk


def process_frame(context, features, detections, tracker, params, frame, projector=None):
    """Run one frame of online inference.

    ``context`` lists ``(grid, flow)`` for previous frames, flow expressed in
    image pixels on the current frame. ``detections`` lists
    ``(class_id, BBox or None, BinaryMask)``; a missing box falls back to the
    mask box. Objects that fail (empty mask, zero-area box) are dropped with a
    warning. Returns the frame result and the new tracker state.
    """
    if len(context) > params.temporal_range:
        raise ValueError(f"context holds {len(context)} frames, range is {params.temporal_range}")
    features = np.asarray(features, dtype=np.float64)
    if projector is None:
        projector = EmbeddingProjector(features.shape[0], params.embed_dim, params.projector_seed)
    stride = params.feature_stride
    if stride > 1:
        context = [(g, downsample_flow(f, stride)) for g, f in context]
    fused = flow_guided_fusion(context, features, projector, params.include_current)
    kept = []
    vectors = []
    for k, (cls, box, mask) in enumerate(detections):
        try:
            b_mk = mask_to_bbox(mask)
            b = box if box is not None else b_mk
            b_wb = tracking_box(b, b_mk, params)
            roi = roi_extract(fused, b_wb, params.roi_size, 1.0 / stride)
        except (EmptyMask, DegenerateBox) as exc:
            log.warning("frame %s: dropping detection %d: %s", frame, k, exc)
            continue
        kept.append((int(cls), b, mask, b_wb))
        vectors.append((embed_roi(roi, params.identity_seed), int(cls)))
    tracker, ids = step(tracker, vectors, frame)
    result = FrameResult(
        frame,
        tuple(c for c, _, _, _ in kept),
        tuple(b for _, b, _, _ in kept),
        tuple(m for _, _, m, _ in kept),
        tuple(ids),
        tuple(w for _, _, _, w in kept),
    )
    return result, tracker


@dataclass
class SequenceFrame:
    """One frame delivered by a sequence provider.

    ``flow_from(j)`` returns the flow on this frame pointing back to frame ``j``.
    """

    frame: int
    features: np.ndarray
    detections: list
    gt: FrameAnnotations = None
    flow_from: object = None


class Pipeline:
    """Single-owner online tracker holding the rolling feature window."""

    def __init__(self, params=PipelineParams()):
        self.params = params
        self.tracker = TrackerState(params.tracker)
        self.window = deque(maxlen=max(params.temporal_range, 1))
        self.projector = None
        self.last_frame = None

    def push(self, sf):
        if self.last_frame is not None and sf.frame <= self.last_frame:
            raise FrameOrderError(f"frame {sf.frame} is not after {self.last_frame}")
        n = self.params.temporal_range
        if self.projector is None:
            self.projector = EmbeddingProjector(
                sf.features.shape[0], self.params.embed_dim, self.params.projector_seed
            )
        context = []
        if n > 0 and sf.flow_from is not None:
            context = [(g, sf.flow_from(j)) for j, g in self.window]
        result, self.tracker = process_frame(
            context, sf.features, sf.detections, self.tracker, self.params, sf.frame, self.projector
        )
        if n > 0:
            self.window.append((sf.frame, sf.features))
        self.last_frame = sf.frame
        return result


@dataclass
class RunResult:
    results: list
    scores: dict = None
    timings: dict = field(default_factory=dict)


def run_sequence(source, params=PipelineParams()):
    """Track a whole sequence online; score against ground truth when every frame has it."""
    pipe = Pipeline(params)
    results = []
    matches = []
    have_gt = True
    t0 = time.perf_counter()
    for sf in source:
        res = pipe.push(sf)
        results.append(res)
        if sf.gt is None:
            have_gt = False
        elif have_gt:
            matches.append(match_frame(sf.gt, res.to_annotations()))
    elapsed = time.perf_counter() - t0
    scores = accumulate_by_class(matches) if have_gt and matches else None
    timings = {"total_s": elapsed, "per_frame_s": elapsed / max(len(results), 1)}
    return RunResult(results, scores, timings)


def detections_of(frame_ann):
    return [(o.class_id, o.box, o.mask) for o in frame_ann]


def synthetic_source(seq, model=synthetic.NOISE_PRESETS["none"], seed=0):
    """Provider over a synthetic sequence with perturbed detections, features and flows."""
    for t in range(seq.n_frames):
        gt = seq.gt(t)
        dets = synthetic.perturb(gt, model, seed)
        feats = synthetic.noisy_features(seq, t, model, seed)
        yield SequenceFrame(
            t,
            feats,
            detections_of(dets),
            gt,
            lambda j, t=t: synthetic.noisy_flow(seq, j, t, model, seed),
        )


def mask_features(frame_ann, height, width):
    """Appearance-free stand-in features for detections read from files.

    Channel 0 marks background, channel 1 foreground, and channels 2-3 hold
    the normalized pixel row/column inside foreground, so embeddings encode
    shape and position only.
    """
    out = np.zeros((4, height, width))
    fg = np.zeros((height, width), dtype=bool)
    for o in frame_ann:
        fg |= o.mask.array
    yy, xx = np.mgrid[0:height, 0:width]
    out[0] = ~fg
    out[1] = fg
    out[2] = np.where(fg, yy / height, 0.0)
    out[3] = np.where(fg, xx / width, 0.0)
    return out


def file_source(detections, gt=None, height=None, width=None):
    """Provider over parsed detection files with mask-derived features and zero flow."""
    frames = sorted(set(detections) | set(gt or {}))
    if height is None or width is None:
        for ann in list(detections.values()) + list((gt or {}).values()):
            if ann.objects:
                height, width = ann.objects[0].mask.shape
                break
    if height is None:
        return
    zero = np.zeros((2, height, width))
    for f in frames:
        ann = detections.get(f, FrameAnnotations(f))
        yield SequenceFrame(
            f,
            mask_features(ann, height, width),
            detections_of(ann),
            gt.get(f, FrameAnnotations(f)) if gt is not None else None,
            lambda j: zero,
        )


# --- runtime cost model --------------------------------------------------------


@dataclass(frozen=True)
class CostModel:
    """Per-module cost units and temporal lengths.

    ``fm`` backbone, ``fl`` flow + warp + embedding (per fused frame), ``cl``
    classifier, ``bb`` box head, ``mk`` mask head, ``tr`` tracking head,
    ``conv3d`` one 3-D convolution step of the baseline; ``n`` and ``m`` are
    the fusion lengths of this method and of the baseline.
    """

    fm: float
    fl: float
    conv3d: float
    n: int = 8
    m: int = 8
    cl: float = 1.0
    bb: float = 1.0
    mk: float = 1.0
    tr: float = 1.0

    def __post_init__(self):
        for name in ("fm", "fl", "conv3d", "cl", "bb", "mk", "tr"):
            if not getattr(self, name) > 0:
                raise ValueError(f"cost {name} must be positive")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be >= 1")

    @property
    def ours(self):
        return self.fm + self.n * self.fl + self.cl + self.bb + self.mk + self.tr

    @property
    def baseline(self):
        return self.fm + self.m * self.conv3d + self.cl + self.bb + self.mk + self.tr


def cost_ratio(model):
    """Runtime ratio against the 3-D-convolution baseline with head costs neglected."""
    return (model.fm + model.n * model.fl) / (model.fm + model.m * model.conv3d)


def exact_cost_ratio(model):
    return model.ours / model.baseline
