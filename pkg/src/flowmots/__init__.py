"""Multi-object tracking and segmentation with flow-guided feature fusion."""

from .errors import (
    DegenerateBox,
    EmptyMask,
    FlowMotsError,
    FrameOrderError,
    InvalidAnnotations,
    ParseError,
    ShapeError,
    SpecError,
    UndefinedLoss,
    UndefinedScores,
)
from .geometry import (
    BBox,
    BinaryMask,
    FusionParams,
    bbox_iou,
    fuse_boxes,
    mask_iou,
    mask_to_bbox,
    roi_extract,
)
from .fusion import EmbeddingProjector, downsample_flow, fuse, fusion_weights, warp
from .association import TrackerParams, TrackerState, assign, embed_roi, similarity_matrix, step
from .metrics import FrameAnnotations, MotsScores, ObjectAnnotation, accumulate, match_frame
from .pipeline import CostModel, Pipeline, PipelineParams, cost_ratio, process_frame, run_sequence

__version__ = "0.1.0"
