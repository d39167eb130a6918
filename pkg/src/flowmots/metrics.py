"""CLEAR-MOTS evaluation: mask matching, id-switch accounting and summary scores."""

from collections import defaultdict
from dataclasses import dataclass
import csv
import io

import numpy as np

from .errors import FrameOrderError, InvalidAnnotations, ShapeError, UndefinedScores
from .geometry import mask_iou

CLASS_NAMES = {1: "car", 2: "pedestrian"}
CLASS_IDS = {name: cid for cid, name in CLASS_NAMES.items()}
MATCH_IOU = 0.5


@dataclass(frozen=True)
class ObjectAnnotation:
    obj_id: int
    class_id: int
    mask: object
    box: object = None


@dataclass(frozen=True)
class FrameAnnotations:
    frame: int
    objects: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))

    def __len__(self):
        return len(self.objects)

    def __iter__(self):
        return iter(self.objects)

    def of_class(self, class_id):
        return [o for o in self.objects if o.class_id == class_id]

    def validate(self):
        """Raise InvalidAnnotations on duplicate ids, mixed sizes or overlapping masks."""
        ids = [o.obj_id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise InvalidAnnotations(f"frame {self.frame}: duplicate object ids")
        if not self.objects:
            return
        shapes = {o.mask.shape for o in self.objects}
        if len(shapes) != 1:
            raise InvalidAnnotations(f"frame {self.frame}: masks have different sizes {shapes}")
        cover = np.zeros(self.objects[0].mask.shape, dtype=np.int32)
        for o in self.objects:
            cover += o.mask.array
        if cover.max() > 1:
            raise InvalidAnnotations(f"frame {self.frame}: masks overlap")


@dataclass(frozen=True)
class FrameMatch:
    """Matches of one frame. ``pairs`` holds ``(class_id, gt_id, pred_id, iou)``."""

    frame: int
    pairs: tuple
    false_pos: dict
    false_neg: dict
    n_gt: dict


def match_frame(gt, pred):
    """Match predicted to ground-truth masks of the same class at IoU > 0.5."""
    gt.validate()
    pred.validate()
    if gt.objects and pred.objects and gt.objects[0].mask.shape != pred.objects[0].mask.shape:
        raise ShapeError("ground truth and prediction masks have different sizes")
    pairs = []
    fp = {}
    fn = {}
    n_gt = {}
    classes = sorted({o.class_id for o in gt} | {o.class_id for o in pred})
    for cls in classes:
        g = gt.of_class(cls)
        p = pred.of_class(cls)
        used = set()
        for go in g:
            for k, po in enumerate(p):
                if k in used:
                    continue
                iou = mask_iou(go.mask, po.mask)
                if iou > MATCH_IOU:
                    pairs.append((cls, go.obj_id, po.obj_id, iou))
                    used.add(k)
                    break
        matched = sum(1 for pr in pairs if pr[0] == cls)
        n_gt[cls] = len(g)
        fn[cls] = len(g) - matched
        fp[cls] = len(p) - matched
    return FrameMatch(gt.frame, tuple(pairs), fp, fn, n_gt)


@dataclass
class MotsScores:
    n_gt: int = 0
    tp: int = 0
    soft_tp: float = 0.0
    fp: int = 0
    fn: int = 0
    ids: int = 0

    def _check(self):
        if self.n_gt == 0:
            raise UndefinedScores("no ground-truth masks")

    @property
    def motsa(self):
        self._check()
        return (self.tp - self.fp - self.ids) / self.n_gt

    @property
    def smotsa(self):
        self._check()
        return (self.soft_tp - self.fp - self.ids) / self.n_gt

    @property
    def motsp_defined(self):
        return self.tp > 0

    @property
    def motsp(self):
        """Mean IoU of true positives; 1.0 (with ``motsp_defined`` False) when there are none."""
        if self.tp == 0:
            return 1.0
        return self.soft_tp / self.tp

    def as_dict(self):
        out = {
            "gt": self.n_gt,
            "tp": self.tp,
            "soft_tp": self.soft_tp,
            "fp": self.fp,
            "fn": self.fn,
            "ids": self.ids,
        }
        if self.n_gt:
            out.update(sMOTSA=self.smotsa, MOTSA=self.motsa, MOTSP=self.motsp)
        else:
            out.update(sMOTSA=None, MOTSA=None, MOTSP=None)
        out["motsp_defined"] = self.motsp_defined
        return out


def accumulate_by_class(matches):
    """Fold per-frame matches into one MotsScores per class.

    An id switch is counted whenever a ground-truth object is matched to a
    predicted id different from the one of its most recent earlier match,
    regardless of frames in between where it went unmatched.
    """
    scores = defaultdict(MotsScores)
    last_pred = {}
    prev_frame = None
    for fm in matches:
        if prev_frame is not None and fm.frame <= prev_frame:
            raise FrameOrderError(f"frame {fm.frame} does not follow {prev_frame}")
        prev_frame = fm.frame
        for cls, n in fm.n_gt.items():
            s = scores[cls]
            s.n_gt += n
            s.fn += fm.false_neg[cls]
            s.fp += fm.false_pos[cls]
        for cls, gid, pid, iou in fm.pairs:
            s = scores[cls]
            s.tp += 1
            s.soft_tp += iou
            key = (cls, gid)
            if key in last_pred and last_pred[key] != pid:
                s.ids += 1
            last_pred[key] = pid
    return dict(sorted(scores.items()))


def combine(scores):
    out = MotsScores()
    for s in scores:
        out.n_gt += s.n_gt
        out.tp += s.tp
        out.soft_tp += s.soft_tp
        out.fp += s.fp
        out.fn += s.fn
        out.ids += s.ids
    return out


def accumulate(matches, class_id=None):
    """Scores for one class, or pooled over all classes when ``class_id`` is None."""
    by_class = accumulate_by_class(matches)
    if class_id is None:
        s = combine(by_class.values())
    else:
        s = by_class.get(class_id, MotsScores())
    if s.n_gt == 0:
        raise UndefinedScores("no ground-truth masks to score against")
    return s


def evaluate(gt_frames, pred_frames):
    """Match two ``{frame: FrameAnnotations}`` mappings and accumulate per class."""
    frames = sorted(set(gt_frames) | set(pred_frames))
    matches = [
        match_frame(gt_frames.get(f, FrameAnnotations(f)), pred_frames.get(f, FrameAnnotations(f)))
        for f in frames
    ]
    return accumulate_by_class(matches)


REPORT_COLUMNS = ("class", "sMOTSA", "MOTSA", "MOTSP", "IDS", "TP", "FP", "FN", "GT")


def report_rows(scores_by_class):
    rows = []
    for cls, s in scores_by_class.items():
        name = CLASS_NAMES.get(cls, str(cls)) if isinstance(cls, int) else cls
        d = s.as_dict()
        rows.append(
            {
                "class": name,
                "sMOTSA": d["sMOTSA"],
                "MOTSA": d["MOTSA"],
                "MOTSP": d["MOTSP"],
                "IDS": s.ids,
                "TP": s.tp,
                "FP": s.fp,
                "FN": s.fn,
                "GT": s.n_gt,
            }
        )
    return rows


def _fmt(v):
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def format_table(scores_by_class):
    rows = report_rows(scores_by_class)
    cells = [list(REPORT_COLUMNS)] + [[_fmt(r[c]) for c in REPORT_COLUMNS] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(REPORT_COLUMNS))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def format_csv(scores_by_class):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in report_rows(scores_by_class):
        writer.writerow({k: ("" if v is None else v) for k, v in r.items()})
    return buf.getvalue()
