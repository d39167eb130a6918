"""Text interchange: compressed RLE strings, KITTI-MOTS style annotation files, configs.

An annotation line reads ``frame obj_id class_id height width rle``. The
object id packs ``class_id * 1000 + instance``. RLE strings use the COCO
compressed alphabet: column-major run lengths starting with zeros, counts
from index 3 on stored as the difference to the count two places earlier,
each value written as 5-bit little-endian groups with a continuation bit
(0x20) and offset by 48.
"""

from dataclasses import asdict, dataclass, fields
import os

from .errors import ParseError
from .geometry import BinaryMask
from .metrics import FrameAnnotations, ObjectAnnotation


def counts_to_string(counts):
    out = []
    for i, value in enumerate(counts):
        x = int(value)
        if i > 2:
            x -= int(counts[i - 2])
        more = True
        while more:
            c = x & 0x1F
            x >>= 5
            more = (x != -1) if (c & 0x10) else (x != 0)
            if more:
                c |= 0x20
            out.append(chr(c + 48))
    return "".join(out)


def string_to_counts(s):
    counts = []
    p = 0
    n = len(s)
    while p < n:
        x = 0
        k = 0
        more = True
        while more:
            if p >= n:
                raise ParseError(f"RLE string ends inside a value: {s!r}")
            c = ord(s[p]) - 48
            if not 0 <= c < 64:
                raise ParseError(f"invalid RLE character {s[p]!r}")
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            p += 1
            k += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * k)
        if len(counts) > 2:
            x += counts[-2]
        counts.append(x)
    return counts


def rle_encode(mask):
    return counts_to_string(mask.counts)


def rle_decode(s, height, width):
    counts = string_to_counts(s)
    if any(c < 0 for c in counts):
        raise ParseError("RLE decodes to a negative run length")
    if sum(counts) != height * width:
        raise ParseError(f"RLE covers {sum(counts)} pixels, expected {height * width}")
    return BinaryMask(height, width, counts)


# --- annotation files --------------------------------------------------------


def parse_lines(lines):
    """Parse annotation lines into ``{frame: FrameAnnotations}`` sorted by frame."""
    frames = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        parts = line.split(" ")
        if len(parts) != 6:
            raise ParseError(f"expected 6 space-separated fields, got {len(parts)}", lineno)
        try:
            frame, obj_id, class_id, height, width = (int(v) for v in parts[:5])
        except ValueError:
            raise ParseError("non-integer field", lineno) from None
        if frame < 0 or obj_id < 0 or class_id < 0:
            raise ParseError("negative frame, id or class", lineno)
        if height <= 0 or width <= 0:
            raise ParseError("image size must be positive", lineno)
        try:
            mask = rle_decode(parts[5], height, width)
        except ParseError as exc:
            raise ParseError(str(exc), lineno) from None
        frames.setdefault(frame, []).append(ObjectAnnotation(obj_id, class_id, mask))
    return {f: FrameAnnotations(f, objs) for f, objs in sorted(frames.items())}


def parse_file(path):
    with open(path, encoding="utf-8") as fh:
        return parse_lines(fh.read().splitlines())


def format_lines(frames):
    """Deterministic text for ``{frame: FrameAnnotations}`` (or an iterable of them)."""
    if isinstance(frames, dict):
        frames = frames.values()
    out = []
    for ann in sorted(frames, key=lambda a: a.frame):
        for o in sorted(ann.objects, key=lambda o: o.obj_id):
            h, w = o.mask.shape
            out.append(f"{ann.frame} {o.obj_id} {o.class_id} {h} {w} {rle_encode(o.mask)}\n")
    return "".join(out)


def write_file(path, frames):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_lines(frames))


def instance_of(obj_id):
    return obj_id % 1000


# --- configuration -------------------------------------------------------------


def parse_value(text):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def load_config(path):
    """Read ``key = value`` lines; ``#`` starts a comment, blank lines are ignored."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                continue
            if "=" not in line:
                raise ParseError("expected key = value", lineno)
            key, value = (p.strip() for p in line.split("=", 1))
            if not key:
                raise ParseError("empty key", lineno)
            out[key] = parse_value(value)
    return out


@dataclass(frozen=True)
class RunConfig:
    temporal_range: int = 8
    reference_area: float = 1024.0
    beta: float = 0.5
    max_age: int = 2
    margin: float = 0.2
    box_mode: str = "adaptive"
    fixed_alpha: float = 0.5
    roi_size: int = 7
    feature_stride: int = 1
    include_current: bool = False
    embed_dim: int = 16
    projector_seed: int = 0
    identity_seed: int = 0
    noise: str = "none"
    noise_seed: int = 0

    def __post_init__(self):
        if self.temporal_range < 0:
            raise ValueError("temporal_range must be >= 0")
        if self.reference_area <= 0:
            raise ValueError("reference_area must be positive")
        if not -1.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (-1, 1]")
        if self.max_age < 0 or self.margin < 0:
            raise ValueError("max_age and margin must be >= 0")

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(mapping) - set(known))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {}
        for key, value in mapping.items():
            default = known[key].default
            if isinstance(default, bool):
                if not isinstance(value, bool):
                    raise ValueError(f"{key} must be true or false")
            elif isinstance(default, float):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ValueError(f"{key} must be a number")
                value = float(value)
            elif isinstance(default, int):
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ValueError(f"{key} must be an integer")
            else:
                value = str(value)
            kwargs[key] = value
        return cls(**kwargs)

    def as_dict(self):
        return asdict(self)

    def pipeline_params(self):
        from .association import TrackerParams
        from .geometry import FusionParams
        from .pipeline import PipelineParams

        return PipelineParams(
            temporal_range=self.temporal_range,
            fusion=FusionParams(self.reference_area),
            box_mode=self.box_mode,
            fixed_alpha=self.fixed_alpha,
            roi_size=self.roi_size,
            feature_stride=self.feature_stride,
            include_current=self.include_current,
            embed_dim=self.embed_dim,
            projector_seed=self.projector_seed,
            identity_seed=self.identity_seed,
            tracker=TrackerParams(self.beta, self.max_age),
        )


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def cost_model_from_mapping(mapping):
    from .pipeline import CostModel

    known = {f.name for f in fields(CostModel)}
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise ValueError(f"unknown cost keys: {', '.join(unknown)}")
    missing = sorted({"fm", "fl", "conv3d"} - set(mapping))
    if missing:
        raise ValueError(f"missing cost keys: {', '.join(missing)}")
    kwargs = {}
    for k, v in mapping.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError(f"{k} must be a number")
        if k in ("n", "m"):
            if int(v) != v:
                raise ValueError(f"{k} must be an integer")
            v = int(v)
        kwargs[k] = v
    return CostModel(**kwargs)
