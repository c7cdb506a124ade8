"""Keyframe extraction: from detections to a segment, crop, and prior package.

The retrieved video's caption units are matched back against the prompt
units; the surviving units' phrases become detection captions for an
external open-set detector (sidecar or fixture file — detection never runs
in-process).  Detector output is then reduced to the densest temporal run
and the union crop of its boxes, from which n keyframes are sampled and
exported as a self-contained package for downstream model tuning.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from typing import Optional, Sequence

from mpve.matching import RankedMatch, ScoreParts
from mpve.semantic import SemanticUnit, unit_pair_sim

logger = logging.getLogger(__name__)


class ExtractorError(Exception):
    pass


class NoDetections(ExtractorError):
    """Nothing detected above threshold; callers fall back to full frame."""


class SegmentTooShort(ExtractorError):
    def __init__(self, length: int, n: int):
        super().__init__(f"segment of {length} frames cannot yield {n} distinct keyframes")
        self.length = length
        self.n = n


class FrameAccessorFailure(ExtractorError):
    """Pixel export failed; the JSON package is still written."""


@dataclass(frozen=True)
class ExtractorConfig:
    det_threshold: float = 0.35
    max_gap: int = 5
    min_len: int = 16
    pad_frac: float = 0.10
    tau_unit: float = 1.5
    aspect_w: int = 576
    aspect_h: int = 320
    n_frames: int = 16

    def __post_init__(self):
        if not 0.0 <= self.tau_unit <= 3.0:
            raise ValueError("tau_unit must lie in [0, 3]")
        if self.det_threshold < 0 or self.max_gap < 0 or self.pad_frac < 0:
            raise ValueError("det_threshold, max_gap and pad_frac must be non-negative")
        if self.min_len < 1 or self.n_frames < 1:
            raise ValueError("min_len and n_frames must be >= 1")
        if self.aspect_w <= 0 or self.aspect_h <= 0:
            raise ValueError("aspect ratio sides must be positive")

    @property
    def aspect(self) -> float:
        return self.aspect_w / self.aspect_h

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExtractorConfig":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class VideoMeta:
    frame_count: int
    width: int
    height: int
    fps: Optional[float] = None

    def __post_init__(self):
        if self.frame_count < 1 or self.width < 1 or self.height < 1:
            raise ValueError("frame_count, width and height must be >= 1")


@dataclass(frozen=True)
class Detection:
    frame_index: int
    caption: str
    box: tuple[float, float, float, float]  # x0, y0, x1, y1 in pixels
    confidence: float

    def __post_init__(self):
        x0, y0, x1, y1 = self.box
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"degenerate box {self.box}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


def detections_from_json(text: str) -> list[Detection]:
    """Parse the fixture/sidecar detection format: a JSON array of
    {frame_index, caption, box: [x0, y0, x1, y1], confidence}."""
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError("detection JSON must be an array")
    out = []
    for item in data:
        out.append(
            Detection(
                frame_index=int(item["frame_index"]),
                caption=str(item["caption"]),
                box=tuple(float(v) for v in item["box"]),
                confidence=float(item["confidence"]),
            )
        )
    return out


@dataclass(frozen=True)
class UnitMatch:
    """A retrieved-caption unit that matched the prompt, with its phrase."""

    unit: SemanticUnit
    caption: str
    similarity: float


def match_reference_units(
    reference_units: Sequence[SemanticUnit],
    prompt_units: Sequence[SemanticUnit],
    tau_unit: float,
) -> list[UnitMatch]:
    """Subset of the retrieved caption's units that closely match any
    prompt unit (best pair similarity >= tau_unit), each carrying its
    reconstructed phrase for use as a detection caption."""
    if not 0.0 <= tau_unit <= 3.0:
        raise ValueError("tau_unit must lie in [0, 3]")
    out = []
    for unit in reference_units:
        if not prompt_units:
            break
        best = max(unit_pair_sim(unit, p) for p in prompt_units)
        if best >= tau_unit:
            out.append(UnitMatch(unit=unit, caption=unit.phrase(), similarity=best))
    return out


# --- segment and crop selection ----------------------------------------------

def _runs(frames: list[int], max_gap: int) -> list[tuple[int, int]]:
    runs = []
    start = prev = frames[0]
    for f in frames[1:]:
        if f - prev - 1 <= max_gap:
            prev = f
            continue
        runs.append((start, prev))
        start = prev = f
    runs.append((start, prev))
    return runs


def _extend_centered(start: int, end: int, min_len: int, frame_count: int) -> tuple[int, int]:
    length = end - start + 1
    if length >= min_len:
        return start, end
    need = min(min_len, frame_count) - length
    start -= need // 2
    end += need - need // 2
    if start < 0:
        end += -start
        start = 0
    if end > frame_count - 1:
        start -= end - (frame_count - 1)
        end = frame_count - 1
    return max(0, start), end


def _fit_aspect(
    box: tuple[float, float, float, float], ratio: float, width: int, height: int
) -> tuple[float, float, float, float]:
    """Grow a box to the target aspect ratio, centered, sliding it back
    inside the frame.  Capped at the frame size, so when the frame itself
    cannot host the ratio at the needed size the output keeps the frame cap
    in that dimension."""
    x0, y0, x1, y1 = box
    w, h = x1 - x0, y1 - y0
    tw = max(w, h * ratio)
    th = tw / ratio
    if tw > width:
        tw = width
        th = tw / ratio
    if th > height:
        th = height
        tw = th * ratio
    cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    nx0, ny0 = cx - tw / 2.0, cy - th / 2.0
    nx0 = min(max(nx0, 0.0), width - tw)
    ny0 = min(max(ny0, 0.0), height - th)
    return nx0, ny0, nx0 + tw, ny0 + th


def segment_detections(
    detections: Sequence[Detection], meta: VideoMeta, cfg: ExtractorConfig
) -> tuple[tuple[int, int], tuple[int, int, int, int]]:
    """Reduce detections to (segment, crop).

    Keeps detections at or above the confidence threshold, merges their
    frames into runs bridging gaps of up to max_gap frames, picks the run
    with the largest confidence sum (earliest on ties), extends it centered
    to min_len frames, and crops to the padded union of the run's boxes
    grown to the target aspect ratio.  The crop always contains the raw
    box union, even when that conflicts with the exact ratio at frame
    boundaries.
    """
    for det in detections:
        if det.frame_index >= meta.frame_count:
            raise ValueError(
                f"detection on frame {det.frame_index} beyond video of {meta.frame_count} frames"
            )
    surviving = [d for d in detections if d.confidence >= cfg.det_threshold]
    if not surviving:
        raise NoDetections("no detection at or above the confidence threshold")

    frames = sorted({d.frame_index for d in surviving})
    runs = _runs(frames, cfg.max_gap)
    scores = []
    for lo, hi in runs:
        scores.append(sum(d.confidence for d in surviving if lo <= d.frame_index <= hi))
    best = max(range(len(runs)), key=lambda i: (scores[i], -runs[i][0]))
    run_lo, run_hi = runs[best]
    segment = _extend_centered(run_lo, run_hi, cfg.min_len, meta.frame_count)

    run_boxes = [d.box for d in surviving if run_lo <= d.frame_index <= run_hi]
    ux0 = min(b[0] for b in run_boxes)
    uy0 = min(b[1] for b in run_boxes)
    ux1 = max(b[2] for b in run_boxes)
    uy1 = max(b[3] for b in run_boxes)
    pad_x = cfg.pad_frac * (ux1 - ux0)
    pad_y = cfg.pad_frac * (uy1 - uy0)
    padded = (
        max(0.0, ux0 - pad_x),
        max(0.0, uy0 - pad_y),
        min(float(meta.width), ux1 + pad_x),
        min(float(meta.height), uy1 + pad_y),
    )
    fitted = _fit_aspect(padded, cfg.aspect, meta.width, meta.height)
    # containment of the raw union wins over the exact ratio
    fx0 = min(fitted[0], ux0)
    fy0 = min(fitted[1], uy0)
    fx1 = max(fitted[2], ux1)
    fy1 = max(fitted[3], uy1)
    crop = (
        int(math.floor(fx0)),
        int(math.floor(fy0)),
        min(int(math.ceil(fx1)), meta.width),
        min(int(math.ceil(fy1)), meta.height),
    )
    return segment, crop


@dataclass(frozen=True)
class KeyframeSpec:
    video_ref: str
    segment: tuple[int, int]
    crop: tuple[int, int, int, int]
    frame_indices: tuple[int, ...]
    n: int

    def __post_init__(self):
        start, end = self.segment
        if len(self.frame_indices) != self.n:
            raise ValueError("frame_indices length must equal n")
        for idx in self.frame_indices:
            if not start <= idx <= end:
                raise ValueError(f"frame index {idx} outside segment {self.segment}")

    def to_json_dict(self) -> dict:
        return {
            "video_ref": self.video_ref,
            "segment": list(self.segment),
            "crop": list(self.crop),
            "frame_indices": list(self.frame_indices),
            "n": self.n,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "KeyframeSpec":
        return cls(
            video_ref=data["video_ref"],
            segment=tuple(data["segment"]),
            crop=tuple(data["crop"]),
            frame_indices=tuple(data["frame_indices"]),
            n=data["n"],
        )


def plan_keyframes(
    segment: tuple[int, int],
    crop: tuple[int, int, int, int],
    meta: VideoMeta,
    n: int,
    video_ref: str = "",
) -> KeyframeSpec:
    """Sample n frame indices uniformly across the segment (endpoints
    included for n >= 2).  Deterministic; raises SegmentTooShort when the
    segment has fewer than n frames."""
    start, end = segment
    length = end - start + 1
    if length < n:
        raise SegmentTooShort(length, n)
    if n == 1:
        indices = (start,)
    else:
        step = (end - start) / (n - 1)
        indices = tuple(int(math.floor(start + k * step + 0.5)) for k in range(n))
    return KeyframeSpec(
        video_ref=video_ref, segment=segment, crop=crop, frame_indices=indices, n=n
    )


@dataclass(frozen=True)
class PriorPackage:
    """Everything a downstream tuner needs about one retrieved motion prior."""

    prompt: str
    match: RankedMatch
    matched_captions: tuple[str, ...]
    keyframes: KeyframeSpec
    created_at: str
    engine_version: str

    def __post_init__(self):
        if not self.matched_captions:
            raise ValueError("matched_captions must be non-empty")

    def to_json_dict(self, extractor_cfg: Optional[ExtractorConfig] = None) -> dict:
        out = {
            "prompt": self.prompt,
            "match": self.match.to_json_dict(),
            "matched_captions": list(self.matched_captions),
            "keyframes": self.keyframes.to_json_dict(),
            "created_at": self.created_at,
            "engine_version": self.engine_version,
        }
        if extractor_cfg is not None:
            out["extractor_config"] = json.loads(extractor_cfg.to_json())
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "PriorPackage":
        m = data["match"]
        match = RankedMatch(
            entry_id=m["entry_id"],
            score=m["score"],
            parts=ScoreParts(**m["parts"]),
            survived_rounds=m["survived_rounds"],
        )
        return cls(
            prompt=data["prompt"],
            match=match,
            matched_captions=tuple(data["matched_captions"]),
            keyframes=KeyframeSpec.from_json_dict(data["keyframes"]),
            created_at=data["created_at"],
            engine_version=data["engine_version"],
        )


def now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class ImageDirAccessor:
    """Frame accessor over a directory of image files, one per frame,
    ordered by filename.  Serves both probing and pixel export; videos
    proper go through an external extraction tool upstream."""

    EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")

    def __init__(self, root: str):
        self.root = root
        try:
            names = sorted(
                f for f in os.listdir(root) if f.lower().endswith(self.EXTENSIONS)
            )
        except OSError as exc:
            raise FrameAccessorFailure(f"cannot list frame directory {root}: {exc}") from exc
        if not names:
            raise FrameAccessorFailure(f"no frame images under {root}")
        self.paths = [os.path.join(root, n) for n in names]

    def probe_meta(self, fps: Optional[float] = None) -> VideoMeta:
        from PIL import Image

        with Image.open(self.paths[0]) as img:
            width, height = img.size
        return VideoMeta(frame_count=len(self.paths), width=width, height=height, fps=fps)

    def get_frame(self, video_ref: str, frame_index: int):
        from PIL import Image

        if not 0 <= frame_index < len(self.paths):
            raise FrameAccessorFailure(f"frame {frame_index} out of range")
        try:
            with Image.open(self.paths[frame_index]) as img:
                return img.convert("RGB").copy()
        except OSError as exc:
            raise FrameAccessorFailure(f"cannot read frame {frame_index}: {exc}") from exc


def export_package(
    package: PriorPackage,
    out_dir: str,
    accessor=None,
    extractor_cfg: Optional[ExtractorConfig] = None,
) -> str:
    """Write package.json and keyframes.json under out_dir; with a frame
    accessor also write the cropped frames as frames/NNNN.png.

    Raises FrameAccessorFailure only after the JSON files are safely on
    disk, so a broken accessor degrades to a metadata-only package.
    Returns the package.json path.
    """
    os.makedirs(out_dir, exist_ok=True)
    spec = package.keyframes
    keyframes_path = os.path.join(out_dir, "keyframes.json")
    with open(keyframes_path, "w", encoding="utf-8") as fh:
        json.dump(spec.to_json_dict(), fh, indent=2)
        fh.write("\n")
    package_path = os.path.join(out_dir, "package.json")
    with open(package_path, "w", encoding="utf-8") as fh:
        json.dump(package.to_json_dict(extractor_cfg), fh, indent=2)
        fh.write("\n")

    if accessor is not None:
        frames_dir = os.path.join(out_dir, "frames")
        os.makedirs(frames_dir, exist_ok=True)
        x0, y0, x1, y1 = spec.crop
        try:
            for seq, frame_index in enumerate(spec.frame_indices):
                img = accessor.get_frame(spec.video_ref, frame_index)
                img.crop((x0, y0, x1, y1)).save(
                    os.path.join(frames_dir, f"{seq:04d}.png")
                )
        except FrameAccessorFailure:
            raise
        except Exception as exc:
            raise FrameAccessorFailure(f"frame export failed: {exc}") from exc
    return package_path
