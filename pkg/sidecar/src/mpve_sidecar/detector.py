"""Builtin open-vocabulary detector stand-in ("color-v1").

Only understands color words, and only over videos supplied as frame-image
directories: for each caption containing a known color, every stride-th
frame is masked for that color and the mask's bounding box is reported
with its fill density as confidence.  Deterministic, dependency-light, and
good enough to exercise the whole detection wire contract and the
downstream segment/crop machinery.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np
from PIL import Image

# color -> (channel predicate low, high) per RGB channel
COLOR_RULES: dict[str, tuple[tuple[int, int], tuple[int, int], tuple[int, int]]] = {
    "red": ((150, 256), (0, 110), (0, 110)),
    "green": ((0, 110), (150, 256), (0, 110)),
    "blue": ((0, 110), (0, 110), (150, 256)),
    "yellow": ((160, 256), (160, 256), (0, 120)),
    "white": ((200, 256), (200, 256), (200, 256)),
    "black": ((0, 60), (0, 60), (0, 60)),
}

MIN_PIXELS = 25
FRAME_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")


class VideoUnreadable(Exception):
    pass


def caption_color(caption: str) -> Optional[str]:
    for word in caption.lower().split():
        if word in COLOR_RULES:
            return word
    return None


def _frame_paths(video_ref: str) -> list[str]:
    if not os.path.isdir(video_ref):
        raise VideoUnreadable(f"{video_ref!r} is not a readable frame directory")
    names = sorted(
        n for n in os.listdir(video_ref) if n.lower().endswith(FRAME_EXTENSIONS)
    )
    if not names:
        raise VideoUnreadable(f"no frame images under {video_ref!r}")
    return [os.path.join(video_ref, n) for n in names]


def _mask_box(arr: np.ndarray, color: str) -> Optional[tuple[tuple[int, int, int, int], float]]:
    (r0, r1), (g0, g1), (b0, b1) = COLOR_RULES[color]
    mask = (
        (arr[:, :, 0] >= r0) & (arr[:, :, 0] < r1)
        & (arr[:, :, 1] >= g0) & (arr[:, :, 1] < g1)
        & (arr[:, :, 2] >= b0) & (arr[:, :, 2] < b1)
    )
    count = int(mask.sum())
    if count < MIN_PIXELS:
        return None
    ys, xs = np.nonzero(mask)
    box = (int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
    area = (box[2] - box[0]) * (box[3] - box[1])
    confidence = min(1.0, count / area)
    return box, confidence


class ColorDetector:
    def detect(self, video_ref: str, captions: list[str], stride: int = 1) -> list[dict]:
        if stride < 1:
            raise ValueError("stride must be >= 1")
        paths = _frame_paths(video_ref)
        wanted = [(c, caption_color(c)) for c in captions]
        out: list[dict] = []
        for frame_index in range(0, len(paths), stride):
            arr = None
            for caption, color in wanted:
                if color is None:
                    continue
                if arr is None:
                    with Image.open(paths[frame_index]) as img:
                        arr = np.asarray(img.convert("RGB"))
                hit = _mask_box(arr, color)
                if hit is None:
                    continue
                box, confidence = hit
                out.append(
                    {
                        "frame_index": frame_index,
                        "caption": caption,
                        "box": list(box),
                        "confidence": round(confidence, 6),
                    }
                )
        return out
