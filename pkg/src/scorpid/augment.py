"""Seeded, box-safe image augmentation.

The transform menu: horizontal/vertical flips, 90-degree rotations (both
ways), arbitrary rotations up to +/-45 degrees, shears ("tilt") up to +/-45
degrees, saturation +/-48%, exposure +/-25%, Gaussian blur (sigma 1.75 px)
and 5% pixel noise. Geometric transforms move bounding boxes along with the
pixels; rotation and shear expand the canvas so no content is ever cropped
away, and a transformed box becomes the axis-aligned hull of its mapped
corners.

Every variant is sampled from a generator keyed by (seed, parent id, variant
index), so augmentation is deterministic and order-independent, and each
variant carries a replayable record of the exact transforms applied.

Coordinate conventions: pixel (i, j) covers the unit square with top-left
corner (j, i); a box (x, y, w, h) spans [x, x+w) horizontally and [y, y+h)
vertically. Geometric maps operate on these continuous coordinates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Literal, Sequence

import numpy as np
from PIL import Image

from ._rng import keyed_rng
from .corpus import AnnotatedImage, BoundingBox, Corpus

logger = logging.getLogger(__name__)

Axis = Literal["horizontal", "vertical"]
FlipAxis = Axis
_EPS = 1e-9


# --------------------------------------------------------------------------
# Canvas geometry


def _ceil_eps(v: float) -> int:
    return math.ceil(v - _EPS)


def _floor_eps(v: float) -> int:
    return math.floor(v + _EPS)


def rotated_canvas(width: int, height: int, angle_deg: float) -> tuple[int, int]:
    """Expanded canvas that fully contains the image rotated about its center."""
    rad = math.radians(angle_deg)
    c, s = abs(math.cos(rad)), abs(math.sin(rad))
    return _ceil_eps(width * c + height * s), _ceil_eps(width * s + height * c)


def sheared_canvas(width: int, height: int, angle_deg: float, axis: Axis) -> tuple[int, int]:
    """Expanded canvas for a shear: widened by H*|tan| (or heightened by W*|tan|)."""
    t = abs(math.tan(math.radians(angle_deg)))
    if axis == "horizontal":
        return width + _ceil_eps(height * t), height
    return width, height + _ceil_eps(width * t)


def rotate_point(px: float, py: float, width: int, height: int,
                 angle_deg: float) -> tuple[float, float]:
    """Forward map of one continuous point under center rotation with expansion."""
    rad = math.radians(angle_deg)
    c, s = math.cos(rad), math.sin(rad)
    nw, nh = rotated_canvas(width, height, angle_deg)
    dx, dy = px - width / 2.0, py - height / 2.0
    return (c * dx - s * dy + nw / 2.0, s * dx + c * dy + nh / 2.0)


def shear_point(px: float, py: float, width: int, height: int,
                angle_deg: float, axis: Axis) -> tuple[float, float]:
    """Forward map of one continuous point under an expanding shear."""
    t = math.tan(math.radians(angle_deg))
    if axis == "horizontal":
        return (px + t * py + max(0.0, -t * height), py)
    return (px, py + t * px + max(0.0, -t * width))


# --------------------------------------------------------------------------
# Box transforms


def flip_box(box: BoundingBox, width: int, height: int, axis: Axis) -> BoundingBox:
    if axis == "horizontal":
        return replace(box, x=width - box.x - box.w)
    return replace(box, y=height - box.y - box.h)


def rotate90_box(box: BoundingBox, width: int, height: int,
                 direction: Literal["cw", "ccw"]) -> BoundingBox:
    if direction == "cw":
        return BoundingBox(x=height - box.y - box.h, y=box.x, w=box.h, h=box.w,
                           label=box.label)
    return BoundingBox(x=box.y, y=width - box.x - box.w, w=box.h, h=box.w,
                       label=box.label)


def _corners(box: BoundingBox) -> list[tuple[float, float]]:
    return [
        (box.x, box.y), (box.x + box.w, box.y),
        (box.x, box.y + box.h), (box.x + box.w, box.y + box.h),
    ]


def _hull_to_box(points: Sequence[tuple[float, float]], canvas_w: int, canvas_h: int,
                 label: str) -> BoundingBox | None:
    """Integer axis-aligned hull of mapped corners, clipped to the canvas.

    Returns None when the clipped hull degenerates below 1x1 pixel.
    """
    x0 = max(0, _floor_eps(min(p[0] for p in points)))
    y0 = max(0, _floor_eps(min(p[1] for p in points)))
    x1 = min(canvas_w, _ceil_eps(max(p[0] for p in points)))
    y1 = min(canvas_h, _ceil_eps(max(p[1] for p in points)))
    if x1 - x0 < 1 or y1 - y0 < 1:
        return None
    return BoundingBox(x=x0, y=y0, w=x1 - x0, h=y1 - y0, label=label)


def rotate_box(box: BoundingBox, width: int, height: int,
               angle_deg: float) -> BoundingBox | None:
    nw, nh = rotated_canvas(width, height, angle_deg)
    mapped = [rotate_point(px, py, width, height, angle_deg) for px, py in _corners(box)]
    return _hull_to_box(mapped, nw, nh, box.label)


def shear_box(box: BoundingBox, width: int, height: int, angle_deg: float,
              axis: Axis) -> BoundingBox | None:
    nw, nh = sheared_canvas(width, height, angle_deg, axis)
    mapped = [shear_point(px, py, width, height, angle_deg, axis) for px, py in _corners(box)]
    return _hull_to_box(mapped, nw, nh, box.label)


# --------------------------------------------------------------------------
# Pixel transforms (uint8 RGB arrays, shape (H, W, 3))


def _check_image(img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"expected uint8 RGB array (H, W, 3), got {img.dtype} {img.shape}")


def flip_pixels(img: np.ndarray, axis: Axis) -> np.ndarray:
    _check_image(img)
    return np.fliplr(img).copy() if axis == "horizontal" else np.flipud(img).copy()


def rotate90_pixels(img: np.ndarray, direction: Literal["cw", "ccw"]) -> np.ndarray:
    _check_image(img)
    return np.rot90(img, k=-1 if direction == "cw" else 1).copy()


def _quantize(arr: np.ndarray) -> np.ndarray:
    """Round half up and clamp into uint8 range."""
    return np.clip(np.floor(arr + 0.5), 0, 255).astype(np.uint8)


def rotate_pixels(img: np.ndarray, angle_deg: float,
                  fill: tuple[int, int, int] = (0, 0, 0)) -> np.ndarray:
    """Rotate about the image center onto an expanded canvas (bilinear)."""
    _check_image(img)
    h, w = img.shape[:2]
    nw, nh = rotated_canvas(w, h, angle_deg)
    if angle_deg == 0.0:
        return img.copy()
    rad = math.radians(angle_deg)
    c, s = math.cos(rad), math.sin(rad)
    cx, cy = w / 2.0, h / 2.0
    ncx, ncy = nw / 2.0, nh / 2.0
    # Inverse map on pixel-center coordinates: in = R^T (out - c') + c,
    # expressed on index coordinates (centers at index + 0.5).
    a, b = c, s
    d, e = -s, c
    c0 = c * (0.5 - ncx) + s * (0.5 - ncy) + cx - 0.5
    f0 = -s * (0.5 - ncx) + c * (0.5 - ncy) + cy - 0.5
    out = Image.fromarray(img).transform(
        (nw, nh), Image.AFFINE, (a, b, c0, d, e, f0),
        resample=Image.BILINEAR, fillcolor=tuple(fill),
    )
    return np.asarray(out, dtype=np.uint8)


def shear_pixels(img: np.ndarray, angle_deg: float, axis: Axis,
                 fill: tuple[int, int, int] = (0, 0, 0)) -> np.ndarray:
    """Shear along one axis onto an expanded canvas (bilinear)."""
    _check_image(img)
    h, w = img.shape[:2]
    nw, nh = sheared_canvas(w, h, angle_deg, axis)
    t = math.tan(math.radians(angle_deg))
    if t == 0.0:
        return img.copy()
    # Inverse map on pixel-center coordinates (centers at index + 0.5):
    # horizontal: in_x = out_x - t*(out_y + 0.5) - offset.
    if axis == "horizontal":
        ox = max(0.0, -t * h)
        coeffs = (1.0, -t, -t * 0.5 - ox, 0.0, 1.0, 0.0)
    else:
        oy = max(0.0, -t * w)
        coeffs = (1.0, 0.0, 0.0, -t, 1.0, -t * 0.5 - oy)
    out = Image.fromarray(img).transform(
        (nw, nh), Image.AFFINE, coeffs, resample=Image.BILINEAR, fillcolor=tuple(fill),
    )
    return np.asarray(out, dtype=np.uint8)


def adjust_saturation(img: np.ndarray, delta_frac: float) -> np.ndarray:
    """Scale per-pixel saturation by (1 + delta) with hue preserved.

    Saturation is chroma over value (HSV); channels shrink toward or stretch
    away from the per-pixel maximum, clamped at full saturation. Gray pixels
    are invariant for any delta.
    """
    _check_image(img)
    arr = img.astype(np.float64)
    v = arr.max(axis=2, keepdims=True)
    c = v - arr.min(axis=2, keepdims=True)
    s = np.divide(c, v, out=np.zeros_like(c), where=v > 0)
    s_new = np.clip(s * (1.0 + delta_frac), 0.0, 1.0)
    c_new = s_new * v
    ratio = np.divide(c_new, c, out=np.ones_like(c), where=c > 0)
    return _quantize(v - (v - arr) * ratio)


def adjust_exposure(img: np.ndarray, delta_frac: float) -> np.ndarray:
    """Scale every channel by (1 + delta), round half up, clamp to [0, 255]."""
    _check_image(img)
    return _quantize(img.astype(np.float64) * (1.0 + delta_frac))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian taps with half-width ceil(3*sigma), normalized to sum 1."""
    half = math.ceil(3.0 * sigma)
    xs = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img: np.ndarray, radius_px: float = 1.75) -> np.ndarray:
    """Separable Gaussian blur, sigma = radius_px, clamp-to-edge boundaries."""
    _check_image(img)
    if radius_px < 0:
        raise ValueError("blur radius must be >= 0")
    if radius_px == 0:
        return img.copy()
    k = gaussian_kernel(radius_px)
    out = _convolve_axis(img.astype(np.float64), k, axis=0)
    out = _convolve_axis(out, k, axis=1)
    return _quantize(out)


def _convolve_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    half = len(kernel) // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (half, half)
    padded = np.pad(arr, pad, mode="edge")
    out = np.zeros_like(arr)
    size = arr.shape[axis]
    index: list[slice] = [slice(None)] * arr.ndim
    for i, w in enumerate(kernel):
        index[axis] = slice(i, i + size)
        out += w * padded[tuple(index)]
    return out


def pixel_noise(img: np.ndarray, frac: float = 0.05, seed: int = 0) -> np.ndarray:
    """Replace exactly floor(frac * W * H) distinct pixels with random colors.

    Positions are a seeded uniform draw without replacement; replacement
    colors are uniform per channel, nudged when a draw happens to equal the
    original so that every chosen pixel actually changes.
    """
    _check_image(img)
    if not 0.0 <= frac <= 1.0:
        raise ValueError("noise fraction must be in [0, 1]")
    h, w = img.shape[:2]
    count = math.floor(frac * w * h)
    out = img.copy()
    if count == 0:
        return out
    rng = keyed_rng(seed, "pixel-noise")
    positions = rng.choice(h * w, size=count, replace=False)
    colors = rng.integers(0, 256, size=(count, 3), dtype=np.uint8)
    flat = out.reshape(-1, 3)
    same = (colors == flat[positions]).all(axis=1)
    colors[same, 0] ^= 0x80
    flat[positions] = colors
    return out


# --------------------------------------------------------------------------
# Transform records and sampling


@dataclass(frozen=True)
class TransformStep:
    op: str
    params: dict

    def to_json(self) -> dict:
        return {"op": self.op, "params": self.params}

    @classmethod
    def from_json(cls, doc: dict) -> "TransformStep":
        return cls(op=doc["op"], params=dict(doc["params"]))


@dataclass(frozen=True)
class TransformRecord:
    """The exact transforms one variant applied; replaying them on the parent
    image reproduces the variant bit-exactly."""

    variant_id: str
    parent_id: str
    steps: tuple[TransformStep, ...]

    def to_json(self) -> dict:
        return {
            "id": self.variant_id,
            "parent_id": self.parent_id,
            "steps": [s.to_json() for s in self.steps],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TransformRecord":
        return cls(
            variant_id=doc["id"], parent_id=doc["parent_id"],
            steps=tuple(TransformStep.from_json(s) for s in doc["steps"]),
        )


@dataclass(frozen=True)
class AugmentSpec:
    """The augmentation menu with its magnitudes and the variant count k.

    A magnitude of zero disables its transform; the geometric toggles disable
    theirs. Each enabled transform joins a variant independently with
    probability 1/2, parameters drawn uniformly within the stated bounds.
    """

    flip_h: bool = True
    flip_v: bool = True
    rot90: bool = True
    rot45: bool = True
    tilt45: bool = True
    saturation_pct: float = 48.0
    exposure_pct: float = 25.0
    blur_px: float = 1.75
    noise_frac: float = 0.05
    per_image_variants: int = 2
    seed: int = 0
    fill: tuple[int, int, int] = (0, 0, 0)
    max_retries: int = 8

    def __post_init__(self):
        if not 0.0 <= self.saturation_pct <= 100.0:
            raise ValueError("saturation_pct must be in [0, 100]")
        if not 0.0 <= self.exposure_pct <= 100.0:
            raise ValueError("exposure_pct must be in [0, 100]")
        if not 0.0 <= self.noise_frac <= 1.0:
            raise ValueError("noise_frac must be in [0, 1]")
        if self.blur_px < 0:
            raise ValueError("blur_px must be >= 0")
        if self.per_image_variants < 0:
            raise ValueError("per_image_variants must be >= 0")


def sample_steps(spec: AugmentSpec, parent_id: str, variant_index: int,
                 attempt: int = 0) -> tuple[TransformStep, ...]:
    """Draw one variant's transform list from its keyed generator."""
    rng = keyed_rng(spec.seed, parent_id, variant_index, attempt)
    steps: list[TransformStep] = []

    def coin() -> bool:
        return bool(rng.random() < 0.5)

    if spec.flip_h and coin():
        steps.append(TransformStep("flip", {"axis": "horizontal"}))
    if spec.flip_v and coin():
        steps.append(TransformStep("flip", {"axis": "vertical"}))
    if spec.rot90 and coin():
        direction = "cw" if rng.random() < 0.5 else "ccw"
        steps.append(TransformStep("rotate90", {"direction": direction}))
    if spec.rot45 and coin():
        steps.append(TransformStep("rotate", {
            "angle_deg": float(rng.uniform(-45.0, 45.0)), "fill": list(spec.fill),
        }))
    if spec.tilt45 and coin():
        axis = "horizontal" if rng.random() < 0.5 else "vertical"
        steps.append(TransformStep("shear", {
            "angle_deg": float(rng.uniform(-45.0, 45.0)), "axis": axis,
            "fill": list(spec.fill),
        }))
    if spec.saturation_pct > 0 and coin():
        bound = spec.saturation_pct / 100.0
        steps.append(TransformStep("saturation", {"delta": float(rng.uniform(-bound, bound))}))
    if spec.exposure_pct > 0 and coin():
        bound = spec.exposure_pct / 100.0
        steps.append(TransformStep("exposure", {"delta": float(rng.uniform(-bound, bound))}))
    if spec.blur_px > 0 and coin():
        steps.append(TransformStep("blur", {"radius_px": spec.blur_px}))
    if spec.noise_frac > 0 and coin():
        steps.append(TransformStep("noise", {
            "frac": spec.noise_frac, "seed": int(rng.integers(2**63)),
        }))
    return tuple(steps)


def apply_steps_to_geometry(
    width: int, height: int, boxes: Sequence[BoundingBox], steps: Iterable[TransformStep]
) -> tuple[int, int, list[BoundingBox | None]]:
    """Track canvas size and boxes through the geometric steps.

    A box that degenerates (clipped below 1x1) becomes None and stays None.
    """
    out: list[BoundingBox | None] = list(boxes)
    for step in steps:
        if step.op == "flip":
            out = [flip_box(b, width, height, step.params["axis"]) if b else None
                   for b in out]
        elif step.op == "rotate90":
            out = [rotate90_box(b, width, height, step.params["direction"]) if b else None
                   for b in out]
            width, height = height, width
        elif step.op == "rotate":
            angle = step.params["angle_deg"]
            out = [rotate_box(b, width, height, angle) if b else None for b in out]
            width, height = rotated_canvas(width, height, angle)
        elif step.op == "shear":
            angle, axis = step.params["angle_deg"], step.params["axis"]
            out = [shear_box(b, width, height, angle, axis) if b else None for b in out]
            width, height = sheared_canvas(width, height, angle, axis)
    return width, height, out


def apply_steps_to_pixels(img: np.ndarray, steps: Iterable[TransformStep]) -> np.ndarray:
    """Apply every step to the pixels; replaying a record is bit-exact."""
    out = img
    for step in steps:
        p = step.params
        if step.op == "flip":
            out = flip_pixels(out, p["axis"])
        elif step.op == "rotate90":
            out = rotate90_pixels(out, p["direction"])
        elif step.op == "rotate":
            out = rotate_pixels(out, p["angle_deg"], tuple(p.get("fill", (0, 0, 0))))
        elif step.op == "shear":
            out = shear_pixels(out, p["angle_deg"], p["axis"], tuple(p.get("fill", (0, 0, 0))))
        elif step.op == "saturation":
            out = adjust_saturation(out, p["delta"])
        elif step.op == "exposure":
            out = adjust_exposure(out, p["delta"])
        elif step.op == "blur":
            out = gaussian_blur(out, p["radius_px"])
        elif step.op == "noise":
            out = pixel_noise(out, p["frac"], p["seed"])
        else:
            raise ValueError(f"unknown transform op {step.op!r}")
    return out


# --------------------------------------------------------------------------
# Corpus expansion


@dataclass(frozen=True)
class AugmentResult:
    corpus: Corpus
    transforms: tuple[TransformRecord, ...]
    dropped: tuple[str, ...] = ()


def _variant_path(parent_path: str, index: int) -> str:
    p = Path(parent_path)
    return str(p.with_name(f"{p.stem}-aug{index}.png"))


def augment_corpus(
    corpus: Corpus,
    spec: AugmentSpec,
    image_loader: Callable[[AnnotatedImage], np.ndarray] | None = None,
    image_writer: Callable[[AnnotatedImage, np.ndarray], None] | None = None,
) -> AugmentResult:
    """Expand a corpus with k seeded variants per eligible record.

    Detection corpora must be split first and only train originals are
    augmented (variants inherit the parent's split, so no leakage across
    splits); classification corpora augment every original record. A variant
    whose boxes all fail to survive clipping is re-drawn a bounded number of
    times, then dropped with a warning.

    When an image loader/writer pair is given, variant pixels are produced and
    handed to the writer; otherwise only geometry and transform records are
    computed (pixels can be regenerated later by replaying the records).
    """
    if corpus.kind == "detection":
        unsplit = [r.id for r in corpus if r.origin == "original" and r.split == "unassigned"]
        if unsplit:
            raise ValueError(
                f"detection corpus must be split before augmenting; "
                f"{len(unsplit)} unassigned records (e.g. {unsplit[0]!r})"
            )
        eligible = [r for r in corpus if r.origin == "original" and r.split == "train"]
    else:
        eligible = [r for r in corpus if r.origin == "original"]

    variants: list[AnnotatedImage] = []
    transforms: list[TransformRecord] = []
    dropped: list[str] = []
    for parent in eligible:
        for i in range(1, spec.per_image_variants + 1):
            variant_id = f"{parent.id}-aug{i}"
            accepted = None
            for attempt in range(spec.max_retries + 1):
                steps = sample_steps(spec, parent.id, i, attempt)
                w, h, boxes = apply_steps_to_geometry(
                    parent.width, parent.height, parent.boxes, steps)
                if parent.boxes and any(b is None for b in boxes):
                    continue
                accepted = (steps, w, h, [b for b in boxes if b is not None])
                break
            if accepted is None:
                logger.warning("dropping variant %s: boxes degenerate after %d attempts",
                               variant_id, spec.max_retries + 1)
                dropped.append(variant_id)
                continue
            steps, w, h, boxes = accepted
            record = AnnotatedImage(
                id=variant_id,
                path=_variant_path(parent.path, i),
                width=w, height=h,
                split=parent.split,
                origin="augmented",
                parent_id=parent.id,
                boxes=tuple(boxes),
                class_label=parent.class_label,
            )
            if image_loader is not None and image_writer is not None:
                pixels = apply_steps_to_pixels(image_loader(parent), steps)
                if pixels.shape[:2] != (h, w):
                    raise AssertionError(
                        f"pixel canvas {pixels.shape[:2]} disagrees with geometry {(h, w)}")
                image_writer(record, pixels)
            variants.append(record)
            transforms.append(TransformRecord(variant_id, parent.id, steps))

    merged = Corpus(tuple(corpus.records) + tuple(variants), corpus.kind)
    return AugmentResult(corpus=merged, transforms=tuple(transforms), dropped=tuple(dropped))
