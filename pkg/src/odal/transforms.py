"""Deterministic augmentation planning and pixel-level application.

Plans are pure data: (manifest, level, seed) always yields the same plan, and
a stored plan replays to the same pixels later.  Geometric transforms use
nearest-neighbour sampling with black fill; only horizontal flips touch
labels, rewriting positions through the ontology mirror map.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid
from .images import RgbImage, image_from_array
from .labels import FrameLabel, GroundTruthObject
from .ontology import CabinOntology, mirror_position

LEVELS = ("none", "basic", "extensive")


@dataclass(frozen=True)
class TransformRanges:
    """Sampling ranges; defaults are mild and label-preserving."""

    rotate_deg: float = 15.0
    hflip_p: float = 0.5
    brightness_lo: float = 0.7
    brightness_hi: float = 1.3
    shear_deg: float = 10.0
    translate_frac: float = 0.1
    sharpness_lo: float = 0.5
    sharpness_hi: float = 2.0

    def to_dict(self) -> dict:
        return {
            "rotate_deg": self.rotate_deg,
            "hflip_p": self.hflip_p,
            "brightness": [self.brightness_lo, self.brightness_hi],
            "shear_deg": self.shear_deg,
            "translate_frac": self.translate_frac,
            "sharpness": [self.sharpness_lo, self.sharpness_hi],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TransformRanges":
        return cls(
            rotate_deg=doc.get("rotate_deg", 15.0),
            hflip_p=doc.get("hflip_p", 0.5),
            brightness_lo=doc.get("brightness", [0.7, 1.3])[0],
            brightness_hi=doc.get("brightness", [0.7, 1.3])[1],
            shear_deg=doc.get("shear_deg", 10.0),
            translate_frac=doc.get("translate_frac", 0.1),
            sharpness_lo=doc.get("sharpness", [0.5, 2.0])[0],
            sharpness_hi=doc.get("sharpness", [0.5, 2.0])[1],
        )


@dataclass(frozen=True)
class TransformSpec:
    kind: str  # rotate | hflip | brightness | affine | sharpness
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        known = {"rotate", "hflip", "brightness", "affine", "sharpness"}
        if self.kind not in known:
            raise ConfigInvalid(f"unknown transform kind {self.kind!r}")


@dataclass(frozen=True)
class PlanItem:
    frame_id: str
    transforms: tuple[TransformSpec, ...]


@dataclass(frozen=True)
class AugmentationPlan:
    level: str
    seed: int
    ranges: TransformRanges
    items: tuple[PlanItem, ...]


def plan_augmentations(
    manifest,
    level: str | None,
    seed: int,
    ranges: TransformRanges = TransformRanges(),
) -> AugmentationPlan:
    """Sample one ordered transform list per frame from a seeded stream."""
    level = level or "none"
    if level not in LEVELS:
        raise ConfigInvalid(f"unknown augmentation level {level!r}")
    rng = random.Random(f"augplan:{seed}")
    items = []
    for frame in manifest.frames:
        specs: list[TransformSpec] = []
        if level in ("basic", "extensive"):
            angle = rng.uniform(-ranges.rotate_deg, ranges.rotate_deg)
            specs.append(TransformSpec("rotate", {"angle": angle}))
            if rng.random() < ranges.hflip_p:
                specs.append(TransformSpec("hflip", {}))
            factor = rng.uniform(ranges.brightness_lo, ranges.brightness_hi)
            specs.append(TransformSpec("brightness", {"factor": factor}))
        if level == "extensive":
            shear = rng.uniform(-ranges.shear_deg, ranges.shear_deg)
            tx = rng.uniform(-ranges.translate_frac, ranges.translate_frac)
            ty = rng.uniform(-ranges.translate_frac, ranges.translate_frac)
            specs.append(TransformSpec("affine", {"shear": shear, "tx": tx, "ty": ty}))
            sharp = rng.uniform(ranges.sharpness_lo, ranges.sharpness_hi)
            specs.append(TransformSpec("sharpness", {"factor": sharp}))
        items.append(PlanItem(frame_id=frame.frame_id, transforms=tuple(specs)))
    return AugmentationPlan(level=level, seed=seed, ranges=ranges, items=tuple(items))


def plan_to_json(plan: AugmentationPlan) -> str:
    doc = {
        "level": plan.level,
        "seed": plan.seed,
        "ranges": plan.ranges.to_dict(),
        "items": [
            {
                "frame_id": item.frame_id,
                "transforms": [
                    {"kind": t.kind, "params": t.params} for t in item.transforms
                ],
            }
            for item in plan.items
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def plan_from_json(text: str) -> AugmentationPlan:
    doc = json.loads(text)
    return AugmentationPlan(
        level=doc["level"],
        seed=doc["seed"],
        ranges=TransformRanges.from_dict(doc["ranges"]),
        items=tuple(
            PlanItem(
                frame_id=item["frame_id"],
                transforms=tuple(
                    TransformSpec(t["kind"], t["params"]) for t in item["transforms"]
                ),
            )
            for item in doc["items"]
        ),
    )


def load_plan(path: str | Path) -> AugmentationPlan:
    return plan_from_json(Path(path).read_text("utf-8"))


def _sample_nearest(arr: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    h, w = arr.shape[:2]
    ix = np.rint(sx).astype(np.int64)
    iy = np.rint(sy).astype(np.int64)
    inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    out = np.zeros_like(arr)
    out[inside] = arr[iy[inside], ix[inside]]
    return out


def _dst_grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    return xx.astype(np.float64), yy.astype(np.float64)


def _rotate(arr: np.ndarray, angle_deg: float) -> np.ndarray:
    h, w = arr.shape[:2]
    theta = math.radians(angle_deg)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    xx, yy = _dst_grid(h, w)
    dx, dy = xx - cx, yy - cy
    cos, sin = math.cos(theta), math.sin(theta)
    # inverse rotation of each destination pixel back to its source
    sx = cos * dx + sin * dy + cx
    sy = -sin * dx + cos * dy + cy
    return _sample_nearest(arr, sx, sy)


def _affine(arr: np.ndarray, shear_deg: float, tx: float, ty: float) -> np.ndarray:
    h, w = arr.shape[:2]
    t = math.tan(math.radians(shear_deg))
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    xx, yy = _dst_grid(h, w)
    sy = yy - ty * h
    sx = xx - tx * w - t * (sy - cy)
    return _sample_nearest(arr, sx, sy)


def _brightness(arr: np.ndarray, factor: float) -> np.ndarray:
    scaled = np.rint(arr.astype(np.float64) * factor)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def _sharpness(arr: np.ndarray, factor: float) -> np.ndarray:
    # blend against a 3x3 smooth; factor 1 is the identity by construction
    padded = np.pad(arr.astype(np.float64), ((1, 1), (1, 1), (0, 0)), mode="edge")
    acc = np.zeros_like(arr, dtype=np.float64)
    weights = {(0, 0): 5.0}
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            wgt = weights.get((dy, dx), 1.0)
            acc += wgt * padded[1 + dy : 1 + dy + arr.shape[0], 1 + dx : 1 + dx + arr.shape[1]]
    blurred = acc / 13.0
    out = blurred + factor * (arr.astype(np.float64) - blurred)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def apply_transform(
    image: RgbImage,
    label: FrameLabel,
    spec: TransformSpec,
    ontology: CabinOntology,
    mirror_labels: bool = True,
) -> tuple[RgbImage, FrameLabel]:
    """Apply one transform; returns the new image and (possibly rewritten) label."""
    arr = image.to_array()
    if spec.kind == "rotate":
        arr = _rotate(arr, float(spec.params["angle"]))
    elif spec.kind == "hflip":
        arr = arr[:, ::-1].copy()
        if mirror_labels:
            objects = {
                cls: GroundTruthObject(
                    position=mirror_position(obj.position, ontology),
                    is_visible=obj.is_visible,
                )
                for cls, obj in label.objects.items()
            }
            label = FrameLabel(
                frame_id=label.frame_id, image_ref=label.image_ref, objects=objects
            )
    elif spec.kind == "brightness":
        arr = _brightness(arr, float(spec.params["factor"]))
    elif spec.kind == "affine":
        arr = _affine(
            arr,
            float(spec.params["shear"]),
            float(spec.params["tx"]),
            float(spec.params["ty"]),
        )
    elif spec.kind == "sharpness":
        arr = _sharpness(arr, float(spec.params["factor"]))
    return image_from_array(np.ascontiguousarray(arr)), label


def apply_item(
    image: RgbImage,
    label: FrameLabel,
    item: PlanItem,
    ontology: CabinOntology,
    mirror_labels: bool = True,
) -> tuple[RgbImage, FrameLabel]:
    for spec in item.transforms:
        image, label = apply_transform(image, label, spec, ontology, mirror_labels)
    return image, label
