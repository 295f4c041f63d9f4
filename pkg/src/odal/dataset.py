"""Dataset manifests: directory loading, splitting, upsampling, fixtures.

A dataset directory holds image files with sibling ``<frame_id>.json`` label
files.  Manifests are value objects sorted by frame id, so every derived
operation is reproducible from (input, seed) alone.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigInvalid, EmptyDataset, MalformedLabel, MissingLabel
from .images import RgbImage, write_ppm
from .labels import FrameLabel, GroundTruthObject, label_from_document, label_to_document
from .ontology import CabinOntology

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".ppm", ".png", ".jpg", ".jpeg", ".bmp")


@dataclass(frozen=True)
class DatasetManifest:
    frames: tuple[FrameLabel, ...]
    source_dir: str
    ontology_ref: str

    def __post_init__(self) -> None:
        ids = [f.frame_id for f in self.frames]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise MalformedLabel(f"duplicate frame ids: {dupes[:5]}")
        if ids != sorted(ids):
            raise MalformedLabel("manifest frames must be sorted by frame_id")

    def frame_map(self) -> dict[str, FrameLabel]:
        return {f.frame_id: f for f in self.frames}

    def visible_class_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for frame in self.frames:
            for cls, obj in frame.objects.items():
                if obj.is_visible:
                    counts[cls] = counts.get(cls, 0) + 1
        return counts


def _sorted_manifest(
    frames: list[FrameLabel], source_dir: str, ontology_ref: str
) -> DatasetManifest:
    frames = sorted(frames, key=lambda f: f.frame_id)
    return DatasetManifest(
        frames=tuple(frames), source_dir=source_dir, ontology_ref=ontology_ref
    )


def load_manifest(directory: str | Path, ontology: CabinOntology) -> DatasetManifest:
    """Scan a dataset directory into a manifest.

    Every image file must have a sibling ``<stem>.json`` label; label files
    without an image are kept (with a warning) so that label-only sets can
    still be judged and scored.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise EmptyDataset(f"{directory} is not a directory")
    images = {
        p.stem: p for p in sorted(directory.iterdir()) if p.suffix.lower() in IMAGE_EXTENSIONS
    }
    labels = {
        p.stem: p
        for p in sorted(directory.glob("*.json"))
        if p.stem not in ("manifest", "plan", "run_manifest")
    }
    for stem in sorted(set(images) - set(labels)):
        raise MissingLabel(f"image {images[stem].name} has no label file")
    frames = []
    for stem, label_path in labels.items():
        try:
            doc = json.loads(label_path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedLabel(f"frame {stem}: label is not valid JSON: {exc}") from exc
        image_path = images.get(stem)
        if image_path is None:
            image_path = directory / f"{stem}.ppm"
            log.warning("frame %s has a label but no image file", stem)
        frames.append(
            label_from_document(doc, stem, str(image_path), ontology)
        )
    if not frames:
        raise EmptyDataset(f"no labeled frames found in {directory}")
    return _sorted_manifest(frames, str(directory), ontology.checksum)


def manifest_to_json(manifest: DatasetManifest) -> str:
    """Export as a single JSON array of frame records."""
    doc = [
        {
            "frame_id": f.frame_id,
            "image_ref": f.image_ref,
            "objects": label_to_document(f),
        }
        for f in manifest.frames
    ]
    return json.dumps(doc, indent=2) + "\n"


def manifest_from_json(
    text: str, ontology: CabinOntology, source_dir: str = ""
) -> DatasetManifest:
    doc = json.loads(text)
    if not isinstance(doc, list):
        raise MalformedLabel("manifest export must be a JSON array")
    frames = [
        label_from_document(
            entry["objects"], entry["frame_id"], entry.get("image_ref", ""), ontology
        )
        for entry in doc
    ]
    if not frames:
        raise EmptyDataset("manifest export holds no frames")
    return _sorted_manifest(frames, source_dir, ontology.checksum)


def load_manifest_file(
    path: str | Path, ontology: CabinOntology
) -> DatasetManifest:
    path = Path(path)
    return manifest_from_json(path.read_text("utf-8"), ontology, str(path.parent))


def split_dataset(
    manifest: DatasetManifest, train_fraction: float, seed: int
) -> tuple[DatasetManifest, DatasetManifest]:
    """Seeded shuffle, then floor(N * fraction) frames go to train."""
    if not 0.0 <= train_fraction <= 1.0:
        raise ConfigInvalid(f"train fraction {train_fraction} outside [0, 1]")
    if not manifest.frames:
        raise EmptyDataset("cannot split an empty manifest")
    frames = list(manifest.frames)
    random.Random(f"split:{seed}").shuffle(frames)
    n_train = int(len(frames) * train_fraction)
    if n_train == 0 or n_train == len(frames):
        log.warning(
            "degenerate split: %d train / %d val from %d frames",
            n_train, len(frames) - n_train, len(frames),
        )
    train = _sorted_manifest(frames[:n_train], manifest.source_dir, manifest.ontology_ref)
    val = _sorted_manifest(frames[n_train:], manifest.source_dir, manifest.ontology_ref)
    return train, val


def upsample_rare(
    manifest: DatasetManifest, min_count: int, seed: int
) -> DatasetManifest:
    """Duplicate frames until every represented class appears >= min_count times.

    Classes with zero visible occurrences cannot be helped and are only
    warned about.  Duplicates get ``+dupN`` suffixed frame ids; originals are
    always retained, and counts include duplicates added for earlier classes.
    """
    counts = manifest.visible_class_counts()
    frames = list(manifest.frames)
    dup_serial: dict[str, int] = {}
    all_classes = sorted(
        {cls for f in manifest.frames for cls in f.objects}
    )
    for cls in all_classes:
        if counts.get(cls, 0) == 0:
            log.warning("class %s has no visible occurrences; cannot upsample", cls)
            continue
        holders = [f for f in manifest.frames if f.objects.get(cls) and f.objects[cls].is_visible]
        random.Random(f"upsample:{seed}:{cls}").shuffle(holders)
        i = 0
        while counts[cls] < min_count:
            source = holders[i % len(holders)]
            i += 1
            serial = dup_serial.get(source.frame_id, 0) + 1
            dup_serial[source.frame_id] = serial
            dup = FrameLabel(
                frame_id=f"{source.frame_id}+dup{serial}",
                image_ref=source.image_ref,
                objects=source.objects,
            )
            frames.append(dup)
            for dup_cls, obj in dup.objects.items():
                if obj.is_visible:
                    counts[dup_cls] = counts.get(dup_cls, 0) + 1
    return _sorted_manifest(frames, manifest.source_dir, manifest.ontology_ref)


def generate_fixture(
    n_frames: int,
    ontology: CabinOntology,
    seed: int,
    out_dir: str | Path | None = None,
    image_size: tuple[int, int] = (96, 72),
) -> DatasetManifest:
    """Create a synthetic labeled dataset, optionally written to disk.

    Frames carry 0-4 visible objects with a skewed position distribution and
    an occasional invisible object.  Images are flat-colour PPMs.  Everything
    is a pure function of (n_frames, ontology, seed, image_size).
    """
    rng = random.Random(f"fixture:{seed}")
    width, height = image_size
    positions = [p for p in ontology.positions if p != ontology.undefined_label]
    pos_weights = [1.0 / (i + 1) for i in range(len(positions))]
    positions.append(ontology.undefined_label)
    pos_weights.append(0.05 * sum(pos_weights))
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    frames = []
    for i in range(n_frames):
        frame_id = f"frame{i:05d}"
        n_visible = rng.choices([0, 1, 2, 3, 4], weights=[10, 30, 30, 20, 10])[0]
        n_extra = 1 if rng.random() < 0.2 else 0
        classes = rng.sample(ontology.classes, min(n_visible + n_extra, len(ontology.classes)))
        objects: dict[str, GroundTruthObject] = {}
        for j, cls in enumerate(classes):
            objects[cls] = GroundTruthObject(
                position=rng.choices(positions, weights=pos_weights)[0],
                is_visible=j < n_visible,
            )
        image_path = (out / f"{frame_id}.ppm") if out is not None else Path(f"{frame_id}.ppm")
        label = FrameLabel(
            frame_id=frame_id, image_ref=str(image_path), objects=objects
        )
        frames.append(label)
        if out is not None:
            color = bytes([rng.randrange(256), rng.randrange(256), rng.randrange(256)])
            image = RgbImage(width=width, height=height, pixels=color * (width * height))
            write_ppm(image_path, image)
            (out / f"{frame_id}.json").write_text(
                json.dumps(label_to_document(label), indent=2) + "\n", "utf-8"
            )
    return _sorted_manifest(
        frames, str(out) if out is not None else "<memory>", ontology.checksum
    )
