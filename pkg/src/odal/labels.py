"""Ground-truth frame labels and their on-disk JSON form.

A label file maps object names to {"position": ..., "is_visible": ...}.
Visibility flags are accepted both as JSON booleans and as the string forms
"True"/"False" that annotation tools commonly emit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import MalformedLabel, UnknownClass
from .ontology import CabinOntology, UNKNOWN_CLASS, canonicalize_class, validate_position


def parse_bool_flag(value: object) -> bool | None:
    """Parse a JSON boolean or the strings "True"/"False" (case-insensitive)."""
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        low = value.strip().lower()
        if low == "true":
            return True
        if low == "false":
            return False
    return None


@dataclass(frozen=True)
class GroundTruthObject:
    position: str
    is_visible: bool


@dataclass(frozen=True)
class FrameLabel:
    """One labeled frame: canonical class -> ground-truth object.

    objects preserve label-file order; classes are unique per frame.
    """

    frame_id: str
    image_ref: str
    objects: dict[str, GroundTruthObject]

    def visible_items(self) -> list[tuple[str, GroundTruthObject]]:
        return [(cls, obj) for cls, obj in self.objects.items() if obj.is_visible]

    def visible_count(self) -> int:
        return sum(1 for obj in self.objects.values() if obj.is_visible)


def label_from_document(
    doc: object, frame_id: str, image_ref: str, ontology: CabinOntology
) -> FrameLabel:
    """Validate a raw label document into a FrameLabel.

    Raises MalformedLabel / UnknownClass / UnknownPosition, each naming the
    frame so batch loaders surface actionable errors.
    """
    if not isinstance(doc, dict):
        raise MalformedLabel(f"frame {frame_id}: label root must be a JSON object")
    objects: dict[str, GroundTruthObject] = {}
    for raw_name, entry in doc.items():
        if not isinstance(entry, dict):
            raise MalformedLabel(
                f"frame {frame_id}: entry {raw_name!r} must be an object"
            )
        if "position" not in entry or "is_visible" not in entry:
            raise MalformedLabel(
                f"frame {frame_id}: entry {raw_name!r} needs position and is_visible"
            )
        cls = canonicalize_class(str(raw_name), ontology)
        if cls == UNKNOWN_CLASS:
            raise UnknownClass(f"frame {frame_id}: unknown object class {raw_name!r}")
        if cls in objects:
            raise MalformedLabel(
                f"frame {frame_id}: class {cls!r} labeled more than once"
            )
        try:
            position = validate_position(str(entry["position"]), ontology)
        except Exception as exc:
            raise type(exc)(f"frame {frame_id}: {exc}") from exc
        visible = parse_bool_flag(entry["is_visible"])
        if visible is None:
            raise MalformedLabel(
                f"frame {frame_id}: bad is_visible {entry['is_visible']!r}"
            )
        objects[cls] = GroundTruthObject(position=position, is_visible=visible)
    return FrameLabel(frame_id=frame_id, image_ref=image_ref, objects=objects)


def label_to_document(label: FrameLabel) -> dict:
    """Render a label back to its file form (string visibility flags)."""
    return {
        cls: {"position": obj.position, "is_visible": "True" if obj.is_visible else "False"}
        for cls, obj in label.objects.items()
    }
