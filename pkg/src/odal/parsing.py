"""Model response parsing: JSON classification plus name/position repair.

Three tiers: valid_strict for the required {name: {position, is_visible}}
shape, valid_json_only for anything else that is still JSON (including the
bare {name: position} shorthand), invalid for the rest.  Parsing never
raises on model output; anything unusable becomes a diagnostic.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .labels import parse_bool_flag
from .ontology import (
    CabinOntology,
    UNKNOWN_CLASS,
    UNPARSEABLE_POSITION,
    canonicalize_class,
    validate_position,
)
from .errors import UnknownPosition
from .verdicts import Detection, ParseStatus

_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class ParsedResponse:
    status: ParseStatus
    detections: tuple[Detection, ...]
    diagnostics: tuple[str, ...] = ()


def _load_json(text: str, extract_fenced: bool) -> tuple[object, list[str]] | None:
    try:
        return json.loads(text), []
    except json.JSONDecodeError:
        pass
    if not extract_fenced:
        return None
    blocks = _FENCE_RE.findall(text)
    if len(blocks) != 1:
        return None
    try:
        return json.loads(blocks[0]), ["json extracted from fenced block"]
    except json.JSONDecodeError:
        return None


def _is_strict_entry(value: object) -> bool:
    return (
        isinstance(value, dict)
        and isinstance(value.get("position"), str)
        and parse_bool_flag(value.get("is_visible")) is not None
    )


def normalize_detections(
    detections: list[Detection] | tuple[Detection, ...], ontology: CabinOntology
) -> list[Detection]:
    """Canonicalize names and positions; unvalidatable positions become
    UNPARSEABLE_POSITION.  Idempotent."""
    out = []
    for det in detections:
        cls = canonicalize_class(det.raw_name, ontology)
        raw_position = det.raw_position or det.position
        try:
            position = validate_position(raw_position, ontology)
        except UnknownPosition:
            position = UNPARSEABLE_POSITION
        out.append(
            Detection(
                raw_name=det.raw_name,
                canonical_class=cls,
                position=position,
                claimed_visible=det.claimed_visible,
                raw_position=raw_position,
            )
        )
    return out


def parse_response(
    text: str, ontology: CabinOntology, extract_fenced: bool = True
) -> ParsedResponse:
    """Classify a response and extract normalized detections."""
    loaded = _load_json(text.strip(), extract_fenced)
    if loaded is None:
        return ParsedResponse(status=ParseStatus.INVALID, detections=())
    doc, diagnostics = loaded
    if not isinstance(doc, dict):
        diagnostics.append(f"JSON root is {type(doc).__name__}, not an object")
        return ParsedResponse(
            status=ParseStatus.VALID_JSON_ONLY,
            detections=(),
            diagnostics=tuple(diagnostics),
        )
    raw: list[Detection] = []
    all_strict = True
    for name, value in doc.items():
        if _is_strict_entry(value):
            raw.append(
                Detection(
                    raw_name=str(name),
                    canonical_class=UNKNOWN_CLASS,
                    position=str(value["position"]),
                    claimed_visible=bool(parse_bool_flag(value["is_visible"])),
                    raw_position=str(value["position"]),
                )
            )
        elif isinstance(value, str):
            # shorthand {name: position}; visibility is implied
            all_strict = False
            raw.append(
                Detection(
                    raw_name=str(name),
                    canonical_class=UNKNOWN_CLASS,
                    position=value,
                    claimed_visible=True,
                    raw_position=value,
                )
            )
        else:
            all_strict = False
            diagnostics.append(f"entry {name!r} has an unrecognized shape")
    status = ParseStatus.VALID_STRICT if all_strict else ParseStatus.VALID_JSON_ONLY
    return ParsedResponse(
        status=status,
        detections=tuple(normalize_detections(raw, ontology)),
        diagnostics=tuple(diagnostics),
    )
