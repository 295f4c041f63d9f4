"""Judgement records: parsed detections and per-frame verdicts."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator


class ParseStatus(str, Enum):
    """How well a model response matched the required JSON shape."""

    VALID_STRICT = "valid_strict"
    VALID_JSON_ONLY = "valid_json_only"
    INVALID = "invalid"


@dataclass(frozen=True)
class Detection:
    """One object mention extracted from a model response.

    canonical_class is a known class or UNKNOWN_CLASS; position is a canonical
    position or UNPARSEABLE_POSITION.  The raw fields keep what the model
    actually said, for diagnostics.
    """

    raw_name: str
    canonical_class: str
    position: str
    claimed_visible: bool = True
    raw_position: str = ""


@dataclass(frozen=True)
class ObjectOutcome:
    """Detection/localization outcome for one visible ground-truth object."""

    gt_class: str
    detected: int
    localized: int

    def __post_init__(self) -> None:
        if self.detected not in (0, 1) or self.localized not in (0, 1):
            raise ValueError("detected/localized must be 0 or 1")
        if self.localized > self.detected:
            raise ValueError("localized implies detected")


@dataclass(frozen=True)
class Verdict:
    """Judged outcome for one frame.

    per_object has one entry per visible ground-truth object.  Every emitted
    detection lands in exactly one of: a per_object match, hallucinations, or
    neutral (mentions of labeled-but-invisible objects).
    """

    frame_id: str
    parse_status: ParseStatus
    per_object: tuple[ObjectOutcome, ...]
    hallucinations: tuple[str, ...]
    neutral: tuple[str, ...] = ()
    judge_kind: str = "rules"
    diagnostics: tuple[str, ...] = ()


def verdict_to_dict(v: Verdict) -> dict:
    return {
        "frame_id": v.frame_id,
        "parse_status": v.parse_status.value,
        "per_object": [
            {"class": o.gt_class, "detected": o.detected, "localized": o.localized}
            for o in v.per_object
        ],
        "hallucinations": list(v.hallucinations),
        "neutral": list(v.neutral),
        "judge_kind": v.judge_kind,
        "diagnostics": list(v.diagnostics),
    }


def verdict_from_dict(doc: dict) -> Verdict:
    return Verdict(
        frame_id=doc["frame_id"],
        parse_status=ParseStatus(doc["parse_status"]),
        per_object=tuple(
            ObjectOutcome(o["class"], int(o["detected"]), int(o["localized"]))
            for o in doc["per_object"]
        ),
        hallucinations=tuple(doc["hallucinations"]),
        neutral=tuple(doc.get("neutral", [])),
        judge_kind=doc.get("judge_kind", "rules"),
        diagnostics=tuple(doc.get("diagnostics", [])),
    )


def write_verdicts(path: str | Path, verdicts: Iterable[Verdict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in verdicts:
            fh.write(json.dumps(verdict_to_dict(v), sort_keys=True) + "\n")


def read_verdicts(path: str | Path) -> Iterator[Verdict]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield verdict_from_dict(json.loads(line))
