"""Cabin vocabulary: canonical positions, object classes, aliases, mirror map.

The ontology is a closed world.  Everything downstream (labels, prompts,
response parsing, judging) resolves names against one CabinOntology instance,
so a single file swap retargets the whole pipeline to a different cabin layout.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import OntologyInvalid, UnknownPosition

# Sentinels returned by lookups.  Real names may never start with "<".
UNKNOWN_CLASS = "<unknown>"
UNPARSEABLE_POSITION = "<unparseable>"


@dataclass(frozen=True)
class CabinOntology:
    """Immutable cabin vocabulary.

    positions: canonical position strings, including undefined_label.
    mirror: involutive map used when images are flipped horizontally;
        positions absent from the map are their own mirror.
    classes: canonical object class names (stored lowercase).
    aliases: lowercase alias -> canonical class.
    """

    positions: tuple[str, ...]
    undefined_label: str
    mirror: dict[str, str]
    classes: tuple[str, ...]
    aliases: dict[str, str]

    _position_lookup: dict[str, str] = field(init=False, repr=False, compare=False)
    _class_lookup: dict[str, str] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.positions:
            raise OntologyInvalid("ontology has no positions")
        if not self.classes:
            raise OntologyInvalid("ontology has no classes")
        if len(set(self.positions)) != len(self.positions):
            raise OntologyInvalid("duplicate positions")
        if len(set(self.classes)) != len(self.classes):
            raise OntologyInvalid("duplicate classes")
        if self.undefined_label not in self.positions:
            raise OntologyInvalid(
                f"undefined label {self.undefined_label!r} not in positions"
            )
        for name in (*self.positions, *self.classes, *self.aliases):
            if name.startswith("<"):
                raise OntologyInvalid(f"{name!r}: names may not start with '<'")
        for cls in self.classes:
            if cls != cls.strip().lower():
                raise OntologyInvalid(f"class {cls!r} is not lowercase/trimmed")
        pos_set = set(self.positions)
        for src, dst in self.mirror.items():
            if src not in pos_set or dst not in pos_set:
                raise OntologyInvalid(f"mirror entry {src!r} -> {dst!r} off-ontology")
            if self.mirror.get(dst, dst) != src:
                raise OntologyInvalid(f"mirror is not an involution at {src!r}")
        cls_set = set(self.classes)
        for alias, target in self.aliases.items():
            if target not in cls_set:
                raise OntologyInvalid(f"alias {alias!r} targets unknown class {target!r}")
            if alias in cls_set:
                raise OntologyInvalid(f"alias {alias!r} collides with a canonical class")
        object.__setattr__(
            self, "_position_lookup", {p.lower(): p for p in self.positions}
        )
        merged = {c: c for c in self.classes}
        merged.update(self.aliases)
        object.__setattr__(self, "_class_lookup", merged)

    @property
    def checksum(self) -> str:
        """Stable content hash, used to stamp manifests and run records."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "positions": list(self.positions),
            "undefined": self.undefined_label,
            "mirror": {s: d for s, d in sorted(self.mirror.items()) if s < d},
            "classes": list(self.classes),
            "aliases": dict(sorted(self.aliases.items())),
        }


def canonicalize_class(name: str, ontology: CabinOntology) -> str:
    """Resolve a raw object name to its canonical class, or UNKNOWN_CLASS.

    Matching is by lowercased/trimmed equality against classes first, then
    aliases.  No fuzzy matching: near-misses stay unknown on purpose so that
    invented object names are visible downstream as hallucinations.
    """
    return ontology._class_lookup.get(name.strip().lower(), UNKNOWN_CLASS)


def validate_position(label: str, ontology: CabinOntology) -> str:
    """Return the canonical form of a position label (case-insensitive).

    Raises UnknownPosition for anything outside the ontology.
    """
    canonical = ontology._position_lookup.get(label.strip().lower())
    if canonical is None:
        raise UnknownPosition(f"unknown position {label!r}")
    return canonical


def mirror_position(position: str, ontology: CabinOntology) -> str:
    """Mirror a canonical position for a horizontal flip; identity if unmapped."""
    return ontology.mirror.get(position, position)


def ontology_from_dict(doc: dict) -> CabinOntology:
    """Build an ontology from its file form, symmetrizing the mirror map."""
    try:
        positions = tuple(str(p) for p in doc["positions"])
        undefined = str(doc["undefined"])
        raw_mirror = {str(k): str(v) for k, v in doc.get("mirror", {}).items()}
        classes = tuple(str(c).strip().lower() for c in doc["classes"])
        aliases = {
            str(k).strip().lower(): str(v).strip().lower()
            for k, v in doc.get("aliases", {}).items()
        }
    except (KeyError, TypeError, AttributeError) as exc:
        raise OntologyInvalid(f"bad ontology document: {exc}") from exc
    mirror = dict(raw_mirror)
    for src, dst in raw_mirror.items():
        mirror.setdefault(dst, src)
    # Aliases that just restate a canonical class are dropped as redundant.
    aliases = {a: t for a, t in aliases.items() if a != t}
    return CabinOntology(
        positions=positions,
        undefined_label=undefined,
        mirror=mirror,
        classes=classes,
        aliases=aliases,
    )


def default_ontology_text() -> str:
    return (
        resources.files("odal").joinpath("data/ontology.json").read_text("utf-8")
    )


def load_ontology(path: str | Path | None = None) -> CabinOntology:
    """Load an ontology JSON file; None loads the packaged default."""
    if path is None:
        text = default_ontology_text()
    else:
        text = Path(path).read_text("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise OntologyInvalid(f"ontology is not valid JSON: {exc}") from exc
    return ontology_from_dict(doc)
