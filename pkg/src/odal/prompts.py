"""Prompt rendering from editable template files.

Two request styles ship with the package: v1 spells out the position
vocabulary and a worked JSON example; v2 asks the same question with no
vocabulary and no example.  The system text is shared, so behaviour
differences between runs come from the user text alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ConfigInvalid
from .ontology import CabinOntology

PROMPT_VERSIONS = ("v1", "v2")


@dataclass(frozen=True)
class PromptTemplate:
    version: str
    system_text: str
    user_text: str


def _read_template(name: str, template_dir: str | Path | None) -> str:
    if template_dir is not None:
        return (Path(template_dir) / name).read_text("utf-8")
    return resources.files("odal").joinpath(f"data/prompts/{name}").read_text("utf-8")


def _example_entry(ontology: CabinOntology) -> str:
    cls = ontology.classes[0]
    position = next(
        p for p in ontology.positions if p != ontology.undefined_label
    )
    return json.dumps(
        {cls: {"position": position, "is_visible": "True"}}, indent=2
    )


def render_prompt(
    version: str,
    ontology: CabinOntology,
    template_dir: str | Path | None = None,
) -> PromptTemplate:
    """Fill the {{positions}} and {{example}} placeholders for one version."""
    version = version.lower()
    if version not in PROMPT_VERSIONS:
        raise ConfigInvalid(f"unknown prompt version {version!r}")
    system_text = _read_template("system.txt", template_dir)
    user_text = _read_template(f"{version}_user.txt", template_dir)
    positions = "\n".join(f"- {p}" for p in ontology.positions)
    user_text = user_text.replace("{{positions}}", positions)
    user_text = user_text.replace("{{example}}", _example_entry(ontology))
    return PromptTemplate(version=version, system_text=system_text, user_text=user_text)


def render_judge_prompt(
    response_text: str,
    gt_lines: str,
    template_dir: str | Path | None = None,
) -> tuple[str, str]:
    """Returns (system_text, user_text) for the judge request."""
    system_text = _read_template("judge_system.txt", template_dir)
    user_text = _read_template("judge_user.txt", template_dir)
    user_text = user_text.replace("{{ground_truth}}", gt_lines)
    user_text = user_text.replace("{{response}}", response_text)
    return system_text, user_text
