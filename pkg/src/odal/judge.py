"""Frame judging: deterministic rules matcher and LLM judge with fallback.

The rules judge is the reference semantics: greedy unique matching of
detections to visible ground truth by canonical class, exact position
equality for localization.  The LLM judge asks an external endpoint for the
same verdict shape and falls back to the rules when the endpoint cannot be
used, so a batch judge run always yields one verdict per frame.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .chat_client import ChatCompletionsClient
from .errors import BackendMalformedOutput, BackendUnreachable, JudgeUnreachable
from .labels import FrameLabel
from .ontology import CabinOntology, UNKNOWN_CLASS
from .parsing import parse_response
from .prompts import render_judge_prompt
from .verdicts import Detection, ObjectOutcome, ParseStatus, Verdict

JUDGE_TEMPERATURE = 0.0


@dataclass(frozen=True)
class JudgeConfig:
    kind: str = "rules"  # "rules" | "llm"
    llm_endpoint: str = ""
    model: str = "judge"
    max_retries: int = 2
    parallelism_bound: int = 4
    fallback_to_rules: bool = True
    # Detections of labeled-but-invisible objects score as neutral by
    # default; set False to count them as hallucinations instead.
    invisible_neutral: bool = True
    template_dir: str | None = None


def judge_frame_rules(
    detections: tuple[Detection, ...] | list[Detection],
    gt: FrameLabel,
    parse_status: ParseStatus = ParseStatus.VALID_STRICT,
    invisible_neutral: bool = True,
) -> Verdict:
    """Greedy unique matching by canonical class, first occurrence wins.

    Duplicate detections of an already-matched class, unknown-class
    detections, and classes absent from the label are hallucinations.
    Localized requires exact canonical position equality.
    """
    visible = {cls: obj for cls, obj in gt.visible_items()}
    invisible = {cls for cls, obj in gt.objects.items() if not obj.is_visible}
    matched: dict[str, Detection] = {}
    hallucinations: list[str] = []
    neutral: list[str] = []
    for det in detections:
        cls = det.canonical_class
        if cls != UNKNOWN_CLASS and cls in visible and cls not in matched:
            matched[cls] = det
        elif cls != UNKNOWN_CLASS and cls in invisible and invisible_neutral:
            neutral.append(det.raw_name)
        else:
            hallucinations.append(det.raw_name)
    per_object = []
    for cls, obj in gt.visible_items():
        det = matched.get(cls)
        detected = 1 if det is not None else 0
        localized = 1 if det is not None and det.position == obj.position else 0
        per_object.append(ObjectOutcome(gt_class=cls, detected=detected, localized=localized))
    return Verdict(
        frame_id=gt.frame_id,
        parse_status=parse_status,
        per_object=tuple(per_object),
        hallucinations=tuple(hallucinations),
        neutral=tuple(neutral),
        judge_kind="rules",
    )


def judge_response_rules(
    response_text: str,
    gt: FrameLabel,
    ontology: CabinOntology,
    invisible_neutral: bool = True,
    extract_fenced: bool = True,
) -> Verdict:
    """Parse a raw response and judge it with the rules matcher."""
    parsed = parse_response(response_text, ontology, extract_fenced)
    verdict = judge_frame_rules(
        parsed.detections, gt, parsed.status, invisible_neutral
    )
    if parsed.diagnostics:
        verdict = _with_diagnostics(verdict, parsed.diagnostics)
    return verdict


def _with_diagnostics(verdict: Verdict, extra) -> Verdict:
    return Verdict(
        frame_id=verdict.frame_id,
        parse_status=verdict.parse_status,
        per_object=verdict.per_object,
        hallucinations=verdict.hallucinations,
        neutral=verdict.neutral,
        judge_kind=verdict.judge_kind,
        diagnostics=verdict.diagnostics + tuple(extra),
    )


def build_judge_prompt(
    response_text: str, gt: FrameLabel, template_dir: str | None = None
) -> list[dict]:
    """Messages asking for the fixed verdict JSON shape.

    The ground-truth listing covers visible objects only; invisible labels
    are withheld so the judge cannot leak them into hallucination calls.
    """
    lines = "\n".join(f"- {cls}: {obj.position}" for cls, obj in gt.visible_items())
    if not lines:
        lines = "(no visible objects)"
    system_text, user_text = render_judge_prompt(response_text, lines, template_dir)
    return [
        {"role": "system", "content": system_text},
        {"role": "user", "content": user_text},
    ]


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _parse_judge_verdict(text: str) -> dict | None:
    text = text.strip()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        blocks = _FENCE_RE.findall(text)
        if len(blocks) != 1:
            return None
        try:
            doc = json.loads(blocks[0])
        except json.JSONDecodeError:
            return None
    if not isinstance(doc, dict):
        return None
    if not isinstance(doc.get("per_object"), list):
        return None
    if not isinstance(doc.get("hallucinations"), list):
        return None
    return doc


def _verdict_from_judge_doc(
    doc: dict, gt: FrameLabel, parse_status: ParseStatus
) -> Verdict:
    diagnostics: list[str] = []
    by_class: dict[str, tuple[int, int]] = {}
    for entry in doc["per_object"]:
        if not isinstance(entry, dict) or "class" not in entry:
            diagnostics.append(f"judge entry skipped: {entry!r}")
            continue
        cls = str(entry["class"])
        detected = 1 if entry.get("detected") in (1, True, "1") else 0
        localized = 1 if entry.get("localized") in (1, True, "1") else 0
        if localized > detected:
            diagnostics.append(f"judge marked {cls} localized but not detected")
            localized = detected
        by_class[cls] = (detected, localized)
    per_object = []
    for cls, _obj in gt.visible_items():
        if cls in by_class:
            detected, localized = by_class.pop(cls)
        else:
            diagnostics.append(f"judge omitted ground-truth object {cls}")
            detected, localized = 0, 0
        per_object.append(ObjectOutcome(gt_class=cls, detected=detected, localized=localized))
    for cls in by_class:
        diagnostics.append(f"judge invented ground-truth object {cls}")
    return Verdict(
        frame_id=gt.frame_id,
        parse_status=parse_status,
        per_object=tuple(per_object),
        hallucinations=tuple(str(h) for h in doc["hallucinations"]),
        neutral=(),
        judge_kind="llm",
        diagnostics=tuple(diagnostics),
    )


def judge_frame_llm(
    response_text: str,
    gt: FrameLabel,
    cfg: JudgeConfig,
    ontology: CabinOntology,
    chat=None,
) -> Verdict:
    """Ask the judge endpoint; fall back to the rules on failure.

    chat is any callable(messages) -> str; by default a chat-completions
    client is built from cfg.llm_endpoint.
    """
    if chat is None:
        client = ChatCompletionsClient(
            cfg.llm_endpoint, model=cfg.model, max_retries=cfg.max_retries
        )
        chat = lambda messages: client.complete(  # noqa: E731
            messages, temperature=JUDGE_TEMPERATURE
        ).text
    parse_status = parse_response(response_text, ontology).status
    messages = build_judge_prompt(response_text, gt, cfg.template_dir)
    failure = ""
    for attempt in range(cfg.max_retries + 1):
        try:
            raw = chat(messages)
        except (BackendUnreachable, BackendMalformedOutput, OSError) as exc:
            failure = f"judge endpoint failed: {exc}"
            continue
        doc = _parse_judge_verdict(raw)
        if doc is not None:
            return _verdict_from_judge_doc(doc, gt, parse_status)
        failure = "judge returned malformed verdict JSON"
    if not cfg.fallback_to_rules:
        raise JudgeUnreachable(failure or "judge gave no usable verdict")
    verdict = judge_response_rules(
        response_text, gt, ontology, cfg.invisible_neutral
    )
    return _with_diagnostics(verdict, [f"{failure}; fell back to rules"])


def judge_run(
    responses: list[tuple[str, str]],
    labels: dict[str, FrameLabel],
    cfg: JudgeConfig,
    ontology: CabinOntology,
    chat=None,
) -> list[Verdict]:
    """Judge (frame_id, response_text) pairs, preserving input order.

    LLM judging runs under a bounded thread pool; the rules path is serial.
    Frames without ground truth raise KeyError early: that is a wiring bug,
    not a model failure.
    """
    pairs = [(fid, text, labels[fid]) for fid, text in responses]
    if cfg.kind == "rules":
        return [
            judge_response_rules(text, gt, ontology, cfg.invisible_neutral)
            for _fid, text, gt in pairs
        ]
    with ThreadPoolExecutor(max_workers=max(1, cfg.parallelism_bound)) as pool:
        futures = [
            pool.submit(judge_frame_llm, text, gt, cfg, ontology, chat)
            for _fid, text, gt in pairs
        ]
        return [f.result() for f in futures]
