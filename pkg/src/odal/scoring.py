"""Frame and run scoring with exact rational arithmetic.

A frame earns one point per detected-and-localized object, half a point per
detected-but-mislocalized object, loses one point per hallucination, and
receives a single bonus point when nothing was detected correctly (under the
default literal policy) or only on genuinely clean empty frames (under the
clean-empty policy).  All scores are fractions; nothing is rounded until
rendering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .errors import ConfigInvalid, EmptyRun
from .verdicts import ParseStatus, Verdict

DELTA_LITERAL = "literal"
DELTA_CLEAN_EMPTY = "clean-empty"


@dataclass(frozen=True)
class ScorePolicy:
    """delta_rule picks when the no-correct-detection bonus applies;
    clamp_frame_at_zero floors per-frame scores at zero."""

    delta_rule: str = DELTA_LITERAL
    clamp_frame_at_zero: bool = False

    def __post_init__(self) -> None:
        if self.delta_rule not in (DELTA_LITERAL, DELTA_CLEAN_EMPTY):
            raise ConfigInvalid(f"unknown delta rule {self.delta_rule!r}")


@dataclass(frozen=True)
class FrameScore:
    frame_id: str
    score: Fraction
    visible_count: int
    correct_count: int
    hallucination_count: int
    max_score: int


def frame_score(verdict: Verdict, policy: ScorePolicy = ScorePolicy()) -> FrameScore:
    """Score one judged frame; exact, never floats."""
    n = len(verdict.per_object)
    c = sum(o.detected for o in verdict.per_object)
    h = len(verdict.hallucinations)
    total = Fraction(0)
    for o in verdict.per_object:
        if o.detected and o.localized:
            total += 1
        elif o.detected:
            total += Fraction(1, 2)
    if policy.delta_rule == DELTA_LITERAL:
        delta = 1 if c == 0 else 0
    else:
        emitted = c + h + len(verdict.neutral)
        delta = 1 if n == 0 and emitted == 0 else 0
    score = total + delta - h
    if policy.clamp_frame_at_zero and score < 0:
        score = Fraction(0)
    return FrameScore(
        frame_id=verdict.frame_id,
        score=score,
        visible_count=n,
        correct_count=c,
        hallucination_count=h,
        max_score=max(n, 1),
    )


@dataclass(frozen=True)
class Snr:
    """Correct-to-hallucination ratio; capped when nothing was hallucinated.

    exact holds the ratio when uncapped; cap holds the ceiling (the number
    of detectable objects) when the denominator is zero with correct
    detections present.
    """

    exact: Fraction | None
    cap: int | None = None

    def __post_init__(self) -> None:
        if (self.exact is None) == (self.cap is None):
            raise ValueError("exactly one of exact/cap must be set")

    @property
    def is_capped(self) -> bool:
        return self.cap is not None

    def sort_value(self) -> Fraction:
        return Fraction(self.cap) if self.is_capped else self.exact

    def render(self, decimals: int = 2) -> str:
        """Capped values render as CAP(n); ratios are truncated, not
        rounded, at the requested number of decimals."""
        if self.is_capped:
            return f"CAP({self.cap})"
        return _truncate(self.exact, decimals)


def _truncate(x: Fraction, decimals: int) -> str:
    q = 10**decimals
    units = (x * q).numerator // (x * q).denominator
    if decimals == 0:
        return str(units)
    return f"{units // q}.{units % q:0{decimals}d}"


def snr(correct: int, hallucinated: int, cap: int) -> Snr:
    """Ratio of correct detections to hallucinations for a run.

    With zero hallucinations the ratio is reported as capped at the total
    number of detectable objects, or zero when nothing was detected either.
    """
    if cap < correct:
        raise ConfigInvalid(f"cap {cap} below correct count {correct}")
    if hallucinated > 0:
        return Snr(exact=Fraction(correct, hallucinated))
    if correct > 0:
        return Snr(exact=None, cap=cap)
    return Snr(exact=Fraction(0))


def format_pct(x: Fraction) -> str:
    """Two decimals; exact whole percentages drop the decimals."""
    if x.denominator == 1:
        return str(x.numerator)
    return f"{float(x):.2f}"


@dataclass(frozen=True)
class FineTuneDescriptor:
    """Metadata describing how the model under test was adapted; carried
    through to reports, never interpreted."""

    vision_encoder: bool = False
    comprehensive: bool = False


@dataclass(frozen=True)
class RunMeta:
    prompt_version: str = ""
    backend_id: str = ""
    label: str = ""
    fine_tune: FineTuneDescriptor = field(default_factory=FineTuneDescriptor)


@dataclass(frozen=True)
class MetricReport:
    odal_score_pct: Fraction
    odal_snr: Snr
    correct_count: int
    hallucination_count: int
    snr_cap: int
    json_rate_strict_pct: Fraction
    json_rate_lenient_pct: Fraction
    per_frame: tuple[FrameScore, ...]
    run_meta: RunMeta = field(default_factory=RunMeta)


def aggregate(
    verdicts: Iterable[Verdict],
    policy: ScorePolicy = ScorePolicy(),
    run_meta: RunMeta = RunMeta(),
) -> MetricReport:
    """Fold verdicts into a run-level report.

    Score percent normalizes each frame by max(visible objects, 1); the SNR
    cap is the total count of visible ground-truth objects in the run.
    """
    verdicts = list(verdicts)
    if not verdicts:
        raise EmptyRun("no verdicts to aggregate")
    ids = [v.frame_id for v in verdicts]
    if len(set(ids)) != len(ids):
        raise ConfigInvalid("duplicate frame ids in verdict set")
    frames = tuple(frame_score(v, policy) for v in verdicts)
    total = sum((f.score for f in frames), Fraction(0))
    denominator = sum(f.max_score for f in frames)
    correct = sum(f.correct_count for f in frames)
    hallucinated = sum(f.hallucination_count for f in frames)
    cap = sum(f.visible_count for f in frames)
    n = len(verdicts)
    n_strict = sum(1 for v in verdicts if v.parse_status == ParseStatus.VALID_STRICT)
    n_lenient = n_strict + sum(
        1 for v in verdicts if v.parse_status == ParseStatus.VALID_JSON_ONLY
    )
    return MetricReport(
        odal_score_pct=Fraction(100) * total / denominator,
        odal_snr=snr(correct, hallucinated, cap),
        correct_count=correct,
        hallucination_count=hallucinated,
        snr_cap=cap,
        json_rate_strict_pct=Fraction(100 * n_strict, n),
        json_rate_lenient_pct=Fraction(100 * n_lenient, n),
        per_frame=frames,
        run_meta=run_meta,
    )


REPORT_SCHEMA = "odalbench/1"


def _fraction_to_json(x: Fraction) -> dict:
    return {"exact": f"{x.numerator}/{x.denominator}", "display": format_pct(x)}


def _fraction_from_json(doc: dict) -> Fraction:
    num, den = doc["exact"].split("/")
    return Fraction(int(num), int(den))


def report_to_dict(report: MetricReport) -> dict:
    if report.odal_snr.is_capped:
        snr_doc = {"kind": "cap", "cap": report.odal_snr.cap,
                   "display": report.odal_snr.render(4)}
    else:
        x = report.odal_snr.exact
        snr_doc = {"kind": "ratio", "exact": f"{x.numerator}/{x.denominator}",
                   "display": report.odal_snr.render(4)}
    return {
        "schema": REPORT_SCHEMA,
        "odal_score_pct": _fraction_to_json(report.odal_score_pct),
        "odal_snr": snr_doc,
        "correct": report.correct_count,
        "hallucinations": report.hallucination_count,
        "snr_cap": report.snr_cap,
        "json_rate_strict_pct": _fraction_to_json(report.json_rate_strict_pct),
        "json_rate_lenient_pct": _fraction_to_json(report.json_rate_lenient_pct),
        "run_meta": {
            "prompt_version": report.run_meta.prompt_version,
            "backend_id": report.run_meta.backend_id,
            "label": report.run_meta.label,
            "fine_tune": {
                "vision_encoder": report.run_meta.fine_tune.vision_encoder,
                "comprehensive": report.run_meta.fine_tune.comprehensive,
            },
        },
        "frames": [
            {
                "frame_id": f.frame_id,
                "score": f"{f.score.numerator}/{f.score.denominator}",
                "visible": f.visible_count,
                "correct": f.correct_count,
                "hallucinated": f.hallucination_count,
                "max": f.max_score,
            }
            for f in report.per_frame
        ],
    }


def report_from_dict(doc: dict) -> MetricReport:
    if doc.get("schema") != REPORT_SCHEMA:
        raise ConfigInvalid(f"unknown report schema {doc.get('schema')!r}")
    snr_doc = doc["odal_snr"]
    if snr_doc["kind"] == "cap":
        odal_snr = Snr(exact=None, cap=int(snr_doc["cap"]))
    else:
        num, den = snr_doc["exact"].split("/")
        odal_snr = Snr(exact=Fraction(int(num), int(den)))
    frames = tuple(
        FrameScore(
            frame_id=f["frame_id"],
            score=Fraction(*(int(p) for p in f["score"].split("/"))),
            visible_count=int(f["visible"]),
            correct_count=int(f["correct"]),
            hallucination_count=int(f["hallucinated"]),
            max_score=int(f["max"]),
        )
        for f in doc["frames"]
    )
    meta = doc["run_meta"]
    return MetricReport(
        odal_score_pct=_fraction_from_json(doc["odal_score_pct"]),
        odal_snr=odal_snr,
        correct_count=int(doc["correct"]),
        hallucination_count=int(doc["hallucinations"]),
        snr_cap=int(doc["snr_cap"]),
        json_rate_strict_pct=_fraction_from_json(doc["json_rate_strict_pct"]),
        json_rate_lenient_pct=_fraction_from_json(doc["json_rate_lenient_pct"]),
        per_frame=frames,
        run_meta=RunMeta(
            prompt_version=meta.get("prompt_version", ""),
            backend_id=meta.get("backend_id", ""),
            label=meta.get("label", ""),
            fine_tune=FineTuneDescriptor(
                vision_encoder=meta["fine_tune"]["vision_encoder"],
                comprehensive=meta["fine_tune"]["comprehensive"],
            ),
        ),
    )


def report_to_json(report: MetricReport) -> str:
    """Canonical serialization: stable key order, trailing newline, no
    volatile fields, so re-scoring the same verdicts is byte-identical."""
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> MetricReport:
    return report_from_dict(json.loads(text))
