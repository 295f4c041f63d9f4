from fractions import Fraction

import pytest

from odal.errors import ConfigInvalid, EmptyRun
from odal.scoring import (
    DELTA_CLEAN_EMPTY,
    FineTuneDescriptor,
    RunMeta,
    ScorePolicy,
    Snr,
    aggregate,
    format_pct,
    frame_score,
    report_from_json,
    report_to_json,
    snr,
)
from odal.verdicts import ObjectOutcome, ParseStatus, Verdict


def make_verdict(
    frame_id="f",
    outcomes=(),
    hallucinations=(),
    neutral=(),
    status=ParseStatus.VALID_STRICT,
):
    return Verdict(
        frame_id=frame_id,
        parse_status=status,
        per_object=tuple(ObjectOutcome("obj%d" % i, d, l) for i, (d, l) in enumerate(outcomes)),
        hallucinations=tuple(hallucinations),
        neutral=tuple(neutral),
    )


def test_frame_score_worked_examples():
    # one localized object: full point
    assert frame_score(make_verdict(outcomes=[(1, 1)])).score == 1
    # detected but mislocalized: half
    assert frame_score(make_verdict(outcomes=[(1, 0)])).score == Fraction(1, 2)
    # miss with nothing else: bonus applies (no correct detections)
    assert frame_score(make_verdict(outcomes=[(0, 0)])).score == 1
    # clean empty frame: bonus
    assert frame_score(make_verdict()).score == 1
    # two localized plus one mislocalized
    assert frame_score(make_verdict(outcomes=[(1, 1), (1, 1), (1, 0)])).score == Fraction(5, 2)
    # hallucination cancels the point
    assert frame_score(make_verdict(outcomes=[(1, 1)], hallucinations=["x"])).score == 0
    # empty frame with one hallucination under the literal rule: bonus still
    # applies because nothing was detected, so 1 - 1 = 0
    assert frame_score(make_verdict(hallucinations=["x"])).score == 0
    # pure hallucinations can push a frame negative
    assert frame_score(make_verdict(hallucinations=["x", "y"])).score == -1


def test_frame_score_max_normalizer():
    assert frame_score(make_verdict()).max_score == 1  # empty frames count out of 1
    assert frame_score(make_verdict(outcomes=[(0, 0)] * 3)).max_score == 3


def test_delta_policies_differ_on_dirty_empty_frames():
    literal = ScorePolicy()
    clean = ScorePolicy(delta_rule=DELTA_CLEAN_EMPTY)
    dirty = make_verdict(hallucinations=["x"])
    assert frame_score(dirty, literal).score == 0  # 1 (bonus) - 1
    assert frame_score(dirty, clean).score == -1  # no bonus
    missed = make_verdict(outcomes=[(0, 0)])
    assert frame_score(missed, literal).score == 1
    assert frame_score(missed, clean).score == 0  # frame was not empty
    empty = make_verdict()
    assert frame_score(empty, clean).score == 1
    # neutral emissions also disqualify the clean-empty bonus
    neutralish = make_verdict(neutral=["keys"])
    assert frame_score(neutralish, clean).score == 0
    assert frame_score(neutralish, literal).score == 1


def test_clamp_policy():
    policy = ScorePolicy(clamp_frame_at_zero=True)
    bad = make_verdict(hallucinations=["x", "y"])
    assert frame_score(bad).score == -1
    assert frame_score(bad, policy).score == 0
    ok = make_verdict(outcomes=[(1, 1)])
    assert frame_score(ok, policy).score == 1  # clamp leaves positives alone


def test_bad_policy_rejected():
    with pytest.raises(ConfigInvalid):
        ScorePolicy(delta_rule="sometimes")


def test_snr_cases():
    ratio = snr(50, 7, cap=56)
    assert not ratio.is_capped
    assert ratio.exact == Fraction(50, 7)
    capped = snr(10, 0, cap=56)
    assert capped.is_capped and capped.cap == 56
    nothing = snr(0, 0, cap=3)
    assert nothing.exact == 0
    with pytest.raises(ConfigInvalid):
        snr(5, 0, cap=4)
    with pytest.raises(ValueError):
        Snr(exact=Fraction(1), cap=3)
    with pytest.raises(ValueError):
        Snr(exact=None, cap=None)


def test_snr_render_truncates():
    assert snr(50, 7, cap=100).render(4) == "7.1428"  # floor, not round
    assert snr(22, 9, cap=100).render(2) == "2.44"
    assert snr(1, 2, cap=100).render(4) == "0.5000"
    assert snr(10, 0, cap=56).render(4) == "CAP(56)"
    assert snr(0, 0, cap=5).render(2) == "0.00"
    assert snr(3, 1, cap=5).render(0) == "3"


def test_snr_sort_value():
    assert snr(10, 0, cap=56).sort_value() == 56
    assert snr(50, 7, cap=100).sort_value() == Fraction(50, 7)


def test_format_pct():
    assert format_pct(Fraction(4300, 56)) == "76.79"
    assert format_pct(Fraction(100)) == "100"
    assert format_pct(Fraction(250, 3)) == "83.33"
    assert format_pct(Fraction(0)) == "0"


def test_aggregate_worked_example():
    verdicts = [
        make_verdict("a", outcomes=[(1, 1)]),
        make_verdict("b", outcomes=[(1, 0)]),
        make_verdict("c", outcomes=[(1, 1)]),
    ]
    report = aggregate(verdicts)
    assert report.odal_score_pct == Fraction(100) * Fraction(5, 2) / 3
    assert format_pct(report.odal_score_pct) == "83.33"
    assert report.correct_count == 3
    assert report.hallucination_count == 0
    assert report.snr_cap == 3
    assert report.odal_snr.is_capped


def test_aggregate_json_rates():
    verdicts = [
        make_verdict("a", status=ParseStatus.VALID_STRICT),
        make_verdict("b", status=ParseStatus.VALID_JSON_ONLY),
        make_verdict("c", status=ParseStatus.INVALID),
        make_verdict("d", status=ParseStatus.VALID_STRICT),
    ]
    report = aggregate(verdicts)
    assert report.json_rate_strict_pct == Fraction(100 * 2, 4) == 50
    assert report.json_rate_lenient_pct == Fraction(100 * 3, 4) == 75


def test_aggregate_rejects_bad_input():
    with pytest.raises(EmptyRun):
        aggregate([])
    dup = [make_verdict("a"), make_verdict("a")]
    with pytest.raises(ConfigInvalid, match="duplicate"):
        aggregate(dup)


def test_report_round_trip_is_lossless_and_stable():
    verdicts = [
        make_verdict("a", outcomes=[(1, 1), (1, 0)], hallucinations=["ghost"]),
        make_verdict("b", status=ParseStatus.INVALID),
    ]
    meta = RunMeta(
        prompt_version="v2",
        backend_id="test-backend",
        label="trial",
        fine_tune=FineTuneDescriptor(vision_encoder=True, comprehensive=False),
    )
    report = aggregate(verdicts, run_meta=meta)
    text = report_to_json(report)
    assert text.endswith("\n")
    loaded = report_from_json(text)
    assert loaded == report
    assert report_to_json(loaded) == text  # byte-stable round trip
    assert loaded.run_meta.fine_tune.vision_encoder is True


def test_report_rejects_unknown_schema():
    with pytest.raises(ConfigInvalid, match="schema"):
        report_from_json('{"schema": "other/9"}')
