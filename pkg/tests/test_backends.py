import json

import numpy as np
import pytest

from odal.backends import (
    ErrorProfile,
    MockVisionBackend,
    OracleLlmBackend,
    ScriptedLlmBackend,
    ZERO_PROFILE,
    check_distractors_disjoint,
    load_distractors,
    oracle_respond,
)
from odal.errors import BackendMalformedOutput, ConfigInvalid
from odal.parsing import parse_response
from odal.verdicts import ParseStatus
from tests.conftest import make_label


def test_error_profile_validation():
    ErrorProfile(0.0, 1.0, 5.0)
    with pytest.raises(ConfigInvalid):
        ErrorProfile(p_miss=1.5)
    with pytest.raises(ConfigInvalid):
        ErrorProfile(p_mislocalize=-0.1)
    with pytest.raises(ConfigInvalid):
        ErrorProfile(p_hallucinate=-1.0)


def test_distractors_load_and_disjoint(ontology):
    names = load_distractors()
    assert len(names) >= 20
    check_distractors_disjoint(names, ontology)
    with pytest.raises(ConfigInvalid, match="collide"):
        check_distractors_disjoint(("penguin", "Backpack "), ontology)


def test_zero_profile_reproduces_visible_labels(ontology):
    label = make_label(
        "f1",
        {
            "backpack": "Seat.Row2.Middle",
            "phone": ("Seat.Row1.Left", True),
            "keys": ("UNDEFINED", False),
        },
    )
    text = oracle_respond(label, ZERO_PROFILE, ontology)
    parsed = parse_response(text, ontology)
    assert parsed.status is ParseStatus.VALID_STRICT
    emitted = {(d.canonical_class, d.position) for d in parsed.detections}
    assert emitted == {("backpack", "Seat.Row2.Middle"), ("phone", "Seat.Row1.Left")}


def test_oracle_is_deterministic_per_frame_and_seed(ontology):
    label = make_label("f1", {"backpack": "Seat.Row2.Middle", "phone": "Seat.Row1.Left"})
    profile = ErrorProfile(p_miss=0.3, p_mislocalize=0.3, p_hallucinate=1.0, seed=7)
    assert oracle_respond(label, profile, ontology) == oracle_respond(label, profile, ontology)
    other_seed = ErrorProfile(p_miss=0.3, p_mislocalize=0.3, p_hallucinate=1.0, seed=8)
    outputs = {oracle_respond(label, p, ontology) for p in (profile, other_seed)}
    assert len(outputs) == 2  # seed actually matters
    other_frame = make_label("f2", {"backpack": "Seat.Row2.Middle", "phone": "Seat.Row1.Left"})
    # same objects, different frame id: stream decorrelates (not asserted equal)
    oracle_respond(other_frame, profile, ontology)


def test_certain_miss_yields_empty_object(ontology):
    label = make_label("f1", {"backpack": "Seat.Row2.Middle", "phone": "Seat.Row1.Left"})
    profile = ErrorProfile(p_miss=1.0, seed=3)
    assert json.loads(oracle_respond(label, profile, ontology)) == {}


def test_certain_mislocalize_moves_every_object(ontology):
    label = make_label("f1", {"backpack": "Seat.Row2.Middle", "phone": "Seat.Row1.Left"})
    profile = ErrorProfile(p_mislocalize=1.0, seed=3)
    doc = json.loads(oracle_respond(label, profile, ontology))
    assert doc["backpack"]["position"] != "Seat.Row2.Middle"
    assert doc["phone"]["position"] != "Seat.Row1.Left"
    assert doc["backpack"]["position"] in ontology.positions


def test_hallucinations_use_distractor_names_only(ontology):
    label = make_label("f1", {})
    profile = ErrorProfile(p_hallucinate=3.0, seed=5)
    names = load_distractors()
    found = False
    for i in range(20):
        frame = make_label(f"f{i}", {})
        doc = json.loads(oracle_respond(frame, profile, ontology))
        assert set(doc) <= set(names)
        assert len(doc) == len(set(doc))  # sampled without replacement
        found = found or bool(doc)
    assert found  # Poisson(3) over 20 frames produces at least one hallucination


def test_mock_vision_backend_determinism():
    backend = MockVisionBackend(tokens=8, dim=16, dtype="f16")
    a = backend.encode(b"image-bytes")
    b = backend.encode(b"image-bytes")
    c = backend.encode(b"image-bytes!")
    assert a == b
    assert a != c
    assert a.shape == (8, 16)
    assert a.dtype == "f16"
    assert len(a.data) == 8 * 16 * 2
    assert a.encoder_id == "mock-encoder"
    arr = a.to_array()
    assert arr.dtype == np.float16
    assert np.isfinite(arr.astype(np.float32)).all()


def test_scripted_backend_lookup():
    backend = ScriptedLlmBackend({"f1": "one"}, default_text="fallback")
    assert backend.respond("f1") == ("one", None)
    assert backend.respond("f2") == ("fallback", None)
    assert backend.backend_id == "scripted"


def test_oracle_backend_wraps_labels(ontology):
    labels = {"f1": make_label("f1", {"backpack": "Seat.Row2.Middle"})}
    backend = OracleLlmBackend(labels, ZERO_PROFILE, ontology)
    text, tokens = backend.respond("f1")
    assert tokens is None
    assert json.loads(text)["backpack"]["position"] == "Seat.Row2.Middle"
    assert backend.backend_id == "oracle(seed=0)"
    with pytest.raises(BackendMalformedOutput, match="no ground truth"):
        backend.respond("missing")
