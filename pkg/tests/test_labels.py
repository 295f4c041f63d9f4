import pytest

from odal.errors import MalformedLabel, UnknownClass, UnknownPosition
from odal.labels import label_from_document, label_to_document, parse_bool_flag


def test_parse_bool_flag_forms():
    assert parse_bool_flag(True) is True
    assert parse_bool_flag(False) is False
    assert parse_bool_flag("True") is True
    assert parse_bool_flag("false") is False
    assert parse_bool_flag(" TRUE ") is True
    assert parse_bool_flag("yes") is None
    assert parse_bool_flag(1) is None


def test_label_round_trip_with_string_flags(ontology):
    doc = {
        "backpack": {"position": "Seat.Row2.Middle", "is_visible": "True"},
        "laptop": {"position": "Seat.Row1.Right", "is_visible": "False"},
    }
    label = label_from_document(doc, "f1", "f1.ppm", ontology)
    assert label.objects["backpack"].is_visible is True
    assert label.objects["laptop"].is_visible is False
    assert label.visible_count() == 1
    assert label_to_document(label) == doc


def test_label_normalizes_aliases_and_case(ontology):
    doc = {"Rucksack": {"position": "seat.row2.middle", "is_visible": True}}
    label = label_from_document(doc, "f1", "", ontology)
    assert "backpack" in label.objects
    assert label.objects["backpack"].position == "Seat.Row2.Middle"


def test_label_errors_name_the_frame(ontology):
    with pytest.raises(UnknownPosition, match="frame f9"):
        label_from_document(
            {"backpack": {"position": "Roof", "is_visible": True}}, "f9", "", ontology
        )
    with pytest.raises(UnknownClass, match="frame f9"):
        label_from_document(
            {"dragon": {"position": "UNDEFINED", "is_visible": True}}, "f9", "", ontology
        )
    with pytest.raises(MalformedLabel, match="frame f9"):
        label_from_document({"backpack": "Seat.Row1.Left"}, "f9", "", ontology)
    with pytest.raises(MalformedLabel, match="frame f9"):
        label_from_document(
            {"backpack": {"position": "UNDEFINED", "is_visible": "maybe"}},
            "f9", "", ontology,
        )


def test_label_rejects_duplicate_class_via_alias(ontology):
    doc = {
        "backpack": {"position": "Seat.Row1.Left", "is_visible": True},
        "rucksack": {"position": "Seat.Row1.Right", "is_visible": True},
    }
    with pytest.raises(MalformedLabel, match="more than once"):
        label_from_document(doc, "f1", "", ontology)
