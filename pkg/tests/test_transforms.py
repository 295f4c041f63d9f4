import numpy as np
import pytest

from odal.dataset import generate_fixture
from odal.errors import ConfigInvalid
from odal.images import RgbImage, image_from_array
from odal.transforms import (
    PlanItem,
    TransformRanges,
    TransformSpec,
    apply_item,
    apply_transform,
    plan_augmentations,
    plan_from_json,
    plan_to_json,
)
from tests.conftest import make_label


def _checker(width=16, height=12):
    arr = np.zeros((height, width, 3), dtype=np.uint8)
    arr[::2, ::2] = (200, 40, 90)
    arr[1::2, 1::2] = (10, 220, 130)
    arr[:, width // 2 :, 2] = 255  # break left/right symmetry
    return image_from_array(arr)


def test_plan_levels(ontology):
    manifest = generate_fixture(5, ontology, seed=1)
    none = plan_augmentations(manifest, "none", seed=2)
    assert all(item.transforms == () for item in none.items)
    basic = plan_augmentations(manifest, "basic", seed=2)
    kinds = [t.kind for t in basic.items[0].transforms]
    assert kinds[0] == "rotate" and kinds[-1] == "brightness"
    assert set(kinds) <= {"rotate", "hflip", "brightness"}
    extensive = plan_augmentations(manifest, "extensive", seed=2)
    kinds = [t.kind for t in extensive.items[0].transforms]
    assert kinds[-2:] == ["affine", "sharpness"]
    with pytest.raises(ConfigInvalid):
        plan_augmentations(manifest, "wild", seed=2)


def test_plan_respects_ranges(ontology):
    manifest = generate_fixture(30, ontology, seed=1)
    ranges = TransformRanges(rotate_deg=3.0, hflip_p=0.0, brightness_lo=1.0, brightness_hi=1.0)
    plan = plan_augmentations(manifest, "basic", seed=5, ranges=ranges)
    for item in plan.items:
        by_kind = {t.kind: t for t in item.transforms}
        assert "hflip" not in by_kind
        assert abs(by_kind["rotate"].params["angle"]) <= 3.0
        assert by_kind["brightness"].params["factor"] == 1.0


def test_plan_json_byte_stable(ontology):
    manifest = generate_fixture(8, ontology, seed=4)
    plan = plan_augmentations(manifest, "extensive", seed=11)
    text = plan_to_json(plan)
    assert text == plan_to_json(plan_augmentations(manifest, "extensive", seed=11))
    assert text.endswith("\n")
    loaded = plan_from_json(text)
    assert loaded.level == plan.level and loaded.seed == plan.seed
    assert loaded.ranges == plan.ranges
    assert loaded.items == plan.items


def test_unknown_transform_kind_rejected():
    with pytest.raises(ConfigInvalid):
        TransformSpec("swirl", {})


def test_hflip_is_involution_on_pixels_and_labels(ontology):
    image = _checker()
    label = make_label("f0", {"backpack": "Seat.Row1.Left", "keys": ("UNDEFINED", False)})
    spec = TransformSpec("hflip", {})
    once_img, once_lbl = apply_transform(image, label, spec, ontology)
    assert once_img.pixels != image.pixels
    assert once_lbl.objects["backpack"].position == "Seat.Row1.Right"
    assert once_lbl.objects["keys"].position == "UNDEFINED"  # mirror fixes UNDEFINED
    twice_img, twice_lbl = apply_transform(once_img, once_lbl, spec, ontology)
    assert twice_img.pixels == image.pixels
    assert twice_lbl.objects == label.objects


def test_hflip_can_leave_labels_alone(ontology):
    label = make_label("f0", {"backpack": "Seat.Row1.Left"})
    _img, out = apply_transform(_checker(), label, TransformSpec("hflip", {}), ontology, mirror_labels=False)
    assert out.objects["backpack"].position == "Seat.Row1.Left"


def test_identity_factors(ontology):
    image = _checker()
    label = make_label("f0", {"backpack": "Seat.Row1.Left"})
    for spec in (
        TransformSpec("brightness", {"factor": 1.0}),
        TransformSpec("sharpness", {"factor": 1.0}),
        TransformSpec("rotate", {"angle": 0.0}),
        TransformSpec("affine", {"shear": 0.0, "tx": 0.0, "ty": 0.0}),
    ):
        out, out_label = apply_transform(image, label, spec, ontology)
        assert out.pixels == image.pixels, spec.kind
        assert out_label == label


def test_brightness_scales_and_clips(ontology):
    arr = np.full((2, 2, 3), 200, dtype=np.uint8)
    label = make_label("f0", {})
    out, _ = apply_transform(image_from_array(arr), label, TransformSpec("brightness", {"factor": 0.5}), ontology)
    assert set(out.to_array().flatten().tolist()) == {100}
    out, _ = apply_transform(image_from_array(arr), label, TransformSpec("brightness", {"factor": 2.0}), ontology)
    assert set(out.to_array().flatten().tolist()) == {255}


def test_rotate_keeps_shape_and_fills_black(ontology):
    image = RgbImage(10, 10, bytes([255] * 300))
    out, _ = apply_transform(image, make_label("f0", {}), TransformSpec("rotate", {"angle": 45.0}), ontology)
    assert (out.width, out.height) == (10, 10)
    arr = out.to_array()
    assert (arr == 0).any() and (arr == 255).any()


def test_apply_item_folds_in_order(ontology):
    image = _checker()
    label = make_label("f0", {"backpack": "Seat.Row2.Left"})
    item = PlanItem(
        frame_id="f0",
        transforms=(
            TransformSpec("hflip", {}),
            TransformSpec("brightness", {"factor": 0.5}),
        ),
    )
    via_item, item_label = apply_item(image, label, item, ontology)
    step_img, step_label = apply_transform(image, label, item.transforms[0], ontology)
    step_img, step_label = apply_transform(step_img, step_label, item.transforms[1], ontology)
    assert via_item.pixels == step_img.pixels
    assert item_label == step_label
    assert item_label.objects["backpack"].position == "Seat.Row2.Right"
