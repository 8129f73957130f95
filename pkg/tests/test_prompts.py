import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from maskboost.errors import EmptyForeground
from maskboost.mask import BinaryMask
from maskboost.prompts import (
    BoxPrompt,
    PointPrompt,
    PromptSet,
    PROMPT_MODES,
    bounding_box,
    centroid_point,
    generate_prompts,
    prompt_set_from_dict,
    prompt_set_to_dict,
)

from .conftest import masks
from .oracles import oracle_bbox, oracle_centroid


def test_centroid_single_pixel():
    m = BinaryMask.from_pixels(8, 8, [(3, 5)])
    assert centroid_point(m) == PointPrompt(x=3.0, y=5.0, label=1)


def test_centroid_full_square():
    assert centroid_point(BinaryMask.full(4, 4)) == PointPrompt(1.5, 1.5)


def test_centroid_l_shape():
    # moments (3, 1, 1) → (1/3, 1/3).
    m = BinaryMask.from_pixels(3, 3, [(0, 0), (1, 0), (0, 1)])
    p = centroid_point(m)
    assert p.x == pytest.approx(1 / 3)
    assert p.y == pytest.approx(1 / 3)


def test_centroid_empty_raises():
    with pytest.raises(EmptyForeground):
        centroid_point(BinaryMask.zeros(4, 4))


def test_bbox_single_pixel():
    m = BinaryMask.from_pixels(8, 8, [(3, 5)])
    assert bounding_box(m) == BoxPrompt(3, 5, 3, 5)


def test_bbox_two_pixels():
    # per-axis min/max of {(1,2), (4,7)}.
    m = BinaryMask.from_pixels(8, 8, [(1, 2), (4, 7)])
    assert bounding_box(m) == BoxPrompt(1, 2, 4, 7)


def test_bbox_full_frame():
    assert bounding_box(BinaryMask.full(4, 3)) == BoxPrompt(0, 0, 3, 2)


def test_bbox_empty_raises():
    with pytest.raises(EmptyForeground):
        bounding_box(BinaryMask.zeros(4, 4))


def test_generate_mode_shapes():
    m = BinaryMask.from_pixels(8, 8, [(3, 5)])
    only_box = generate_prompts(m, "box")
    assert only_box.box is not None and only_box.point is None
    only_point = generate_prompts(m, "point")
    assert only_point.point is not None and only_point.box is None
    mixed = generate_prompts(m, "mixed")
    assert mixed == PromptSet("mixed", PointPrompt(3.0, 5.0), BoxPrompt(3, 5, 3, 5))


def test_generate_two_components_summarizes_whole_foreground():
    # {(0,0),(9,9)}: moments (2, 9, 9) → centroid (4.5, 4.5).
    m = BinaryMask.from_pixels(10, 10, [(0, 0), (9, 9)])
    ps = generate_prompts(m, "mixed")
    assert ps.point == PointPrompt(4.5, 4.5)
    assert ps.box == BoxPrompt(0, 0, 9, 9)


def test_generate_rejects_unknown_mode():
    m = BinaryMask.from_pixels(2, 2, [(0, 0)])
    with pytest.raises(ValueError):
        generate_prompts(m, "scribble")


def test_prompt_set_enforces_mode_invariants():
    with pytest.raises(ValueError):
        PromptSet("box", point=PointPrompt(1.0, 1.0))
    with pytest.raises(ValueError):
        PromptSet("mixed", point=PointPrompt(1.0, 1.0), box=None)
    with pytest.raises(ValueError):
        PromptSet("point", point=PointPrompt(1.0, 1.0), box=BoxPrompt(0, 0, 1, 1))


def test_box_prompt_rejects_inverted_corners():
    with pytest.raises(ValueError):
        BoxPrompt(4, 0, 2, 1)


@settings(max_examples=150)
@given(masks())
def test_bbox_matches_bruteforce(m):
    fg = {(x, y) for y in range(m.height) for x in range(m.width) if m.data[y, x]}
    assume(fg)
    assert (
        bounding_box(m).x1,
        bounding_box(m).y1,
        bounding_box(m).x2,
        bounding_box(m).y2,
    ) == oracle_bbox(fg)


@settings(max_examples=150)
@given(masks())
def test_centroid_matches_bruteforce(m):
    fg = {(x, y) for y in range(m.height) for x in range(m.width) if m.data[y, x]}
    assume(fg)
    p = centroid_point(m)
    ox, oy = oracle_centroid(fg)
    assert p.x == ox and p.y == oy


@settings(max_examples=150)
@given(masks())
def test_centroid_inside_box_and_bounds(m):
    assume(m.foreground_count > 0)
    ps = generate_prompts(m, "mixed")
    assert ps.box.x1 <= ps.point.x <= ps.box.x2
    assert ps.box.y1 <= ps.point.y <= ps.box.y2
    assert 0 <= ps.point.x <= m.width - 1
    assert 0 <= ps.point.y <= m.height - 1
    assert 0 <= ps.box.x1 and ps.box.x2 <= m.width - 1
    assert 0 <= ps.box.y1 and ps.box.y2 <= m.height - 1


@settings(max_examples=100)
@given(masks())
def test_box_is_tight(m):
    assume(m.foreground_count > 0)
    b = bounding_box(m)
    fg = {(x, y) for y in range(m.height) for x in range(m.width) if m.data[y, x]}
    assert all(b.x1 <= x <= b.x2 and b.y1 <= y <= b.y2 for x, y in fg)
    assert any(x == b.x1 for x, _ in fg)
    assert any(x == b.x2 for x, _ in fg)
    assert any(y == b.y1 for _, y in fg)
    assert any(y == b.y2 for _, y in fg)


@settings(max_examples=60)
@given(masks(max_side=8), st.integers(0, 5), st.integers(0, 5))
def test_prompts_translate_with_mask(m, dx, dy):
    assume(m.foreground_count > 0)
    arr = np.zeros((m.height + dy, m.width + dx), dtype=bool)
    arr[dy : dy + m.height, dx : dx + m.width] = m.data
    moved = BinaryMask(arr)
    p0, p1 = centroid_point(m), centroid_point(moved)
    assert p1.x == pytest.approx(p0.x + dx)
    assert p1.y == pytest.approx(p0.y + dy)
    b0, b1 = bounding_box(m), bounding_box(moved)
    assert (b1.x1, b1.y1, b1.x2, b1.y2) == (
        b0.x1 + dx,
        b0.y1 + dy,
        b0.x2 + dx,
        b0.y2 + dy,
    )


@settings(max_examples=60)
@given(masks())
def test_dict_round_trip_all_modes(m):
    assume(m.foreground_count > 0)
    for mode in PROMPT_MODES:
        ps = generate_prompts(m, mode)
        assert prompt_set_from_dict(prompt_set_to_dict(ps)) == ps
