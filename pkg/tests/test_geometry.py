"""Geometry unit tests, checked against a pixel-rasterization oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boxhunt.geometry import (
    MIN_SIDE,
    Alpha,
    Box,
    BoxMove,
    ZoomMove,
    ZoomParams,
    best_iou,
    clamp,
    iou,
    recall,
    subregion,
    transform,
)

GRID = 64


def raster_mask(b: Box, size: int = GRID) -> np.ndarray:
    """Boolean pixel mask of an integer-coordinate box: pixel (x, y) is covered
    when x1 <= x < x2 and y1 <= y < y2."""
    mask = np.zeros((size, size), dtype=bool)
    mask[int(b.y1) : int(b.y2), int(b.x1) : int(b.x2)] = True
    return mask


def raster_iou(b: Box, g: Box) -> float:
    mb, mg = raster_mask(b), raster_mask(g)
    inter = int(np.count_nonzero(mb & mg))
    union = int(np.count_nonzero(mb | mg))
    return inter / union


def raster_recall(b: Box, g: Box) -> float:
    mb, mg = raster_mask(b), raster_mask(g)
    return int(np.count_nonzero(mb & mg)) / int(np.count_nonzero(mg))


def int_boxes(size: int = GRID):
    def build(draw):
        x1 = draw(st.integers(0, size - 1))
        y1 = draw(st.integers(0, size - 1))
        x2 = draw(st.integers(x1 + 1, size))
        y2 = draw(st.integers(y1 + 1, size))
        return Box(float(x1), float(y1), float(x2), float(y2))

    return st.composite(build)()


class TestIou:
    def test_identical(self):
        b = Box(0, 0, 10, 10)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(Box(0, 0, 1, 1), Box(5, 5, 6, 6)) == 0.0

    def test_partial_overlap(self):
        # inter = 1, union = 4 + 4 - 1 = 7
        assert iou(Box(0, 0, 2, 2), Box(1, 1, 3, 3)) == 1 / 7

    @given(int_boxes(), int_boxes())
    def test_symmetric_and_bounded(self, a, b):
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0

    @given(int_boxes(), int_boxes())
    def test_matches_rasterization(self, a, b):
        assert iou(a, b) == raster_iou(a, b)


class TestRecall:
    def test_contained(self):
        assert recall(Box(0, 0, 4, 4), Box(1, 1, 3, 3)) == 1.0

    def test_partial(self):
        # inter = 1, area(g) = 4
        assert recall(Box(0, 0, 2, 2), Box(1, 1, 3, 3)) == 0.25

    def test_disjoint(self):
        assert recall(Box(5, 5, 6, 6), Box(0, 0, 1, 1)) == 0.0

    @given(int_boxes(), int_boxes())
    def test_at_least_iou(self, a, b):
        assert recall(a, b) >= iou(a, b)

    @given(int_boxes(), int_boxes())
    def test_matches_rasterization(self, a, b):
        assert recall(a, b) == raster_recall(a, b)


class TestSubregion:
    ANCESTOR = Box(0, 0, 96, 96)

    def test_top_left_default_params(self):
        got = subregion(self.ANCESTOR, ZoomMove.TL, ZoomParams(3 / 4, 1 / 3))
        assert got == Box(0, 0, 72, 72)

    def test_center_default_params(self):
        got = subregion(self.ANCESTOR, ZoomMove.C, ZoomParams(3 / 4, 1 / 3))
        assert got == Box(12, 12, 84, 84)

    def test_top_right_non_overlapping(self):
        got = subregion(self.ANCESTOR, ZoomMove.TR, ZoomParams(1 / 2, 1))
        assert got == Box(48, 0, 96, 48)

    @pytest.mark.parametrize(
        "scale_subregion,scale_mask",
        [(1 / 2, 1), (1 / 2, 1 / 2), (3 / 4, 1 / 3), (4 / 5, 5 / 16), (4 / 5, 1 / 4)],
    )
    @pytest.mark.parametrize("move", list(ZoomMove))
    def test_contained_with_exact_area_ratio(self, scale_subregion, scale_mask, move):
        params = ZoomParams(scale_subregion, scale_mask)
        sub = subregion(self.ANCESTOR, move, params)
        assert sub.x1 >= self.ANCESTOR.x1 and sub.y1 >= self.ANCESTOR.y1
        assert sub.x2 <= self.ANCESTOR.x2 and sub.y2 <= self.ANCESTOR.y2
        ratio = sub.area / self.ANCESTOR.area
        assert ratio == pytest.approx(scale_subregion**2, abs=1e-9)

    def test_non_overlapping_quadrants_tile_ancestor(self):
        params = ZoomParams(1 / 2, 1)
        quads = [
            subregion(self.ANCESTOR, move, params)
            for move in (ZoomMove.TL, ZoomMove.TR, ZoomMove.BL, ZoomMove.BR)
        ]
        for i in range(len(quads)):
            for j in range(i + 1, len(quads)):
                assert iou(quads[i], quads[j]) == 0.0
        assert sum(q.area for q in quads) == self.ANCESTOR.area

    @given(int_boxes())
    def test_strictly_smaller_than_ancestor(self, ancestor):
        params = ZoomParams(3 / 4, 1 / 3)
        for move in ZoomMove:
            sub = subregion(ancestor, move, params)
            assert sub.area < ancestor.area


class TestTransform:
    B = Box(10, 10, 110, 60)
    BOUNDS = (200.0, 100.0)
    ALPHA = Alpha(0.2)

    def test_right_shifts_by_alpha_w(self):
        got = transform(self.B, BoxMove.RIGHT, self.ALPHA, self.BOUNDS)
        assert got == Box(30, 10, 130, 60)

    def test_bigger_grows_center_preserving(self):
        got = transform(self.B, BoxMove.BIGGER, self.ALPHA, self.BOUNDS)
        assert got == Box(0, 5, 120, 65)

    def test_taller_shrinks_width_only(self):
        got = transform(self.B, BoxMove.TALLER, self.ALPHA, self.BOUNDS)
        assert got == Box(20, 10, 100, 60)

    @pytest.mark.parametrize(
        "there,back",
        [
            (BoxMove.RIGHT, BoxMove.LEFT),
            (BoxMove.LEFT, BoxMove.RIGHT),
            (BoxMove.DOWN, BoxMove.UP),
            (BoxMove.UP, BoxMove.DOWN),
        ],
    )
    def test_translation_inverses(self, there, back):
        # Box far from every edge, so no clamping kicks in.
        b = Box(50, 40, 80, 60)
        roundtrip = transform(transform(b, there, self.ALPHA, self.BOUNDS), back, self.ALPHA, self.BOUNDS)
        assert roundtrip.as_tuple() == pytest.approx(b.as_tuple(), abs=1e-9)

    @given(int_boxes(), st.sampled_from(list(BoxMove)))
    def test_result_valid_and_in_bounds(self, b, move):
        got = transform(b, move, self.ALPHA, (float(GRID), float(GRID)))
        assert 0.0 <= got.x1 < got.x2 <= GRID
        assert 0.0 <= got.y1 < got.y2 <= GRID
        assert got.width >= MIN_SIDE - 1e-12 and got.height >= MIN_SIDE - 1e-12


class TestClamp:
    def test_truncates_negative_coordinate(self):
        assert clamp(Box(-5, 0, 50, 40), (100, 100)) == Box(0, 0, 50, 40)

    def test_identity_inside_bounds(self):
        b = Box(10, 10, 20, 20)
        assert clamp(b, (100, 100)) == b

    def test_grows_tiny_box_to_min_side(self):
        assert clamp(Box(50, 50, 51, 51), (100, 100)) == Box(50, 50, 53, 53)

    def test_grows_away_from_boundary_edge(self):
        assert clamp(Box(99, 0, 100, 40), (100, 100)) == Box(97, 0, 100, 40)

    @given(int_boxes())
    def test_idempotent(self, b):
        bounds = (float(GRID), float(GRID))
        once = clamp(b, bounds)
        assert clamp(once, bounds) == once


class TestBestIou:
    def test_single_match(self):
        assert best_iou(Box(0, 0, 2, 2), [Box(0, 0, 2, 2)]) == (0, 1.0)

    def test_picks_overlapping_candidate(self):
        idx, score = best_iou(Box(0, 0, 2, 2), [Box(10, 10, 12, 12), Box(1, 1, 3, 3)])
        assert (idx, score) == (1, 1 / 7)

    def test_tie_goes_to_lowest_index(self):
        assert best_iou(Box(0, 0, 2, 2), [Box(0, 0, 2, 2), Box(0, 0, 2, 2)]) == (0, 1.0)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError, match="no ground truth"):
            best_iou(Box(0, 0, 2, 2), [])


class TestValidation:
    @pytest.mark.parametrize("coords", [(5, 0, 5, 10), (0, 5, 10, 5), (6, 0, 5, 10)])
    def test_degenerate_boxes_rejected(self, coords):
        with pytest.raises(ValueError):
            Box(*coords)

    def test_zoom_params_range(self):
        with pytest.raises(ValueError):
            ZoomParams(1.0, 1 / 3)
        with pytest.raises(ValueError):
            ZoomParams(1 / 2, 0.0)

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            Alpha(0.0)
        with pytest.raises(ValueError):
            Alpha(1.0)


@settings(max_examples=25)
@given(int_boxes(), int_boxes())
def test_iou_of_union_bound(a, b):
    # IoU never exceeds recall against either argument.
    assert iou(a, b) <= min(recall(a, b), recall(b, a))
