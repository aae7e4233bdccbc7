"""Axis-aligned bounding-box arithmetic.

Boxes live in continuous pixel coordinates with the origin at the top-left
corner and y growing downward. Area is ``(x2 - x1) * (y2 - y1)``; there is no
pixel-inclusive off-by-one anywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

MIN_SIDE = 3.0


class ZoomMove(IntEnum):
    """The five fixed sub-regions of the zoom action set."""

    TL = 0
    TR = 1
    BL = 2
    BR = 3
    C = 4


class BoxMove(IntEnum):
    """The eight relative box deformations of the dynamic action set."""

    RIGHT = 0
    LEFT = 1
    DOWN = 2
    UP = 3
    BIGGER = 4
    SMALLER = 5
    FATTER = 6
    TALLER = 7


@dataclass(frozen=True)
class Box:
    """Rectangle with top-left corner (x1, y1) and bottom-right corner (x2, y2)."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box {self.as_tuple()}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class ZoomParams:
    """Sub-region sizing: each child is ``scale_subregion`` of its ancestor per
    axis, and slides in steps of ``scale_subregion * scale_mask``."""

    scale_subregion: float = 3 / 4
    scale_mask: float = 1 / 3

    def __post_init__(self) -> None:
        if not 0.0 < self.scale_subregion < 1.0:
            raise ValueError(f"scale_subregion must be in (0,1), got {self.scale_subregion}")
        if not 0.0 < self.scale_mask <= 1.0:
            raise ValueError(f"scale_mask must be in (0,1], got {self.scale_mask}")


@dataclass(frozen=True)
class Alpha:
    """Relative step size for the dynamic deformations."""

    alpha: float = 0.2

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0,1), got {self.alpha}")


def intersection_area(b: Box, g: Box) -> float:
    w = min(b.x2, g.x2) - max(b.x1, g.x1)
    h = min(b.y2, g.y2) - max(b.y1, g.y1)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def iou(b: Box, g: Box) -> float:
    """Intersection area over union area; 0 for disjoint boxes."""
    inter = intersection_area(b, g)
    union = b.area + g.area - inter
    return inter / union


def recall(b: Box, g: Box) -> float:
    """Intersection area over the area of ``g``; 1 iff ``b`` covers ``g``."""
    return intersection_area(b, g) / g.area


def subregion(ancestor: Box, move: ZoomMove, params: ZoomParams) -> Box:
    """Sub-box of ``ancestor`` selected by a zoom move.

    The sub-box is ``scale_subregion`` of the ancestor per axis; its offset from
    the ancestor's top-left corner is a multiple of
    ``scale_subregion * scale_mask``. Offsets that would push the sub-box past
    the ancestor edge are translated back inside without resizing.
    """
    w = ancestor.width * params.scale_subregion
    h = ancestor.height * params.scale_subregion
    step_x = w * params.scale_mask
    step_y = h * params.scale_mask
    offsets = {
        ZoomMove.TL: (0.0, 0.0),
        ZoomMove.TR: (step_x, 0.0),
        ZoomMove.BL: (0.0, step_y),
        ZoomMove.BR: (step_x, step_y),
        ZoomMove.C: (step_x / 2.0, step_y / 2.0),
    }
    dx, dy = offsets[ZoomMove(move)]
    x1 = min(ancestor.x1 + dx, ancestor.x2 - w)
    y1 = min(ancestor.y1 + dy, ancestor.y2 - h)
    return Box(x1, y1, x1 + w, y1 + h)


def transform(b: Box, move: BoxMove, alpha: Alpha, bounds: tuple[float, float]) -> Box:
    """Apply a dynamic deformation to ``b`` and clamp it into ``bounds``.

    The step sizes are ``alpha * width`` horizontally and ``alpha * height``
    vertically. Scale and aspect moves split the step symmetrically across both
    sides so the box center is preserved until clamping.
    """
    aw = alpha.alpha * b.width
    ah = alpha.alpha * b.height
    x1, y1, x2, y2 = b.as_tuple()
    move = BoxMove(move)
    if move is BoxMove.RIGHT:
        x1, x2 = x1 + aw, x2 + aw
    elif move is BoxMove.LEFT:
        x1, x2 = x1 - aw, x2 - aw
    elif move is BoxMove.DOWN:
        y1, y2 = y1 + ah, y2 + ah
    elif move is BoxMove.UP:
        y1, y2 = y1 - ah, y2 - ah
    elif move is BoxMove.BIGGER:
        x1, x2 = x1 - aw / 2.0, x2 + aw / 2.0
        y1, y2 = y1 - ah / 2.0, y2 + ah / 2.0
    elif move is BoxMove.SMALLER:
        x1, x2 = x1 + aw / 2.0, x2 - aw / 2.0
        y1, y2 = y1 + ah / 2.0, y2 - ah / 2.0
    elif move is BoxMove.FATTER:
        y1, y2 = y1 + ah / 2.0, y2 - ah / 2.0
    elif move is BoxMove.TALLER:
        x1, x2 = x1 + aw / 2.0, x2 - aw / 2.0
    return _clamp_coords(x1, y1, x2, y2, bounds, MIN_SIDE)


def clamp(b: Box, bounds: tuple[float, float], min_side: float = MIN_SIDE) -> Box:
    """Truncate ``b`` into ``bounds`` and enforce a minimum side length.

    Coordinates are clipped without shifting the box; a side that ends up
    shorter than ``min_side`` is grown away from the nearest violated edge.
    """
    return _clamp_coords(b.x1, b.y1, b.x2, b.y2, bounds, min_side)


def _clamp_coords(
    x1: float, y1: float, x2: float, y2: float, bounds: tuple[float, float], min_side: float
) -> Box:
    width, height = bounds
    x1, x2 = _clamp_axis(x1, x2, width, min_side)
    y1, y2 = _clamp_axis(y1, y2, height, min_side)
    return Box(x1, y1, x2, y2)


def _clamp_axis(lo: float, hi: float, limit: float, min_side: float) -> tuple[float, float]:
    lo = min(max(lo, 0.0), limit)
    hi = min(max(hi, 0.0), limit)
    if hi - lo < min_side:
        hi = lo + min_side
        if hi > limit:
            hi = limit
            lo = limit - min_side
    return lo, hi


def best_iou(b: Box, gts: list[Box]) -> tuple[int, float]:
    """Index and value of the highest IoU of ``b`` against ``gts``.

    Ties go to the lowest index so logs stay reproducible.
    """
    if not gts:
        raise ValueError("no ground truth")
    scores = [iou(b, g) for g in gts]
    best = max(range(len(scores)), key=lambda i: (scores[i], -i))
    return best, scores[best]
