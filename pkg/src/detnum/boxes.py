"""Axis-aligned boxes in center-size form, IoU, and enclosure geometry.

The canonical parameterization is (cx, cy, w, h); the corner view is derived.
All overlap arithmetic is done in corner space so that identical boxes give
an IoU of exactly 1.0 (floating-point round-trips through w/2 never enter
the intersection/union ratio asymmetrically).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["AABox", "EnclosureGeom", "iou", "enclosure_geom"]


@dataclass(frozen=True)
class AABox:
    """Axis-aligned box: center (cx, cy) and strictly positive size (w, h).

    Degenerate zero-area boxes are rejected at construction rather than
    yielding NaNs downstream.
    """

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            v = getattr(self, name)
            try:
                v = float(v)
            except (TypeError, ValueError):
                raise ValueError(f"AABox.{name} must be a real number, got {v!r}") from None
            if not math.isfinite(v):
                raise ValueError(f"AABox.{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if self.w <= 0.0 or self.h <= 0.0:
            raise ValueError(f"AABox needs w > 0 and h > 0, got w={self.w}, h={self.h}")

    @property
    def x1(self) -> float:
        return self.cx - self.w / 2.0

    @property
    def y1(self) -> float:
        return self.cy - self.h / 2.0

    @property
    def x2(self) -> float:
        return self.cx + self.w / 2.0

    @property
    def y2(self) -> float:
        return self.cy + self.h / 2.0

    @property
    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2) corner view."""
        return (self.x1, self.y1, self.x2, self.y2)

    @property
    def area(self) -> float:
        # computed from corners, not w*h, so it cancels exactly against the
        # intersection area of an identical box
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(frozen=True)
class EnclosureGeom:
    """Joint geometry of a box pair.

    Attributes
    ----------
    iou : float
        Overlap ratio in [0, 1].
    c_w_enc, c_h_enc : float
        Width/height of the smallest axis-aligned box enclosing both inputs.
    sigma : float
        Euclidean distance between the two centers.
    c_h_angle : float
        Absolute center-y gap |cy_g - cy_p| (the vertical leg of the
        center-offset triangle). Always <= sigma.
    """

    iou: float
    c_w_enc: float
    c_h_enc: float
    sigma: float
    c_h_angle: float


def iou(p: AABox, g: AABox) -> float:
    """Intersection over union of two boxes.

    Symmetric; 0.0 for disjoint boxes (edge contact counts as zero overlap),
    exactly 1.0 for identical boxes.
    """
    iw = min(p.x2, g.x2) - max(p.x1, g.x1)
    ih = min(p.y2, g.y2) - max(p.y1, g.y1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = p.area + g.area - inter
    return inter / union


def enclosure_geom(p: AABox, g: AABox) -> EnclosureGeom:
    """Enclosing-hull sizes, center distance, and center-y gap for a pair."""
    dx = g.cx - p.cx
    dy = g.cy - p.cy
    return EnclosureGeom(
        iou=iou(p, g),
        c_w_enc=max(p.x2, g.x2) - min(p.x1, g.x1),
        c_h_enc=max(p.y2, g.y2) - min(p.y1, g.y1),
        sigma=math.hypot(dx, dy),
        c_h_angle=abs(dy),
    )
