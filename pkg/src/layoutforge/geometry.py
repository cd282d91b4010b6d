"""Axis-aligned rectangle arithmetic.

Scalar helpers take :class:`BoundingBox` values. The ``*_array`` helpers work
on ``(..., N, 4)`` arrays of ``(cx, cy, w, h)`` rows and broadcast over any
leading batch dimensions, which is what the loss terms and the optimizer use.
Degenerate boxes give IoU and overlap ratio 0 instead of dividing by zero.
"""

from __future__ import annotations

import numpy as np

from .scene import BoundingBox


def _intersection(a: BoundingBox, b: BoundingBox) -> float:
    ax0, ay0, ax1, ay1 = a.edges()
    bx0, by0, bx1, by1 = b.edges()
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    return iw * ih


def _edge_area(b: BoundingBox) -> float:
    x0, y0, x1, y1 = b.edges()
    return (x1 - x0) * (y1 - y0)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    inter = _intersection(a, b)
    union = _edge_area(a) + _edge_area(b) - inter
    if union <= 0:
        return 0.0
    return min(1.0, inter / union)


def overlap_ratio(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over the smaller box's area."""
    small = min(_edge_area(a), _edge_area(b))
    if small <= 0:
        return 0.0
    return min(1.0, _intersection(a, b) / small)


def interpolate(a: BoundingBox, b: BoundingBox, u: float) -> BoundingBox:
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"interpolation parameter u={u} outside [0, 1]")
    return BoundingBox(*((1 - u) * x + u * y for x, y in zip(a.as_tuple(), b.as_tuple())))


def clamp_box(raw) -> BoundingBox:
    return BoundingBox(*np.clip(np.asarray(raw, dtype=float), 0.0, 1.0).tolist())


# -- array forms --------------------------------------------------------------


def to_edges(boxes: np.ndarray) -> np.ndarray:
    """``(..., 4)`` center form to ``(..., 4)`` edge form ``(x0, y0, x1, y1)``."""
    c = boxes[..., :2]
    half = boxes[..., 2:] / 2
    return np.concatenate([c - half, c + half], axis=-1)


def pairwise_intersection(boxes: np.ndarray) -> np.ndarray:
    """``(..., N, 4)`` -> ``(..., N, N)`` intersection areas."""
    e = to_edges(boxes)
    x0 = np.maximum(e[..., :, None, 0], e[..., None, :, 0])
    y0 = np.maximum(e[..., :, None, 1], e[..., None, :, 1])
    x1 = np.minimum(e[..., :, None, 2], e[..., None, :, 2])
    y1 = np.minimum(e[..., :, None, 3], e[..., None, :, 3])
    return np.clip(x1 - x0, 0, None) * np.clip(y1 - y0, 0, None)


def edge_areas(boxes: np.ndarray) -> np.ndarray:
    """Areas from the edge form, so a box's area equals its self-intersection exactly."""
    e = to_edges(boxes)
    return (e[..., 2] - e[..., 0]) * (e[..., 3] - e[..., 1])


def pairwise_iou(boxes: np.ndarray) -> np.ndarray:
    inter = pairwise_intersection(boxes)
    area = edge_areas(boxes)
    union = area[..., :, None] + area[..., None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return np.clip(out, 0.0, 1.0)


def pairwise_overlap_ratio(boxes: np.ndarray) -> np.ndarray:
    inter = pairwise_intersection(boxes)
    area = edge_areas(boxes)
    small = np.minimum(area[..., :, None], area[..., None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(small > 0, inter / np.where(small > 0, small, 1.0), 0.0)
    return np.clip(out, 0.0, 1.0)


def rect_iou(a, b) -> float:
    """IoU of two edge-form rectangles ``(x0, y0, x1, y1)`` (pixel or unit)."""
    iw = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def rect_overlap_ratio(a, b) -> float:
    iw = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    small = min((a[2] - a[0]) * (a[3] - a[1]), (b[2] - b[0]) * (b[3] - b[1]))
    return iw * ih / small if small > 0 else 0.0
