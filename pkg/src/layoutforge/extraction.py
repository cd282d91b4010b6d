"""Recover per-object boxes from rendered keyframes and emit layout records.

Foreground comes from the alpha channel when present, otherwise from a
threshold on the brightest RGB channel. Components are 4-connected by default
and filtered by area and aspect ratio; the diagnostics reuse the same filter.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .geometry import rect_iou
from .scene import BoundingBox, SceneObject, SceneRecord


@dataclass(frozen=True)
class ExtractionConfig:
    fg_threshold: int = 30
    connectivity: int = 4
    min_area_frac: float = 0.0002
    min_aspect: float = 1 / 20
    max_aspect: float = 20.0
    match_iou: float = 0.3
    match_dist_frac: float = 0.05
    move_threshold: float = 0.01

    def __post_init__(self):
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ComponentBox:
    """A connected component. Pixel edges are half-open: ``x0 <= x < x1``."""

    x0: int
    y0: int
    x1: int
    y1: int
    area: int
    centroid: tuple[float, float]
    frame_size: tuple[int, int]  # (width, height)
    label: int = 0

    @property
    def box(self) -> BoundingBox:
        w, h = self.frame_size
        return BoundingBox((self.x0 + self.x1) / 2 / w, (self.y0 + self.y1) / 2 / h,
                           (self.x1 - self.x0) / w, (self.y1 - self.y0) / h)

    @property
    def rect(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)

    def shifted(self, dx: int, dy: int) -> "ComponentBox":
        return ComponentBox(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy, self.area,
                            (self.centroid[0] + dx, self.centroid[1] + dy), self.frame_size, self.label)


def extract_foreground(frame: np.ndarray, threshold: int = 30) -> np.ndarray:
    """Boolean foreground mask of an ``(H, W, 3|4)`` uint8 frame."""
    frame = np.asarray(frame)
    if frame.ndim == 2:
        return frame > threshold
    if frame.shape[-1] == 4:
        return frame[..., 3] > 0
    return frame[..., :3].max(axis=-1) > threshold


def _structure(connectivity: int) -> np.ndarray:
    return ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)


def label_components(mask: np.ndarray, connectivity: int = 4) -> tuple[np.ndarray, int]:
    """Label connected components; labels follow raster order of first pixel."""
    return ndimage.label(np.asarray(mask, dtype=bool), structure=_structure(connectivity))


def components(mask: np.ndarray, config: ExtractionConfig = ExtractionConfig(),
               filtered: bool = True) -> list[ComponentBox]:
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    labels, n = label_components(mask, config.connectivity)
    if n == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    sums_y = ndimage.sum_labels(np.indices(mask.shape)[0], labels, index=np.arange(1, n + 1))
    sums_x = ndimage.sum_labels(np.indices(mask.shape)[1], labels, index=np.arange(1, n + 1))
    min_area = config.min_area_frac * h * w
    out = []
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        ys, xs = sl
        bw, bh = xs.stop - xs.start, ys.stop - ys.start
        area = int(areas[k])
        if filtered:
            if area < min_area:
                continue
            if not config.min_aspect <= bw / bh <= config.max_aspect:
                continue
        out.append(ComponentBox(xs.start, ys.start, xs.stop, ys.stop, area,
                                (float(sums_x[k - 1] / area), float(sums_y[k - 1] / area)),
                                (w, h), k))
    return out


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]  # (prev index, cur index)
    statuses: tuple[str, ...]  # per current component: new / keep / move
    disappeared: tuple[int, ...]  # prev indices with no match


def match_keyframes(prev: Sequence[ComponentBox], cur: Sequence[ComponentBox],
                    config: ExtractionConfig = ExtractionConfig()) -> Matching:
    """Greedy IoU matching, then nearest-center matching for the leftovers."""
    pairs: list[tuple[int, int]] = []
    used_p: set[int] = set()
    used_c: set[int] = set()
    cand = []
    for i, a in enumerate(prev):
        for j, b in enumerate(cur):
            v = rect_iou(a.rect, b.rect)
            if v >= config.match_iou:
                cand.append((-v, i, j))
    for _, i, j in sorted(cand):
        if i not in used_p and j not in used_c:
            pairs.append((i, j))
            used_p.add(i)
            used_c.add(j)

    cand = []
    for i, a in enumerate(prev):
        if i in used_p:
            continue
        fw, fh = a.frame_size
        gate = config.match_dist_frac * math.hypot(fw, fh)
        for j, b in enumerate(cur):
            if j in used_c:
                continue
            d = math.dist(a.center, b.center)
            if d <= gate:
                cand.append((d, i, j))
    for _, i, j in sorted(cand):
        if i not in used_p and j not in used_c:
            pairs.append((i, j))
            used_p.add(i)
            used_c.add(j)

    statuses = ["new"] * len(cur)
    for i, j in pairs:
        a, b = prev[i].box, cur[j].box
        moved = math.hypot(a.cx - b.cx, a.cy - b.cy) > config.move_threshold
        statuses[j] = "move" if moved else "keep"
    gone = tuple(i for i in range(len(prev)) if i not in used_p)
    return Matching(tuple(sorted(pairs)), tuple(statuses), gone)


@dataclass
class TrackedObject:
    track_id: str
    boxes: dict = field(default_factory=dict)  # keyframe -> ComponentBox
    statuses: dict = field(default_factory=dict)  # keyframe -> status


def track_keyframes(per_frame: Sequence[Sequence[ComponentBox]],
                    config: ExtractionConfig = ExtractionConfig()) -> list[TrackedObject]:
    tracks: list[TrackedObject] = []
    live: dict[int, TrackedObject] = {}
    for k, comps in enumerate(per_frame):
        if k == 0:
            statuses, pairs, gone = ["new"] * len(comps), (), ()
        else:
            m = match_keyframes(per_frame[k - 1], comps, config)
            statuses, pairs, gone = m.statuses, m.pairs, m.disappeared
        cur_of = {j: i for i, j in pairs}
        nxt: dict[int, TrackedObject] = {}
        for j, comp in enumerate(comps):
            if j in cur_of:
                t = live[cur_of[j]]
            else:
                t = TrackedObject(f"obj_{len(tracks)}")
                tracks.append(t)
            t.boxes[k] = comp
            t.statuses[k] = statuses[j]
            nxt[j] = t
        for i in gone:
            live[i].statuses[k] = "disappear"
        live = nxt
    return tracks


def emit_records(tracks: Sequence[TrackedObject], n_keyframes: int,
                 scene_text: str = "") -> list[SceneRecord]:
    """One record per keyframe, objects in track order."""
    records = []
    for k in range(n_keyframes):
        objects, prev, gt = [], {}, {}
        for t in tracks:
            status = t.statuses.get(k)
            if status is None:
                continue
            objects.append(SceneObject(t.track_id, "unknown", "", "unknown", status))
            if k - 1 in t.boxes:
                prev[t.track_id] = t.boxes[k - 1].box
            if k in t.boxes:
                gt[t.track_id] = t.boxes[k].box
        if not objects:
            continue
        records.append(SceneRecord(scene_text, tuple(objects), (), prev or None, gt or None,
                                   {"keyframe": k}))
    return records


def extract_records(frames: Sequence[np.ndarray], keyframes: Sequence[int] | None = None,
                    scene_text: str = "", config: ExtractionConfig = ExtractionConfig()) -> list[SceneRecord]:
    """Full pipeline: foreground, components, tracking, records."""
    if keyframes is None:
        keyframes = range(len(frames))
    comps = [components(extract_foreground(frames[i], config.fg_threshold), config) for i in keyframes]
    return emit_records(track_keyframes(comps, config), len(comps), scene_text)
