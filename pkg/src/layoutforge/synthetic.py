"""Seeded synthetic scenes and rendered frames for tests and experiments."""

from __future__ import annotations

import numpy as np

from .scene import BoundingBox, Relation, SceneObject, SceneRecord

ROLES = ("title", "main figure", "equation", "annotation", "geometric shape", "label", "group")
KINDS = ("text", "equation", "shape", "arrow", "group")


def _disjoint(box, others, gap):
    cx, cy, w, h = box
    for ox, oy, ow, oh in others:
        if abs(cx - ox) < (w + ow) / 2 + gap and abs(cy - oy) < (h + oh) / 2 + gap:
            return False
    return True


def _place(rng, sizes, gap=0.03, border=0.02, tries=2000):
    placed = []
    for w, h in sizes:
        for _ in range(tries):
            cx = rng.uniform(w / 2 + border, 1 - w / 2 - border)
            cy = rng.uniform(h / 2 + border, 1 - h / 2 - border)
            if _disjoint((cx, cy, w, h), placed, gap):
                placed.append((cx, cy, w, h))
                break
        else:
            return None
    return placed


def _relations_holding(rng, ids, boxes, max_rel, margin=0.02):
    cands = []
    for i, a in enumerate(boxes):
        for j, b in enumerate(boxes):
            if i == j:
                continue
            if a[0] + a[2] / 2 + margin < b[0] - b[2] / 2:
                cands.append(Relation(ids[i], "left_of", ids[j]))
            if a[1] + a[3] / 2 + margin < b[1] - b[3] / 2:
                cands.append(Relation(ids[i], "above", ids[j]))
    k = min(len(cands), int(rng.integers(0, max_rel + 1)))
    picks = rng.choice(len(cands), size=k, replace=False) if k else []
    return tuple(cands[int(p)] for p in sorted(picks))


def feasible_scene(seed: int, n_range=(3, 8), max_relations=3) -> SceneRecord:
    """One-keyframe scene with a known disjoint, in-frame, relation-satisfying layout.

    The witness layout is stored as ``gt_layout`` and its sizes as size hints.
    """
    rng = np.random.default_rng(seed)
    while True:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        sizes = [(float(rng.uniform(0.08, 0.25)), float(rng.uniform(0.06, 0.18))) for _ in range(n)]
        boxes = _place(rng, sizes)
        if boxes is not None:
            break
    ids = [f"o{i}" for i in range(n)]
    objects = tuple(
        SceneObject(ids[i], str(rng.choice(KINDS)), f"item {i}", str(rng.choice(ROLES)), "new",
                    sizes[i])
        for i in range(n))
    rels = _relations_holding(rng, ids, boxes, max_relations)
    gt = {ids[i]: BoundingBox(*boxes[i]) for i in range(n)}
    return SceneRecord(f"synthetic scene {seed}", objects, rels, None, gt)


def swap_scene(seed: int, extra_range=(0, 2)) -> list[SceneRecord]:
    """Two keyframes in which two same-row objects must trade places.

    The first keyframe is fixed (status ``keep``). In the second the pair is
    ``move``; relations to two fixed anchors force ``b`` fully left and ``a``
    fully right, so the straight-line paths cross mid-transition unless the
    planner routes them apart.
    """
    rng = np.random.default_rng(seed)
    w = float(rng.uniform(0.14, 0.2))
    h = float(rng.uniform(0.1, 0.14))
    y = float(rng.uniform(0.4, 0.6))
    dy = float(rng.uniform(-0.02, 0.02))
    xa = float(rng.uniform(0.22, 0.32))
    xb = float(rng.uniform(0.68, 0.78))
    prev = {
        "a": BoundingBox(xa, y, w, h),
        "b": BoundingBox(xb, y + dy, w, h),
        "anchor_l": BoundingBox(0.45, 0.1, 0.1, 0.06),
        "anchor_r": BoundingBox(0.55, 0.9, 0.1, 0.06),
    }
    n_extra = int(rng.integers(extra_range[0], extra_range[1] + 1))
    corners = [(0.12, 0.1), (0.88, 0.9)]
    for i in range(n_extra):
        prev[f"e{i}"] = BoundingBox(*corners[i], 0.12, 0.08)

    def objs(status_ab):
        out = [SceneObject("a", "shape", "A", "group", status_ab, (w, h)),
               SceneObject("b", "shape", "B", "group", status_ab, (w, h)),
               SceneObject("anchor_l", "text", "L", "label", "keep", (0.1, 0.06)),
               SceneObject("anchor_r", "text", "R", "label", "keep", (0.1, 0.06))]
        out += [SceneObject(f"e{i}", "text", f"E{i}", "label", "keep", (0.12, 0.08))
                for i in range(n_extra)]
        return tuple(out)

    start_rel = (Relation("a", "left_of", "b"),)
    end_rel = (Relation("b", "left_of", "a"), Relation("b", "left_of", "anchor_l"),
               Relation("anchor_r", "left_of", "a"))
    kf0 = SceneRecord(f"swap {seed} start", objs("keep"), start_rel, dict(prev))
    kf1 = SceneRecord(f"swap {seed} end", objs("move"), end_rel, dict(prev))
    return [kf0, kf1]


def crowded_scene(seed: int, n_range=(12, 16)) -> SceneRecord:
    """Many wide objects; a naive row packer runs off the bottom of the frame."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    objects = tuple(
        SceneObject(f"c{i}", str(rng.choice(KINDS)), f"item {i}", str(rng.choice(ROLES)), "new",
                    (float(rng.uniform(0.25, 0.4)), float(rng.uniform(0.12, 0.2))))
        for i in range(n))
    return SceneRecord(f"crowded scene {seed}", objects, ())


def synthetic_suite(seed: int, n_range=(3, 12), max_relations=5, max_keyframes=3) -> list[SceneRecord]:
    """General multi-keyframe scene: feasible first keyframe, then moves/arrivals/exits."""
    rng = np.random.default_rng(seed)
    first = feasible_scene(int(rng.integers(1 << 31)), n_range, max_relations)
    records = [first]
    n_kf = int(rng.integers(1, max_keyframes + 1))
    layout = dict(first.gt_layout)
    for k in range(1, n_kf):
        objs = []
        for o in records[-1].objects:
            if o.status == "disappear":
                continue
            r = rng.uniform()
            status = "keep" if r < 0.5 else "move" if r < 0.85 else "disappear"
            objs.append(SceneObject(o.id, o.kind, o.content, o.role, status, o.size_hint))
        new_id = f"n{k}"
        objs.append(SceneObject(new_id, "text", "arrival", "label", "new", (0.15, 0.08)))
        visible = [o.id for o in objs if o.status != "disappear"]
        prev = {o.id: layout[o.id] for o in objs if o.id in layout}
        rels = []
        if len(visible) >= 2 and rng.uniform() < 0.5:
            a, b = rng.choice(len(visible), 2, replace=False)
            rels.append(Relation(visible[int(a)], "left_of", visible[int(b)]))
        records.append(SceneRecord(f"synthetic scene {seed} kf{k}", tuple(objs), tuple(rels), prev))
    return records


# -- rendered frames -----------------------------------------------------------------


def render_boxes(boxes, width: int, height: int, colors=None, background=(0, 0, 0)) -> np.ndarray:
    """Draw solid rectangles for normalized boxes onto an RGB uint8 frame."""
    frame = np.empty((height, width, 3), dtype=np.uint8)
    frame[:] = background
    for i, b in enumerate(boxes):
        cx, cy, w, h = b.as_tuple() if isinstance(b, BoundingBox) else b
        x0 = int(round((cx - w / 2) * width))
        x1 = int(round((cx + w / 2) * width))
        y0 = int(round((cy - h / 2) * height))
        y1 = int(round((cy + h / 2) * height))
        color = (255, 255, 255) if colors is None else colors[i]
        frame[max(y0, 0):max(y1, 0), max(x0, 0):max(x1, 0)] = color
    return frame


def tracked_rect_sequence(seed: int, width=320, height=240, n_range=(2, 10)):
    """Two keyframes of solid rectangles with known per-object statuses.

    Rectangles sit in distinct cells of a 4x3 grid so that matching is
    unambiguous. Returns ``(frames, boxes_per_frame, statuses)`` where
    ``boxes_per_frame[k]`` maps a ground-truth name to its pixel-exact normalized
    box and ``statuses`` maps names to their second-keyframe status.
    """
    rng = np.random.default_rng(seed)
    cols, rows = 4, 3
    cw, ch = width // cols, height // rows
    cells = rng.permutation(cols * rows)
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    n = min(n, cols * rows - 2)
    occupied, spare = cells[:n], cells[n:]
    colors = {}
    first, second, statuses = {}, {}, {}

    def rect(cell):
        cx0, cy0 = (cell % cols) * cw, (cell // cols) * ch
        w = int(rng.integers(20, cw - 30))
        h = int(rng.integers(20, ch - 30))
        x0 = cx0 + (cw - w) // 2 + int(rng.integers(-4, 5))
        y0 = cy0 + (ch - h) // 2 + int(rng.integers(-4, 5))
        return [x0, y0, w, h]

    for i, cell in enumerate(occupied):
        name = f"g{i}"
        first[name] = rect(cell)
        colors[name] = tuple(int(c) for c in rng.integers(80, 256, size=3))
        r = rng.uniform()
        if r < 0.4:
            statuses[name] = "keep"
            second[name] = list(first[name])
        elif r < 0.8:
            statuses[name] = "move"
            dx, dy = (int(v) * int(rng.choice([-1, 1])) for v in rng.integers(5, 9, size=2))
            x0, y0, w, h = first[name]
            second[name] = [x0 + dx, y0 + dy, w, h]
        else:
            statuses[name] = "disappear"
    n_new = int(rng.integers(0, min(2, len(spare)) + 1))
    for j in range(n_new):
        name = f"n{j}"
        second[name] = rect(spare[j])
        colors[name] = tuple(int(c) for c in rng.integers(80, 256, size=3))
        statuses[name] = "new"

    def draw(rects):
        frame = np.zeros((height, width, 3), dtype=np.uint8)
        out = {}
        for name, (x0, y0, w, h) in rects.items():
            frame[y0:y0 + h, x0:x0 + w] = colors[name]
            out[name] = BoundingBox((x0 + w / 2) / width, (y0 + h / 2) / height, w / width, h / height)
        return frame, out

    f0, b0 = draw(first)
    f1, b1 = draw(second)
    return [f0, f1], [b0, b1], statuses
