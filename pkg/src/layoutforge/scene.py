"""Structured scene-state records and their line-delimited JSON form.

A record describes one keyframe: the objects on screen, the relations between
them, and optionally the previous keyframe's layout and a ground-truth layout.
Coordinates are normalized with the origin at the top-left and y pointing
down, so ``above`` means a smaller ``cy``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import BoxRangeError, CoverageError, RefError, SchemaError, VocabError

STATUSES = ("new", "keep", "move", "disappear")
PREDICATES = ("left_of", "above", "inside")

_OBJECT_KEYS = ("id", "type", "content", "role", "status")
_RECORD_KEYS = ("scene_text", "objects", "relations")


@dataclass(frozen=True)
class BoundingBox:
    """Normalized ``(cx, cy, w, h)`` box; every component lies in [0, 1]."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and 0.0 <= v <= 1.0):
                raise BoxRangeError(f"{name}={v!r} outside [0, 1]")
            object.__setattr__(self, name, float(v))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h)

    def edges(self) -> tuple[float, float, float, float]:
        """Edge form ``(x0, y0, x1, y1)``."""
        return (
            self.cx - self.w / 2,
            self.cy - self.h / 2,
            self.cx + self.w / 2,
            self.cy + self.h / 2,
        )

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class SceneObject:
    id: str
    kind: str
    content: str
    role: str
    status: str
    size_hint: tuple[float, float] | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Relation:
    subject: str
    predicate: str
    object: str


@dataclass(frozen=True)
class SceneRecord:
    scene_text: str
    objects: tuple[SceneObject, ...]
    relations: tuple[Relation, ...] = ()
    prev_layout: dict[str, BoundingBox] | None = None
    gt_layout: dict[str, BoundingBox] | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(o.id for o in self.objects)

    @property
    def visible_ids(self) -> tuple[str, ...]:
        return tuple(o.id for o in self.objects if o.status != "disappear")

    def object(self, oid: str) -> SceneObject:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)


@dataclass(frozen=True)
class KeyframeLayout:
    """Ordered per-object boxes for one keyframe."""

    ids: tuple[str, ...]
    boxes: tuple[BoundingBox, ...]

    def __post_init__(self):
        if len(self.ids) != len(self.boxes):
            raise ValueError("ids and boxes differ in length")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate ids in layout")

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, oid: str) -> BoundingBox:
        return self.boxes[self.ids.index(oid)]

    def items(self) -> Iterator[tuple[str, BoundingBox]]:
        return iter(zip(self.ids, self.boxes))

    def as_array(self) -> np.ndarray:
        if not self.boxes:
            return np.zeros((0, 4))
        return np.array([b.as_tuple() for b in self.boxes], dtype=float)

    @classmethod
    def from_array(cls, ids: Sequence[str], arr) -> "KeyframeLayout":
        arr = np.asarray(arr, dtype=float).reshape(len(ids), 4)
        return cls(tuple(ids), tuple(BoundingBox(*map(float, row)) for row in arr))

    @classmethod
    def from_mapping(cls, boxes: Mapping[str, BoundingBox]) -> "KeyframeLayout":
        return cls(tuple(boxes), tuple(boxes.values()))

    def subset(self, ids: Iterable[str]) -> "KeyframeLayout":
        ids = tuple(ids)
        return KeyframeLayout(ids, tuple(self[i] for i in ids))


# -- parsing -----------------------------------------------------------------


def _require(obj: Mapping, key: str, typ, path: str):
    if key not in obj:
        raise SchemaError(f"{path}{key}", "missing required field")
    value = obj[key]
    if not isinstance(value, typ) or isinstance(value, bool) and typ is not bool:
        raise SchemaError(f"{path}{key}", f"expected {getattr(typ, '__name__', typ)}, got {type(value).__name__}")
    return value


def _parse_box(raw: Any, path: str) -> BoundingBox:
    if isinstance(raw, Mapping):
        try:
            vals = [raw[k] for k in ("cx", "cy", "w", "h")]
        except KeyError as exc:
            raise SchemaError(path, f"box missing {exc.args[0]!r}") from None
    elif isinstance(raw, (list, tuple)):
        if len(raw) != 4:
            raise SchemaError(path, "box must have 4 components")
        vals = list(raw)
    else:
        raise SchemaError(path, "box must be a list [cx, cy, w, h] or a mapping")
    for v in vals:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(path, "box components must be numbers")
    try:
        return BoundingBox(*vals)
    except BoxRangeError as exc:
        raise BoxRangeError(f"{path}: {exc}") from None


def _parse_size(raw: Any, path: str) -> tuple[float, float]:
    if isinstance(raw, Mapping):
        raw = [raw.get("w"), raw.get("h")]
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise SchemaError(path, "size_hint must be [w, h]")
    b = _parse_box([0.5, 0.5, *raw], path)
    return (b.w, b.h)


def _parse_layout(raw: Any, path: str, known: set[str]) -> dict[str, BoundingBox] | None:
    if raw is None:
        return None
    if not isinstance(raw, Mapping):
        raise SchemaError(path, "expected a mapping from object id to box")
    out = {}
    for oid, box in raw.items():
        if oid not in known:
            raise RefError(f"{path}.{oid}", oid)
        out[oid] = _parse_box(box, f"{path}.{oid}")
    return out


def record_from_dict(data: Mapping) -> SceneRecord:
    if not isinstance(data, Mapping):
        raise SchemaError("<record>", "expected a JSON object")
    scene_text = _require(data, "scene_text", str, "")
    raw_objects = _require(data, "objects", list, "")
    raw_relations = _require(data, "relations", list, "")
    if not raw_objects:
        raise SchemaError("objects", "record needs at least one object")

    objects = []
    seen: set[str] = set()
    for i, ro in enumerate(raw_objects):
        p = f"objects[{i}]."
        if not isinstance(ro, Mapping):
            raise SchemaError(f"objects[{i}]", "expected a JSON object")
        vals = {k: _require(ro, k, str, p) for k in _OBJECT_KEYS}
        if vals["status"] not in STATUSES:
            raise VocabError(p + "status", vals["status"], STATUSES)
        if vals["id"] in seen:
            raise SchemaError(p + "id", f"duplicate id {vals['id']!r}")
        seen.add(vals["id"])
        hint = ro.get("size_hint")
        if hint is not None:
            hint = _parse_size(hint, p + "size_hint")
        extra = {k: v for k, v in ro.items() if k not in _OBJECT_KEYS and k != "size_hint"}
        objects.append(SceneObject(vals["id"], vals["type"], vals["content"], vals["role"],
                                   vals["status"], hint, extra))

    relations = []
    for i, rr in enumerate(raw_relations):
        p = f"relations[{i}]."
        if not isinstance(rr, Mapping):
            raise SchemaError(f"relations[{i}]", "expected a JSON object")
        subj = _require(rr, "subject", str, p)
        pred = _require(rr, "predicate", str, p)
        obj = _require(rr, "object", str, p)
        if pred not in PREDICATES:
            raise VocabError(p + "predicate", pred, PREDICATES)
        for key, ref in (("subject", subj), ("object", obj)):
            if ref not in seen:
                raise RefError(p + key, ref)
        if subj == obj:
            raise SchemaError(p + "object", "relation subject and object must differ")
        relations.append(Relation(subj, pred, obj))

    prev = _parse_layout(data.get("prev_layout"), "prev_layout", seen)
    gt = _parse_layout(data.get("gt_layout"), "gt_layout", seen)
    for o in objects:
        if o.status in ("keep", "move") and (prev is None or o.id not in prev):
            raise SchemaError(f"prev_layout.{o.id}", f"status {o.status!r} requires a previous box")

    extra = {k: v for k, v in data.items() if k not in _RECORD_KEYS + ("prev_layout", "gt_layout")}
    return SceneRecord(scene_text, tuple(objects), tuple(relations), prev, gt, extra)


def parse_record(line: str | bytes) -> SceneRecord:
    """Parse one line-delimited JSON record."""
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError("<record>", f"invalid JSON: {exc.msg}") from None
    return record_from_dict(data)


def _box_out(b: BoundingBox) -> list[float]:
    return [b.cx, b.cy, b.w, b.h]


def record_to_dict(rec: SceneRecord) -> dict:
    objects = []
    for o in rec.objects:
        d = {"id": o.id, "type": o.kind, "content": o.content, "role": o.role, "status": o.status}
        if o.size_hint is not None:
            d["size_hint"] = list(o.size_hint)
        d.update(o.extra)
        objects.append(d)
    out: dict[str, Any] = {
        "scene_text": rec.scene_text,
        "objects": objects,
        "relations": [{"subject": r.subject, "predicate": r.predicate, "object": r.object}
                      for r in rec.relations],
    }
    if rec.prev_layout is not None:
        out["prev_layout"] = {k: _box_out(b) for k, b in rec.prev_layout.items()}
    if rec.gt_layout is not None:
        out["gt_layout"] = {k: _box_out(b) for k, b in rec.gt_layout.items()}
    out.update(rec.extra)
    return out


def serialize_record(rec: SceneRecord) -> str:
    return json.dumps(record_to_dict(rec), ensure_ascii=False)


def read_records(path) -> list[SceneRecord]:
    """Read a line-delimited dataset file, skipping blank lines."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(parse_record(line))
            except SchemaError as exc:
                raise SchemaError(f"line {lineno}: {exc.path}", str(exc).split(": ", 1)[-1]) from None
    return records


def write_records(path, records: Iterable[SceneRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(serialize_record(rec) + "\n")


def validate_layout_against_record(layout: KeyframeLayout, record: SceneRecord) -> KeyframeLayout:
    """Check that ``layout`` covers exactly the visible objects of ``record``.

    Returns the layout reordered to record order.
    """
    expected = record.visible_ids
    missing = [i for i in expected if i not in layout.ids]
    extra = [i for i in layout.ids if i not in expected]
    if missing or extra:
        raise CoverageError(missing, extra)
    for oid, box in layout.items():
        if box.w <= 0 or box.h <= 0:
            raise BoxRangeError(f"{oid}: visible object has an empty box")
    return layout.subset(expected)
