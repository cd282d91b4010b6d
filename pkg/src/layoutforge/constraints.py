"""Penalty terms over keyframe layouts and their weighted total.

Each term exists twice: a batched ``*_term`` function over ``(..., N, 4)``
arrays (used by the planner's finite-difference gradient) and a public
``loss_*`` wrapper taking :class:`KeyframeLayout` values.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CoverageError, RefError
from .geometry import pairwise_iou, to_edges
from .scene import KeyframeLayout, Relation

PRED_CODE = {"left_of": 0, "above": 1, "inside": 2}


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 2.0  # box regression
    lambda2: float = 5.0  # collision
    lambda3: float = 3.0  # relation
    lambda4: float = 3.0  # boundary
    lambda5: float = 2.0  # interpolation path
    tau_coll: float = 0.05
    rel_margin: float = 0.01
    u_samples: tuple[float, ...] = (0.25, 0.50, 0.75)
    # a box placed inside another overlaps it by design
    exempt_inside: bool = True

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda5", "rel_margin"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.tau_coll <= 1.0:
            raise ValueError("tau_coll must lie in [0, 1]")
        if any(not 0.0 < u < 1.0 for u in self.u_samples):
            raise ValueError("u_samples must lie in (0, 1)")
        object.__setattr__(self, "u_samples", tuple(float(u) for u in self.u_samples))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["u_samples"] = list(self.u_samples)
        return d


@dataclass(frozen=True)
class LossBreakdown:
    l_box: float
    l_coll: float
    l_rel: float
    l_bound: float
    l_interp: float
    total: float

    @classmethod
    def combine(cls, weights: LossWeights, l_box=0.0, l_coll=0.0, l_rel=0.0, l_bound=0.0,
                l_interp=0.0) -> "LossBreakdown":
        total = (weights.lambda1 * l_box + weights.lambda2 * l_coll + weights.lambda3 * l_rel
                 + weights.lambda4 * l_bound + weights.lambda5 * l_interp)
        return cls(float(l_box), float(l_coll), float(l_rel), float(l_bound), float(l_interp),
                   float(total))

    def to_dict(self) -> dict:
        return asdict(self)


# -- batched terms ---------------------------------------------------------------


def _pair_mask(n: int, exempt: np.ndarray | None, ordered: bool) -> np.ndarray:
    mask = ~np.eye(n, dtype=bool) if ordered else np.triu(np.ones((n, n), dtype=bool), k=1)
    if exempt is not None:
        mask &= ~exempt
    return mask


def coll_term(boxes: np.ndarray, tau: float, exempt: np.ndarray | None = None) -> np.ndarray:
    """Mean over unordered pairs of ``max(0, IoU - tau)``."""
    n = boxes.shape[-2]
    mask = _pair_mask(n, exempt, ordered=False)
    npairs = int(mask.sum())
    if npairs == 0:
        return np.zeros(boxes.shape[:-2])
    hinge = np.clip(pairwise_iou(boxes) - tau, 0.0, None)
    return (hinge * mask).sum(axis=(-2, -1)) / npairs


def rel_term(boxes: np.ndarray, subj: np.ndarray, obj: np.ndarray, code: np.ndarray,
             margin: float) -> np.ndarray:
    """Mean hinge violation over relations given as index/code arrays."""
    if len(code) == 0:
        return np.zeros(boxes.shape[:-2])
    e = to_edges(boxes)
    ei = e[..., subj, :]
    ej = e[..., obj, :]
    left = np.clip(ei[..., 2] - ej[..., 0] + margin, 0, None)
    above = np.clip(ei[..., 3] - ej[..., 1] + margin, 0, None)
    inside = (np.clip(ej[..., 0] - ei[..., 0], 0, None) + np.clip(ej[..., 1] - ei[..., 1], 0, None)
              + np.clip(ei[..., 2] - ej[..., 2], 0, None) + np.clip(ei[..., 3] - ej[..., 3], 0, None))
    viol = np.where(code == 0, left, np.where(code == 1, above, inside))
    return viol.mean(axis=-1)


def bound_term(boxes: np.ndarray) -> np.ndarray:
    """Mean over boxes of the total overflow beyond the unit frame."""
    if boxes.shape[-2] == 0:
        return np.zeros(boxes.shape[:-2])
    e = to_edges(boxes)
    over = (np.clip(-e[..., 0], 0, None) + np.clip(-e[..., 1], 0, None)
            + np.clip(e[..., 2] - 1, 0, None) + np.clip(e[..., 3] - 1, 0, None))
    return over.mean(axis=-1)


def interp_term(start: np.ndarray, end: np.ndarray, u_samples: Sequence[float], tau: float,
                exempt: np.ndarray | None = None) -> np.ndarray:
    """Sum over u and ordered pairs ``i != j`` of ``max(0, IoU - tau)`` on the linear path.

    ``start`` and ``end`` hold the same objects in the same row order.
    """
    n = start.shape[-2]
    out = np.zeros(start.shape[:-2])
    if n < 2:
        return out
    mask = _pair_mask(n, exempt, ordered=True)
    for u in u_samples:
        mid = (1 - u) * start + u * end
        out = out + (np.clip(pairwise_iou(mid) - tau, 0, None) * mask).sum(axis=(-2, -1))
    return out


def path_max_iou(start: np.ndarray, end: np.ndarray, u: float,
                 exempt: np.ndarray | None = None) -> float:
    """Largest pairwise IoU on the interpolated path at ``u`` (0 with < 2 boxes)."""
    n = start.shape[-2]
    if n < 2:
        return 0.0
    iou = pairwise_iou((1 - u) * start + u * end)
    mask = _pair_mask(n, exempt, ordered=False)
    if not mask.any():
        return 0.0
    return float(iou[mask].max())


# -- index helpers -------------------------------------------------------------------


def relation_arrays(ids: Sequence[str], relations: Iterable[Relation]):
    pos = {oid: k for k, oid in enumerate(ids)}
    subj, obj, code = [], [], []
    for i, r in enumerate(relations):
        for key, ref in (("subject", r.subject), ("object", r.object)):
            if ref not in pos:
                raise RefError(f"relations[{i}].{key}", ref)
        subj.append(pos[r.subject])
        obj.append(pos[r.object])
        code.append(PRED_CODE[r.predicate])
    return (np.array(subj, dtype=int), np.array(obj, dtype=int), np.array(code, dtype=int))


def exempt_mask(ids: Sequence[str], pairs: Iterable[frozenset]) -> np.ndarray | None:
    pairs = [p for p in pairs]
    if not pairs:
        return None
    pos = {oid: k for k, oid in enumerate(ids)}
    m = np.zeros((len(ids), len(ids)), dtype=bool)
    for p in pairs:
        a, b = tuple(p)
        if a in pos and b in pos:
            m[pos[a], pos[b]] = m[pos[b], pos[a]] = True
    return m


def inside_pairs(relations: Iterable[Relation]) -> set[frozenset]:
    return {frozenset((r.subject, r.object)) for r in relations if r.predicate == "inside"}


# -- public wrappers -----------------------------------------------------------------


def _arr(layout) -> np.ndarray:
    return layout.as_array() if isinstance(layout, KeyframeLayout) else np.asarray(layout, float)


def loss_coll(layout, weights: LossWeights = LossWeights(), exempt: Iterable[frozenset] = ()) -> float:
    arr = _arr(layout)
    ids = layout.ids if isinstance(layout, KeyframeLayout) else tuple(range(len(arr)))
    return float(coll_term(arr, weights.tau_coll, exempt_mask(ids, exempt)))


def loss_rel(layout: KeyframeLayout, relations: Sequence[Relation],
             weights: LossWeights = LossWeights()) -> float:
    s, o, c = relation_arrays(layout.ids, relations)
    return float(rel_term(layout.as_array(), s, o, c, weights.rel_margin))


def loss_bound(layout) -> float:
    return float(bound_term(_arr(layout)))


def _same_ids(a: KeyframeLayout, b: KeyframeLayout, context: str):
    missing = [i for i in a.ids if i not in b.ids]
    extra = [i for i in b.ids if i not in a.ids]
    if missing or extra:
        raise CoverageError(missing, extra, context)


def loss_interp(layout_k: KeyframeLayout, layout_k1: KeyframeLayout,
                weights: LossWeights = LossWeights(), exempt: Iterable[frozenset] = ()) -> float:
    _same_ids(layout_k, layout_k1, "loss_interp")
    end = layout_k1.subset(layout_k.ids)
    return float(interp_term(layout_k.as_array(), end.as_array(), weights.u_samples,
                             weights.tau_coll, exempt_mask(layout_k.ids, exempt)))


def loss_box(layout: KeyframeLayout, gt: KeyframeLayout) -> float:
    """Mean absolute error over every box component."""
    _same_ids(gt, layout, "loss_box")
    if len(layout) == 0:
        return 0.0
    return float(np.abs(layout.subset(gt.ids).as_array() - gt.as_array()).mean())


def shared_ids(a: KeyframeLayout, b: KeyframeLayout) -> tuple[str, ...]:
    return tuple(i for i in a.ids if i in b.ids)


def keyframe_terms(layout: KeyframeLayout, relations: Sequence[Relation],
                   weights: LossWeights) -> tuple[float, float, float]:
    """``(l_coll, l_rel, l_bound)`` for one keyframe."""
    exempt = inside_pairs(relations) if weights.exempt_inside else ()
    return (loss_coll(layout, weights, exempt), loss_rel(layout, relations, weights),
            loss_bound(layout))


def total_loss(layouts: Sequence[KeyframeLayout], relations: Sequence[Sequence[Relation]] | None = None,
               weights: LossWeights = LossWeights(),
               gt: Sequence[KeyframeLayout] | None = None) -> LossBreakdown:
    """Weighted objective over a keyframe sequence.

    Collision, relation and boundary terms are averaged over keyframes; the
    interpolation term is summed over adjacent keyframe pairs, restricted to
    the objects present in both.
    """
    if not layouts:
        raise ValueError("need at least one keyframe layout")
    if relations is None:
        relations = [()] * len(layouts)
    terms = np.array([keyframe_terms(l, r, weights) for l, r in zip(layouts, relations)])
    l_coll, l_rel, l_bound = terms.mean(axis=0)
    l_interp = 0.0
    for k in range(len(layouts) - 1):
        ids = shared_ids(layouts[k], layouts[k + 1])
        exempt = ()
        if weights.exempt_inside:
            exempt = inside_pairs(relations[k]) | inside_pairs(relations[k + 1])
        l_interp += loss_interp(layouts[k].subset(ids), layouts[k + 1].subset(ids), weights, exempt)
    l_box = 0.0
    if gt is not None:
        l_box = float(np.mean([loss_box(l, g) for l, g in zip(layouts, gt)]))
    return LossBreakdown.combine(weights, l_box, l_coll, l_rel, l_bound, l_interp)
