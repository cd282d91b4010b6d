"""Keyframe layout planner: iterative box refinement under the constraint objective.

The loop follows the denoising update ``b <- clamp(b - v / T_d, 0, 1)``. The
velocity ``v`` is ``T_d`` times a gradient step on the geometric objective
minus a decaying pull toward the spatial prior, so each denoising step is one
projected gradient-descent step. Gradients come from central finite
differences, evaluated for all probes in one batched call.

All keyframes are optimized jointly because the interpolation term couples
adjacent keyframes. Objects with status ``keep`` share their box with the
previous keyframe (or stay at their given previous box in the first one).
"""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .constraints import (LossBreakdown, LossWeights, bound_term, coll_term, exempt_mask,
                          inside_pairs, interp_term, keyframe_terms, path_max_iou,
                          relation_arrays, rel_term, shared_ids, loss_interp)
from .errors import CoverageError
from .prior import PriorConfig, SpatialPrior, build_prior, role_channel
from .scene import KeyframeLayout, SceneRecord

DEFAULT_SIZES = {
    "text": (0.30, 0.08),
    "title": (0.50, 0.10),
    "equation": (0.30, 0.10),
    "math": (0.30, 0.10),
    "shape": (0.20, 0.20),
    "arrow": (0.20, 0.05),
    "line": (0.25, 0.04),
    "group": (0.30, 0.25),
    "image": (0.30, 0.30),
    "axes": (0.40, 0.40),
    "graph": (0.40, 0.35),
}
FALLBACK_SIZE = (0.20, 0.15)


@dataclass(frozen=True)
class PlannerConfig:
    t_d: int = 16
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    attraction_gain: float = 0.1
    grad_eps: float = 1e-4
    step_size: float = 0.05
    # per-box cap on the gradient displacement of one step
    max_step: float = 0.08
    accept_coll: float = 0.02
    accept_rel: float = 0.15
    accept_bound: float = 0.01
    max_repair_rounds: int = 1
    repair_escalation: float = 2.0
    learn_size: bool = False
    use_constraints: bool = True
    size_table: dict = field(default_factory=lambda: dict(DEFAULT_SIZES))
    prior: PriorConfig = field(default_factory=PriorConfig)

    def __post_init__(self):
        if self.t_d < 1:
            raise ValueError("t_d must be >= 1")
        if self.grad_eps <= 0:
            raise ValueError("grad_eps must be positive")
        if self.max_repair_rounds < 0:
            raise ValueError("max_repair_rounds must be >= 0")

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("weights", "prior", "size_table")}
        d["weights"] = self.weights.to_dict()
        d["prior"] = self.prior.to_dict()
        d["size_table"] = {k: list(v) for k, v in sorted(self.size_table.items())}
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "PlannerConfig":
        data = dict(data)
        kw = {}
        if "weights" in data:
            w = dict(data.pop("weights"))
            if "u_samples" in w:
                w["u_samples"] = tuple(w["u_samples"])
            kw["weights"] = LossWeights(**w)
        if "prior" in data:
            kw["prior"] = PriorConfig.from_dict(data.pop("prior"))
        if "size_table" in data:
            kw["size_table"] = {k: tuple(v) for k, v in data.pop("size_table").items()}
        names = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown planner settings {sorted(unknown)}")
        return cls(**data, **kw)

    def accepts(self, l_coll: float, l_rel: float, l_bound: float) -> bool:
        return l_coll <= self.accept_coll and l_rel <= self.accept_rel and l_bound <= self.accept_bound


@dataclass(frozen=True)
class PlanResult:
    layouts: tuple[KeyframeLayout, ...]
    breakdowns: tuple[LossBreakdown, ...]
    interp: tuple[float, ...]
    accepted: tuple[bool, ...]
    repair_rounds_used: int
    relations: tuple = ()
    trace: tuple = ()

    @property
    def all_accepted(self) -> bool:
        return all(self.accepted)

    def to_dict(self) -> dict:
        frames = []
        for k, lay in enumerate(self.layouts):
            frames.append({
                "keyframe": k,
                "boxes": [{"id": i, "cx": b.cx, "cy": b.cy, "w": b.w, "h": b.h} for i, b in lay.items()],
                "relations": [{"subject": r.subject, "predicate": r.predicate, "object": r.object}
                              for r in (self.relations[k] if self.relations else ())],
                "losses": self.breakdowns[k].to_dict(),
                "accepted": self.accepted[k],
            })
        return {
            "keyframes": frames,
            "interp": list(self.interp),
            "accepted": all(self.accepted),
            "repair_rounds_used": self.repair_rounds_used,
        }


# -- initialization -------------------------------------------------------------------


def _object_rng(seed: int, oid: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(oid.encode("utf-8"))])


def default_size(kind: str, config: PlannerConfig) -> tuple[float, float]:
    return tuple(config.size_table.get(kind.lower(), FALLBACK_SIZE))


def init_boxes(record: SceneRecord, config: PlannerConfig = PlannerConfig()) -> KeyframeLayout:
    """Starting boxes for the visible objects of one keyframe.

    Objects with a previous box start there; others get a seeded center in
    [0.1, 0.9]^2 and their size hint (or the per-kind default size). The draw
    depends only on ``(seed, object id)``.
    """
    ids, rows = [], []
    for o in record.objects:
        if o.status == "disappear":
            continue
        prev = (record.prev_layout or {}).get(o.id)
        if prev is not None and o.status in ("keep", "move"):
            rows.append(prev.as_tuple())
        else:
            cx, cy = _object_rng(config.seed, o.id).uniform(0.1, 0.9, size=2)
            w, h = o.size_hint if o.size_hint is not None else default_size(o.kind, config)
            rows.append((cx, cy, w, h))
        ids.append(o.id)
    return KeyframeLayout.from_array(ids, np.clip(np.array(rows, dtype=float).reshape(-1, 4), 0, 1))


# -- problem assembly -------------------------------------------------------------------


class _Problem:
    """Flattened, batched form of a multi-keyframe planning problem.

    Parameters are rows of ``(cx, cy, w, h)``; each keyframe gathers its boxes
    from parameter rows, so a ``keep`` object shares one row across keyframes.
    """

    def __init__(self, records: Sequence[SceneRecord], init: Sequence[KeyframeLayout],
                 config: PlannerConfig):
        self.config = config
        self.records = list(records)
        w = config.weights
        self.ids = [lay.ids for lay in init]
        rows: list[tuple] = []
        frozen: list[bool] = []
        self.gather: list[np.ndarray] = []
        self.owner: list[list[int]] = []  # keyframes referencing each row
        prev_map: dict[str, int] = {}
        for k, (rec, lay) in enumerate(zip(records, init)):
            idx = []
            cur_map = {}
            for oid, box in lay.items():
                status = rec.object(oid).status
                if status == "keep" and k > 0 and oid in prev_map:
                    r = prev_map[oid]
                    self.owner[r].append(k)
                else:
                    r = len(rows)
                    rows.append(box.as_tuple())
                    frozen.append(status == "keep")
                    self.owner.append([k])
                idx.append(r)
                cur_map[oid] = r
            self.gather.append(np.array(idx, dtype=int))
            prev_map = cur_map
        self.params0 = np.array(rows, dtype=float).reshape(-1, 4)
        self.frozen = np.array(frozen, dtype=bool)

        self.rel = [relation_arrays(ids, rec.relations) for ids, rec in zip(self.ids, records)]
        self.exempt = [exempt_mask(ids, inside_pairs(rec.relations) if w.exempt_inside else ())
                       for ids, rec in zip(self.ids, records)]
        self.pairs = []
        for k in range(len(init) - 1):
            sh = shared_ids(init[k], init[k + 1])
            ia = np.array([init[k].ids.index(i) for i in sh], dtype=int)
            ib = np.array([init[k + 1].ids.index(i) for i in sh], dtype=int)
            ex = ()
            if w.exempt_inside:
                ex = inside_pairs(records[k].relations) | inside_pairs(records[k + 1].relations)
            self.pairs.append((ia, ib, exempt_mask(sh, ex)))

        nk = len(init)
        self.lam = np.tile([w.lambda2, w.lambda3, w.lambda4], (nk, 1)).astype(float)
        self.lam5 = w.lambda5

        # channel per parameter row, from the first keyframe that owns it
        self.channel = np.full(len(rows), -1, dtype=int)
        for r in range(len(rows)):
            k = self.owner[r][0]
            oid = self.ids[k][list(self.gather[k]).index(r)]
            ch = role_channel(records[k].object(oid).role, config.prior)
            self.channel[r] = -1 if ch is None else ch

    def boxes(self, params: np.ndarray, k: int) -> np.ndarray:
        return params[..., self.gather[k], :]

    def objective(self, params: np.ndarray) -> np.ndarray:
        """Batched objective over ``(..., R, 4)`` parameter arrays."""
        w = self.config.weights
        out = np.zeros(params.shape[:-2])
        for k in range(len(self.gather)):
            b = self.boxes(params, k)
            s, o, c = self.rel[k]
            lc, lr, lb = self.lam[k]
            out = out + lc * coll_term(b, w.tau_coll, self.exempt[k])
            out = out + lr * rel_term(b, s, o, c, w.rel_margin) + lb * bound_term(b)
        if self.lam5 > 0:
            for k, (ia, ib, ex) in enumerate(self.pairs):
                if len(ia) < 2:
                    continue
                start = self.boxes(params, k)[..., ia, :]
                end = self.boxes(params, k + 1)[..., ib, :]
                out = out + self.lam5 * interp_term(start, end, w.u_samples, w.tau_coll, ex)
        return out

    def free_mask(self, active_rows: np.ndarray | None = None) -> np.ndarray:
        mask = np.zeros(self.params0.shape, dtype=bool)
        cols = 4 if self.config.learn_size else 2
        mask[:, :cols] = True
        mask[self.frozen] = False
        if active_rows is not None:
            mask[~active_rows] = False
        return mask

    def gradient(self, params: np.ndarray, free: np.ndarray) -> np.ndarray:
        """Central finite-difference gradient over the ``free`` coordinates."""
        eps = self.config.grad_eps
        flat = np.flatnonzero(free)
        grad = np.zeros(params.size)
        if flat.size == 0:
            return grad.reshape(params.shape)
        probes = np.repeat(params.reshape(1, -1), 2 * flat.size, axis=0)
        n = flat.size
        probes[np.arange(n), flat] += eps
        probes[n + np.arange(n), flat] -= eps
        vals = self.objective(probes.reshape(-1, *params.shape))
        grad[flat] = (vals[:n] - vals[n:]) / (2 * eps)
        return grad.reshape(params.shape)

    def layouts(self, params: np.ndarray) -> list[KeyframeLayout]:
        return [KeyframeLayout.from_array(self.ids[k], np.clip(self.boxes(params, k), 0, 1))
                for k in range(len(self.gather))]


# -- the update ------------------------------------------------------------------------


def _clip_rows(step: np.ndarray, cap: float) -> np.ndarray:
    out = step.copy()
    for cols in (slice(0, 2), slice(2, 4)):
        norm = np.linalg.norm(out[:, cols], axis=1, keepdims=True)
        scale = np.where(norm > cap, cap / np.where(norm > 0, norm, 1.0), 1.0)
        out[:, cols] *= scale
    return out


def _attraction(problem: _Problem, params: np.ndarray, prior: SpatialPrior, gain: float,
                free: np.ndarray) -> np.ndarray:
    pull = np.zeros_like(params)
    if gain == 0:
        return pull
    for r, ch in enumerate(problem.channel):
        if ch < 0 or not free[r, 0]:
            continue
        cx, cy = prior.centroid(int(ch))
        pull[r, 0] = gain * (cx - params[r, 0])
        pull[r, 1] = gain * (cy - params[r, 1])
    return pull


def _velocity(problem: _Problem, params: np.ndarray, prior: SpatialPrior, t: int,
              free: np.ndarray, gain: float) -> np.ndarray:
    cfg = problem.config
    step = np.zeros_like(params)
    if cfg.use_constraints:
        step = _clip_rows(cfg.step_size * problem.gradient(params, free), cfg.max_step)
    pull = _attraction(problem, params, prior, gain * t / cfg.t_d, free)
    return cfg.t_d * (step - pull)


def denoise_step(boxes, velocity, config: PlannerConfig = PlannerConfig()) -> np.ndarray:
    """``clamp(b - v / T_d, 0, 1)`` componentwise."""
    return np.clip(np.asarray(boxes, float) - np.asarray(velocity, float) / config.t_d, 0.0, 1.0)


def _as_records(records) -> list[SceneRecord]:
    if isinstance(records, SceneRecord):
        return [records]
    records = list(records)
    if not records:
        raise ValueError("need at least one keyframe record")
    return records


def _check_chain(records: Sequence[SceneRecord]) -> None:
    for k in range(1, len(records)):
        prev_ids = set(records[k - 1].visible_ids)
        bad = [o.id for o in records[k].objects
               if o.status in ("keep", "move", "disappear") and o.id not in prev_ids]
        if bad:
            raise CoverageError(missing=bad, context=f"keyframe {k} continues objects absent from keyframe {k - 1}")


def velocity(layouts: Sequence[KeyframeLayout], records, prior: SpatialPrior, t: int,
             config: PlannerConfig = PlannerConfig()) -> list[np.ndarray]:
    """Per-box velocity for each keyframe at step ``t`` (``T_d`` down to 1)."""
    records = _as_records(records)
    if isinstance(layouts, KeyframeLayout):
        layouts = [layouts]
    problem = _Problem(records, layouts, config)
    free = problem.free_mask()
    v = _velocity(problem, problem.params0, prior, t, free, config.attraction_gain)
    return [problem.boxes(v, k) for k in range(len(layouts))]


def _run(problem: _Problem, params: np.ndarray, prior: SpatialPrior, free: np.ndarray,
         gain: float, trace: list, phase: str) -> np.ndarray:
    cfg = problem.config
    cur = float(problem.objective(params))
    for t in range(cfg.t_d, 0, -1):
        v = _velocity(problem, params, prior, t, free, gain)
        params = denoise_step(params, v, cfg)
        new = float(problem.objective(params))
        trace.append({"phase": phase, "t": t, "objective": new, "increase": new > cur + 1e-12})
        cur = new
    return params


def _evaluate(config: PlannerConfig, records, layouts):
    breakdowns, accepted = [], []
    for rec, lay in zip(records, layouts):
        lc, lr, lb = keyframe_terms(lay, rec.relations, config.weights)
        breakdowns.append(LossBreakdown.combine(config.weights, 0.0, lc, lr, lb, 0.0))
        accepted.append(config.accepts(lc, lr, lb))
    interp = []
    for k in range(len(layouts) - 1):
        ids = shared_ids(layouts[k], layouts[k + 1])
        ex = ()
        if config.weights.exempt_inside:
            ex = inside_pairs(records[k].relations) | inside_pairs(records[k + 1].relations)
        interp.append(loss_interp(layouts[k].subset(ids), layouts[k + 1].subset(ids), config.weights, ex))
    return breakdowns, accepted, interp


def plan(records, config: PlannerConfig = PlannerConfig(), prior: SpatialPrior | None = None) -> PlanResult:
    """Plan boxes for a keyframe sequence, with at most ``max_repair_rounds`` repairs.

    A repair round re-optimizes only the failing keyframes for another ``T_d``
    steps, with the weight of each violated term multiplied by
    ``repair_escalation`` and no prior pull.
    """
    records = _as_records(records)
    _check_chain(records)
    if prior is None:
        prior = build_prior(records[0], config.prior)
    init = [init_boxes(r, config) for r in records]
    problem = _Problem(records, init, config)
    trace: list = []
    params = _run(problem, problem.params0.copy(), prior, problem.free_mask(),
                  config.attraction_gain, trace, "denoise")
    layouts = problem.layouts(params)
    breakdowns, accepted, interp = _evaluate(config, records, layouts)

    rounds = 0
    while not all(accepted) and rounds < config.max_repair_rounds:
        rounds += 1
        active = np.zeros(len(problem.params0), dtype=bool)
        for k, ok in enumerate(accepted):
            if ok:
                continue
            active[problem.gather[k]] = True
            b = breakdowns[k]
            limits = (config.accept_coll, config.accept_rel, config.accept_bound)
            for j, val in enumerate((b.l_coll, b.l_rel, b.l_bound)):
                if val > limits[j]:
                    problem.lam[k, j] *= config.repair_escalation
        params = _run(problem, params, prior, problem.free_mask(active), 0.0, trace, f"repair{rounds}")
        layouts = problem.layouts(params)
        breakdowns, accepted, interp = _evaluate(config, records, layouts)

    return PlanResult(tuple(layouts), tuple(breakdowns), tuple(interp), tuple(accepted), rounds,
                      tuple(tuple(r.relations) for r in records), tuple(trace))


def mid_path_max_iou(result: PlanResult, u: float = 0.5) -> list[float]:
    """Largest pairwise IoU at ``u`` along each keyframe transition."""
    out = []
    for k in range(len(result.layouts) - 1):
        a, b = result.layouts[k], result.layouts[k + 1]
        ids = shared_ids(a, b)
        out.append(path_max_iou(a.subset(ids).as_array(), b.subset(ids).as_array(), u))
    return out
