"""Planner ablations on synthetic scenes.

Variants:

``full``          the planner as configured
``no_interp``     interpolation weight set to zero
``no_vision``     planner bypassed; a row packer places objects in record order
``stage1_only``   prior pull only, no constraint gradient
``stage2_only``   constraint gradient only, no prior pull

Only directional comparisons between variants are meaningful here; the
numbers are geometric losses on synthetic layouts, not render scores.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .constraints import path_max_iou, shared_ids
from .planner import PlannerConfig, PlanResult, _evaluate, init_boxes, plan
from .scene import KeyframeLayout, SceneRecord

VARIANTS = ("full", "no_interp", "no_vision", "stage1_only", "stage2_only")


def variant_config(name: str, base: PlannerConfig) -> PlannerConfig:
    if name == "full":
        return base
    if name == "no_interp":
        return replace(base, weights=replace(base.weights, lambda5=0.0))
    if name == "stage1_only":
        return replace(base, use_constraints=False, max_repair_rounds=0)
    if name == "stage2_only":
        return replace(base, attraction_gain=0.0)
    if name == "no_vision":
        return base
    raise ValueError(f"unknown variant {name!r}")


def row_pack(record: SceneRecord, config: PlannerConfig, margin: float = 0.05,
             gap: float = 0.02) -> KeyframeLayout:
    """Left-to-right, top-to-bottom placement in record order.

    Rows that run past the bottom edge are shifted back inside the frame, so
    overflow shows up as overlap rather than as off-screen boxes.
    """
    sizes = init_boxes(record, config)
    x, y, row_h = margin, margin, 0.0
    rows = []
    for oid, box in sizes.items():
        if x > margin and x + box.w > 1 - margin:
            x, y, row_h = margin, y + row_h + gap, 0.0
        cy = min(y + box.h / 2, 1 - box.h / 2)
        rows.append((x + box.w / 2, cy, box.w, box.h))
        x += box.w + gap
        row_h = max(row_h, box.h)
    return KeyframeLayout.from_array(sizes.ids, np.clip(np.array(rows).reshape(-1, 4), 0, 1))


def run_variant(records: Sequence[SceneRecord], name: str, base: PlannerConfig) -> PlanResult:
    cfg = variant_config(name, base)
    if name != "no_vision":
        return plan(records, cfg)
    layouts = [row_pack(r, cfg) for r in records]
    breakdowns, accepted, interp = _evaluate(cfg, records, layouts)
    return PlanResult(tuple(layouts), tuple(breakdowns), tuple(interp), tuple(accepted), 0,
                      tuple(tuple(r.relations) for r in records))


def scene_metrics(result: PlanResult, config: PlannerConfig) -> dict:
    tau = config.weights.tau_coll
    mids, hits, samples = [], 0, 0
    for k in range(len(result.layouts) - 1):
        a, b = result.layouts[k], result.layouts[k + 1]
        ids = shared_ids(a, b)
        sa, sb = a.subset(ids).as_array(), b.subset(ids).as_array()
        for u in config.weights.u_samples:
            m = path_max_iou(sa, sb, u)
            hits += m > tau
            samples += 1
        mids.append(path_max_iou(sa, sb, 0.5))
    return {
        "l_coll": float(np.mean([b.l_coll for b in result.breakdowns])),
        "l_rel": float(np.mean([b.l_rel for b in result.breakdowns])),
        "l_bound": float(np.mean([b.l_bound for b in result.breakdowns])),
        "l_interp": float(sum(result.interp)),
        "mid_max_iou": float(max(mids)) if mids else 0.0,
        "mid_collision_rate": hits / samples if samples else 0.0,
        "has_transitions": bool(samples),
        "accepted": result.all_accepted,
    }


def _one(args):
    records, seed, variants, base = args
    cfg = replace(base, seed=seed)
    return {v: scene_metrics(run_variant(records, v, cfg), cfg) for v in variants}


@dataclass(frozen=True)
class AblationReport:
    variants: tuple[str, ...]
    per_scene: list  # one dict per (scene, seed): variant -> metrics
    summary: dict

    def to_dict(self) -> dict:
        return {"variants": list(self.variants), "summary": self.summary, "per_scene": self.per_scene,
                "note": "directional comparison on synthetic scenes only"}


def run_ablation(scenes: Sequence[Sequence[SceneRecord]], seeds: Sequence[int] = (0,),
                 variants: Sequence[str] = VARIANTS, base: PlannerConfig = PlannerConfig(),
                 jobs: int = 1) -> AblationReport:
    if not scenes or not seeds:
        raise ValueError("need at least one scene and one seed")
    for v in variants:
        variant_config(v, base)
    tasks = [(list(s), int(seed), tuple(variants), base) for s in scenes for seed in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_scene = list(pool.map(_one, tasks))
    else:
        per_scene = [_one(t) for t in tasks]
    summary = {}
    for v in variants:
        rows = [p[v] for p in per_scene]
        with_tr = [r for r in rows if r["has_transitions"]]
        summary[v] = {
            "l_coll": float(np.mean([r["l_coll"] for r in rows])),
            "l_rel": float(np.mean([r["l_rel"] for r in rows])),
            "l_bound": float(np.mean([r["l_bound"] for r in rows])),
            "mid_max_iou": float(np.mean([r["mid_max_iou"] for r in with_tr])) if with_tr else 0.0,
            "mid_collision_rate": float(np.mean([r["mid_collision_rate"] for r in with_tr])) if with_tr else 0.0,
            "acceptance_rate": float(np.mean([r["accepted"] for r in rows])),
        }
    return AblationReport(tuple(variants), per_scene, summary)
