"""Map a post-render diagnosis to a single localized repair action.

Priority when several failure classes co-occur: a compile/runtime error goes
to code revision first (nothing downstream is trustworthy without a running
program), then any layout violation goes to layout refinement, then temporal
anomalies go back to the scene plan.
"""

from __future__ import annotations

from dataclasses import dataclass, field

TARGETS = ("layout_refine", "code_revise", "temporal_adjust", "none")


@dataclass(frozen=True)
class Diagnosis:
    overlap_violation: bool = False
    relation_violation: bool = False
    boundary_violation: bool = False
    compile_error: bool = False
    temporal_anomaly: bool = False
    error_message: str = ""
    code_block: str | None = None
    anomaly_spans: tuple = ()

    @property
    def any(self) -> bool:
        return (self.overlap_violation or self.relation_violation or self.boundary_violation
                or self.compile_error or self.temporal_anomaly)


@dataclass(frozen=True)
class RepairAction:
    target: str
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"unknown repair target {self.target!r}")

    def to_dict(self) -> dict:
        return {"target": self.target, "payload": self.payload}


def route(d: Diagnosis) -> RepairAction:
    if d.compile_error:
        return RepairAction("code_revise", {"block": d.code_block, "message": d.error_message})
    violated = [name for name, flag in (("coll", d.overlap_violation), ("rel", d.relation_violation),
                                        ("bound", d.boundary_violation)) if flag]
    if violated:
        return RepairAction("layout_refine", {"terms": violated})
    if d.temporal_anomaly:
        return RepairAction("temporal_adjust", {"spans": [list(s) for s in d.anomaly_spans]})
    return RepairAction("none")


def diagnosis_from_plan(result, config) -> Diagnosis:
    """Layout violations of the final planned keyframes."""
    over = rel = bound = False
    for b in result.breakdowns:
        over |= b.l_coll > config.accept_coll
        rel |= b.l_rel > config.accept_rel
        bound |= b.l_bound > config.accept_bound
    return Diagnosis(overlap_violation=over, relation_violation=rel, boundary_violation=bound)


def diagnosis_from_report(report, min_overlap: float = 1.0) -> Diagnosis:
    """Render-level diagnosis from a metric report.

    Overlap flags below ``min_overlap`` count as an overlap violation; flicker
    and artifact transitions count as temporal anomalies.
    """
    overlap = report.scores.overlap < min_overlap
    spans = tuple((t["from"], t["to"]) for t in report.transition_flags
                  if t.get("flicker") or t.get("artifact"))
    return Diagnosis(overlap_violation=overlap, temporal_anomaly=bool(spans), anomaly_spans=spans)
