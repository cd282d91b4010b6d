"""Command-line entry point.

Exit codes: 0 success, 1 error, 2 quality gate failed (rejected layout or a
score below its ``--gate`` minimum).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import io
from .ablation import VARIANTS, run_ablation
from .constraints import LossWeights, keyframe_terms, loss_interp, path_max_iou, shared_ids
from .diagnostics import DiagnosticsConfig, score_all
from .errors import LayoutForgeError
from .extraction import ExtractionConfig, extract_records
from .planner import PlannerConfig, plan
from .repair import diagnosis_from_plan, diagnosis_from_report, route
from .scene import KeyframeLayout, Relation, read_records, write_records
from .synthetic import crowded_scene, swap_scene, synthetic_suite

log = logging.getLogger("layoutforge")

EXIT_OK, EXIT_ERROR, EXIT_GATE = 0, 1, 2
METRICS = ("overlap", "layout", "continuity", "consistency")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# -- config assembly ---------------------------------------------------------------------


def planner_config(args) -> PlannerConfig:
    base = io.default_config().get("planner", {})
    cfg = PlannerConfig.from_dict(base) if base else PlannerConfig()
    if args.weights:
        w = io.load_json(args.weights)
        if not isinstance(w, dict):
            raise LayoutForgeError(f"{args.weights}: weights file must hold a JSON object")
        cfg = replace(cfg, weights=LossWeights(**{**cfg.weights.to_dict(), **w}))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "steps", None) is not None:
        cfg = replace(cfg, t_d=args.steps)
    return cfg


def diagnostics_config() -> DiagnosticsConfig:
    base = io.default_config().get("diagnostics", {})
    return DiagnosticsConfig.from_dict(base) if base else DiagnosticsConfig()


def extraction_config() -> ExtractionConfig:
    base = io.default_config().get("extraction", {})
    return ExtractionConfig(**base) if base else ExtractionConfig()


def _envelope(kind: str, args, config: dict, body: dict) -> dict:
    out = {"format_version": io.FORMAT_VERSION, "kind": kind, "config": config, **body}
    if getattr(args, "timestamps", False):
        out["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return out


def _outputs(inputs, out, suffix):
    if len(inputs) == 1:
        return [Path(out)]
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    return [d / f"{Path(p).stem}{suffix}" for p in inputs]


def _map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


# -- subcommands -------------------------------------------------------------------------


def _plan_one(task):
    scene, out, trace_path, cfg, stamp = task
    records = read_records(scene)
    if not records:
        raise LayoutForgeError(f"{scene}: no records")
    result = plan(records, cfg)
    body = {
        "scene": Path(scene).name,
        "result": result.to_dict(),
        "repair_action": route(diagnosis_from_plan(result, cfg)).to_dict(),
    }
    data = {"format_version": io.FORMAT_VERSION, "kind": "plan", "config": cfg.to_dict(), **body}
    if stamp:
        data["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    io.dump_json(out, data)
    if trace_path:
        io.dump_json(trace_path, {"scene": Path(scene).name, "trace": list(result.trace)})
    return result.all_accepted


def cmd_plan(args) -> int:
    cfg = planner_config(args)
    outs = _outputs(args.scene, args.out, ".layout.json")
    traces = _outputs(args.scene, args.trace, ".trace.json") if args.trace else [None] * len(outs)
    tasks = [(s, o, t, cfg, args.timestamps) for s, o, t in zip(args.scene, outs, traces)]
    accepted = _map(_plan_one, tasks, args.jobs)
    return EXIT_OK if all(accepted) else EXIT_GATE


def parse_gates(items) -> dict:
    gates = {}
    for item in items or ():
        for part in item.split(","):
            key, sep, val = part.partition("=")
            if not sep or key not in METRICS:
                raise LayoutForgeError(f"bad gate {part!r}; expected one of {METRICS} as name=value")
            gates[key] = float(val)
    return gates


def _score_one(task):
    frames, out, cfg, gates, stamp = task
    report = score_all(io.load_sequence(frames), cfg)
    scores = report.scores.to_dict()
    failed = sorted(k for k, v in gates.items() if k not in scores or scores[k] < v)
    data = {"format_version": io.FORMAT_VERSION, "kind": "score", "config": cfg.to_dict(),
            "frames": Path(frames).name, **report.to_dict(),
            "gates": {"minimums": gates, "failed": failed},
            "repair_action": route(diagnosis_from_report(report)).to_dict()}
    if stamp:
        data["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    io.dump_json(out, data)
    return not failed


def cmd_score(args) -> int:
    cfg = diagnostics_config()
    gates = parse_gates(args.gate)
    outs = _outputs(args.frames, args.out, ".report.json")
    tasks = [(f, o, cfg, gates, args.timestamps) for f, o in zip(args.frames, outs)]
    ok = _map(_score_one, tasks, args.jobs)
    return EXIT_OK if all(ok) else EXIT_GATE


def cmd_extract(args) -> int:
    cfg = extraction_config()
    frames = io.load_frames(args.frames)
    keyframes = None
    if args.keyframes:
        keyframes = [int(k) for k in args.keyframes.split(",") if k.strip()]
        bad = [k for k in keyframes if not 0 <= k < len(frames)]
        if bad:
            raise LayoutForgeError(f"keyframe indices out of range: {bad}")
    records = extract_records(frames, keyframes, args.scene_text, cfg)
    write_records(args.out, records)
    return EXIT_OK


def _plan_file_keyframes(data):
    frames = data["result"]["keyframes"] if "result" in data else [data]
    out = []
    for f in frames:
        ids = [b["id"] for b in f["boxes"]]
        lay = KeyframeLayout.from_array(ids, [[b["cx"], b["cy"], b["w"], b["h"]] for b in f["boxes"]])
        rels = tuple(Relation(r["subject"], r["predicate"], r["object"]) for r in f.get("relations", ()))
        out.append((lay, rels))
    return out


def cmd_validate(args) -> int:
    cfg = planner_config(args)
    frames = _plan_file_keyframes(io.load_json(args.layout))
    rows, ok = [], True
    for k, (lay, rels) in enumerate(frames):
        lc, lr, lb = keyframe_terms(lay, rels, cfg.weights)
        acc = cfg.accepts(lc, lr, lb)
        ok &= acc
        rows.append({"keyframe": k, "l_coll": lc, "l_rel": lr, "l_bound": lb, "accepted": acc})
    report = _envelope("validate", args, {"accept_coll": cfg.accept_coll, "accept_rel": cfg.accept_rel,
                                          "accept_bound": cfg.accept_bound,
                                          "weights": cfg.weights.to_dict()},
                       {"keyframes": rows, "accepted": ok})
    _emit(report, args.out)
    return EXIT_OK if ok else EXIT_GATE


def cmd_interp_check(args) -> int:
    cfg = planner_config(args)
    w = cfg.weights
    first = _plan_file_keyframes(io.load_json(args.layouts[0]))
    if len(args.layouts) == 2:
        second = _plan_file_keyframes(io.load_json(args.layouts[1]))
        pairs = [(first[-1][0], second[0][0])]
    else:
        pairs = [(first[k][0], first[k + 1][0]) for k in range(len(first) - 1)]
    transitions = []
    for k, (a, b) in enumerate(pairs):
        ids = shared_ids(a, b)
        sa, sb = a.subset(ids), b.subset(ids)
        transitions.append({
            "transition": k,
            "objects": list(ids),
            "loss_interp": loss_interp(sa, sb, w),
            "max_iou": [{"u": u, "max_iou": path_max_iou(sa.as_array(), sb.as_array(), u)}
                        for u in w.u_samples],
        })
    report = _envelope("interp_check", args, {"weights": w.to_dict()}, {"transitions": transitions})
    _emit(report, args.out)
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = planner_config(args)
    gen = {"swap": swap_scene, "crowded": lambda s: [crowded_scene(s)], "general": synthetic_suite}[args.suite]
    scenes = [gen(s) for s in range(args.count)]
    seeds = [int(s) for s in args.seeds.split(",")]
    report = run_ablation(scenes, seeds, args.variants or VARIANTS, cfg, args.jobs)
    _emit(_envelope("ablation", args, cfg.to_dict(), {"suite": args.suite, **report.to_dict()}), args.out)
    return EXIT_OK


def _emit(data, out):
    if out:
        io.dump_json(out, data)
    else:
        sys.stdout.write(io.dumps(data))


# -- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="layoutforge", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, planner=True):
        sp.add_argument("--timestamps", action="store_true", help="add a generation time to reports")
        if planner:
            sp.add_argument("--seed", type=int)
            sp.add_argument("--weights", help="JSON file with loss weight overrides")

    sp = sub.add_parser("plan", help="plan keyframe layouts for scene files")
    sp.add_argument("--scene", nargs="+", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--trace")
    sp.add_argument("--jobs", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("score", help="score rendered frame directories")
    sp.add_argument("--frames", nargs="+", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--gate", action="append", metavar="METRIC=MIN")
    sp.add_argument("--jobs", type=int, default=1)
    common(sp, planner=False)
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("extract", help="extract layout records from a frame directory")
    sp.add_argument("--frames", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--keyframes", help="comma-separated frame indices")
    sp.add_argument("--scene-text", default="")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("validate", help="check a layout file against the acceptance thresholds")
    sp.add_argument("--layout", required=True)
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("interp-check", help="mid-path collisions between layouts")
    sp.add_argument("layouts", nargs="+", metavar="LAYOUT")
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=cmd_interp_check)

    sp = sub.add_parser("ablate", help="run planner ablations on a synthetic suite")
    sp.add_argument("--suite", choices=("swap", "crowded", "general"), default="swap")
    sp.add_argument("--count", type=int, default=20)
    sp.add_argument("--seeds", default="0")
    sp.add_argument("--variants", nargs="+", choices=VARIANTS)
    sp.add_argument("--out")
    sp.add_argument("--jobs", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "command", None) == "interp-check" and len(args.layouts) > 2:
        parser.error("interp-check takes one plan file or two layout files")
    try:
        return args.func(args)
    except (LayoutForgeError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"layoutforge: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
