"""Acceptance criteria, one test each, with their runtime limits.

``pytest`` prints a PASS/FAIL line per criterion in the terminal summary.
"""

import itertools
import time
from dataclasses import replace

import numpy as np
import pytest

import fixtures as fx
import oracles
from layoutforge import io
from layoutforge.cli import main
from layoutforge.constraints import LossBreakdown, LossWeights, loss_interp
from layoutforge.diagnostics import (DiagnosticsConfig, analyze_frame, bbox_pair_flags,
                                     consistency_score, consistency_terms, continuity_score,
                                     continuity_terms, layout_score, layout_terms, overlap_detectors,
                                     overlap_score, overlap_terms)
from layoutforge.extraction import ComponentBox, label_components
from layoutforge.planner import PlannerConfig, _Problem, mid_path_max_iou, plan
from layoutforge.repair import Diagnosis, route
from layoutforge.scene import (BoundingBox, KeyframeLayout, Relation, SceneObject, SceneRecord,
                               write_records)
from layoutforge.synthetic import feasible_scene, swap_scene


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def report(name, value):
    print(f"  {name}: {value}")


# -- 1 -----------------------------------------------------------------------------------


@pytest.mark.acceptance(1, "formula fidelity on analytic frame fixtures")
def test_formula_fidelity():
    cfg = DiagnosticsConfig()
    tol = 1e-9
    with Timer() as t:
        seq, terms, score = fx.overlap_fixture()
        got, _ = overlap_terms(seq, cfg)
        assert all(abs(got[k] - terms[k]) <= tol for k in terms)
        assert abs(overlap_score(seq, cfg) - score) <= tol

        seq, ratio, score = fx.layout_fixture()
        assert abs(layout_terms(seq, cfg)[0]["dense_frame_ratio"] - ratio) <= tol
        assert abs(layout_score(seq, cfg) - score) <= tol

        seq, energies, (p_disc, p_flash), score = fx.continuity_fixture()
        got, flags = continuity_terms(seq, cfg)
        assert [f["motion_energy"] for f in flags] == energies
        assert abs(got["p_disc"] - p_disc) <= tol and abs(got["p_flash"] - p_flash) <= tol
        assert abs(continuity_score(seq, cfg) - score) <= tol

        for build in (fx.palette_fixture, fx.fg_artifact_fixture):
            seq, expected, score = build()
            got, _ = consistency_terms(seq, cfg)
            assert all(abs(a - b) <= tol for a, b in
                       zip((got["p_palette"], got["p_fg"], got["p_artifact"]), expected))
            assert abs(consistency_score(seq, cfg) - score) <= tol

        # kernels and thresholds one at a time
        assert overlap_detectors(None, fx.squares_gap(1), cfg).overlap_pixels == 12  # 3x3 dilation
        assert overlap_detectors(None, fx.squares_gap(2), cfg).overlap_pixels == 0
        assert overlap_detectors(None, fx.square_with_bar(), cfg).crossing_pixels == 3  # 7x7 opening
        assert overlap_detectors(*fx.occlusion_pair(16), cfg).occlusion_pixels == 400  # change >= 16
        assert overlap_detectors(*fx.occlusion_pair(15), cfg).occlusion_pixels == 0
        assert analyze_frame(fx.blank((31, 0, 0))).fg.all()  # grayscale threshold 30
        assert not analyze_frame(fx.blank((30, 0, 0))).fg.any()
    report("runtime", f"{t.elapsed:.2f}s")
    assert t.elapsed < 5


# -- 2 -----------------------------------------------------------------------------------


def _disjoint_layout(rng):
    n = int(rng.integers(2, 9))
    rows = []
    while len(rows) < n:
        w, h = rng.uniform(0.03, 0.25, size=2)
        cx, cy = rng.uniform(w / 2, 1 - w / 2), rng.uniform(h / 2, 1 - h / 2)
        cand = (cx, cy, w, h)
        if all(oracles.rect_iou_scalar(cand, r) == 0.0 for r in rows):
            rows.append(cand)
    return KeyframeLayout.from_array([f"o{i}" for i in range(n)], rows)


@pytest.mark.acceptance(2, "loss-term analytic examples and static interp zero")
def test_loss_terms():
    w = LossWeights()
    with Timer() as t:
        a = KeyframeLayout.from_array(["i", "j"], [[0.25, 0.5, 0.2, 0.2], [0.75, 0.5, 0.2, 0.2]])
        b = KeyframeLayout.from_array(["i", "j"], [[0.75, 0.5, 0.2, 0.2], [0.25, 0.5, 0.2, 0.2]])
        assert loss_interp(a, b, w) == pytest.approx(1.90, abs=1e-12)
        assert LossBreakdown.combine(w, l_coll=0.95).total == pytest.approx(4.75, abs=1e-12)
        assert LossBreakdown.combine(w, l_rel=0.11, l_bound=0.025).total == pytest.approx(0.405, abs=1e-12)
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            lay = _disjoint_layout(rng)
            assert loss_interp(lay, lay, w) == 0.0
    report("runtime", f"{t.elapsed:.2f}s")
    assert t.elapsed < 10


# -- 3 -----------------------------------------------------------------------------------


@pytest.mark.acceptance(3, "planner acceptance on 100 feasible scenes")
def test_planner_acceptance():
    cfg = PlannerConfig()
    with Timer() as t:
        ok = sum(plan([feasible_scene(s)], cfg).all_accepted for s in range(100))
    report("accepted", f"{ok}/100")
    report("runtime", f"{t.elapsed:.2f}s")
    assert ok >= 95
    assert t.elapsed < 60


# -- 4 -----------------------------------------------------------------------------------


@pytest.mark.acceptance(4, "interpolation weight lowers mid-path IoU on swap scenes")
def test_interp_ablation_direction():
    full = PlannerConfig()
    ablated = replace(full, weights=replace(full.weights, lambda5=0.0))
    wins = 0
    with Timer() as t:
        for s in range(50):
            scene = swap_scene(s)
            wins += mid_path_max_iou(plan(scene, full))[0] < mid_path_max_iou(plan(scene, ablated))[0]
    report("strict wins", f"{wins}/50")
    report("runtime", f"{t.elapsed:.2f}s")
    assert wins >= 45
    assert t.elapsed < 60


# -- 5 -----------------------------------------------------------------------------------


def _check_labeling(rng):
    for _ in range(10_000):
        mask = rng.random((8, 8)) < rng.uniform(0.2, 0.8)
        labels, _ = label_components(mask)
        assert np.array_equal(oracles.canonical_labels(labels), oracles.flood_fill_labels(mask))
    for _ in range(100):
        mask = rng.random((64, 64)) < rng.uniform(0.3, 0.7)
        labels, _ = label_components(mask)
        assert np.array_equal(oracles.canonical_labels(labels), oracles.flood_fill_labels(mask))


def _check_detector2(rng):
    for _ in range(2000):
        n = int(rng.integers(2, 7))
        rects = []
        for _ in range(n):
            x0, y0 = (int(v) for v in rng.integers(0, 30, size=2))
            w, h = (int(v) for v in rng.integers(1, 16, size=2))
            rects.append((x0, y0, x0 + w, y0 + h))
        comps = [ComponentBox(*r, (r[2] - r[0]) * (r[3] - r[1]), (0.0, 0.0), (48, 48)) for r in rects]
        assert set(bbox_pair_flags(comps)) == oracles.raster_pair_flags(rects, size=(48, 48))


def _gradient_problem(term, rng):
    """A random problem whose objective is a single weighted loss term."""
    n = int(rng.integers(3, 6))
    ids = [f"o{i}" for i in range(n)]
    lam = {"coll": (2.0, 0, 0, 0), "rel": (0, 3.0, 0, 0), "bound": (0, 0, 3.0, 0), "interp": (0, 0, 0, 2.0)}[term]
    weights = LossWeights(lambda2=lam[0], lambda3=lam[1], lambda4=lam[2], lambda5=lam[3])
    cfg = PlannerConfig(weights=weights, learn_size=True)
    lo, hi = (0.02, 0.98) if term == "bound" else (0.25, 0.75)
    sizes = (0.1, 0.35) if term != "bound" else (0.1, 0.5)

    def rows():
        return np.column_stack([rng.uniform(lo, hi, size=(n, 2)), rng.uniform(*sizes, size=(n, 2))])

    preds = ("left_of", "above", "inside")
    triples = [(int(i), preds[int(rng.integers(3))], int(j))
               for i, j in (rng.choice(n, 2, replace=False) for _ in range(int(rng.integers(1, 4))))]
    rels = tuple(Relation(ids[i], p, ids[j]) for i, p, j in triples) if term == "rel" else ()
    first = rows()
    objs0 = tuple(SceneObject(i, "shape", "", "decoration", "new") for i in ids)
    records = [SceneRecord("", objs0, rels)]
    init = [KeyframeLayout.from_array(ids, first)]
    if term == "interp":
        second = rows()
        objs1 = tuple(SceneObject(i, "shape", "", "decoration", "move") for i in ids)
        records.append(SceneRecord("", objs1, (), {i: BoundingBox(*first[k]) for k, i in enumerate(ids)}))
        init.append(KeyframeLayout.from_array(ids, second))
    problem = _Problem(records, init, cfg)
    w = cfg.weights

    def reference(params):
        p = params.reshape(problem.params0.shape)
        a = [list(r) for r in p[:n]]
        if term == "coll":
            return lam[0] * oracles.ref_coll(a, w.tau_coll)
        if term == "rel":
            return lam[1] * oracles.ref_rel(a, triples, w.rel_margin)
        if term == "bound":
            return lam[2] * oracles.ref_bound(a)
        return lam[3] * oracles.ref_interp(a, [list(r) for r in p[n:]], w.u_samples, w.tau_coll)

    return problem, reference


def _smooth_near(fn, x, delta=1e-3, rtol=1e-2):
    """True when one-sided slopes agree along every coordinate axis."""
    f0 = fn(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = delta
        fwd = (fn(x + e) - f0) / delta
        bwd = (f0 - fn(x - e)) / delta
        if abs(fwd - bwd) > rtol * max(abs(fwd), abs(bwd), 1e-3):
            return False
    return True


def _check_gradients(rng):
    checked = {}
    for term in ("coll", "rel", "bound", "interp"):
        checked[term] = 0
        for _ in range(400):
            if checked[term] >= 25:
                break
            problem, reference = _gradient_problem(term, rng)
            x = problem.params0
            flat = x.ravel()
            assert abs(problem.objective(x) - reference(flat)) <= 1e-12
            if not _smooth_near(reference, flat):
                continue
            d = rng.normal(size=flat.size)
            d /= np.linalg.norm(d)
            oracle = oracles.directional_derivative(reference, flat, d, h=1e-6)
            if abs(oracle) <= 1e-6:
                continue
            grad = problem.gradient(x, problem.free_mask()).ravel()
            assert abs(grad @ d - oracle) <= 1e-3 * abs(oracle), (term, grad @ d, oracle)
            checked[term] += 1
    return checked


@pytest.mark.acceptance(5, "oracle equivalence: labeling, detector 2, gradients")
def test_oracle_equivalence():
    rng = np.random.default_rng(5)
    with Timer() as t:
        _check_labeling(rng)
        _check_detector2(rng)
        checked = _check_gradients(rng)
    report("gradient points checked", checked)
    report("runtime", f"{t.elapsed:.2f}s")
    assert all(v >= 20 for v in checked.values())
    assert t.elapsed < 30


# -- 6 -----------------------------------------------------------------------------------


@pytest.mark.acceptance(6, "extraction round-trip on 200 synthetic renders")
def test_extraction_round_trip():
    worst_c = worst_s = 0.0
    bad = []
    with Timer() as t:
        for seed in range(200):
            c, s, mismatches = fx.extraction_errors(seed)
            worst_c, worst_s = max(worst_c, c), max(worst_s, s)
            if mismatches:
                bad.append((seed, mismatches))
    report("max center error", worst_c)
    report("max size error", worst_s)
    report("runtime", f"{t.elapsed:.2f}s")
    assert worst_c <= 0.01 and worst_s <= 0.02
    assert bad == []
    assert t.elapsed < 60


# -- 7 -----------------------------------------------------------------------------------


def _run_twice(tmp_path, name, argv_for):
    outs = []
    for k in range(2):
        out = tmp_path / f"{name}_{k}.out"
        code = main(argv_for(out))
        outs.append((code, out.read_bytes()))
    assert outs[0] == outs[1], name
    return outs[0][0]


@pytest.mark.acceptance(7, "every CLI subcommand is byte-deterministic")
def test_cli_determinism(tmp_path):
    scene = tmp_path / "swap.jsonl"
    write_records(scene, swap_scene(4))
    frames = tmp_path / "frames"
    seq, _, _ = fx.overlap_fixture()
    io.write_sequence(frames, seq.frames, seq.source_fps, seq.duration)
    renders = tmp_path / "renders"
    io.write_sequence(renders, fx.tracked_frames(7), 2.0)

    assert _run_twice(tmp_path, "plan", lambda o: ["plan", "--scene", str(scene), "--out", str(o),
                                                   "--seed", "3"]) in (0, 2)
    plan_file = tmp_path / "plan_0.out"
    _run_twice(tmp_path, "score", lambda o: ["score", "--frames", str(frames), "--out", str(o),
                                             "--gate", "overlap=0.9"])
    _run_twice(tmp_path, "extract", lambda o: ["extract", "--frames", str(renders), "--out", str(o)])
    _run_twice(tmp_path, "validate", lambda o: ["validate", "--layout", str(plan_file), "--out", str(o)])
    _run_twice(tmp_path, "interp", lambda o: ["interp-check", str(plan_file), "--out", str(o)])
    _run_twice(tmp_path, "ablate", lambda o: ["ablate", "--suite", "swap", "--count", "2",
                                              "--seeds", "0,1", "--out", str(o)])


# -- 8 -----------------------------------------------------------------------------------


@pytest.mark.acceptance(8, "routing truth table over all 2^5 diagnoses")
def test_routing_truth_table():
    names = ("overlap_violation", "relation_violation", "boundary_violation", "compile_error",
             "temporal_anomaly")
    for bits in itertools.product((False, True), repeat=5):
        d = Diagnosis(**dict(zip(names, bits)))
        over, rel, bound, comp, temp = bits
        want = ("code_revise" if comp else "layout_refine" if over or rel or bound
                else "temporal_adjust" if temp else "none")
        assert route(d).target == want
