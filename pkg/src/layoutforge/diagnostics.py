"""Deterministic render-quality metrics over sampled frames.

Four scores in [0, 1], higher is better:

* overlap      1 - 0.40 p_ratio - 0.35 p_fail - 0.25 p_duration
* layout       1 - min(1, dense_frame_ratio / 0.40) over a 6x8 grid
* continuity   1 - 0.6 p_disc - 0.4 p_flash
* consistency  1 - 0.40 p_palette - 0.30 p_fg - 0.30 p_artifact

Constants the scoring rules leave open (HSV cut-offs, jump sizes, window
lengths) live in :class:`DiagnosticsConfig`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from matplotlib.colors import rgb_to_hsv
from scipy import ndimage

from .errors import DimensionMismatch, EmptyInput, InsufficientFrames
from .extraction import ComponentBox, ExtractionConfig, components, extract_foreground, label_components


@dataclass(frozen=True)
class DiagnosticsConfig:
    sample_fps: float = 2.0
    change_threshold: float = 16.0
    motion_threshold: float = 12.0
    text_s_max: float = 0.25
    text_v_min: float = 0.70
    solid_s_min: float = 0.40
    dark_v_max: float = 0.25
    det_iou: float = 0.20
    det_overlap: float = 0.35
    dilate_kernel: int = 3
    erode_kernel: int = 7
    min_pixel_frac: float = 0.0005
    grid_rows: int = 6
    grid_cols: int = 8
    dense_threshold: float = 0.60
    dense_divisor: float = 0.40
    disc_factor: float = 10.0
    disc_min_energy_frac: float = 0.001
    jitter_window: int = 8
    jitter_frac: float = 0.05
    flicker_delta: int = 3
    hist_bins: int = 64
    chi_square_threshold: float = 0.15
    chi_square_eps: float = 1e-10
    fg_area_jump: float = 0.40
    fg_count_jump: int = 3
    blank_frac: float = 0.001
    populated_frac: float = 0.01
    flash_luma: float = 60.0
    vanish_ratio: float = 0.1
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DiagnosticsConfig":
        data = dict(data)
        kw = {}
        if "extraction" in data:
            kw["extraction"] = ExtractionConfig(**data.pop("extraction"))
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown diagnostics settings {sorted(unknown)}")
        return cls(**data, **kw)


@dataclass(frozen=True)
class FrameSequence:
    frames: tuple
    source_fps: float
    duration: float | None = None
    indices: tuple[int, ...] | None = None  # positions in the source, set by sampling

    def __post_init__(self):
        frames = tuple(np.asarray(f) for f in self.frames)
        if not frames:
            raise EmptyInput("frame sequence is empty")
        shape = frames[0].shape[:2]
        for i, f in enumerate(frames):
            if f.shape[:2] != shape:
                raise DimensionMismatch(f"frame {i} has shape {f.shape[:2]}, expected {shape}")
        if not self.source_fps > 0:
            raise ValueError("source_fps must be positive")
        object.__setattr__(self, "frames", frames)
        if self.duration is None:
            object.__setattr__(self, "duration", len(frames) / self.source_fps)
        if self.indices is None:
            object.__setattr__(self, "indices", tuple(range(len(frames))))

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def period(self) -> float:
        """Seconds represented by one frame of this sequence."""
        return 1.0 / self.source_fps


def sample_frames(seq: FrameSequence, rate: float = 2.0) -> FrameSequence:
    """Keep frames ``round(k * fps / rate)`` for k = 0, 1, ... (half-up), without repeats."""
    n = len(seq.frames)
    picks: list[int] = []
    k = 0
    while True:
        idx = math.floor(k * seq.source_fps / rate + 0.5)
        if idx >= n:
            break
        if not picks or picks[-1] != idx:
            picks.append(idx)
        k += 1
    return FrameSequence(tuple(seq.frames[i] for i in picks), min(rate, seq.source_fps), seq.duration,
                         tuple(seq.indices[i] for i in picks))


# -- per-frame analysis ---------------------------------------------------------------


def _rgb(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.ndim == 2:
        frame = np.repeat(frame[..., None], 3, axis=-1)
    return frame[..., :3].astype(float)


def rgb_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatch(f"frames differ in size: {a.shape[:2]} vs {b.shape[:2]}")
    return np.sqrt(((_rgb(a) - _rgb(b)) ** 2).sum(axis=-1))


def hsv(frame: np.ndarray) -> np.ndarray:
    """HSV with all channels in [0, 1]."""
    return rgb_to_hsv(_rgb(frame) / 255.0)


def pixel_floor(shape, config: DiagnosticsConfig) -> int:
    return max(1, math.ceil(config.min_pixel_frac * shape[0] * shape[1]))


@dataclass
class FrameStats:
    fg: np.ndarray
    comps: list[ComponentBox]
    labels: np.ndarray
    hsv: np.ndarray

    @property
    def fg_count(self) -> int:
        return int(self.fg.sum())


def analyze_frame(frame: np.ndarray, config: DiagnosticsConfig = DiagnosticsConfig()) -> FrameStats:
    ex = config.extraction
    fg = extract_foreground(frame, ex.fg_threshold)
    labels, _ = label_components(fg, ex.connectivity)
    return FrameStats(fg, components(fg, ex), labels, hsv(frame))


# -- overlap detectors -----------------------------------------------------------------


@dataclass(frozen=True)
class DetectorHits:
    hsv_mask: bool
    bbox_iou: bool
    pixel_overlap: bool
    text_line: bool
    occlusion_pixels: int
    text_on_shape_pixels: int
    flagged_pairs: tuple[tuple[int, int], ...]
    overlap_pixels: int
    crossing_pixels: int
    overlap_mask: np.ndarray = field(repr=False, compare=False)

    @property
    def any(self) -> bool:
        return self.hsv_mask or self.bbox_iou or self.pixel_overlap or self.text_line


def bbox_pair_flags(comps: Sequence[ComponentBox], config: DiagnosticsConfig = DiagnosticsConfig()):
    """Index pairs ``(i, j)``, ``i < j``, whose boxes reach the IoU or overlap-ratio cut-off."""
    if len(comps) < 2:
        return ()
    r = np.array([c.rect for c in comps], dtype=float)
    x0 = np.maximum(r[:, None, 0], r[None, :, 0])
    y0 = np.maximum(r[:, None, 1], r[None, :, 1])
    x1 = np.minimum(r[:, None, 2], r[None, :, 2])
    y1 = np.minimum(r[:, None, 3], r[None, :, 3])
    inter = np.clip(x1 - x0, 0, None) * np.clip(y1 - y0, 0, None)
    area = (r[:, 2] - r[:, 0]) * (r[:, 3] - r[:, 1])
    union = area[:, None] + area[None, :] - inter
    small = np.minimum(area[:, None], area[None, :])
    hit = (inter >= config.det_iou * union) | (inter >= config.det_overlap * small)
    hit &= inter > 0
    ii, jj = np.nonzero(np.triu(hit, k=1))
    return tuple(zip(ii.tolist(), jj.tolist()))


def dilated_overlap(stats: FrameStats, config: DiagnosticsConfig = DiagnosticsConfig()) -> np.ndarray:
    """Pixels covered by at least two separately dilated components."""
    k = config.dilate_kernel
    r = k // 2
    h, w = stats.fg.shape
    cover = np.zeros((h, w), dtype=np.int32)
    se = np.ones((k, k), dtype=bool)
    for c in stats.comps:
        ys = slice(max(c.y0 - r, 0), min(c.y1 + r, h))
        xs = slice(max(c.x0 - r, 0), min(c.x1 + r, w))
        local = stats.labels[ys, xs] == c.label
        cover[ys, xs] += ndimage.binary_dilation(local, structure=se)
    return cover >= 2


def text_line_crossing(fg: np.ndarray, config: DiagnosticsConfig = DiagnosticsConfig()) -> np.ndarray:
    """Thin foreground touching thick foreground.

    Thick foreground is what survives an opening with the erosion kernel;
    the rest of the foreground is thin (lines, arrows).
    """
    k = config.erode_kernel
    thick = ndimage.binary_opening(fg, structure=np.ones((k, k), dtype=bool))
    thin = fg & ~thick
    near_thick = ndimage.binary_dilation(thick, structure=np.ones((3, 3), dtype=bool))
    return thin & near_thick


def overlap_detectors(prev, cur, config: DiagnosticsConfig = DiagnosticsConfig(),
                      prev_stats: FrameStats | None = None,
                      cur_stats: FrameStats | None = None) -> DetectorHits:
    """Run the four overlap detectors on ``cur``; ``prev`` may be None for the first frame."""
    cur = np.asarray(cur)
    if prev is not None and np.asarray(prev).shape[:2] != cur.shape[:2]:
        raise DimensionMismatch("previous and current frames differ in size")
    cs = cur_stats or analyze_frame(cur, config)
    floor = pixel_floor(cur.shape, config)
    union = np.zeros(cs.fg.shape, dtype=bool)

    occl = tos = 0
    hit1 = False
    if prev is not None:
        ps = prev_stats or analyze_frame(prev, config)
        change = rgb_distance(prev, cur) >= config.change_threshold
        s, v = cs.hsv[..., 1], cs.hsv[..., 2]
        prev_solid = ps.hsv[..., 1] >= config.solid_s_min
        dark = v < config.dark_v_max
        text = (s < config.text_s_max) & (v > config.text_v_min)
        m_occl = change & dark & prev_solid
        m_tos = change & text & prev_solid
        occl, tos = int(m_occl.sum()), int(m_tos.sum())
        hit1 = occl >= floor or tos >= floor
        if hit1:
            union |= m_occl | m_tos

    pairs = bbox_pair_flags(cs.comps, config)

    m3 = dilated_overlap(cs, config)
    n3 = int(m3.sum())
    union |= m3

    m4 = text_line_crossing(cs.fg, config)
    n4 = int(m4.sum())
    hit4 = n4 >= floor
    if hit4:
        union |= m4

    return DetectorHits(hit1, bool(pairs), n3 > 0, hit4, occl, tos, pairs, n3, n4, union)


# -- score formulas ----------------------------------------------------------------------


def overlap_formula(p_ratio: float, p_fail: float, p_duration: float) -> float:
    return max(0.0, 1.0 - 0.40 * p_ratio - 0.35 * p_fail - 0.25 * p_duration)


def layout_formula(dense_frame_ratio: float, divisor: float = 0.40) -> float:
    return 1.0 - min(1.0, dense_frame_ratio / divisor)


def continuity_formula(p_disc: float, p_flash: float) -> float:
    return max(0.0, 1.0 - 0.6 * p_disc - 0.4 * p_flash)


def consistency_formula(p_palette: float, p_fg: float, p_artifact: float) -> float:
    return max(0.0, 1.0 - 0.40 * p_palette - 0.30 * p_fg - 0.30 * p_artifact)


def _clip01(x: float) -> float:
    return float(min(1.0, max(0.0, x)))


# -- metric families -------------------------------------------------------------------


def _stats(seq: FrameSequence, config, stats):
    return stats if stats is not None else [analyze_frame(f, config) for f in seq.frames]


def overlap_terms(seq: FrameSequence, config: DiagnosticsConfig = DiagnosticsConfig(), stats=None):
    stats = _stats(seq, config, stats)
    hits = []
    for t, cur in enumerate(seq.frames):
        prev = seq.frames[t - 1] if t > 0 else None
        hits.append(overlap_detectors(prev, cur, config, stats[t - 1] if t > 0 else None, stats[t]))
    ratios = [min(1.0, int((h.overlap_mask).sum()) / s.fg_count)
              for h, s in zip(hits, stats) if s.fg_count > 0]
    p_ratio = float(np.mean(ratios)) if ratios else 0.0
    flagged = [h.any for h in hits]
    p_fail = sum(flagged) / len(flagged)
    runs = [len(list(g)) for on, g in itertools.groupby(flagged) if on]
    p_duration = _clip01(sum(runs) * seq.period / seq.duration) if seq.duration > 0 else 0.0
    return {"p_ratio": p_ratio, "p_fail": p_fail, "p_duration": p_duration}, hits


def overlap_score(seq: FrameSequence, config: DiagnosticsConfig = DiagnosticsConfig(), stats=None) -> float:
    terms, _ = overlap_terms(seq, config, stats)
    return _clip01(overlap_formula(terms["p_ratio"], terms["p_fail"], terms["p_duration"]))


def cell_densities(fg: np.ndarray, rows: int = 6, cols: int = 8) -> np.ndarray:
    h, w = fg.shape
    ye = np.floor(np.linspace(0, h, rows + 1) + 0.5).astype(int)
    xe = np.floor(np.linspace(0, w, cols + 1) + 0.5).astype(int)
    out = np.zeros((rows, cols))
    for i in range(rows):
        for j in range(cols):
            cell = fg[ye[i]:ye[i + 1], xe[j]:xe[j + 1]]
            out[i, j] = cell.mean() if cell.size else 0.0
    return out


def layout_terms(seq: FrameSequence, config: DiagnosticsConfig = DiagnosticsConfig(), stats=None):
    stats = _stats(seq, config, stats)
    per_frame = []
    for s in stats:
        rho = cell_densities(s.fg, config.grid_rows, config.grid_cols)
        per_frame.append(float((rho >= config.dense_threshold).sum()) / rho.size)
    return {"dense_frame_ratio": float(np.mean(per_frame))}, per_frame


def layout_score(seq: FrameSequence, config: DiagnosticsConfig = DiagnosticsConfig(), stats=None) -> float:
    terms, _ = layout_terms(seq, config, stats)
    return _clip01(layout_formula(terms["dense_frame_ratio"], config.dense_divisor))


def _need_two(seq):
    if len(seq.frames) < 2:
        raise InsufficientFrames("metric needs at least two sampled frames")


def continuity_terms(seq: FrameSequence, config: DiagnosticsConfig = DiagnosticsConfig(), stats=None):
    _need_two(seq)
    stats = _stats(seq, config, stats)
    n = len(seq.frames)
    h, w = stats[0].fg.shape
    floor = config.disc_min_energy_frac * h * w
    energy = [int((rgb_distance(seq.frames[i - 1], seq.frames[i]) >= config.motion_threshold).sum())
              for i in range(1, n)]
    disc = []
    for i, e in enumerate(energy):
        if i == 0:
            disc.append(False)
            continue
        ref = max(float(np.median(energy[:i])), floor)
        disc.append(e > config.disc_factor * ref)

    jitter = [False] * (n - 1)
    diag = math.hypot(w, h)
    for start in range(0, n, config.jitter_window):
        seg = range(start, min(start + config.jitter_window, n))
        cents = np.array([c for c in (_fg_centroid(stats[t].fg) for t in seg) if c is not None])
        if len(cents) < 2:
            continue
        spread = math.sqrt(((cents - cents.mean(axis=0)) ** 2).sum(axis=1).mean())
        if spread > config.jitter_frac * diag:
            for t in seg:
                if t > start:
                    jitter[t - 1] = True

    counts = [len(s.comps) for s in stats]
    flicker = [abs(counts[i] - counts[i - 1]) >= config.flicker_delta for i in range(1, n)]
    m = n - 1
    p_disc = sum(d or j for d, j in zip(disc, jitter)) / m
    p_flash = sum(flicker) / m
    flags = [{"motion_energy": energy[i], "discontinuity": disc[i], "jitter": jitter[i],
              "flicker": flicker[i]} for i in range(m)]
    return {"p_disc": p_disc, "p_flash": p_flash}, flags


def _fg_centroid(fg: np.ndarray):
    ys, xs = np.nonzero(fg)
    if len(xs) == 0:
        return None
    return (float(xs.mean()), float(ys.mean()))


def continuity_score(seq: FrameSequence, config: DiagnosticsConfig = DiagnosticsConfig(), stats=None) -> float:
    terms, _ = continuity_terms(seq, config, stats)
    return _clip01(continuity_formula(terms["p_disc"], terms["p_flash"]))


def hs_histogram(hsv_frame: np.ndarray, bins: int = 64) -> np.ndarray:
    hist, _, _ = np.histogram2d(hsv_frame[..., 0].ravel(), hsv_frame[..., 1].ravel(),
                                bins=bins, range=((0.0, 1.0), (0.0, 1.0)))
    return hist / hist.sum()


def chi_square(a: np.ndarray, b: np.ndarray, eps: float = 1e-10) -> float:
    return float(0.5 * ((a - b) ** 2 / (a + b + eps)).sum())


def _luma(frame: np.ndarray) -> float:
    rgb = _rgb(frame)
    return float((0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]).mean())


def consistency_terms(seq: FrameSequence, config: DiagnosticsConfig = DiagnosticsConfig(), stats=None):
    _need_two(seq)
    stats = _stats(seq, config, stats)
    n = len(seq.frames)
    hists = [hs_histogram(s.hsv, config.hist_bins) for s in stats]
    frac = [s.fg.mean() for s in stats]
    counts = [len(s.comps) for s in stats]
    luma = [_luma(f) for f in seq.frames]
    flags = []
    for i in range(1, n):
        chi = chi_square(hists[i - 1], hists[i], config.chi_square_eps)
        a0, a1 = frac[i - 1], frac[i]
        rel = abs(a1 - a0) / max(a0, a1) if max(a0, a1) > 0 else 0.0
        fg_jump = rel > config.fg_area_jump or abs(counts[i] - counts[i - 1]) >= config.fg_count_jump
        populated = a0 >= config.populated_frac
        blank = populated and a1 < config.blank_frac
        vanish = populated and a1 < config.vanish_ratio * a0
        flash = abs(luma[i] - luma[i - 1]) > config.flash_luma
        flags.append({"chi_square": chi, "palette_shift": chi >= config.chi_square_threshold,
                      "fg_jump": fg_jump, "artifact": blank or vanish or flash})
    m = n - 1
    terms = {
        "p_palette": sum(f["palette_shift"] for f in flags) / m,
        "p_fg": sum(f["fg_jump"] for f in flags) / m,
        "p_artifact": sum(f["artifact"] for f in flags) / m,
    }
    return terms, flags


def consistency_score(seq: FrameSequence, config: DiagnosticsConfig = DiagnosticsConfig(), stats=None) -> float:
    terms, _ = consistency_terms(seq, config, stats)
    return _clip01(consistency_formula(terms["p_palette"], terms["p_fg"], terms["p_artifact"]))


# -- combined report ---------------------------------------------------------------------


@dataclass(frozen=True)
class MetricScores:
    overlap: float
    layout: float
    continuity: float | None = None
    consistency: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class DiagnosticsReport:
    scores: MetricScores
    terms: dict
    frame_flags: list
    transition_flags: list
    sampled_indices: tuple[int, ...]
    omitted: dict

    def to_dict(self) -> dict:
        return {
            "scores": self.scores.to_dict(),
            "terms": self.terms,
            "sampled_indices": list(self.sampled_indices),
            "frame_flags": self.frame_flags,
            "transition_flags": self.transition_flags,
            "omitted": self.omitted,
        }


def score_all(seq: FrameSequence, config: DiagnosticsConfig = DiagnosticsConfig()) -> DiagnosticsReport:
    """Sample once at ``config.sample_fps`` and compute every metric on the shared frames."""
    sampled = sample_frames(seq, config.sample_fps)
    stats = [analyze_frame(f, config) for f in sampled.frames]
    ov_terms, hits = overlap_terms(sampled, config, stats)
    lay_terms, dense = layout_terms(sampled, config, stats)
    terms = dict(ov_terms)
    terms.update(lay_terms)
    overlap = _clip01(overlap_formula(**ov_terms))
    layout = _clip01(layout_formula(lay_terms["dense_frame_ratio"], config.dense_divisor))
    frame_flags = []
    for idx, h, s, d in zip(sampled.indices, hits, stats, dense):
        frame_flags.append({
            "frame": idx,
            "overlap_triggered": h.any,
            "detectors": {"hsv_mask": h.hsv_mask, "bbox_iou": h.bbox_iou,
                          "pixel_overlap": h.pixel_overlap, "text_line": h.text_line},
            "overlap_pixel_fraction": min(1.0, int(h.overlap_mask.sum()) / s.fg_count) if s.fg_count else 0.0,
            "dense_cell_ratio": d,
        })
    omitted = {}
    continuity = consistency = None
    transition_flags: list = []
    try:
        c_terms, c_flags = continuity_terms(sampled, config, stats)
        s_terms, s_flags = consistency_terms(sampled, config, stats)
    except InsufficientFrames as exc:
        omitted = {"continuity": str(exc), "consistency": str(exc)}
    else:
        terms.update(c_terms)
        terms.update(s_terms)
        continuity = _clip01(continuity_formula(**c_terms))
        consistency = _clip01(consistency_formula(**s_terms))
        for i, (a, b) in enumerate(zip(c_flags, s_flags)):
            transition_flags.append({"from": sampled.indices[i], "to": sampled.indices[i + 1], **a, **b})
    return DiagnosticsReport(MetricScores(overlap, layout, continuity, consistency), terms,
                             frame_flags, transition_flags, sampled.indices, omitted)
