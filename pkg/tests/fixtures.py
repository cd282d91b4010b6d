"""Synthetic frame sequences whose penalty fractions are known by construction.

Every builder returns frames plus the expected intermediate quantities, worked
out by hand from the pixel geometry in the comments.
"""

import numpy as np

from layoutforge.diagnostics import FrameSequence

W, H = 80, 60
WHITE = (255, 255, 255)


def blank(color=(0, 0, 0), w=W, h=H):
    f = np.zeros((h, w, 3), dtype=np.uint8)
    f[:] = color
    return f


def fill(frame, y0, y1, x0, x1, color=WHITE):
    frame[y0:y1, x0:x1] = color
    return frame


# -- overlap -----------------------------------------------------------------------------


def squares_gap(gap: int):
    """Two white 10x10 squares side by side, ``gap`` background columns apart."""
    f = blank()
    fill(f, 10, 20, 10, 20)
    fill(f, 10, 20, 20 + gap, 30 + gap)
    return f


def squares_apart():
    """Two separated squares, each straddling four grid cells (25% density)."""
    f = blank()
    fill(f, 15, 25, 15, 25)
    fill(f, 15, 25, 55, 65)
    return f


def overlap_fixture():
    """Clean / touching frames at 2 fps with a longer declared duration.

    Touching frame: gap of one column. Each square's 3x3 dilation reaches one
    pixel past its edge, so both cover column 20 on rows 9..20: 12 overlap
    pixels over 200 foreground pixels, no other detector fires.
    Pattern C X X C C X C C: p_fail = 3/8; flagged runs total 3 frames of 0.5 s
    over a 5 s duration gives p_duration = 0.3; p_ratio = 3 * 0.06 / 8.
    """
    c, x = squares_apart(), squares_gap(1)
    frames = [c, x, x, c, c, x, c, c]
    seq = FrameSequence(tuple(frames), 2.0, 5.0)
    terms = {"p_ratio": 3 * (12 / 200) / 8, "p_fail": 3 / 8, "p_duration": 1.5 / 5.0}
    score = 1 - 0.40 * terms["p_ratio"] - 0.35 * terms["p_fail"] - 0.25 * terms["p_duration"]
    return seq, terms, score


def ring_and_square():
    """A 2-px ring 20x20 around a 10x10 square: IoU of their boxes = 100/400."""
    f = blank()
    fill(f, 20, 40, 30, 50)
    f[22:38, 32:48] = 0
    fill(f, 25, 35, 35, 45)
    return f


def square_with_bar():
    """10x10 square with a 3-px-tall bar attached on the right.

    The 7x7 opening keeps the square and drops the bar (60 px), so the thin
    pixels next to thick ones are the bar's first column: 3 pixels.
    """
    f = blank()
    fill(f, 10, 20, 10, 20)
    fill(f, 14, 17, 20, 40)
    return f


def occlusion_pair(delta: int):
    """Saturated dark-red square whose red channel drops by ``delta``."""
    prev = fill(blank(), 10, 30, 10, 30, (60, 0, 0))
    cur = fill(blank(), 10, 30, 10, 30, (60 - delta, 0, 0))
    return prev, cur


# -- layout ------------------------------------------------------------------------------


def cells_frame(n_cells: int, value: int = 255, partial: int | None = None):
    """Fill whole 10x10 cells of the 6x8 grid (80x60 frame) in raster order.

    ``partial`` additionally sets that many pixels of the next cell.
    """
    f = blank()
    for c in range(n_cells):
        r, q = divmod(c, 8)
        fill(f, r * 10, r * 10 + 10, q * 10, q * 10 + 10, (value,) * 3)
    if partial:
        r, q = divmod(n_cells, 8)
        ys, xs = np.divmod(np.arange(partial), 10)
        f[r * 10 + ys, q * 10 + xs] = value
    return f


def layout_fixture():
    """12 and 6 dense cells: dense_frame_ratio = (12/48 + 6/48) / 2 = 0.1875."""
    frames = (cells_frame(12), cells_frame(6, partial=59))
    return FrameSequence(frames, 2.0), 0.1875, 1 - 0.1875 / 0.40


# -- continuity --------------------------------------------------------------------------


def _continuity_base(extras=False, noise=0, noise_value=12, offset=0):
    f = blank()
    fill(f, 25, 35, 35, 45)
    if extras:
        for cy, cx in ((15, 20), (15, 60), (45, 20), (45, 60)):
            fill(f, cy - 2, cy + 2, cx - 2, cx + 2)
    flat = f.reshape(-1, 3)
    # noise pixels live in the bottom rows, red channel only, never foreground
    start = (H - 5) * W + offset
    flat[start:start + noise, 0] = noise_value
    return f


def continuity_fixture():
    """Transitions with motion energies 10, 10, 10, 64, 64, 210.

    Energy counts pixels whose RGB distance is >= 12; the 30 pixels at value
    11 in frame 2 never count. The 10x-median rule flags only the last
    transition (median 10). Four symmetric 4x4 squares appear for one frame,
    so the component count goes 1 -> 5 -> 1 (two flicker transitions) while
    the foreground centroid stays put (no jitter).
    p_disc = 1/6, p_flash = 2/6.
    """
    frames = [
        _continuity_base(),
        _continuity_base(noise=10),
        _continuity_base(noise=30, noise_value=11, offset=100),
        _continuity_base(noise=10),
        _continuity_base(extras=True, noise=10),
        _continuity_base(noise=10),
        _continuity_base(noise=200, offset=10),
    ]
    energies = [10, 10, 10, 64, 64, 210]
    seq = FrameSequence(tuple(frames), 2.0)
    return seq, energies, (1 / 6, 2 / 6), 1 - 0.6 / 6 - 0.4 * 2 / 6


# -- consistency -------------------------------------------------------------------------


def red_blue(cols_blue: int):
    f = blank((255, 0, 0))
    fill(f, 0, H, 0, cols_blue, (0, 0, 255))
    return f


def chi_one_hot(q: float) -> float:
    """Chi-square between one-hot [1, 0] and [1 - q, q]."""
    return 0.5 * (q * q / (2 - q) + q)


def palette_fixture():
    """Red, 30% blue, red, 20% blue, red.

    Chi-square 0.1765 >= 0.15 on the first two transitions, 0.1111 < 0.15 on
    the last two: p_palette = 0.5, nothing else fires (solid fill, one
    component, luminance steps below 60).
    """
    frames = (red_blue(0), red_blue(24), red_blue(0), red_blue(16), red_blue(0))
    return FrameSequence(frames, 2.0), (0.5, 0.0, 0.0), 0.8


def fg_artifact_fixture():
    """Block 20x20, same, block 20x10, blank, all white.

    fg area changes: 0, 50%, 100%, 100% -> p_fg = 3/4. Artifacts: blank after
    a populated frame, then a 255-level brightness flash -> p_artifact = 2/4.
    Black and white share the H=S=0 histogram bin: no palette events.
    """
    frames = (
        fill(blank(), 10, 30, 10, 30),
        fill(blank(), 10, 30, 10, 30),
        fill(blank(), 10, 30, 10, 20),
        blank(),
        blank(WHITE),
    )
    return FrameSequence(frames, 2.0), (0.0, 0.75, 0.5), 1 - 0.3 * 0.75 - 0.3 * 0.5


# -- extraction --------------------------------------------------------------------------


def extraction_errors(seed: int):
    """Extract a two-keyframe synthetic render and compare against ground truth.

    Returns ``(max_center_error, max_size_error, status_mismatches)``. Each
    ground-truth box is paired with the extracted box of nearest center.
    """
    from layoutforge.extraction import extract_records
    from layoutforge.synthetic import tracked_rect_sequence

    frames, truth, statuses = tracked_rect_sequence(seed)
    records = extract_records(frames)
    center_err = size_err = 0.0
    mismatches = []
    for k, rec in enumerate(records):
        got = rec.gt_layout
        want = truth[k]
        if len(got) != len(want):
            mismatches.append((k, "count", len(got), len(want)))
            continue
        status_of = {o.id: o.status for o in rec.objects}
        for name, box in want.items():
            oid = min(got, key=lambda i: (got[i].cx - box.cx) ** 2 + (got[i].cy - box.cy) ** 2)
            g = got[oid]
            center_err = max(center_err, abs(g.cx - box.cx), abs(g.cy - box.cy))
            size_err = max(size_err, abs(g.w - box.w), abs(g.h - box.h))
            expected = "new" if k == 0 else statuses[name]
            if status_of[oid] != expected:
                mismatches.append((k, name, status_of[oid], expected))
        if k == 1:
            gone = sorted(o.id for o in rec.objects if o.status == "disappear")
            want_gone = sum(s == "disappear" for s in statuses.values())
            if len(gone) != want_gone:
                mismatches.append((k, "disappear", len(gone), want_gone))
    return center_err, size_err, mismatches


def tracked_frames(seed: int):
    from layoutforge.synthetic import tracked_rect_sequence

    return tracked_rect_sequence(seed)[0]
