import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layoutforge.constraints import (LossBreakdown, LossWeights, loss_bound, loss_box, loss_coll,
                                     loss_interp, loss_rel, total_loss)
from layoutforge.errors import CoverageError, RefError
from layoutforge.scene import KeyframeLayout, Relation

W = LossWeights()


def L(**boxes):
    return KeyframeLayout.from_array(list(boxes), list(boxes.values()))


def test_weights_defaults():
    assert (W.lambda1, W.lambda2, W.lambda3, W.lambda4, W.lambda5) == (2, 5, 3, 3, 2)
    assert W.u_samples == (0.25, 0.5, 0.75)
    with pytest.raises(ValueError):
        LossWeights(lambda2=-1)
    with pytest.raises(ValueError):
        LossWeights(u_samples=(0.0, 0.5))


def test_loss_coll_examples():
    assert loss_coll(L(a=[0.5, 0.5, 0.2, 0.2]), W) == 0.0
    assert loss_coll(L(a=[0.2, 0.5, 0.2, 0.2], b=[0.8, 0.5, 0.2, 0.2]), W) == 0.0
    assert loss_coll(L(a=[0.5, 0.5, 0.2, 0.2], b=[0.5, 0.5, 0.2, 0.2]), W) == pytest.approx(0.95)


def test_loss_coll_is_pair_mean():
    lay = L(a=[0.5, 0.5, 0.2, 0.2], b=[0.5, 0.5, 0.2, 0.2], c=[0.9, 0.9, 0.1, 0.1])
    assert loss_coll(lay, W) == pytest.approx(0.95 / 3)


def test_loss_rel_examples():
    lay = L(i=[0.2, 0.5, 0.2, 0.2], j=[0.6, 0.5, 0.2, 0.2])
    assert loss_rel(lay, [], W) == 0.0
    assert loss_rel(lay, [Relation("i", "left_of", "j")], W) == 0.0
    lay = L(i=[0.5, 0.5, 0.2, 0.2], j=[0.6, 0.5, 0.2, 0.2])  # right edge 0.6, left edge 0.5
    assert loss_rel(lay, [Relation("i", "left_of", "j")], W) == pytest.approx(0.11)


def test_loss_rel_above_and_inside():
    lay = L(i=[0.5, 0.5, 0.2, 0.2], j=[0.5, 0.55, 0.2, 0.2])
    assert loss_rel(lay, [Relation("i", "above", "j")], W) == pytest.approx(0.6 - 0.45 + 0.01)
    lay = L(i=[0.5, 0.5, 0.2, 0.2], j=[0.55, 0.5, 0.2, 0.4])
    # i spans x 0.4..0.6, j spans 0.45..0.65: left overflow 0.05 only
    assert loss_rel(lay, [Relation("i", "inside", "j")], W) == pytest.approx(0.05)
    assert loss_rel(lay, [Relation("i", "inside", "j"), Relation("j", "left_of", "i")], W) == pytest.approx(
        (0.05 + (0.65 - 0.4 + 0.01)) / 2)


def test_loss_rel_unknown_id():
    with pytest.raises(RefError):
        loss_rel(L(a=[0.5, 0.5, 0.1, 0.1]), [Relation("a", "above", "zz")], W)


def test_loss_bound_examples():
    assert loss_bound(L(a=[0.5, 0.5, 0.2, 0.2])) == 0.0
    assert loss_bound(L(a=[0.95, 0.5, 0.2, 0.2], b=[0.3, 0.3, 0.1, 0.1])) == pytest.approx(0.025)
    assert loss_bound(L(a=[1.0, 0.5, 0.2, 0.2])) == pytest.approx(0.1)


def test_loss_interp_swap_example():
    a = L(i=[0.25, 0.5, 0.2, 0.2], j=[0.75, 0.5, 0.2, 0.2])
    b = L(i=[0.75, 0.5, 0.2, 0.2], j=[0.25, 0.5, 0.2, 0.2])
    assert loss_interp(a, b, W) == pytest.approx(1.90, abs=1e-12)


def test_loss_interp_trivial_cases():
    static = L(a=[0.2, 0.2, 0.2, 0.2], b=[0.8, 0.8, 0.2, 0.2])
    assert loss_interp(static, static, W) == 0.0
    one = L(a=[0.2, 0.2, 0.2, 0.2])
    assert loss_interp(one, L(a=[0.8, 0.8, 0.2, 0.2]), W) == 0.0
    with pytest.raises(CoverageError):
        loss_interp(static, one, W)


def test_loss_box_examples():
    gt = L(a=[0.5, 0.5, 0.2, 0.2])
    assert loss_box(gt, gt) == 0.0
    assert loss_box(L(a=[0.54, 0.5, 0.2, 0.2]), gt) == pytest.approx(0.01)
    two = L(a=[0.5, 0.5, 0.2, 0.2], b=[0.3, 0.3, 0.1, 0.1])
    off = L(a=[0.5, 0.5, 0.2, 0.2], b=[0.38, 0.38, 0.18, 0.18])
    assert loss_box(off, two) == pytest.approx(0.04)
    with pytest.raises(CoverageError):
        loss_box(gt, two)


def test_total_loss_examples():
    lay = L(a=[0.2, 0.2, 0.2, 0.2], b=[0.8, 0.8, 0.2, 0.2])
    br = total_loss([lay, lay], [[], []], W)
    assert br.total == 0.0 and br.l_interp == 0.0
    assert LossBreakdown.combine(W, l_coll=0.95).total == pytest.approx(4.75)
    assert LossBreakdown.combine(W, l_rel=0.11, l_bound=0.025).total == pytest.approx(0.405)


def test_total_loss_averages_and_sums():
    clash = L(a=[0.5, 0.5, 0.2, 0.2], b=[0.5, 0.5, 0.2, 0.2])
    clean = L(a=[0.2, 0.5, 0.2, 0.2], b=[0.8, 0.5, 0.2, 0.2])
    br = total_loss([clash, clean], None, W, gt=[clash, clash])
    assert br.l_coll == pytest.approx(0.95 / 2)
    assert br.l_box == pytest.approx(loss_box(clean, clash) / 2)
    # the path from coincident to split boxes collides at u = 0.25 only
    assert br.l_interp == pytest.approx(loss_interp(clash, clean, W))


unit = st.floats(0.05, 0.95)
size = st.floats(0.02, 0.4)
rows = st.lists(st.tuples(unit, unit, size, size), min_size=1, max_size=6)


def _layout(rs):
    return KeyframeLayout.from_array([f"o{i}" for i in range(len(rs))], rs)


@given(rows, rows)
def test_terms_nonnegative(a, b):
    la = _layout(a)
    assert loss_coll(la, W) >= 0 and loss_bound(la) >= 0
    if len(a) == len(b):
        assert loss_interp(la, _layout(b), W) >= 0


@given(st.integers(1, 6), st.integers(0, 10_000))
def test_zero_on_valid_static_layout(n, seed):
    rng = np.random.default_rng(seed)
    xs = (np.arange(n) + 0.5) / n
    w = 0.8 / n
    lay = _layout([[x, rng.uniform(0.2, 0.8), w, 0.1] for x in xs])
    rels = [Relation(f"o{i}", "left_of", f"o{i + 1}") for i in range(n - 1)]
    br = total_loss([lay, lay], [rels, rels], W)
    assert br.l_coll == br.l_rel == br.l_bound == br.l_interp == 0.0


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 5), st.floats(0, 5))
def test_total_linear_in_weights(c, r, b, s, lam):
    base = LossWeights(lambda3=lam)
    scaled = LossWeights(lambda3=s * lam)
    t0 = LossBreakdown.combine(base, l_coll=c, l_rel=r, l_bound=b).total
    t1 = LossBreakdown.combine(scaled, l_coll=c, l_rel=r, l_bound=b).total
    assert t1 - t0 == pytest.approx((s - 1) * lam * r, abs=1e-9)


@given(st.floats(0.3, 0.7), st.floats(0.3, 0.7), st.floats(0.0, 0.2), st.floats(0.0, 0.1))
def test_coll_monotone_when_moving_apart(cx, cy, d, extra):
    a = [cx, cy, 0.2, 0.2]
    before = _layout([a, [cx + d, cy, 0.2, 0.2]])
    after = _layout([a, [min(cx + d + extra, 1.0), cy, 0.2, 0.2]])
    assert loss_coll(after, W) <= loss_coll(before, W) + 1e-12


def test_inside_pairs_exempt_from_collision():
    lay = L(a=[0.5, 0.5, 0.4, 0.4], b=[0.5, 0.5, 0.1, 0.1])
    assert loss_coll(lay, W, exempt=[frozenset("ab")]) == 0.0
    br = total_loss([lay], [[Relation("b", "inside", "a")]], W)
    assert br.l_coll == 0.0 and br.l_rel == 0.0
    no_exempt = LossWeights(exempt_inside=False)
    assert total_loss([lay], [[Relation("b", "inside", "a")]], no_exempt).l_coll > 0
