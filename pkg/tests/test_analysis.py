import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from published import PD_RANKS, PD_TABLE
from texloss.analysis import (DegenerateKdeError, PdPoint, Template, equispaced_templates, kde,
                              matching_scores, max_match, ncc_map, pd_rank, ranked_csv, read_pd_csv,
                              scott_bandwidth)

stats = pytest.importorskip("scipy.stats")

# ---------------------------------------------------------------- NCC

def test_self_match_is_one(rng):
    img = rng.uniform(0, 1, (48, 48))
    tp = Template.extract(img, 10, 20, 16)
    assert abs(max_match(tp, img) - 1.0) <= 1e-12
    assert np.unravel_index(np.argmax(ncc_map(tp, img)), img.shape) == (20, 10)


def test_zero_image_scores_zero():
    tp = Template(np.ones((4, 4)), (0, 0))
    assert max_match(tp, np.zeros((8, 8))) == 0.0


def test_single_pixel_template_is_sign():
    tp = Template(np.array([[2.0]]), (0, 0))
    img = np.array([[3.0, -1.0], [0.0, 0.5]])
    assert ncc_map(tp, img).tolist() == [[1.0, -1.0], [0.0, 1.0]]


def test_independent_noise_scores_below_one(rng):
    a, b = rng.normal(size=(40, 40)), rng.normal(size=(40, 40))
    assert max_match(Template.extract(a, 4, 4, 16), b) < 0.9


def test_ncc_matches_loop_oracle(rng):
    img = rng.uniform(-1, 1, (9, 11))
    patch = rng.uniform(-1, 1, (4, 4))
    got = ncc_map(Template(patch, (0, 0)), img)
    expected = [[oracles.ncc(patch, img, x, y) for x in range(11)] for y in range(9)]
    np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-12)


@given(st.integers(0, 2 ** 31), st.floats(0.1, 10), st.floats(0.1, 10))
def test_ncc_scale_invariant(seed, a, b):
    gen = np.random.default_rng(seed)
    img = gen.uniform(0, 1, (20, 20))
    tp = Template.extract(img, 2, 3, 8)
    ref = ncc_map(tp, img)
    scaled = ncc_map(Template(a * tp.patch, tp.origin), b * img)
    np.testing.assert_allclose(scaled, ref, rtol=1e-9, atol=1e-12)
    assert np.all(np.abs(ref) <= 1 + 1e-12)


def test_template_bounds():
    with pytest.raises(ValueError):
        Template.extract(np.zeros((10, 10)), 5, 0, 8)
    assert Template.extract(np.zeros((10, 10)), 2, 2, 8).size == 8


# ---------------------------------------------------------------- templates

def test_equispaced_origins_256():
    tps = equispaced_templates(np.zeros((256, 256)))
    assert len(tps) == 9
    assert sorted({tp.origin[0] for tp in tps}) == [16, 112, 208]
    assert tps[0].origin == (16, 16) and tps[-1].origin == (208, 208)


def test_equispaced_margin_shrinks():
    def xs(t):
        return sorted({tp.origin[0] for tp in equispaced_templates(np.zeros((64, 64)), 9, t)})
    assert xs(16) == [8, 24, 40]   # full t/2 margin still fits
    assert xs(20) == [2, 22, 42]   # margin cut to (64 - 60) // 2
    assert xs(32) == [0, 16, 32]   # overlapping templates, no margin


def test_single_template_is_centered():
    assert equispaced_templates(np.zeros((100, 80)), 1, 32)[0].origin == (24, 34)


@given(st.integers(32, 200), st.integers(32, 200), st.sampled_from([1, 4, 9, 16]))
def test_templates_inside_image(h, w, r):
    tps = equispaced_templates(np.zeros((h, w)), r, 32)
    assert len(tps) == r
    for tp in tps:
        x, y = tp.origin
        assert 0 <= x <= w - 32 and 0 <= y <= h - 32


def test_template_errors():
    with pytest.raises(ValueError):
        equispaced_templates(np.zeros((64, 64)), 8)
    with pytest.raises(ValueError):
        equispaced_templates(np.zeros((16, 64)), 9, 32)


def test_matching_scores_self():
    img = np.random.default_rng(2).uniform(0, 1, (96, 96))
    scores = matching_scores(img, img)
    assert scores.shape == (9,)
    np.testing.assert_allclose(scores, 1.0, atol=1e-12)
    both = matching_scores([img, img], [img, img * 0.5], r=4)
    assert both.shape == (8,)


# ---------------------------------------------------------------- KDE

def test_kde_matches_scipy(rng):
    s = rng.normal(0.8, 0.05, 40)
    dist = kde(s)
    ref = stats.gaussian_kde(s, bw_method="scott")
    np.testing.assert_allclose(dist.density, ref(dist.grid), rtol=1e-10)
    assert dist.bandwidth == pytest.approx(scott_bandwidth(s))
    assert dist.bandwidth == pytest.approx(np.std(s, ddof=1) * 40 ** -0.2, rel=1e-14)


def test_kde_integrates_to_one(rng):
    dist = kde(rng.uniform(0.9, 1.0, 9))
    assert np.trapezoid(dist.density, dist.grid) == pytest.approx(1.0, abs=1e-3)


def test_kde_mean_and_peak(rng):
    s = rng.normal(0.5, 0.01, 200)
    dist = kde(s)
    assert dist.mean == pytest.approx(np.mean(s))
    assert abs(dist.grid[np.argmax(dist.density)] - 0.5) < 0.01


def test_kde_bimodal():
    s = np.concatenate([np.full(10, 0.2), np.full(10, 0.8)]) + np.linspace(-0.01, 0.01, 20)
    dist = kde(s, np.linspace(0, 1, 101))
    peaks = [i for i in range(1, 100) if dist.density[i] > dist.density[i - 1] and dist.density[i] > dist.density[i + 1]]
    assert len(peaks) == 2


@pytest.mark.parametrize("scores", [[0.5], [0.3, 0.3, 0.3], []])
def test_kde_degenerate(scores):
    with pytest.raises(DegenerateKdeError):
        kde(scores)


def test_kde_csv(rng):
    lines = kde(rng.uniform(size=5), [0.0, 0.5]).to_csv().splitlines()
    assert lines[0] == "m,density" and len(lines) == 3


# ---------------------------------------------------------------- perception-distortion

def test_pd_rank_published_table():
    ranked = pd_rank(PdPoint(*row) for row in PD_TABLE)
    assert {r.point.label: r.rank for r in ranked} == PD_RANKS


def test_pd_rank_single_point():
    (only,) = pd_rank([PdPoint("a", 3.0, 4.0)])
    assert only.rank == 1 and only.distance == 5.0


@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100)), min_size=1, max_size=12),
       st.floats(0.01, 100), st.randoms())
def test_pd_rank_properties(coords, scale, rnd):
    points = [PdPoint(f"p{i:02d}", p, d) for i, (p, d) in enumerate(coords)]
    ranked = pd_rank(points)
    assert [r.rank for r in ranked] == list(range(1, len(points) + 1))
    assert all(a.distance <= b.distance for a, b in zip(ranked, ranked[1:]))
    shuffled = list(points)
    rnd.shuffle(shuffled)
    assert [r.point for r in pd_rank(shuffled)] == [r.point for r in ranked]
    near_tie = any(math.isclose(a.distance, b.distance, rel_tol=1e-9) for a, b in zip(ranked, ranked[1:]))
    if not near_tie:
        scaled = pd_rank(PdPoint(p.label, p.perception * scale, p.distortion * scale) for p in points)
        assert [r.point.label for r in scaled] == [r.point.label for r in ranked]


def test_pd_rank_ties_by_label():
    ranked = pd_rank([PdPoint("b", 3, 4), PdPoint("a", 4, 3)])
    assert [r.point.label for r in ranked] == ["a", "b"]


def test_pd_errors():
    with pytest.raises(ValueError):
        pd_rank([])
    with pytest.raises(ValueError):
        PdPoint("x", -1.0, 0.0)
    with pytest.raises(ValueError):
        PdPoint("x", math.nan, 0.0)


def test_pd_csv_round_trip():
    text = "label,perception,distortion\nA,3,4\nB,1,1\n"
    ranked = pd_rank(read_pd_csv(text))
    lines = ranked_csv(ranked).splitlines()
    assert lines[0] == "rank,label,perception,distortion,distance"
    assert lines[1].startswith("1,B,") and lines[2] == "2,A,3.0,4.0,5.0"


@pytest.mark.parametrize("text", ["label,perception\nA,1\n", "label,perception,distortion\nA,x,1\n"])
def test_pd_csv_errors(text):
    with pytest.raises(ValueError):
        read_pd_csv(text)
