import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darkpoint.decoder import (
    Dark,
    Fallback,
    NoShift,
    StandardShift,
    argmax,
    decode,
    decode_dark,
    decode_no_shift,
    decode_standard_shift,
    gaussian_kernel,
    modulate,
    parse_strategy,
    second_max_neighbor,
    taylor_refine,
)
from darkpoint.encoder import EncoderConfig, Heatmap, encode_keypoint, gaussian_grid, render
from darkpoint.errors import InvalidConfig, NonMaximizingOffset, SingularHessian
from darkpoint.geometry import QuantMode, SubpixelCoord
from darkpoint.oracle import oracle_localize


def clean(u, v, w=16, h=16, sigma=2.0, ratio=1.0):
    return render(SubpixelCoord.heatmap(u, v), w, h, EncoderConfig(sigma), ratio)


def brute_argmax(h):
    best, val = None, -math.inf
    for y in range(h.height):
        for x in range(h.width):
            if h.at(x, y) > val:
                best, val = (x, y), h.at(x, y)
    return best


def brute_modulate(data, sigma_k):
    """Direct 2-D convolution with clamped indices, then min/max rescale."""
    r = math.ceil(3 * sigma_k)
    taps = [math.exp(-(i * i) / (2 * sigma_k**2)) for i in range(-r, r + 1)]
    total = sum(taps)
    taps = [t / total for t in taps]
    hgt, wid = data.shape
    out = np.zeros_like(data)
    for y in range(hgt):
        for x in range(wid):
            acc = 0.0
            for j in range(-r, r + 1):
                yy = min(max(y + j, 0), hgt - 1)
                for i in range(-r, r + 1):
                    xx = min(max(x + i, 0), wid - 1)
                    acc += taps[i + r] * taps[j + r] * data[yy, xx]
            out[y, x] = acc
    lo, hi = data.min(), data.max()
    return (out - out.min()) / (out.max() - out.min()) * (hi - lo) + lo


# -- argmax / neighbours ----------------------------------------------------

def test_argmax_examples():
    h = clean(2.3, 3.7)
    pixel, value = argmax(h)
    assert pixel.as_tuple() == brute_argmax(h) == (2, 4)
    assert value == h.at(2, 4)
    assert argmax(clean(3, 4))[0].as_tuple() == (3, 4)
    assert argmax(Heatmap(np.full((5, 6), 0.3)))[0].as_tuple() == (0, 0)


def test_second_max_neighbor_examples():
    h = clean(2.3, 3.7)
    vals = {(x, y): math.exp(-((x - 2.3) ** 2 + (y - 3.7) ** 2) / 8) for x, y in [(1, 4), (3, 4), (2, 3), (2, 5)]}
    assert max(vals, key=vals.get) == (3, 4)
    assert second_max_neighbor(h, SubpixelCoord.heatmap(2, 4)).as_tuple() == (3, 4)
    assert second_max_neighbor(clean(3, 4), (3, 4)).as_tuple() == (2, 4)
    corner = np.zeros((5, 5))
    corner[0, 0] = 1.0
    corner[1, 0] = 0.5
    assert second_max_neighbor(Heatmap(corner), (0, 0)).as_tuple() == (0, 1)
    corner[1, 0] = 0.0
    assert second_max_neighbor(Heatmap(corner), (0, 0)).as_tuple() == (1, 0)


# -- no shift / standard shift ----------------------------------------------

def test_decode_no_shift_examples():
    r = decode_no_shift(clean(2.3, 3.7, ratio=4))
    assert r.coord.as_tuple() == (8.0, 16.0)
    r = decode_no_shift(clean(3, 4, ratio=4))
    assert r.coord.as_tuple() == (12.0, 16.0)
    eps = 1e-9
    assert decode_no_shift(clean(2.5 - eps, 4)).heatmap_coord.as_tuple() == (2, 4)


def test_decode_standard_shift_examples():
    r = decode_standard_shift(clean(2.3, 3.7, ratio=4))
    assert r.heatmap_coord.as_tuple() == (2.25, 4.0)
    assert r.coord.as_tuple() == (9.0, 16.0)
    assert decode_standard_shift(clean(3, 4)).heatmap_coord.as_tuple() == (2.75, 4.0)


def test_explicit_ratio_overrides_metadata():
    h = clean(2.3, 3.7, ratio=4)
    assert decode_no_shift(h, 2).coord.as_tuple() == (4.0, 8.0)


# -- modulation --------------------------------------------------------------

def test_kernel_shape():
    k = gaussian_kernel(1.0)
    assert len(k) == 7
    assert k.sum() == pytest.approx(1.0, abs=1e-15)
    assert len(gaussian_kernel(0.4)) == 5


def test_modulate_dirac():
    d = np.zeros((11, 11))
    d[5, 5] = 1.0
    out = modulate(Heatmap(d), 1.0).data
    assert np.unravel_index(np.argmax(out), out.shape) == (5, 5)
    assert out.max() == pytest.approx(1.0, abs=1e-15)
    assert out.min() == pytest.approx(0.0, abs=1e-15)
    k = gaussian_kernel(1.0)
    expected = np.zeros((11, 11))
    expected[2:9, 2:9] = np.outer(k, k) / k[3] ** 2
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_modulate_constant_is_unchanged():
    h = Heatmap(np.full((6, 7), 0.25))
    assert modulate(h, 2.0) == h


@pytest.mark.parametrize("sigma_k", [0.6, 1.0, 2.0])
def test_modulate_matches_brute_force(sigma_k):
    rng = np.random.default_rng(3)
    data = gaussian_grid(4.4, 3.1, 9, 8, 1.5) + 0.05 * rng.standard_normal((8, 9))
    out = modulate(Heatmap(data), sigma_k).data
    np.testing.assert_allclose(out, brute_modulate(data, sigma_k), rtol=0, atol=1e-13)


def test_modulate_keeps_argmax_example():
    h = clean(2.3, 3.7, sigma=2.0)
    m = modulate(h, 1.0)
    assert brute_argmax(Heatmap(brute_modulate(h.data, 1.0))) == (2, 4)
    assert argmax(m)[0].as_tuple() == (2, 4)


def test_modulate_rejects_bad_sigma():
    with pytest.raises(InvalidConfig):
        modulate(clean(3, 3), 0)
    with pytest.raises(InvalidConfig):
        Dark(sigma_k=-1)


def test_modulate_does_not_mutate_input():
    h = clean(5.2, 6.1)
    before = h.data.copy()
    modulate(h, 1.5)
    assert np.array_equal(h.data, before)


@settings(max_examples=200, deadline=None)
@given(u=st.floats(6, 17), v=st.floats(6, 13), sigma=st.floats(1.0, 2.0), frac=st.floats(0.1, 1.0))
def test_modulation_preserves_argmax_on_clean_renders(u, v, sigma, frac):
    h = render(SubpixelCoord.heatmap(u, v), 24, 20, EncoderConfig(sigma))
    assert argmax(modulate(h, frac * sigma))[0] == argmax(h)[0]


# -- Taylor refinement ---------------------------------------------------------

@pytest.mark.parametrize("sigma", [0.8, 1.0, 2.0, 3.5])
def test_taylor_exact_on_gaussian(sigma):
    mu = taylor_refine(clean(2.3, 3.7, sigma=sigma), (2, 4))
    assert mu.u == pytest.approx(2.3, abs=1e-9)
    assert mu.v == pytest.approx(3.7, abs=1e-9)


def test_taylor_integer_centre_is_fixed_point():
    mu = taylor_refine(clean(7, 5), SubpixelCoord.heatmap(7, 5))
    assert mu.as_tuple() == (7.0, 5.0)


def test_taylor_under_small_noise():
    base = gaussian_grid(2.3, 3.7, 16, 16, 2.0)
    hits = 0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        h = Heatmap(base + 1e-3 * rng.standard_normal(base.shape))
        mu = taylor_refine(h, argmax(h)[0])
        hits += math.hypot(mu.u - 2.3, mu.v - 3.7) <= 0.15
    assert hits >= 990


def test_taylor_requires_interior_pixel():
    with pytest.raises(ValueError):
        taylor_refine(clean(3, 3), (0, 3))


def test_taylor_signals_singular_and_offset():
    with pytest.raises(SingularHessian):
        taylor_refine(Heatmap(np.full((5, 5), 0.5)), (2, 2))
    # a saddle: curves up along x
    x = np.arange(5) - 2.0
    saddle = np.exp(np.add.outer(-(x**2), x**2) / 4)
    with pytest.raises(SingularHessian):
        taylor_refine(Heatmap(saddle), (2, 2))
    # weakly curved along x with a steep slope: the Newton step leaves the cell
    t = np.arange(5) - 2.0
    log_field = np.add.outer(-(t**2) / 2, 0.1 * t - 0.005 * t**2)
    with pytest.raises(NonMaximizingOffset):
        taylor_refine(Heatmap(np.exp(log_field)), (2, 2))


@pytest.mark.parametrize("u, v, sigma", [(10.37, 7.81, 2.0), (20.5, 12.25, 1.5), (5.02, 9.98, 3.0), (14.0, 6.0, 2.0)])
def test_taylor_agrees_with_dense_oracle(u, v, sigma):
    h = render(SubpixelCoord.heatmap(u, v), 32, 24, EncoderConfig(sigma))
    mu = taylor_refine(h, argmax(h)[0])
    ref = oracle_localize(h, sigma)
    assert mu.distance(ref) < 1e-3


# -- DARK ----------------------------------------------------------------------

def test_decode_dark_exact_without_modulation():
    r = decode_dark(clean(2.3, 3.7, ratio=4), modulation=False)
    assert r.coord.u == pytest.approx(9.2, abs=1e-6)
    assert r.coord.v == pytest.approx(14.8, abs=1e-6)
    assert r.fallback is Fallback.NONE


def test_decode_dark_exposes_biased_encoding():
    h = encode_keypoint(SubpixelCoord.image(9.2, 14.8), 4, 16, 16, EncoderConfig(2.0, QuantMode.ROUND))
    r = decode_dark(h, modulation=False)
    assert r.coord.u == pytest.approx(8.0, abs=1e-9)
    assert r.coord.v == pytest.approx(16.0, abs=1e-9)


def test_decode_dark_confidence_is_pre_modulation():
    h = clean(7.3, 6.6)
    assert decode_dark(h, sigma_k=2.0).confidence == h.data.max()


@pytest.mark.parametrize("modulation", [True, False])
def test_degenerate_inputs_never_nan(modulation):
    cases = {
        "constant": (np.full((8, 8), 0.7), Fallback.BORDER_MAX),
        "zeros": (np.zeros((8, 8)), Fallback.BORDER_MAX),
    }
    for name, (data, tag) in cases.items():
        r = decode_dark(Heatmap(data), modulation=modulation)
        assert r.fallback is tag, name
        assert all(math.isfinite(x) for x in r.coord.as_tuple() + r.heatmap_coord.as_tuple())


def test_parse_strategy():
    assert parse_strategy("none") == NoShift()
    assert parse_strategy("Standard") == StandardShift()
    assert parse_strategy("dark", 1.5, False) == Dark(1.5, False)
    with pytest.raises(InvalidConfig):
        parse_strategy("soft-argmax")


# -- invariants ------------------------------------------------------------------

STRATEGIES = [NoShift(), StandardShift(), Dark(1.0, False), Dark(1.5, True)]


@settings(max_examples=200, deadline=None)
@given(u=st.floats(3, 12), v=st.floats(3, 9), sigma=st.floats(1.0, 3.0),
       c=st.sampled_from([1e-3, 1.0, 1e3]), strategy=st.sampled_from(STRATEGIES))
def test_scale_invariance(u, v, sigma, c, strategy):
    h = render(SubpixelCoord.heatmap(u, v), 16, 13, EncoderConfig(sigma), 4)
    a, b = decode(h, strategy), decode(h.scaled(c), strategy)
    assert b.coord.u == pytest.approx(a.coord.u, abs=1e-9)
    assert b.coord.v == pytest.approx(a.coord.v, abs=1e-9)
    assert b.fallback is a.fallback
    assert b.confidence == pytest.approx(c * a.confidence, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(u=st.floats(-0.5, 0.5), v=st.floats(-0.5, 0.5), sigma=st.floats(0.7, 1.5),
       x0=st.integers(12, 19), y0=st.integers(12, 15), dx=st.integers(-3, 3), dy=st.integers(-3, 3),
       seed=st.integers(0, 2**32 - 1), strategy=st.sampled_from(STRATEGIES))
def test_integer_translation_equivariance(u, v, sigma, x0, y0, dx, dy, seed, strategy):
    # compact 7x7 blob on a zero canvas; blob plus blur radius stays clear of the border
    rng = np.random.default_rng(seed)
    patch = gaussian_grid(3 + u, 3 + v, 7, 7, sigma) * (1 + 0.01 * rng.random((7, 7)))
    canvas = np.zeros((28, 32))
    canvas[y0 - 3:y0 + 4, x0 - 3:x0 + 4] = patch
    moved = np.zeros_like(canvas)
    moved[y0 + dy - 3:y0 + dy + 4, x0 + dx - 3:x0 + dx + 4] = patch
    a, b = decode(Heatmap(canvas), strategy), decode(Heatmap(moved), strategy)
    assert b.fallback is a.fallback
    assert b.heatmap_coord.u - dx == pytest.approx(a.heatmap_coord.u, abs=1e-12)
    assert b.heatmap_coord.v - dy == pytest.approx(a.heatmap_coord.v, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(u=st.floats(2, 13), v=st.floats(2, 13), sigma=st.floats(1.0, 3.0))
def test_exact_recovery_bounds(u, v, sigma):
    h = render(SubpixelCoord.heatmap(u, v), 16, 16, EncoderConfig(sigma))
    truth = SubpixelCoord.heatmap(u, v)
    e_dark = decode_dark(h, modulation=False).heatmap_coord.distance(truth)
    e_none = decode_no_shift(h).heatmap_coord.distance(truth)
    e_std = decode_standard_shift(h).heatmap_coord.distance(truth)
    assert e_dark < 1e-6
    assert e_none <= 0.5 * math.sqrt(2) + 1e-12
    assert e_std <= e_none + 0.25 * math.sqrt(2) + 1e-12
