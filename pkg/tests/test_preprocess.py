import numpy as np
import pytest

from mcdnn.data import bytes_to_unit
from mcdnn.preprocess import (
    BlankImageError, ChainParseError, PreprocessError, Preprocessor, Step, adapthisteq,
    adapthisteq_plane, compose, conorm, conorm_plane, dog_kernel, foreground_box, histeq,
    histeq_plane, imadjust, imadjust_plane, lab_to_rgb, on_lightness, pad, parse_chain,
    resize_center, rgb_to_lab, width_normalize,
)


def glyph(width=20, height=20, canvas=29):
    """A filled box outline of the given extent, centered on a dark canvas."""
    im = np.full((1, canvas, canvas), -1.0)
    top, left = (canvas - height) // 2, (canvas - width) // 2
    im[0, top:top + height, left:left + width] = 1.0
    im[0, top + 3:top + height - 3, left + 3:left + width - 3] = -1.0
    return im


def box_width(im):
    top, bottom, left, right = foreground_box(im[0])
    return right - left + 1


# geometry

def test_width_normalize_identity_at_same_width():
    im = glyph(20)
    assert np.array_equal(width_normalize(im, 20), im)


@pytest.mark.parametrize("target", [10, 12, 14, 16, 18, 20])
def test_width_normalize_targets(target):
    out = width_normalize(glyph(20), target)
    assert out.shape == (1, 29, 29)
    assert abs(box_width(out) - target) <= 1
    top, bottom, _, _ = foreground_box(out[0])
    assert bottom - top + 1 == 20


def test_width_normalize_blank():
    with pytest.raises(BlankImageError):
        width_normalize(np.full((1, 29, 29), -1.0), 10)


def test_resize_center_margins():
    out = resize_center(np.ones((1, 30, 30)), 40, 48)
    assert out.shape == (1, 48, 48)
    assert (out[0, 4:44, 4:44] == 1.0).all()
    mask = np.ones((48, 48), bool)
    mask[4:44, 4:44] = False
    assert (out[0][mask] == -1.0).all()


def test_resize_center_same_extent_is_plain_resize():
    im = np.random.default_rng(0).uniform(-1, 1, (3, 40, 40))
    assert np.array_equal(resize_center(im, 40, 40), im)
    with pytest.raises(PreprocessError):
        resize_center(im, 50, 48)


def test_pad_centers():
    out = pad(np.ones((1, 28, 28)), 29, 29)
    assert out[0, :28, :28].all() and (out[0, 28, :] == -1).all() and (out[0, :, 28] == -1).all()
    with pytest.raises(PreprocessError):
        pad(np.ones((1, 30, 30)), 29, 29)


# imadjust

def test_imadjust_saturates_exact_tails_on_ramp():
    ramp = np.linspace(-0.8, 0.6, 10_000).reshape(100, 100)
    out = imadjust_plane(ramp)
    assert np.count_nonzero(out == -1.0) == 100
    assert np.count_nonzero(out == 1.0) == 100
    assert ((out > -1) & (out < 1)).sum() == 9800


def test_imadjust_uniform_histogram_is_near_identity():
    n = 10_000
    ramp = np.linspace(-1, 1, n).reshape(100, 100)
    flat = np.sort(ramp, axis=None)
    lo, hi = flat[99], flat[n - 100]
    expected = np.clip(-1 + 2 * (ramp - lo) / (hi - lo), -1, 1)
    assert np.allclose(imadjust_plane(ramp), expected, atol=1e-15)
    assert np.abs(imadjust_plane(ramp) - ramp).max() < 0.03


def test_imadjust_two_valued_and_constant():
    im = np.where(np.arange(100).reshape(10, 10) % 2, 0.8, 0.2)
    out = imadjust_plane(im)
    assert set(np.unique(out).tolist()) == {-1.0, 1.0}
    assert (imadjust_plane(np.full((5, 5), 0.4)) == 0.0).all()


# histogram equalization

def test_histeq_constant_image_unchanged():
    im = np.full((1, 8, 8), 0.3)
    assert np.array_equal(histeq(im), im)


def test_histeq_uniform_histogram_near_identity():
    ramp = (np.arange(256 * 16) // 16).reshape(64, 64)
    im = bytes_to_unit(ramp.astype(np.uint8))
    assert np.abs(histeq_plane(im) - im).max() <= 2 / 256


def test_histeq_uniformity_on_natural_images():
    data = pytest.importorskip("skimage.data")
    camera = histeq_plane(bytes_to_unit(data.camera()))
    counts, _ = np.histogram(camera, bins=64, range=(-1, 1))
    assert counts.max() <= 3 * counts.mean()
    coins = histeq_plane(bytes_to_unit(data.coins()))
    counts, _ = np.histogram(coins, bins=256, range=(-1, 1))
    assert counts.max() <= 3 * counts.mean()


def test_adapthisteq_single_tile_equals_histeq():
    im = np.random.default_rng(1).uniform(-1, 1, (12, 18))
    assert np.array_equal(adapthisteq_plane(im, 12, 18), histeq_plane(im))


def test_adapthisteq_constant_and_divisibility():
    im = np.full((1, 48, 48), -0.2)
    assert np.array_equal(adapthisteq(im), im)
    with pytest.raises(PreprocessError):
        adapthisteq_plane(np.zeros((10, 10)), 6, 6)


def test_adapthisteq_expands_local_contrast():
    rng = np.random.default_rng(2)
    blocks = (np.add.outer(np.arange(48) // 12, np.arange(48) // 12) % 2).astype(float)
    im = np.where(blocks == 1, 0.5, -0.5) + rng.uniform(-0.05, 0.05, (48, 48))
    glob = histeq_plane(im)
    local = adapthisteq_plane(im, 12, 12)
    for ty in range(4):
        for tx in range(4):
            sl = np.s_[ty * 12:(ty + 1) * 12, tx * 12:(tx + 1) * 12]
            assert local[sl].var() > glob[sl].var()


def test_adapthisteq_output_in_range():
    im = np.random.default_rng(3).uniform(-1, 1, (48, 48))
    out = adapthisteq_plane(im, 6, 6)
    assert out.min() >= -1 and out.max() <= 1


def test_adapthisteq_blending_is_continuous():
    # a smooth ramp stays free of jumps at tile boundaries
    ramp = np.add.outer(np.linspace(-0.9, 0.9, 48), np.linspace(-0.05, 0.05, 48))
    out = adapthisteq_plane(ramp, 12, 12)
    assert np.abs(np.diff(out, axis=0)).max() < 0.5
    assert np.abs(np.diff(out, axis=1)).max() < 0.5


# contrast normalization

def test_dog_kernel_zero_sum():
    assert abs(dog_kernel(5).sum()) < 1e-12
    with pytest.raises(PreprocessError):
        dog_kernel(4)


def test_conorm_constant_gives_mid_range():
    assert (conorm(np.full((1, 16, 16), 0.7)) == 0.0).all()


def naive_normalized_filter(plane, kernel):
    h, w = plane.shape
    r = kernel.shape[0] // 2
    out = np.zeros_like(plane)
    for y in range(h):
        for x in range(w):
            num = den = 0.0
            for u in range(-r, r + 1):
                for v in range(-r, r + 1):
                    if 0 <= y + u < h and 0 <= x + v < w:
                        num += kernel[u + r, v + r] * plane[y + u, x + v]
                        den += kernel[u + r, v + r]
            out[y, x] = num / den
    return out


def test_conorm_step_edge_matches_direct_oracle():
    from mcdnn.augment import gaussian_kernel
    plane = np.where(np.arange(16)[None, :] < 8, -1.0, 1.0) * np.ones((16, 1))
    resp = (naive_normalized_filter(plane, gaussian_kernel(2, 1.0))
            - naive_normalized_filter(plane, gaussian_kernel(2, 2.0)))
    out = conorm_plane(plane)
    assert np.allclose(out, resp / np.abs(resp).max(), atol=1e-12)
    # band-pass response: peaks flank the edge, flat areas beyond the window are silent
    peak_cols = np.unique(np.argwhere(np.abs(out) == np.abs(out).max())[:, 1])
    assert all(abs(c - 7.5) <= 2 for c in peak_cols)
    assert np.abs(out).max() == 1.0
    assert np.abs(out[:, :5]).max() < 1e-12 and np.abs(out[:, 11:]).max() < 1e-12


def test_conorm_rejects_even_size():
    with pytest.raises(PreprocessError):
        conorm_plane(np.zeros((8, 8)), 4)


# color

def test_white_and_gray_in_lab():
    white = rgb_to_lab(np.ones((3, 1, 1)))
    assert white[0, 0, 0] == pytest.approx(100.0, abs=1e-9)
    assert abs(white[1, 0, 0]) < 0.01 and abs(white[2, 0, 0]) < 0.01
    gray = rgb_to_lab(np.full((3, 4, 4), 0.37))
    assert np.abs(gray[1:]).max() < 1e-9


def test_lab_round_trip():
    rgb = np.random.default_rng(4).uniform(0, 1, (3, 50, 50))
    assert np.abs(lab_to_rgb(rgb_to_lab(rgb)) - rgb).max() < 1e-6


def test_lab_wrong_channels():
    with pytest.raises(PreprocessError):
        rgb_to_lab(np.zeros((1, 4, 4)))


def test_lightness_only_operation_keeps_ab_bit_exact():
    lab = rgb_to_lab(np.random.default_rng(5).uniform(0, 1, (3, 12, 12)))
    out = on_lightness(lab, histeq_plane)
    assert np.array_equal(out[1:], lab[1:])
    assert not np.array_equal(out[0], lab[0])


def test_color_intensity_ops_keep_shape_and_range():
    im = np.random.default_rng(6).uniform(-0.6, 0.6, (3, 48, 48))
    for op in (imadjust, histeq, adapthisteq):
        out = op(im)
        assert out.shape == im.shape and out.min() >= -1 and out.max() <= 1


# chains

def test_chain_parse_and_format():
    p = parse_chain("resize(40,48)+imadjust")
    assert str(p) == "resize(40,48)+imadjust"
    assert str(parse_chain("W14")) == "W14"
    assert parse_chain("adapthisteq").steps[0].args == (6, 6)
    assert parse_chain("conorm").steps[0].args == (5,)
    assert str(parse_chain(str(parse_chain("blur(1,0.75)+histeq")))) == "blur(1,0.75)+histeq"


@pytest.mark.parametrize("text", ["", "sharpen", "conorm(4)", "resize(40)", "W0", "pad(a,b)"])
def test_chain_parse_errors(text):
    with pytest.raises(ChainParseError):
        parse_chain(text)


def test_compose_rules():
    with pytest.raises(ChainParseError):
        compose([])
    im = np.random.default_rng(7).uniform(-1, 1, (1, 12, 12))
    step = Step("histeq")
    assert np.array_equal(compose([step])(im), step(im))
    assert np.array_equal(Preprocessor((Step("original"),))(im), im)


def test_preprocessors_preserve_extent_and_are_deterministic():
    im = np.random.default_rng(8).uniform(-1, 1, (1, 48, 48))
    for chain in ("original", "imadjust", "histeq", "adapthisteq", "conorm", "blur"):
        p = parse_chain(chain)
        a, b = p(im), p(im)
        assert a.shape == im.shape and np.array_equal(a, b)
