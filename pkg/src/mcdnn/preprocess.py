"""Deterministic input preprocessors (the P blocks in front of each column).

Images are ``(maps, h, w)`` arrays in [-1, 1]. Intensity operations
(imadjust, histeq, adapthisteq) act on single-map images directly and on
RGB images through the L channel of CIE L*a*b* (sRGB primaries, D65);
conorm and blur act on every map independently.

A chain is written as ``+``-separated steps, for example
``resize(40,48)+imadjust`` or ``W14``. Known steps:

=====================  ==============================================
``original``           identity
``W<n>``/``width(n)``  width normalization to n pixels on a 29x29 canvas
``pad(h,w)``           center on a larger canvas
``resize(i,o)``        resize to i x i, centered on an o x o canvas
``imadjust``           linear stretch saturating 1% at each end
``histeq``             global histogram equalization (256 bins)
``adapthisteq(th,tw)`` tiled equalization with bilinear blending
``conorm(k)``          difference-of-Gaussians contrast normalization
``blur(r,s)``          (2r+1)x(2r+1) Gaussian blur with std s
=====================  ==============================================
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .augment import gaussian_blur, gaussian_kernel, normalized_filter

BINS = 256
FOREGROUND_THRESHOLD = 0.1
DOG_SIGMAS = (1.0, 2.0)
MNIST_CANVAS = 29


class PreprocessError(ValueError):
    pass


class BlankImageError(PreprocessError):
    pass


class ChainParseError(PreprocessError):
    pass


def _planes(image):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image[None]
    if image.ndim != 3:
        raise PreprocessError(f"expected (maps, h, w), got {image.shape}")
    return image


def _bilinear_resize(plane, out_h: int, out_w: int) -> np.ndarray:
    """Pixel-center aligned bilinear resize; an unchanged size is an exact copy."""
    h, w = plane.shape
    if (out_h, out_w) == (h, w):
        return plane.copy()
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    yy, xx = np.meshgrid(np.clip(ys, 0, h - 1), np.clip(xs, 0, w - 1), indexing="ij")
    return ndimage.map_coordinates(plane, [yy, xx], order=1, mode="nearest")


# geometry

def foreground_box(plane, threshold: float = FOREGROUND_THRESHOLD):
    """Bounding box ``(top, bottom, left, right)`` (inclusive) of pixels above the threshold.

    Intensity is ``(v + 1) / 2``; foreground is intensity > threshold * max intensity.
    """
    inten = (np.asarray(plane) + 1.0) / 2.0
    peak = inten.max()
    if peak <= 0:
        raise BlankImageError("image has no foreground")
    rows, cols = np.nonzero(inten > threshold * peak)
    if rows.size == 0:
        raise BlankImageError("image has no foreground")
    return rows.min(), rows.max(), cols.min(), cols.max()


def width_normalize(image, target_width: int, canvas: int = MNIST_CANVAS, fill: float = -1.0):
    """Rescale the foreground box horizontally to ``target_width`` and center it on the canvas.

    The box height is kept; only the width changes.
    """
    image = _planes(image)
    if image.shape[0] != 1:
        raise PreprocessError("width normalization expects a single-map image")
    if not 1 <= target_width <= canvas:
        raise PreprocessError(f"target width must lie in [1, {canvas}]")
    top, bottom, left, right = foreground_box(image[0])
    crop = image[0, top:bottom + 1, left:right + 1]
    h = min(crop.shape[0], canvas)
    scaled = _bilinear_resize(crop, h, target_width)
    out = np.full((1, canvas, canvas), fill)
    y0, x0 = (canvas - h) // 2, (canvas - target_width) // 2
    out[0, y0:y0 + h, x0:x0 + target_width] = scaled
    return out


def resize_center(image, inner: int, outer: int, fill: float = -1.0):
    image = _planes(image)
    if inner < 1 or outer < 1:
        raise PreprocessError("extents must be positive")
    if inner > outer:
        raise PreprocessError(f"inner extent {inner} exceeds outer extent {outer}")
    off = (outer - inner) // 2
    out = np.full((image.shape[0], outer, outer), fill)
    for m, plane in enumerate(image):
        out[m, off:off + inner, off:off + inner] = _bilinear_resize(plane, inner, inner)
    return out


def pad(image, height: int, width: int, fill: float = -1.0):
    image = _planes(image)
    maps, h, w = image.shape
    if height < h or width < w:
        raise PreprocessError(f"canvas {height}x{width} smaller than image {h}x{w}")
    top, left = (height - h) // 2, (width - w) // 2
    out = np.full((maps, height, width), fill)
    out[:, top:top + h, left:left + w] = image
    return out


# intensity operations on a single plane in [-1, 1]

def imadjust_plane(plane, tail: float = 0.01):
    """Linear stretch so that ``floor(tail * n)`` pixels saturate at each end.

    ``lo`` is the k-th smallest and ``hi`` the k-th largest pixel value with
    ``k = max(1, floor(tail * n))``; values at or beyond them clamp to -1 / +1.
    A constant plane maps to 0.
    """
    plane = np.asarray(plane, dtype=np.float64)
    flat = np.sort(plane, axis=None)
    k = max(1, int(np.floor(tail * flat.size)))
    lo, hi = flat[k - 1], flat[flat.size - k]
    if hi <= lo:
        return np.zeros_like(plane)
    return np.clip(-1.0 + 2.0 * (plane - lo) / (hi - lo), -1.0, 1.0)


def _bin_index(plane, bins: int = BINS):
    return np.clip(np.floor((plane + 1.0) / 2.0 * bins), 0, bins - 1).astype(np.int64)


def _equalize_lut(idx, bins: int = BINS):
    """Classic cdf mapping ``(cdf - cdf_min) / (n - cdf_min)`` as a per-bin table in [-1, 1].

    Returns None for a single-valued input (nothing to equalize).
    """
    counts = np.bincount(idx.ravel(), minlength=bins)
    cdf = np.cumsum(counts)
    cdf_min = cdf[counts.nonzero()[0][0]]
    n = cdf[-1]
    if n == cdf_min:
        return None
    # bins below this region's minimum (seen when another tile's table is applied) clamp to -1
    return 2.0 * np.maximum(cdf - cdf_min, 0) / (n - cdf_min) - 1.0


def histeq_plane(plane, bins: int = BINS):
    plane = np.asarray(plane, dtype=np.float64)
    idx = _bin_index(plane, bins)
    lut = _equalize_lut(idx, bins)
    if lut is None:
        return plane.copy()
    return lut[idx]


def adapthisteq_plane(plane, tile_h: int = 6, tile_w: int = 6, bins: int = BINS):
    """Per-tile equalization, blended bilinearly between neighbouring tile centers.

    No clip limit is applied. Tiles holding a single value map to themselves.
    """
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    if tile_h < 1 or tile_w < 1 or h % tile_h or w % tile_w:
        raise PreprocessError(f"tiles {tile_h}x{tile_w} do not divide {h}x{w}")
    ny, nx = h // tile_h, w // tile_w
    idx = _bin_index(plane, bins)
    # mapped[ty, tx] is the whole plane pushed through tile (ty, tx)'s table
    mapped = np.empty((ny, nx, h, w))
    for ty in range(ny):
        for tx in range(nx):
            lut = _equalize_lut(idx[ty * tile_h:(ty + 1) * tile_h, tx * tile_w:(tx + 1) * tile_w], bins)
            mapped[ty, tx] = plane if lut is None else lut[idx]
    if ny == nx == 1:
        return mapped[0, 0]
    # fractional tile coordinate of every pixel relative to tile centers
    fy = np.clip((np.arange(h) + 0.5) / tile_h - 0.5, 0, ny - 1)
    fx = np.clip((np.arange(w) + 0.5) / tile_w - 0.5, 0, nx - 1)
    y0 = np.minimum(np.floor(fy).astype(int), max(ny - 2, 0))
    x0 = np.minimum(np.floor(fx).astype(int), max(nx - 2, 0))
    y1, x1 = np.minimum(y0 + 1, ny - 1), np.minimum(x0 + 1, nx - 1)
    wy = (fy - y0)[:, None]
    wx = (fx - x0)[None, :]
    rr, cc = np.arange(h)[:, None], np.arange(w)[None, :]
    Y0, Y1 = y0[:, None], y1[:, None]
    X0, X1 = x0[None, :], x1[None, :]
    # lerp form keeps equal neighbours exact
    top = mapped[Y0, X0, rr, cc] + wx * (mapped[Y0, X1, rr, cc] - mapped[Y0, X0, rr, cc])
    bot = mapped[Y1, X0, rr, cc] + wx * (mapped[Y1, X1, rr, cc] - mapped[Y1, X0, rr, cc])
    return top + wy * (bot - top)


def dog_kernel(size: int = 5, sigmas=DOG_SIGMAS) -> np.ndarray:
    if size < 1 or size % 2 == 0:
        raise PreprocessError(f"filter size must be odd, got {size}")
    r = size // 2
    if r == 0:
        return np.zeros((1, 1))
    return gaussian_kernel(r, sigmas[0]) - gaussian_kernel(r, sigmas[1])


def conorm_plane(plane, size: int = 5, sigmas=DOG_SIGMAS):
    """Difference-of-Gaussians response scaled by its peak magnitude into [-1, 1].

    Each Gaussian is renormalized over in-bounds taps, so flat regions give
    exactly zero response up to the border.
    """
    if size < 1 or size % 2 == 0:
        raise PreprocessError(f"filter size must be odd, got {size}")
    plane = np.asarray(plane, dtype=np.float64)
    r = size // 2
    if r == 0:
        return np.zeros_like(plane)
    resp = (normalized_filter(plane, gaussian_kernel(r, sigmas[0]))
            - normalized_filter(plane, gaussian_kernel(r, sigmas[1])))
    peak = np.abs(resp).max()
    if peak <= 1e-12:
        return np.zeros_like(plane)
    return resp / peak


# color

_RGB_TO_XYZ = np.array([[0.4124564, 0.3575761, 0.1804375],
                        [0.2126729, 0.7151522, 0.0721750],
                        [0.0193339, 0.1191920, 0.9503041]])
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
# D65 white, as the image of sRGB (1, 1, 1) so white maps to a = b = 0 exactly
_WHITE = _RGB_TO_XYZ.sum(axis=1)
_EPS = 216 / 24389
_KAPPA = 24389 / 27


def _srgb_to_linear(c):
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c):
    c = np.maximum(c, 0.0)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1 / 2.4) - 0.055)


def rgb_to_lab(image):
    """``(3, h, w)`` sRGB in [0, 1] to CIE L*a*b* planes ``(L, a, b)``."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise PreprocessError(f"expected a 3-channel image, got {image.shape}")
    lin = _srgb_to_linear(image)
    xyz = np.tensordot(_RGB_TO_XYZ, lin, axes=1) / _WHITE[:, None, None]
    f = np.where(xyz > _EPS, np.cbrt(xyz), (_KAPPA * xyz + 16) / 116)
    return np.stack([116 * f[1] - 16, 500 * (f[0] - f[1]), 200 * (f[1] - f[2])])


def lab_to_rgb(lab):
    lab = np.asarray(lab, dtype=np.float64)
    if lab.ndim != 3 or lab.shape[0] != 3:
        raise PreprocessError(f"expected 3 Lab planes, got {lab.shape}")
    fy = (lab[0] + 16) / 116
    fx = fy + lab[1] / 500
    fz = fy - lab[2] / 200
    f = np.stack([fx, fy, fz])
    xyz = np.where(f**3 > _EPS, f**3, (116 * f - 16) / _KAPPA)
    xyz[1] = np.where(lab[0] > _KAPPA * _EPS, fy**3, lab[0] / _KAPPA)
    lin = np.tensordot(_XYZ_TO_RGB, xyz * _WHITE[:, None, None], axes=1)
    return _linear_to_srgb(lin)


def on_lightness(lab, op):
    """Apply a [-1, 1] plane operation to L only; a and b pass through untouched."""
    out = lab.copy()
    out[0] = (op(lab[0] / 50.0 - 1.0) + 1.0) * 50.0
    return out


def intensity_op(image, op):
    image = _planes(image)
    if image.shape[0] == 1:
        return op(image[0])[None]
    if image.shape[0] == 3:
        lab = rgb_to_lab((image + 1.0) / 2.0)
        rgb = lab_to_rgb(on_lightness(lab, op))
        return np.clip(rgb, 0.0, 1.0) * 2.0 - 1.0
    raise PreprocessError(f"intensity operations need 1 or 3 maps, got {image.shape[0]}")


def imadjust(image, tail: float = 0.01):
    return intensity_op(image, lambda p: imadjust_plane(p, tail))


def histeq(image, bins: int = BINS):
    return intensity_op(image, lambda p: histeq_plane(p, bins))


def adapthisteq(image, tile_h: int = 6, tile_w: int = 6):
    return intensity_op(image, lambda p: adapthisteq_plane(p, tile_h, tile_w))


def conorm(image, filter_size: int = 5):
    return np.stack([conorm_plane(p, filter_size) for p in _planes(image)])


# chains

@dataclass(frozen=True)
class Step:
    kind: str
    args: tuple = ()

    def __call__(self, image):
        k, a = self.kind, self.args
        if k == "original":
            return _planes(image).copy()
        if k == "width":
            return width_normalize(image, *a)
        if k == "pad":
            return pad(image, *a)
        if k == "resize":
            return resize_center(image, *a)
        if k == "imadjust":
            return imadjust(image)
        if k == "histeq":
            return histeq(image)
        if k == "adapthisteq":
            return adapthisteq(image, *a)
        if k == "conorm":
            return conorm(image, *a)
        if k == "blur":
            return gaussian_blur(_planes(image), *a)
        raise ChainParseError(f"unknown preprocessor {k!r}")

    def __str__(self):
        if self.kind == "width" and len(self.args) == 1:
            return f"W{self.args[0]}"
        if not self.args:
            return self.kind
        return f"{self.kind}({','.join(_fmt(v) for v in self.args)})"


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


@dataclass(frozen=True)
class Preprocessor:
    steps: tuple

    def __post_init__(self):
        if not self.steps:
            raise ChainParseError("a preprocessor chain needs at least one step")

    def __call__(self, image):
        for step in self.steps:
            image = step(image)
        return image

    def __str__(self):
        return "+".join(str(s) for s in self.steps)

    def apply_all(self, images) -> np.ndarray:
        return np.stack([self(im) for im in images])


# name -> (argument types, default arguments)
_STEPS = {
    "original": ((), ()),
    "width": ((int, int), None),
    "pad": ((int, int), None),
    "resize": ((int, int), None),
    "imadjust": ((), ()),
    "histeq": ((), ()),
    "adapthisteq": ((int, int), (6, 6)),
    "conorm": ((int,), (5,)),
    "blur": ((int, float), (1, 0.75)),
}
_STEP_RE = re.compile(r"^([a-z]+)(?:\(([^)]*)\))?$")
_WIDTH_RE = re.compile(r"^[Ww](\d+)$")


def parse_step(text: str) -> Step:
    text = text.strip()
    if m := _WIDTH_RE.match(text):
        if int(m.group(1)) < 1:
            raise ChainParseError("width target must be >= 1")
        return Step("width", (int(m.group(1)),))
    m = _STEP_RE.match(text.lower())
    if not m or m.group(1) not in _STEPS:
        raise ChainParseError(f"unknown preprocessor step {text!r}")
    name, raw = m.group(1), m.group(2)
    types, defaults = _STEPS[name]
    if raw is None or raw.strip() == "":
        if defaults is None:
            raise ChainParseError(f"{name} needs arguments")
        return Step(name, defaults)
    parts = [p.strip() for p in raw.split(",")]
    need = 1 if name == "width" else len(types)
    if not need <= len(parts) <= len(types):
        raise ChainParseError(f"{name} takes {len(types)} arguments, got {len(parts)}")
    try:
        args = tuple(t(p) for t, p in zip(types, parts))
    except ValueError as e:
        raise ChainParseError(f"bad argument in {text!r}: {e}") from None
    if name == "conorm" and args[0] % 2 == 0:
        raise ChainParseError(f"conorm filter size must be odd, got {args[0]}")
    if name == "width" and args[0] < 1:
        raise ChainParseError("width target must be >= 1")
    return Step(name, args)


def parse_chain(text: str) -> Preprocessor:
    if not text or not text.strip():
        raise ChainParseError("empty preprocessor chain")
    return Preprocessor(tuple(parse_step(t) for t in text.split("+")))


def compose(steps) -> Preprocessor:
    return Preprocessor(tuple(steps))
