"""Random per-epoch image distortions.

Coordinates are ``(x, y) = (column, row)``. An :class:`AffineTransform`
maps *output* pixel coordinates to *source* coordinates, so resampling is
a gather: ``out[y, x] = src(M @ [x, y, 1])`` with bilinear interpolation.

The forward (source to output) geometry is: scale per axis, rotate, both
about the image center, then translate. Positive angles turn the image
clockwise on screen (rows grow downwards).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .tensor import Rng

EDGE = "edge"


class NonInvertibleTransformError(ValueError):
    pass


@dataclass(frozen=True)
class DistortionParams:
    max_translate: float = 0.0  # fraction of the image extent, per axis
    max_rotate: float = 0.0  # degrees
    max_scale: float = 0.0  # scale factor drawn from [1 - s, 1 + s], per axis
    elastic_sigma: float | None = None
    elastic_alpha: float = 0.0
    fill: float | str = -1.0  # background value or "edge"

    def __post_init__(self):
        for name in ("max_translate", "max_rotate", "max_scale", "elastic_alpha"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.max_scale >= 1:
            raise ValueError("max_scale must be < 1")
        if self.elastic_sigma is not None and self.elastic_sigma <= 0:
            raise ValueError("elastic_sigma must be > 0")
        if isinstance(self.fill, str) and self.fill != EDGE:
            raise ValueError(f"fill must be a number or {EDGE!r}")

    @property
    def is_identity(self) -> bool:
        return (self.max_translate == 0 and self.max_rotate == 0 and self.max_scale == 0
                and (self.elastic_sigma is None or self.elastic_alpha == 0))


NO_DISTORTION = DistortionParams()

# Preset bounds. The MNIST ones are a local default.
MNIST_DISTORTION = DistortionParams(max_translate=0.075, max_rotate=7.5, max_scale=0.075)
MNIST_ELASTIC = DistortionParams(max_translate=0.075, max_rotate=7.5, max_scale=0.075,
                                 elastic_sigma=6.0, elastic_alpha=36.0)
CIFAR10_DISTORTION = DistortionParams(max_translate=0.15, max_rotate=5.0, max_scale=0.15, fill=EDGE)
NORB_DISTORTION = DistortionParams(max_translate=0.15, max_rotate=15.0, max_scale=0.15, fill=EDGE)


@dataclass(frozen=True)
class AffineTransform:
    matrix: np.ndarray  # (2, 3) output -> source

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    @classmethod
    def from_params(cls, angle_deg: float, scale_x: float, scale_y: float,
                    shift_x: float, shift_y: float, height: int, width: int) -> "AffineTransform":
        th = np.deg2rad(angle_deg)
        c, s = np.cos(th), np.sin(th)
        fwd = np.array([[c, -s], [s, c]]) @ np.diag([scale_x, scale_y])
        det = fwd[0, 0] * fwd[1, 1] - fwd[0, 1] * fwd[1, 0]
        if det == 0:
            raise NonInvertibleTransformError("singular distortion")
        inv = np.array([[fwd[1, 1], -fwd[0, 1]], [-fwd[1, 0], fwd[0, 0]]]) / det
        center = np.array([(width - 1) / 2.0, (height - 1) / 2.0])
        # src = center + inv @ (out - center - shift)
        offset = center - inv @ (center + np.array([shift_x, shift_y]))
        return cls(np.hstack([inv, offset[:, None]]))

    @property
    def linear(self) -> np.ndarray:
        return self.matrix[:, :2]

    @property
    def determinant(self) -> float:
        a = self.matrix
        return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])

    def is_identity(self) -> bool:
        return np.array_equal(self.matrix, AffineTransform.identity().matrix)


def sample_params(rng: Rng, params: DistortionParams, height: int, width: int):
    """Draw ``(angle, scale_x, scale_y, shift_x, shift_y)``; always consumes five draws."""
    u = rng.random(5)
    r, s, t = params.max_rotate, params.max_scale, params.max_translate
    angle = r * (2 * u[0] - 1)
    sx = 1 + s * (2 * u[1] - 1)
    sy = 1 + s * (2 * u[2] - 1)
    tx = t * width * (2 * u[3] - 1)
    ty = t * height * (2 * u[4] - 1)
    return angle, sx, sy, tx, ty


def sample_affine(rng: Rng, params: DistortionParams, extent) -> AffineTransform:
    height, width = (extent, extent) if np.isscalar(extent) else extent
    return AffineTransform.from_params(*sample_params(rng, params, height, width), height, width)


def _resample(image, rows, cols, fill):
    """Bilinear gather of every map at fractional ``(rows, cols)``."""
    if isinstance(fill, str):
        mode, cval = "nearest", 0.0
    else:
        mode, cval = "grid-constant", float(fill)
    out = np.empty(image.shape)
    coords = np.array([rows, cols])
    for m in range(image.shape[0]):
        out[m] = ndimage.map_coordinates(image[m], coords, order=1, mode=mode, cval=cval)
    return out


def _grid(height, width):
    return np.mgrid[0:height, 0:width].astype(np.float64)


def apply_affine(image, t: AffineTransform, fill: float | str = -1.0) -> np.ndarray:
    """Warp every map of a ``(maps, h, w)`` image with the same transform."""
    image = np.asarray(image, dtype=np.float64)
    if t.determinant == 0:
        raise NonInvertibleTransformError("transform is not invertible")
    if t.is_identity():
        return image.copy()
    _, h, w = image.shape
    ys, xs = _grid(h, w)
    a = t.matrix
    src_x = a[0, 0] * xs + a[0, 1] * ys + a[0, 2]
    src_y = a[1, 0] * xs + a[1, 1] * ys + a[1, 2]
    return _resample(image, src_y, src_x, fill)


def displacement_field(rng: Rng, height: int, width: int, sigma: float, alpha: float):
    """Smoothed random ``(dy, dx)`` fields; consumes ``2 * h * w`` draws."""
    raw = rng.uniform(-1.0, 1.0, (2, height, width))
    dy = ndimage.gaussian_filter(raw[0], sigma, mode="constant") * alpha
    dx = ndimage.gaussian_filter(raw[1], sigma, mode="constant") * alpha
    return dy, dx


def elastic_distort(rng: Rng, image, sigma: float, alpha: float, fill: float | str = -1.0):
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    image = np.asarray(image, dtype=np.float64)
    _, h, w = image.shape
    dy, dx = displacement_field(rng, h, w, sigma, alpha)
    if alpha == 0:
        return image.copy()
    ys, xs = _grid(h, w)
    return _resample(image, ys + dy, xs + dx, fill)


def distort(rng: Rng, image, params: DistortionParams) -> np.ndarray:
    """One random affine (plus optional elastic) distortion, resampled once."""
    image = np.asarray(image, dtype=np.float64)
    _, h, w = image.shape
    t = AffineTransform.from_params(*sample_params(rng, params, h, w), h, w)
    ys, xs = _grid(h, w)
    if params.elastic_sigma is not None:
        dy, dx = displacement_field(rng, h, w, params.elastic_sigma, params.elastic_alpha)
        ys, xs = ys + dy, xs + dx
    if params.is_identity:
        return image.copy()
    a = t.matrix
    src_x = a[0, 0] * xs + a[0, 1] * ys + a[0, 2]
    src_y = a[1, 0] * xs + a[1, 1] * ys + a[1, 2]
    return _resample(image, src_y, src_x, params.fill)


def distort_all(rng: Rng, images, params: DistortionParams) -> np.ndarray:
    """Distort a stack of images in order, drawing from ``rng`` sequentially."""
    images = np.asarray(images, dtype=np.float64)
    if params.is_identity:
        return images.copy()
    return np.stack([distort(rng, im, params) for im in images])


def gaussian_kernel(radius: int, sigma: float) -> np.ndarray:
    if radius < 1 or sigma <= 0:
        raise ValueError("need radius >= 1 and sigma > 0")
    r = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2 * sigma**2))
    return g / g.sum()


def normalized_filter(plane, kernel) -> np.ndarray:
    """Correlate a 2-D plane with ``kernel``, renormalizing by the in-bounds kernel mass."""
    num = ndimage.correlate(plane, kernel, mode="constant", cval=0.0)
    den = ndimage.correlate(np.ones_like(plane), kernel, mode="constant", cval=0.0)
    return num / den


def gaussian_blur(image, radius: int = 1, sigma: float = 0.75) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    k = gaussian_kernel(radius, sigma)
    if image.ndim == 2:
        return normalized_filter(image, k)
    return np.stack([normalized_filter(m, k) for m in image])
