"""Dataset containers, loaders and writers.

Pixels are stored as float64 in [-1, 1]; an 8-bit value ``v`` becomes
``2 * (v / 255) - 1``.

Supported formats:

* IDX (MNIST): big-endian headers, magic 2051 for images, 2049 for labels
* CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes
* binary PGM/PPM (P5/P6, maxval 255), one subdirectory per class
* MCDS1, the derived-dataset container written by ``preprocess``::

      b"MCDS1" | class_count count maps h w   (uint32 little-endian)
               | count*maps*h*w float64 LE   | count labels (uint32 LE)
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .tensor import Rng

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049
CIFAR_RECORD = 1 + 3 * 32 * 32
CIFAR_CLASSES = 10
MCDS_MAGIC = b"MCDS1"


class DatasetError(Exception):
    pass


class WrongMagicError(DatasetError):
    pass


class CountMismatchError(DatasetError):
    pass


class TruncatedError(DatasetError):
    pass


class BadLabelError(DatasetError):
    pass


@dataclass
class Dataset:
    images: np.ndarray  # (n, maps, h, w)
    labels: np.ndarray  # (n,) int64
    class_count: int
    name: str = ""

    def __post_init__(self):
        self.images = np.ascontiguousarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise DatasetError(f"images must be (n, maps, h, w), got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise CountMismatchError(f"{len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise BadLabelError(f"labels must lie in [0, {self.class_count})")

    def __len__(self):
        return len(self.labels)

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, index, name: str | None = None) -> "Dataset":
        index = np.asarray(index)
        return replace(self, images=self.images[index], labels=self.labels[index],
                       name=self.name if name is None else name)


def bytes_to_unit(raw) -> np.ndarray:
    return 2.0 * (np.asarray(raw, dtype=np.float64) / 255.0) - 1.0


def unit_to_bytes(x) -> np.ndarray:
    return np.clip(np.rint((np.asarray(x) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def _read_idx(path, magic: int, ndims: int):
    data = Path(path).read_bytes()
    header = 4 * (1 + ndims)
    if len(data) < header:
        raise TruncatedError(f"{path}: header truncated at byte {len(data)}")
    found = struct.unpack(">I", data[:4])[0]
    if found != magic:
        raise WrongMagicError(f"{path}: magic {found}, expected {magic}")
    dims = struct.unpack(f">{ndims}I", data[4:header])
    need = header + int(np.prod(dims))
    if len(data) < need:
        raise TruncatedError(f"{path}: payload truncated at byte {len(data)}, need {need}")
    if len(data) > need:
        raise DatasetError(f"{path}: {len(data) - need} trailing bytes")
    return dims, np.frombuffer(data, dtype=np.uint8, offset=header)


def load_idx(images_path, labels_path, class_count: int = 10, name: str = "idx") -> Dataset:
    (count, rows, cols), pixels = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    (nlabels,), labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if count != nlabels:
        raise CountMismatchError(f"{count} images but {nlabels} labels")
    if nlabels and labels.max() >= class_count:
        raise BadLabelError(f"{labels_path}: label {labels.max()} >= {class_count}")
    images = bytes_to_unit(pixels).reshape(count, 1, rows, cols)
    return Dataset(images, labels.astype(np.int64), class_count, name)


def write_idx(images_path, labels_path, ds: Dataset) -> None:
    n, maps, h, w = ds.images.shape
    if maps != 1:
        raise DatasetError("IDX images hold a single map")
    Path(images_path).write_bytes(struct.pack(">4I", IDX_IMAGES_MAGIC, n, h, w)
                                  + unit_to_bytes(ds.images).tobytes())
    Path(labels_path).write_bytes(struct.pack(">2I", IDX_LABELS_MAGIC, n)
                                  + ds.labels.astype(np.uint8).tobytes())


def load_cifar10(paths, name: str = "cifar10") -> Dataset:
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    images, labels = [], []
    for path in paths:
        data = Path(path).read_bytes()
        whole = len(data) - len(data) % CIFAR_RECORD
        if whole != len(data):
            raise TruncatedError(f"{path}: length {len(data)} is not a multiple of {CIFAR_RECORD}; "
                                 f"partial record starts at byte offset {whole}")
        recs = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        bad = np.flatnonzero(recs[:, 0] >= CIFAR_CLASSES)
        if bad.size:
            raise BadLabelError(f"{path}: label {recs[bad[0], 0]} at byte offset {bad[0] * CIFAR_RECORD}")
        labels.append(recs[:, 0].astype(np.int64))
        images.append(bytes_to_unit(recs[:, 1:]).reshape(-1, 3, 32, 32))
    return Dataset(np.concatenate(images), np.concatenate(labels), CIFAR_CLASSES, name)


def write_cifar10(path, ds: Dataset) -> None:
    if ds.image_shape != (3, 32, 32):
        raise DatasetError(f"CIFAR-10 records are 3x32x32, got {ds.image_shape}")
    recs = np.empty((len(ds), CIFAR_RECORD), dtype=np.uint8)
    recs[:, 0] = ds.labels
    recs[:, 1:] = unit_to_bytes(ds.images).reshape(len(ds), -1)
    Path(path).write_bytes(recs.tobytes())


def read_pnm(path) -> np.ndarray:
    """Read a binary P5/P6 file with maxval 255 into a (maps, h, w) array in [-1, 1]."""
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TruncatedError(f"{path}: header truncated")
        fields.append(data[start:pos])
    pos += 1
    kind = fields[0]
    if kind not in (b"P5", b"P6"):
        raise WrongMagicError(f"{path}: unsupported magic {kind!r}")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise DatasetError(f"{path}: maxval {maxval} unsupported")
    maps = 1 if kind == b"P5" else 3
    need = w * h * maps
    if len(data) - pos < need:
        raise TruncatedError(f"{path}: pixel data truncated at byte {len(data)}")
    px = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos).reshape(h, w, maps)
    return bytes_to_unit(px.transpose(2, 0, 1))


def write_pnm(path, image) -> None:
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[None]
    maps, h, w = image.shape
    if maps not in (1, 3):
        raise DatasetError(f"portable maps hold 1 or 3 channels, got {maps}")
    kind = b"P5" if maps == 1 else b"P6"
    Path(path).write_bytes(kind + b"\n%d %d\n255\n" % (w, h)
                           + unit_to_bytes(image).transpose(1, 2, 0).tobytes())


def load_ppm_dir(root, name: str | None = None) -> Dataset:
    """Load ``root/<class>/*.pgm|*.ppm``; classes are sorted subdirectory names."""
    root = Path(root)
    classes = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not classes:
        raise DatasetError(f"{root}: no class subdirectories")
    images, labels = [], []
    for label, cls in enumerate(classes):
        for f in sorted((root / cls).iterdir()):
            if f.suffix.lower() in (".pgm", ".ppm", ".pnm"):
                images.append(read_pnm(f))
                labels.append(label)
    if not images:
        raise DatasetError(f"{root}: no images found")
    shapes = {im.shape for im in images}
    if len(shapes) > 1:
        raise DatasetError(f"{root}: mixed image shapes {sorted(shapes)}")
    return Dataset(np.stack(images), np.array(labels), len(classes), name or root.name)


def save_mcds(path, ds: Dataset) -> None:
    n, maps, h, w = ds.images.shape
    with open(path, "wb") as f:
        f.write(MCDS_MAGIC)
        f.write(struct.pack("<5I", ds.class_count, n, maps, h, w))
        f.write(ds.images.astype("<f8").tobytes())
        f.write(ds.labels.astype("<u4").tobytes())


def load_mcds(path, name: str | None = None) -> Dataset:
    data = Path(path).read_bytes()
    head = len(MCDS_MAGIC) + 20
    if len(data) < head:
        raise TruncatedError(f"{path}: header truncated at byte {len(data)}")
    if data[:5] != MCDS_MAGIC:
        raise WrongMagicError(f"{path}: magic {data[:5]!r}, expected {MCDS_MAGIC!r}")
    class_count, n, maps, h, w = struct.unpack("<5I", data[5:head])
    npx = n * maps * h * w
    need = head + 8 * npx + 4 * n
    if len(data) < need:
        raise TruncatedError(f"{path}: payload truncated at byte {len(data)}, need {need}")
    if len(data) > need:
        raise DatasetError(f"{path}: {len(data) - need} trailing bytes")
    images = np.frombuffer(data, dtype="<f8", count=npx, offset=head).reshape(n, maps, h, w)
    labels = np.frombuffer(data, dtype="<u4", count=n, offset=head + 8 * npx)
    if n and labels.max() >= class_count:
        raise BadLabelError(f"{path}: label {labels.max()} >= {class_count}")
    return Dataset(images.astype(np.float64), labels.astype(np.int64), class_count,
                   name or Path(path).stem)


def load_dataset(path, class_count: int | None = None) -> Dataset:
    """Load by path shape: ``images,labels`` IDX pair, CIFAR ``.bin`` list, MCDS file or directory."""
    path = str(path)
    if "," in path:
        parts = [p.strip() for p in path.split(",")]
        if all(p.endswith(".bin") for p in parts):
            return load_cifar10(parts)
        if len(parts) != 2:
            raise DatasetError(f"expected 'images,labels' IDX pair, got {path!r}")
        return load_idx(parts[0], parts[1], class_count or 10, Path(parts[0]).stem)
    p = Path(path)
    if p.is_dir():
        return load_ppm_dir(p)
    if p.suffix == ".bin":
        return load_cifar10([p])
    if not p.exists():
        raise DatasetError(f"{path}: no such file")
    return load_mcds(p)


def pad_canvas(ds: Dataset, target_h: int, target_w: int, fill: float = -1.0) -> Dataset:
    """Center every image on a ``target_h x target_w`` canvas, offsets ``floor((target - src) / 2)``."""
    n, maps, h, w = ds.images.shape
    if target_h < h or target_w < w:
        raise DatasetError(f"canvas {target_h}x{target_w} smaller than images {h}x{w}")
    top, left = (target_h - h) // 2, (target_w - w) // 2
    out = np.full((n, maps, target_h, target_w), fill)
    out[:, :, top:top + h, left:left + w] = ds.images
    return replace(ds, images=out)


SHAPE_NAMES = ("rectangle", "disk", "cross", "diagonal", "ring", "hbar", "triangle", "vstripes")


def _render(kind: int, extent: int, cy: float, cx: float, r: float) -> np.ndarray:
    y, x = np.mgrid[0:extent, 0:extent].astype(np.float64)
    dy, dx = y - cy, x - cx
    if kind == 0:
        on = (np.abs(dy) <= 0.6 * r) & (np.abs(dx) <= r)
    elif kind == 1:
        on = dy**2 + dx**2 <= r**2
    elif kind == 2:
        t = max(1.0, 0.3 * r)
        on = ((np.abs(dy) <= t) & (np.abs(dx) <= r)) | ((np.abs(dx) <= t) & (np.abs(dy) <= r))
    elif kind == 3:
        on = (np.mod(dx + dy, 6.0) < 3.0) & (np.abs(dy) <= r) & (np.abs(dx) <= r)
    elif kind == 4:
        d2 = dy**2 + dx**2
        on = (d2 <= r**2) & (d2 >= (0.55 * r) ** 2)
    elif kind == 5:
        on = (np.abs(dy) <= max(1.0, 0.25 * r)) & (np.abs(dx) <= r)
    elif kind == 6:
        on = (dy <= r * 0.8) & (dy >= -r) & (np.abs(dx) <= (dy + r) * 0.55)
    else:
        on = (np.mod(dx, 4.0) < 2.0) & (np.abs(dy) <= r) & (np.abs(dx) <= r)
    return np.where(on, 1.0, -1.0)


def synthetic_shapes(rng: Rng, n: int, class_count: int, extent: int, name: str = "shapes") -> Dataset:
    """Balanced set of jittered shapes on a dark background, one shape type per class.

    Class of sample ``i`` is ``i % class_count``.
    """
    if not 2 <= class_count <= len(SHAPE_NAMES):
        raise ValueError(f"class_count must lie in [2, {len(SHAPE_NAMES)}]")
    if n < class_count:
        raise ValueError("need at least one sample per class")
    if extent < 8:
        raise ValueError("extent must be at least 8")
    labels = np.arange(n) % class_count
    images = np.empty((n, 1, extent, extent))
    for i, lab in enumerate(labels):
        r = extent * rng.uniform(0.22, 0.32)
        jitter = extent * 0.1
        cy = (extent - 1) / 2 + rng.uniform(-jitter, jitter)
        cx = (extent - 1) / 2 + rng.uniform(-jitter, jitter)
        images[i, 0] = _render(int(lab), extent, cy, cx, r)
    return Dataset(images, labels, class_count, name)
