"""Seeded random affine augmentation for training sketches.

Coordinates are pixel centres with x to the right and y downwards.  A
transform is sampled as zoom, then shear, then rotation, then shift, all
about the image centre; :class:`AffineTransform` stores the inverse map
(output pixel -> source pixel) used for resampling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AugmentationLeak, InvalidParams, SingularTransform
from .imageproc import GrayImage


@dataclass(frozen=True)
class AugmentParams:
    """Random ranges for one drawing type.

    ``shear_range`` is a shear angle in radians.  ``zoom_range`` z draws a
    scale factor from [1 - z, 1 + z]; ``rescale`` is applied during
    preprocessing, not here.
    """

    rescale: float = 1.0 / 255
    rotation_range: float = 0.0
    zoom_range: float = 0.0
    width_shift_range: float = 0.0
    height_shift_range: float = 0.0
    shear_range: float = 0.0

    def validate(self) -> "AugmentParams":
        ranges = (self.rotation_range, self.zoom_range, self.width_shift_range,
                  self.height_shift_range, self.shear_range)
        if any(not math.isfinite(r) or r < 0 for r in ranges):
            raise InvalidParams(f"augmentation ranges must be finite and >= 0: {self}")
        if self.rotation_range > 180:
            raise InvalidParams("rotation_range must be <= 180 degrees")
        if self.zoom_range >= 1:
            raise InvalidParams("zoom_range must be < 1 (scale factor stays positive)")
        if self.shear_range >= math.pi / 2:
            raise InvalidParams("shear_range must be below pi/2 radians")
        if not self.rescale > 0:
            raise InvalidParams("rescale must be positive")
        return self


SPIRAL_PARAMS = AugmentParams(rotation_range=5, zoom_range=0.2, width_shift_range=0.1,
                              height_shift_range=0.1, shear_range=0.1)
WAVE_PARAMS = AugmentParams(rotation_range=10, zoom_range=0.2, width_shift_range=0.1,
                            height_shift_range=0.1, shear_range=0.1)
DEFAULT_PARAMS = {"spiral": SPIRAL_PARAMS, "wave": WAVE_PARAMS}


@dataclass(frozen=True)
class AffineTransform:
    """2x3 matrix mapping output pixel coordinates to source coordinates."""

    matrix: np.ndarray
    angle: float = 0.0
    zoom: float = 1.0
    shift_x: float = 0.0
    shift_y: float = 0.0
    shear: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (2, 3):
            raise SingularTransform(f"affine matrix must be 2x3, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    def validate(self) -> None:
        if not np.all(np.isfinite(self.matrix)):
            raise SingularTransform("affine matrix has non-finite entries")
        if abs(np.linalg.det(self.matrix[:, :2])) <= 1e-9:
            raise SingularTransform("affine linear part is not invertible")


def make_transform(width: int, height: int, angle: float = 0.0, zoom: float = 1.0,
                   shift_x: float = 0.0, shift_y: float = 0.0, shear: float = 0.0) -> AffineTransform:
    """Build the inverse map for ``shift . rotate . shear . zoom`` about the centre.

    ``angle`` is in degrees, ``shear`` in radians, shifts in pixels.
    """
    theta = math.radians(angle)
    c, s = math.cos(theta), math.sin(theta)
    rotate = np.array([[c, -s], [s, c]])
    shear_m = np.array([[1.0, -math.sin(shear)], [0.0, math.cos(shear)]])
    zoom_m = np.array([[zoom, 0.0], [0.0, zoom]])
    forward = rotate @ shear_m @ zoom_m
    if abs(np.linalg.det(forward)) <= 1e-9:
        raise SingularTransform("sampled transform is singular")
    inverse = np.linalg.inv(forward)
    if angle == 0 and shear == 0 and zoom == 1:
        inverse = np.eye(2)
    center = np.array([(width - 1) / 2.0, (height - 1) / 2.0])
    offset = center - inverse @ (center + np.array([shift_x, shift_y]))
    matrix = np.hstack([inverse, offset[:, None]])
    return AffineTransform(matrix, angle=angle, zoom=zoom, shift_x=shift_x,
                           shift_y=shift_y, shear=shear)


def sample_transform(params: AugmentParams, rng: np.random.Generator,
                     width: int, height: int) -> AffineTransform:
    params.validate()
    angle = rng.uniform(-params.rotation_range, params.rotation_range)
    zoom = rng.uniform(1 - params.zoom_range, 1 + params.zoom_range)
    shift_x = rng.uniform(-params.width_shift_range, params.width_shift_range) * width
    shift_y = rng.uniform(-params.height_shift_range, params.height_shift_range) * height
    shear = rng.uniform(-params.shear_range, params.shear_range)
    return make_transform(width, height, angle=angle, zoom=zoom, shift_x=shift_x,
                          shift_y=shift_y, shear=shear)


def apply_affine(img: GrayImage, t: AffineTransform, fill: int = 255) -> GrayImage:
    """Resample ``img`` through ``t`` with nearest-neighbour lookup."""
    t.validate()
    h, w = img.pixels.shape
    ys, xs = np.mgrid[0:h, 0:w]
    m = t.matrix
    src_x = m[0, 0] * xs + m[0, 1] * ys + m[0, 2]
    src_y = m[1, 0] * xs + m[1, 1] * ys + m[1, 2]
    # round half up, with a small guard against float noise like 1.9999999
    sx = np.floor(src_x + 0.5 + 1e-9).astype(np.int64)
    sy = np.floor(src_y + 0.5 + 1e-9).astype(np.int64)
    inside = (sx >= 0) & (sx < w) & (sy >= 0) & (sy < h)
    out = np.full((h, w), fill, dtype=np.uint8)
    out[inside] = img.pixels[sy[inside], sx[inside]]
    return GrayImage(out)


def item_rng(seed: int, item_index: int, copy_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, item_index, copy_index])


def augment_one(img: GrayImage, params: AugmentParams, seed: int, item_index: int,
                copy_index: int, fill: int = 255) -> GrayImage:
    rng = item_rng(seed, item_index, copy_index)
    t = sample_transform(params, rng, img.width, img.height)
    return apply_affine(img, t, fill=fill)


def expand_dataset(items, params: AugmentParams, copies_per_image: int = 9, seed: int = 0,
                   workers: int = 1, fill: int = 255):
    """Return originals plus ``copies_per_image`` augmented variants of each.

    Output order is item by item: the original, then its copies 1..K.  Every
    copy draws from its own generator keyed on (seed, item, copy), so results
    do not depend on ``workers``.
    """
    if copies_per_image < 0:
        raise InvalidParams("copies_per_image must be >= 0")
    params.validate()
    items = list(items)
    jobs = [(i, k) for i in range(len(items)) for k in range(1, copies_per_image + 1)]

    def run(job):
        i, k = job
        return augment_one(items[i][0], params, seed, i, k, fill=fill)

    if workers > 1 and jobs:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            augmented = list(pool.map(run, jobs))
    else:
        augmented = [run(j) for j in jobs]

    out = []
    pos = 0
    for img, label in items:
        out.append((img, label))
        for _ in range(copies_per_image):
            out.append((augmented[pos], label))
            pos += 1
    return out


def augment_split(split, params: AugmentParams, copies_per_image: int = 9, seed: int = 0,
                  workers: int = 1):
    """Augment a training split; anything else is refused."""
    if getattr(split, "split", None) != "training":
        raise AugmentationLeak(
            f"augmentation is only allowed on training data, got split {getattr(split, 'split', None)!r}")
    return expand_dataset(split.items, params, copies_per_image, seed=seed, workers=workers)


def write_augmented(items, out_dir, sources=None) -> str:
    """Write ``items`` as PNGs plus ``manifest.txt``.

    Each manifest line is ``path label source_index copy_index``.  ``sources``
    gives the (source, copy) pair per item (see :func:`expansion_sources`);
    without it every item is recorded as (index, 0).
    """
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    for n, (img, label) in enumerate(items):
        src, copy = sources[n] if sources is not None else (n, 0)
        name = f"img_{src:05d}_{copy:03d}.png"
        img.save_png(os.path.join(out_dir, name))
        lines.append(f"{name} {label} {src} {copy}")
    manifest = os.path.join(out_dir, "manifest.txt")
    with open(manifest, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
    return manifest


def expansion_sources(n_items: int, copies_per_image: int):
    """(source index, copy index) for each element of an expanded dataset."""
    return [(i, k) for i in range(n_items) for k in range(copies_per_image + 1)]
