"""Dataset ingestion and synthetic sketch generation.

On-disk layout::

    root/{spiral,wave}/{training,testing}/{healthy,parkinson}/*.png

Labels are 0 for healthy and 1 for parkinson.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (DataError, EmptyClass, InvalidParams, MissingDirectory, UnreadableImage)
from .imageproc import GrayImage, binarize_and_resize, read_image

DRAWING_TYPES = ("spiral", "wave")
SPLITS = ("training", "testing")
CLASS_DIRS = ("healthy", "parkinson")
IMAGE_EXTS = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class ManifestItem:
    path: str
    label: int
    subject: int


@dataclass
class DatasetManifest:
    drawing_type: str
    split: str
    items: list = field(default_factory=list)

    @property
    def class_counts(self) -> dict:
        counts = {c: 0 for c in range(len(CLASS_DIRS))}
        for it in self.items:
            counts[it.label] += 1
        return counts

    def __len__(self):
        return len(self.items)


@dataclass
class SplitData:
    """Decoded images of one split; ``split`` guards augmentation."""

    split: str
    items: list  # (GrayImage, label)
    subjects: list = field(default_factory=list)

    @property
    def labels(self) -> np.ndarray:
        return np.array([lbl for _, lbl in self.items], dtype=np.int64)

    @property
    def images(self) -> list:
        return [img for img, _ in self.items]


def _check_type(drawing_type):
    if drawing_type not in DRAWING_TYPES:
        raise InvalidParams(f"drawing type must be one of {DRAWING_TYPES}, got {drawing_type!r}")


def scan_split(root, drawing_type: str, split: str) -> DatasetManifest:
    _check_type(drawing_type)
    manifest = DatasetManifest(drawing_type, split)
    for label, cls in enumerate(CLASS_DIRS):
        d = os.path.join(root, drawing_type, split, cls)
        if not os.path.isdir(d):
            raise MissingDirectory(f"missing directory {d}")
        files = sorted(f for f in os.listdir(d) if f.lower().endswith(IMAGE_EXTS))
        if not files:
            raise EmptyClass(f"no images in {d}")
        for rank, f in enumerate(files):
            manifest.items.append(ManifestItem(os.path.join(d, f), label, rank))
    return manifest


def ingest_dataset(root, drawing_type: str):
    """Scan both splits; returns ``(train manifest, test manifest)``."""
    return (scan_split(root, drawing_type, "training"),
            scan_split(root, drawing_type, "testing"))


def load_split(manifest: DatasetManifest, size: int) -> SplitData:
    """Decode, binarize and resize every image of a manifest."""
    items = []
    for it in manifest.items:
        try:
            img = read_image(it.path)
        except (DataError, OSError) as exc:
            raise UnreadableImage(f"{it.path}: {exc}") from exc
        items.append((binarize_and_resize(img, size), it.label))
    return SplitData(manifest.split, items, [it.subject for it in manifest.items])


def write_split(root, drawing_type: str, split: str, items) -> list:
    """Write (GrayImage, label) pairs into the standard layout."""
    _check_type(drawing_type)
    counters = {0: 0, 1: 0}
    paths = []
    for img, label in items:
        d = os.path.join(root, drawing_type, split, CLASS_DIRS[label])
        os.makedirs(d, exist_ok=True)
        p = os.path.join(d, f"{CLASS_DIRS[label]}_{counters[label]:04d}.png")
        counters[label] += 1
        img.save_png(p)
        paths.append(p)
    return paths


# -- synthetic sketches --------------------------------------------------------
@dataclass(frozen=True)
class SynthStyle:
    size: int = 64
    spiral_turns: float = 3.0
    wave_cycles: float = 4.0
    stroke_width: float = 2.0
    ink: int = 30
    paper: int = 235
    noise: float = 6.0


def _tremor(rng, u: np.ndarray, amplitude: float) -> np.ndarray:
    """High-frequency displacement along curve parameter u in [0, 1]."""
    f1, f2 = rng.uniform(35, 55), rng.uniform(70, 100)
    p1, p2 = rng.uniform(0, 2 * math.pi, size=2)
    jitter = rng.normal(0.0, 1.0, size=u.size)
    kernel = np.ones(9) / 9
    jitter = np.convolve(jitter, kernel, mode="same") * 3.0
    wave = 0.6 * np.sin(2 * math.pi * f1 * u + p1) + 0.4 * np.sin(2 * math.pi * f2 * u + p2)
    return amplitude * (0.7 * wave + 0.3 * jitter)


def _curve(drawing_type, rng, amplitude, style):
    s = style.size
    cx = s / 2 + rng.uniform(-2, 2)
    cy = s / 2 + rng.uniform(-2, 2)
    n = 48 * s
    u = np.linspace(0.0, 1.0, n)
    tremor = _tremor(rng, u, amplitude)
    if drawing_type == "spiral":
        r_max = 0.42 * s * rng.uniform(0.9, 1.0)
        theta = u * 2 * math.pi * style.spiral_turns
        phase = rng.uniform(0, 2 * math.pi)
        r = r_max * u + tremor  # r = a * theta with a = r_max / theta_max
        x = cx + r * np.cos(theta + phase)
        y = cy + r * np.sin(theta + phase)
    else:
        margin = 0.08 * s
        height = 0.22 * s * rng.uniform(0.9, 1.0)
        phase = rng.uniform(0, 2 * math.pi)
        x = margin + u * (s - 2 * margin) + (cx - s / 2)
        y = cy + height * np.sin(2 * math.pi * style.wave_cycles * u + phase) + tremor
    wobble = 1.0 + (0.25 * min(amplitude, 4.0) / 3.0) * np.sin(
        2 * math.pi * rng.uniform(8, 14) * u + rng.uniform(0, 2 * math.pi))
    width = style.stroke_width * wobble
    return x, y, width


def render_sketch(drawing_type: str, rng: np.random.Generator, tremor_amplitude: float = 0.0,
                  style: SynthStyle = SynthStyle()) -> GrayImage:
    """Render one dark-on-white sketch; amplitude 0 gives a clean curve."""
    _check_type(drawing_type)
    s = style.size
    x, y, width = _curve(drawing_type, rng, tremor_amplitude, style)
    ink = np.zeros((s, s), dtype=bool)
    reach = int(math.ceil(width.max() / 2)) + 1
    offs = np.arange(-reach, reach + 1)
    oy, ox = np.meshgrid(offs, offs, indexing="ij")
    oy, ox = oy.ravel(), ox.ravel()
    px = np.floor(x)[:, None] + ox[None, :]
    py = np.floor(y)[:, None] + oy[None, :]
    d2 = (px + 0.5 - x[:, None]) ** 2 + (py + 0.5 - y[:, None]) ** 2
    hit = d2 <= (width[:, None] / 2) ** 2
    hit &= (px >= 0) & (px < s) & (py >= 0) & (py < s)
    ink[py[hit].astype(np.int64), px[hit].astype(np.int64)] = True
    noise = rng.normal(0.0, style.noise, size=(s, s))
    pixels = np.where(ink, style.ink, style.paper) + noise
    return GrayImage(np.clip(np.round(pixels), 0, 255).astype(np.uint8))


def generate_synthetic_dataset(n_per_class: int, drawing_type: str, tremor_amplitude: float,
                               seed: int, style: SynthStyle = SynthStyle(), offset: int = 0):
    """``n_per_class`` healthy then ``n_per_class`` parkinson sketches.

    Image i of class c uses a generator keyed on (seed, type, c, offset + i),
    so disjoint ``offset`` ranges give disjoint, reproducible splits.
    """
    if n_per_class < 1:
        raise InvalidParams("n_per_class must be >= 1")
    if not tremor_amplitude >= 0:
        raise InvalidParams("tremor_amplitude must be >= 0")
    _check_type(drawing_type)
    code = DRAWING_TYPES.index(drawing_type)
    out = []
    for label in (0, 1):
        amp = tremor_amplitude if label == 1 else 0.0
        for i in range(n_per_class):
            rng = np.random.default_rng([seed, code, label, offset + i])
            out.append((render_sketch(drawing_type, rng, amp, style), label))
    return out

