"""Sketch image decoding and preprocessing.

The preprocessing pipeline is fixed as decode -> Otsu binarization ->
nearest-neighbour resize -> rescale to [0, 1].  Resizing after binarization
with nearest sampling keeps the image strictly two-valued.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import EmptyImage, MalformedFile, UnsupportedFormat, ZeroDimension
from .tensor import Tensor

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
JPEG_MAGIC = b"\xff\xd8\xff"


@dataclass(eq=False)
class GrayImage:
    """8-bit single-channel image; ``pixels`` is a (height, width) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D pixel grid, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("pixel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        self.pixels = np.ascontiguousarray(arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="L").save(buf, format="PNG")
        return buf.getvalue()

    def save_png(self, path) -> None:
        Image.fromarray(self.pixels, mode="L").save(path, format="PNG")


def luma(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma ``0.299R + 0.587G + 0.114B`` rounded half-up, in integer math."""
    rgb = rgb.astype(np.int64)
    y = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000
    return y.astype(np.uint8)


def decode_image(data: bytes) -> GrayImage:
    """Decode PNG (or JPEG) bytes into a grayscale image."""
    if data.startswith(PNG_MAGIC):
        fmt = "PNG"
    elif data.startswith(JPEG_MAGIC):
        fmt = "JPEG"
    else:
        if len(data) < 8 and PNG_MAGIC.startswith(data):
            raise MalformedFile("truncated PNG signature")
        raise UnsupportedFormat("only PNG and JPEG input is supported")
    try:
        with Image.open(io.BytesIO(data), formats=[fmt]) as im:
            im.load()
            if im.mode in ("RGBA", "LA", "PA") or (im.mode == "P" and "transparency" in im.info):
                # composite onto white paper
                rgba = im.convert("RGBA")
                bg = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
                im = Image.alpha_composite(bg, rgba)
            if im.mode in ("L", "1"):
                arr = np.asarray(im.convert("L"))
            elif im.mode in ("I;16", "I;16B", "I"):
                arr = (np.asarray(im, dtype=np.int64) >> 8).clip(0, 255).astype(np.uint8)
            else:
                arr = luma(np.asarray(im.convert("RGB")))
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise MalformedFile(f"cannot decode {fmt} data: {exc}") from exc
    if arr.size == 0:
        raise MalformedFile("image has no pixels")
    return GrayImage(arr)


def read_image(path) -> GrayImage:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def between_class_variance(hist: np.ndarray) -> np.ndarray:
    """Between-class variance w0*w1*(mu0 - mu1)**2 for every threshold t.

    Class 0 holds intensities <= t.  Counts and moments are accumulated in
    integers so thresholds separating identical partitions score identically.
    """
    hist = np.asarray(hist, dtype=np.int64)
    levels = np.arange(hist.size, dtype=np.int64)
    total = int(hist.sum())
    n0 = np.cumsum(hist)
    s0 = np.cumsum(hist * levels)
    n1 = total - n0
    s1 = s0[-1] - s0
    var = np.zeros(hist.size, dtype=np.float64)
    ok = (n0 > 0) & (n1 > 0)
    w0 = n0[ok] / total
    w1 = n1[ok] / total
    mu0 = s0[ok] / n0[ok]
    mu1 = s1[ok] / n1[ok]
    var[ok] = w0 * w1 * (mu0 - mu1) ** 2
    return var


def otsu_threshold(img: GrayImage) -> tuple[int, GrayImage]:
    """Otsu threshold and the binarized image (<= t -> 0, > t -> 255).

    Ties between thresholds resolve to the smallest one.
    """
    if img.pixels.size == 0:
        raise EmptyImage("cannot threshold an empty image")
    hist = np.bincount(img.pixels.ravel(), minlength=256)
    t = int(np.argmax(between_class_variance(hist)))
    binary = np.where(img.pixels > t, 255, 0).astype(np.uint8)
    return t, GrayImage(binary)


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def resize(img: GrayImage, out_w: int, out_h: int, method: str = "nearest") -> GrayImage:
    if out_w < 1 or out_h < 1:
        raise ZeroDimension(f"requested size {out_w}x{out_h}")
    src_h, src_w = img.pixels.shape
    if (src_w, src_h) == (out_w, out_h):
        return GrayImage(img.pixels.copy())
    if method == "nearest":
        # floor((i + 0.5) * src / dst) evaluated exactly in integers
        rows = np.minimum(((2 * np.arange(out_h) + 1) * src_h) // (2 * out_h), src_h - 1)
        cols = np.minimum(((2 * np.arange(out_w) + 1) * src_w) // (2 * out_w), src_w - 1)
        return GrayImage(img.pixels[np.ix_(rows, cols)])
    if method == "bilinear":
        src = img.pixels.astype(np.float64)

        def axis_coords(n_out, n_src):
            x = (np.arange(n_out) + 0.5) * (n_src / n_out) - 0.5
            x = np.clip(x, 0, n_src - 1)
            x0 = np.floor(x).astype(np.int64)
            x1 = np.minimum(x0 + 1, n_src - 1)
            return x0, x1, x - x0

        y0, y1, fy = axis_coords(out_h, src_h)
        x0, x1, fx = axis_coords(out_w, src_w)
        fy = fy[:, None]
        fx = fx[None, :]
        top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
        bottom = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
        out = top * (1 - fy) + bottom * fy
        return GrayImage(np.clip(_round_half_up(out), 0, 255).astype(np.uint8))
    raise ValueError(f"unknown resize method {method!r}")


def rescale(img: GrayImage, dtype=np.float32) -> Tensor:
    """Map intensities to [0, 1]; result has shape (1, H, W)."""
    arr = img.pixels.astype(np.float64) / 255.0
    return Tensor(arr[None, :, :].astype(dtype))


def binarize_and_resize(img: GrayImage, size: int) -> GrayImage:
    _, binary = otsu_threshold(img)
    return resize(binary, size, size, method="nearest")


def preprocess(img: GrayImage, size: int = 224, dtype=np.float32) -> Tensor:
    """Full preprocessing path for one image."""
    return rescale(binarize_and_resize(img, size), dtype=dtype)
