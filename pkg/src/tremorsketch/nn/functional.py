"""Layer math on top of the autograd engine.

Spatial ops accept a single sample (C, H, W) or a batch (N, C, H, W).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import (InvalidRate, NonFiniteInput, NonIntegralOutputSize, ShapeMismatch,
                      UnnormalizedWeights)
from ..tensor import Function, Softmax, Tensor, matmul


def _as_batch(x: Tensor):
    if x.ndim == 3:
        return x.reshape((1,) + x.shape), True
    if x.ndim == 4:
        return x, False
    raise ShapeMismatch(f"expected (C,H,W) or (N,C,H,W), got {x.shape}")


class Conv2d(Function):
    def forward(self, x, w, b, stride, padding):
        n, c, h, wd = x.shape
        f, wc, kh, kw = w.shape
        if wc != c:
            raise ShapeMismatch(f"input has {c} channels, kernel expects {wc}")
        if b.shape != (f,):
            raise ShapeMismatch(f"bias shape {b.shape} does not match {f} filters")
        span_h, span_w = h + 2 * padding - kh, wd + 2 * padding - kw
        if span_h < 0 or span_w < 0:
            raise ShapeMismatch(f"kernel {kh}x{kw} does not fit padded input {h}x{wd}")
        if span_h % stride or span_w % stride:
            raise NonIntegralOutputSize(
                f"({h} - {kh} + 2*{padding}) / {stride} is not integral")
        ho, wo = span_h // stride + 1, span_w // stride + 1
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
        win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
        out = cols @ w.reshape(f, -1).T + b
        self.cols, self.geom = cols, (n, c, h, wd, f, kh, kw, ho, wo, stride, padding)
        return np.ascontiguousarray(out.reshape(n, ho, wo, f).transpose(0, 3, 1, 2))

    def backward(self, grad):
        n, c, h, wd, f, kh, kw, ho, wo, s, p = self.geom
        w = self.inputs[1].data
        g = grad.transpose(0, 2, 3, 1).reshape(n * ho * wo, f)
        gw = (g.T @ self.cols).reshape(w.shape)
        gb = g.sum(axis=0)
        gx = None
        if self.inputs[0].requires_grad:
            dcols = (g @ w.reshape(f, -1)).reshape(n, ho, wo, c, kh, kw)
            gxp = np.zeros((n, c, h + 2 * p, wd + 2 * p), dtype=grad.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + s * ho:s, j:j + s * wo:s] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            gx = gxp[:, :, p:p + h, p:p + wd] if p else gxp
        return gx, gw, gb


def conv2d(x: Tensor, weights: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation plus bias; weights are (F, C, kH, kW)."""
    if weights.ndim != 4 or bias.ndim != 1:
        raise ShapeMismatch(f"weights must be rank 4 and bias rank 1, got {weights.shape}, {bias.shape}")
    if stride < 1 or padding < 0:
        raise ShapeMismatch("stride must be >= 1 and padding >= 0")
    xb, single = _as_batch(x)
    out = Conv2d.apply(xb, weights, bias, stride=stride, padding=padding)
    return out.reshape(out.shape[1:]) if single else out


class MaxPool2d(Function):
    def forward(self, x, window, stride):
        n, c, h, w = x.shape
        if window > h or window > w:
            raise ShapeMismatch(f"pool window {window} does not fit {h}x{w}")
        ho, wo = (h - window) // stride + 1, (w - window) // stride + 1
        win = sliding_window_view(x, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
        win = win[:, :, :ho, :wo].reshape(n, c, ho, wo, window * window)
        self.arg = np.argmax(win, axis=-1)  # first maximum in row-major window order
        self.geom = (window, stride, ho, wo)
        return np.take_along_axis(win, self.arg[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        window, s, ho, wo = self.geom
        gx = np.zeros_like(self.inputs[0].data)
        for pos in range(window * window):
            i, j = divmod(pos, window)
            gx[:, :, i:i + s * ho:s, j:j + s * wo:s] += np.where(self.arg == pos, grad, 0)
        return (gx,)


def maxpool2d(x: Tensor, window: int = 2, stride: int | None = None) -> Tensor:
    stride = window if stride is None else stride
    if window < 1 or stride < 1:
        raise ShapeMismatch("window and stride must be >= 1")
    xb, single = _as_batch(x)
    out = MaxPool2d.apply(xb, window=window, stride=stride)
    return out.reshape(out.shape[1:]) if single else out


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """``weights @ x + bias`` for x of shape (n,) or (B, n); weights are (m, n)."""
    if weights.ndim != 2 or bias.shape != (weights.shape[0],):
        raise ShapeMismatch(f"dense weights {weights.shape} / bias {bias.shape} disagree")
    if x.ndim not in (1, 2) or x.shape[-1] != weights.shape[1]:
        raise ShapeMismatch(f"input {x.shape} does not match weights {weights.shape}")
    single = x.ndim == 1
    xb = x.reshape(1, x.shape[0]) if single else x
    out = matmul(xb, weights.transpose()) + bias
    return out.reshape(weights.shape[0]) if single else out


def dropout(x: Tensor, rate: float, mode: str = "train", rng: np.random.Generator | None = None) -> Tensor:
    if not 0 <= rate < 1:
        raise InvalidRate(f"dropout rate must lie in [0, 1), got {rate}")
    if mode == "infer" or rate == 0:
        return x
    if mode != "train":
        raise ValueError(f"unknown mode {mode!r}")
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    keep = rng.random(x.shape) >= rate
    mask = keep.astype(x.dtype) / np.asarray(1 - rate, dtype=x.dtype)
    return x * Tensor(mask, dtype=x.dtype)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if not np.all(np.isfinite(x.data)):
        raise NonFiniteInput("softmax input contains NaN or Inf")
    if not -x.ndim <= axis < x.ndim:
        raise ShapeMismatch(f"axis {axis} invalid for rank {x.ndim}")
    return Softmax.apply(x, axis=axis % x.ndim)


def attention_scores(q: Tensor, keys: Tensor):
    """Dot-product scores of ``q`` against each key row, and their softmax.

    ``keys`` is (P, C) or batched (N, P, C); returns ``(e, alpha)`` shaped
    (P,) or (N, P).
    """
    if q.ndim != 1 or keys.ndim not in (2, 3) or keys.shape[-1] != q.shape[0]:
        raise ShapeMismatch(f"query {q.shape} incompatible with keys {keys.shape}")
    e = matmul(keys, q.reshape(q.shape[0], 1))
    e = e.reshape(e.shape[:-1])
    return e, softmax(e, axis=-1)


def attention_pool(alpha: Tensor, values: Tensor, atol: float = 1e-5) -> Tensor:
    """Weighted sum of value rows: ``sum_p alpha_p * v_p``."""
    if values.ndim not in (2, 3) or alpha.shape != values.shape[:-1]:
        raise ShapeMismatch(f"weights {alpha.shape} do not match values {values.shape}")
    if not np.all(np.abs(alpha.data.sum(axis=-1) - 1) <= atol):
        raise UnnormalizedWeights("attention weights must sum to 1 over positions")
    if values.ndim == 2:
        out = matmul(alpha.reshape(1, alpha.shape[0]), values)
        return out.reshape(values.shape[1])
    n, p, c = values.shape
    return matmul(alpha.reshape(n, 1, p), values).reshape(n, c)


def _positions(f: Tensor) -> Tensor:
    """(N, C, H, W) -> (N, H*W, C): one key/value vector per spatial position."""
    n, c, h, w = f.shape
    return f.reshape(n, c, h * w).transpose(0, 2, 1)


def spatial_attention_weights(f: Tensor, q: Tensor) -> Tensor:
    """Attention weights over positions, shaped like one channel of ``f``."""
    fb, single = _as_batch(f)
    n, c, h, w = fb.shape
    _, alpha = attention_scores(q, _positions(fb))
    alpha = alpha.reshape(n, 1, h, w)
    return alpha.reshape(1, h, w) if single else alpha


def spatial_attention_gate(f: Tensor, q: Tensor) -> Tensor:
    """Gate a feature map by its position-attention map: ``A(f) * f``.

    The (1, H, W) weight map broadcasts over channels; no rescaling.
    """
    if f.ndim not in (3, 4) or q.ndim != 1 or q.shape[0] != f.shape[-3]:
        raise ShapeMismatch(f"query {q.shape} incompatible with feature map {f.shape}")
    return spatial_attention_weights(f, q) * f


def global_attention_pool(f: Tensor, q: Tensor) -> Tensor:
    """Pool (N, C, H, W) to (N, C) by attending over positions with query ``q``."""
    fb, single = _as_batch(f)
    if q.ndim != 1 or q.shape[0] != fb.shape[1]:
        raise ShapeMismatch(f"query {q.shape} incompatible with feature map {f.shape}")
    pos = _positions(fb)
    _, alpha = attention_scores(q, pos)
    out = attention_pool(alpha, pos)
    return out.reshape(out.shape[1]) if single else out
