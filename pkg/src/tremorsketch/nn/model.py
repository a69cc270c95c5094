"""Model configuration, presets and the composite classifier.

A model is ``softmax(head(backbone(x)))``.  The backbone is a VGG-style
stack of conv blocks; the head holds the spatial attention gate, the custom
conv layers, attention pooling and the dense classifier, in the order given
by its layer list.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import InvalidConfig
from ..tensor import DEFAULT_DTYPE, Tensor, no_grad, relu
from . import functional as F

LAYER_KINDS = ("conv", "maxpool", "relu", "dropout", "dense", "flatten",
               "spatial_attention", "attention_pool", "softmax")

_FIELDS = {
    "conv": ("filters", "kernel", "stride", "padding"),
    "maxpool": ("window", "stride"),
    "dropout": ("rate",),
    "dense": ("units",),
}


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    filters: int = 0
    kernel: int = 3
    stride: int = 1
    padding: int = 0
    units: int = 0
    rate: float = 0.0
    window: int = 2

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for name in _FIELDS.get(self.kind, ()):
            d[name] = getattr(self, name)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(**d)


def conv(filters, kernel=3, padding=1, stride=1):
    return LayerSpec("conv", filters=filters, kernel=kernel, padding=padding, stride=stride)


def pool(window=2, stride=2):
    return LayerSpec("maxpool", window=window, stride=stride)


RELU = LayerSpec("relu")
SOFTMAX = LayerSpec("softmax")
FLATTEN = LayerSpec("flatten")
SPATIAL_ATTENTION = LayerSpec("spatial_attention")
ATTENTION_POOL = LayerSpec("attention_pool")


def dense(units):
    return LayerSpec("dense", units=units)


def drop(rate):
    return LayerSpec("dropout", rate=rate)


@dataclass(frozen=True)
class ModelConfig:
    backbone: tuple
    head: tuple
    num_classes: int = 2
    input_size: int = 224
    input_channels: int = 1
    backbone_frozen: bool = False
    name: str = "custom"

    def architecture(self) -> dict:
        """Everything that determines parameter names and shapes."""
        return {
            "backbone": [s.to_dict() for s in self.backbone],
            "head": [s.to_dict() for s in self.head],
            "num_classes": self.num_classes,
            "input_size": self.input_size,
            "input_channels": self.input_channels,
        }

    def fingerprint(self) -> str:
        return json.dumps(self.architecture(), sort_keys=True, separators=(",", ":"))

    def short_hash(self) -> str:
        return hashlib.sha256(self.fingerprint().encode()).hexdigest()[:12]

    @classmethod
    def from_fingerprint(cls, text: str, **overrides) -> "ModelConfig":
        try:
            d = json.loads(text)
            cfg = cls(backbone=tuple(LayerSpec.from_dict(s) for s in d["backbone"]),
                      head=tuple(LayerSpec.from_dict(s) for s in d["head"]),
                      num_classes=d["num_classes"], input_size=d["input_size"],
                      input_channels=d["input_channels"], **overrides)
        except (ValueError, KeyError, TypeError) as exc:
            raise InvalidConfig(f"unreadable architecture description: {exc}") from exc
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["backbone"] = [s.to_dict() for s in self.backbone]
        d["head"] = [s.to_dict() for s in self.head]
        return d


def vgg_backbone(blocks) -> tuple:
    layers = []
    for widths in blocks:
        for w in widths:
            layers += [conv(w), RELU]
        layers.append(pool())
    return tuple(layers)


def attention_head(conv_filters, num_classes=2, dropout_rate=0.5) -> tuple:
    layers = [SPATIAL_ATTENTION]
    for w in conv_filters:
        layers += [conv(w), RELU]
    layers += [ATTENTION_POOL, drop(dropout_rate), dense(num_classes), SOFTMAX]
    return tuple(layers)


VGG16_BLOCKS = ((64, 64), (128, 128), (256, 256, 256), (512, 512, 512), (512, 512, 512))
VGG19_BLOCKS = ((64, 64), (128, 128), (256,) * 4, (512,) * 4, (512,) * 4)

PRESETS = {
    "vgg16": dict(blocks=VGG16_BLOCKS, head=(256,), input_size=224, dropout=0.5),
    "vgg19": dict(blocks=VGG19_BLOCKS, head=(256,), input_size=224, dropout=0.5),
    # small CPU-sized stand-ins with the same layout; four pools leave a 4x4 map so the
    # gate's 1/P scaling of activations stays mild
    "desk16": dict(blocks=((8,), (16,), (16,), (16,)), head=(16,), input_size=64, dropout=0.25),
    "desk19": dict(blocks=((8,), (16,), (16, 16), (16, 16)), head=(16,), input_size=64,
                   dropout=0.25),
}

BRANCH_PRESETS = {"spiral": "vgg16", "wave": "vgg19"}


def preset(name: str, input_size: int | None = None, num_classes: int = 2,
           backbone_frozen: bool = False) -> ModelConfig:
    try:
        p = PRESETS[name]
    except KeyError:
        raise InvalidConfig(f"unknown model preset {name!r}; choose from {sorted(PRESETS)}") from None
    return ModelConfig(backbone=vgg_backbone(p["blocks"]),
                       head=attention_head(p["head"], num_classes, p["dropout"]),
                       num_classes=num_classes,
                       input_size=input_size or p["input_size"],
                       backbone_frozen=backbone_frozen, name=name)


def infer_shapes(cfg: ModelConfig) -> list:
    """Output shape after every layer (backbone then head); validates cfg."""
    if cfg.num_classes < 2:
        raise InvalidConfig("num_classes must be >= 2")
    if cfg.input_size < 1 or cfg.input_channels < 1:
        raise InvalidConfig("input size and channels must be positive")
    layers = list(cfg.backbone) + list(cfg.head)
    if not layers or layers[-1].kind != "softmax":
        raise InvalidConfig("final layer must be softmax")
    pooling = [i for i, s in enumerate(layers) if s.kind in ("attention_pool", "flatten")]
    dense_at = [i for i, s in enumerate(layers) if s.kind == "dense"]
    if len(pooling) != 1:
        raise InvalidConfig("exactly one attention_pool or flatten layer is required")
    if not dense_at or dense_at[0] < pooling[0]:
        if not dense_at:
            raise InvalidConfig("the head needs a dense classifier layer")
        raise InvalidConfig("attention_pool/flatten must precede the dense head")
    last_dense = layers[dense_at[-1]]
    if last_dense.units != cfg.num_classes:
        raise InvalidConfig(f"last dense layer has {last_dense.units} units, expected {cfg.num_classes}")

    shape = (cfg.input_channels, cfg.input_size, cfg.input_size)
    shapes = []
    for i, s in enumerate(layers):
        if s.kind not in LAYER_KINDS:
            raise InvalidConfig(f"layer {i}: unknown kind {s.kind!r}")
        spatial = len(shape) == 3
        if s.kind in ("conv", "maxpool", "spatial_attention", "attention_pool", "flatten") and not spatial:
            raise InvalidConfig(f"layer {i}: {s.kind} needs a (C,H,W) input, got {shape}")
        if s.kind in ("dense",) and spatial:
            raise InvalidConfig(f"layer {i}: dense needs a vector input")
        if s.kind == "conv":
            if s.filters < 1 or s.kernel < 1 or s.stride < 1 or s.padding < 0:
                raise InvalidConfig(f"layer {i}: bad conv hyperparameters {s}")
            c, h, w = shape
            span_h, span_w = h + 2 * s.padding - s.kernel, w + 2 * s.padding - s.kernel
            if span_h < 0 or span_w < 0 or span_h % s.stride or span_w % s.stride:
                raise InvalidConfig(f"layer {i}: conv does not tile a {h}x{w} input")
            shape = (s.filters, span_h // s.stride + 1, span_w // s.stride + 1)
        elif s.kind == "maxpool":
            if s.window < 1 or s.stride < 1:
                raise InvalidConfig(f"layer {i}: bad pool hyperparameters {s}")
            c, h, w = shape
            if s.window > h or s.window > w:
                raise InvalidConfig(f"layer {i}: pool window larger than {h}x{w}")
            shape = (c, (h - s.window) // s.stride + 1, (w - s.window) // s.stride + 1)
        elif s.kind == "attention_pool":
            shape = (shape[0],)
        elif s.kind == "flatten":
            shape = (int(np.prod(shape)),)
        elif s.kind == "dense":
            if s.units < 1:
                raise InvalidConfig(f"layer {i}: dense units must be positive")
            shape = (s.units,)
        elif s.kind == "dropout":
            if not 0 <= s.rate < 1:
                raise InvalidConfig(f"layer {i}: dropout rate must lie in [0, 1)")
        shapes.append(shape)
    if shape != (cfg.num_classes,):
        raise InvalidConfig(f"model output shape {shape} != ({cfg.num_classes},)")
    return shapes


def he_uniform(rng, shape, fan_in, dtype):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


@dataclass
class Layer:
    spec: LayerSpec
    params: dict = field(default_factory=dict)


class Model:
    """Parameter set plus forward function built from a :class:`ModelConfig`."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator | None = None,
                 dtype=DEFAULT_DTYPE):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(0) if rng is None else rng
        shapes = infer_shapes(cfg)
        in_shape = (cfg.input_channels, cfg.input_size, cfg.input_size)
        self.backbone, self.head = [], []
        for section, specs, offset in (("backbone", cfg.backbone, 0),
                                       ("head", cfg.head, len(cfg.backbone))):
            target = getattr(self, section)
            for i, spec in enumerate(specs):
                prev = in_shape if offset + i == 0 else shapes[offset + i - 1]
                target.append(Layer(spec, self._init_params(spec, prev, rng)))
        if cfg.backbone_frozen:
            for layer in self.backbone:
                for p in layer.params.values():
                    p.requires_grad = False
                    p.grad = None

    def _init_params(self, spec, in_shape, rng):
        dt = self.dtype
        if spec.kind == "conv":
            c = in_shape[0]
            fan_in = c * spec.kernel * spec.kernel
            w = he_uniform(rng, (spec.filters, c, spec.kernel, spec.kernel), fan_in, dt)
            return {"weight": Tensor(w, requires_grad=True),
                    "bias": Tensor(np.zeros(spec.filters, dt), requires_grad=True)}
        if spec.kind == "dense":
            n = in_shape[0]
            w = he_uniform(rng, (spec.units, n), n, dt)
            return {"weight": Tensor(w, requires_grad=True),
                    "bias": Tensor(np.zeros(spec.units, dt), requires_grad=True)}
        if spec.kind in ("spatial_attention", "attention_pool"):
            # zero query: attention starts uniform over positions
            return {"query": Tensor(np.zeros(in_shape[0], dt), requires_grad=True)}
        return {}

    # -- parameters --------------------------------------------------------
    def named_parameters(self) -> dict:
        out = {}
        for section in ("backbone", "head"):
            for i, layer in enumerate(getattr(self, section)):
                for pname, t in layer.params.items():
                    out[f"{section}.{i}.{pname}"] = t
        return out

    def trainable_parameters(self) -> dict:
        return {k: v for k, v in self.named_parameters().items() if v.requires_grad}

    def zero_grad(self):
        for p in self.trainable_parameters().values():
            p.zero_grad()

    def state_dict(self) -> dict:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state: dict) -> None:
        params = self.named_parameters()
        if set(state) != set(params):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise InvalidConfig(f"state mismatch; missing {missing}, unexpected {extra}")
        for k, arr in state.items():
            if params[k].shape != tuple(arr.shape):
                raise InvalidConfig(f"{k}: shape {arr.shape} != {params[k].shape}")
            params[k].data = np.array(arr, dtype=self.dtype)

    # -- forward -----------------------------------------------------------
    def _run(self, layers, x, mode, rng):
        for layer in layers:
            s, p = layer.spec, layer.params
            k = s.kind
            if k == "conv":
                x = F.conv2d(x, p["weight"], p["bias"], stride=s.stride, padding=s.padding)
            elif k == "maxpool":
                x = F.maxpool2d(x, s.window, s.stride)
            elif k == "relu":
                x = relu(x)
            elif k == "dropout":
                x = F.dropout(x, s.rate, mode, rng)
            elif k == "dense":
                x = F.dense(x, p["weight"], p["bias"])
            elif k == "flatten":
                x = x.reshape(x.shape[0], -1) if x.ndim == 4 else x.reshape(-1)
            elif k == "spatial_attention":
                x = F.spatial_attention_gate(x, p["query"])
            elif k == "attention_pool":
                x = F.global_attention_pool(x, p["query"])
            elif k == "softmax":
                x = F.softmax(x, axis=-1)
        return x

    def _input(self, x):
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.dtype))
        elif x.dtype != self.dtype:
            x = Tensor(x.data.astype(self.dtype))
        return x

    def forward_backbone(self, x, mode="infer", rng=None) -> Tensor:
        return self._run(self.backbone, self._input(x), mode, rng)

    def forward_head(self, features: Tensor, mode="infer", rng=None) -> Tensor:
        return self._run(self.head, features, mode, rng)

    def forward(self, x, mode="infer", rng=None) -> Tensor:
        """Class probabilities: (K,) for one image, (N, K) for a batch."""
        return self.forward_head(self.forward_backbone(x, mode, rng), mode, rng)

    __call__ = forward

    def predict_proba(self, x, batch_size: int = 64) -> np.ndarray:
        x = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=self.dtype)
        if x.ndim == 3:
            x = x[None]
        outs = []
        with no_grad():
            for start in range(0, len(x), batch_size):
                outs.append(self.forward(x[start:start + batch_size]).data)
        if not outs:
            return np.zeros((0, self.cfg.num_classes), dtype=self.dtype)
        return np.concatenate(outs)

    def predict(self, x, batch_size: int = 64) -> np.ndarray:
        return np.argmax(self.predict_proba(x, batch_size), axis=-1)

    def attention_map(self, x) -> np.ndarray:
        """Weights of the first spatial-attention layer for input ``x``."""
        with no_grad():
            h = self._input(x)
            for layer in self.backbone + self.head:
                if layer.spec.kind == "spatial_attention":
                    return F.spatial_attention_weights(h, layer.params["query"]).data
                h = self._run([layer], h, "infer", None)
        raise InvalidConfig("model has no spatial_attention layer")


def build_model(cfg: ModelConfig, rng: np.random.Generator | None = None,
                dtype=DEFAULT_DTYPE) -> Model:
    return Model(cfg, rng, dtype)


def with_frozen_backbone(cfg: ModelConfig, frozen: bool = True) -> ModelConfig:
    return replace(cfg, backbone_frozen=frozen)
