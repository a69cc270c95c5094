"""Flat ``key = value`` pipeline configuration.

Blank lines and ``#`` comments are ignored.  Unspecified keys fall back to
the defaults for the configured drawing type.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace

from .augment import DEFAULT_PARAMS, AugmentParams
from .errors import InvalidConfig, InvalidParams, InvalidValue, ParseError, UnknownKey
from .nn.model import BRANCH_PRESETS, PRESETS
from .train import DEFAULT_LR, TrainConfig

SEED_ENV = "TREMORSKETCH_SEED"


@dataclass
class PipelineConfig:
    dataset_root: str = "data"
    drawing_type: str = "spiral"
    image_size: int = 224
    augment: AugmentParams = field(default_factory=lambda: DEFAULT_PARAMS["spiral"])
    copies_per_image: int = 9
    model_preset: str = "vgg16"
    backbone_frozen: bool = False
    backbone_weights: str = ""
    train: TrainConfig = field(default_factory=lambda: TrainConfig.for_drawing("spiral"))
    output_dir: str = "out"
    seed: int = 0

    def validate(self) -> "PipelineConfig":
        if self.drawing_type not in BRANCH_PRESETS:
            raise InvalidConfig(f"drawing_type must be spiral or wave, got {self.drawing_type!r}")
        if self.model_preset not in PRESETS:
            raise InvalidConfig(f"unknown model_preset {self.model_preset!r}")
        if self.image_size < 8:
            raise InvalidConfig("image_size must be >= 8")
        if self.copies_per_image < 0:
            raise InvalidConfig("copies_per_image must be >= 0")
        try:
            self.augment.validate()
        except InvalidParams as exc:
            raise InvalidConfig(str(exc)) from exc
        self.train.validate()
        return self


_AUG_KEYS = [f.name for f in fields(AugmentParams)]
_TRAIN_KEYS = [f.name for f in fields(TrainConfig) if f.name != "seed"]
_TOP_KEYS = [f.name for f in fields(PipelineConfig) if f.name not in ("augment", "train")]
KEYS = _TOP_KEYS + _AUG_KEYS + _TRAIN_KEYS

_TYPES = {f.name: f.type for f in fields(PipelineConfig)}
_TYPES.update({f.name: f.type for f in fields(AugmentParams)})
_TYPES.update({f.name: f.type for f in fields(TrainConfig)})


def _parse_value(key, raw, line):
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            if "/" in raw:
                num, den = raw.split("/", 1)
                return float(num) / float(den)
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "str | None":
            return raw or None
        return raw
    except (ValueError, ZeroDivisionError):
        raise InvalidValue(f"bad value {raw!r} for {key}", line) from None


def parse_config_text(text: str) -> dict:
    values, lines = {}, {}
    for n, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", n)
        key, value = (p.strip() for p in stripped.split("=", 1))
        if key not in KEYS:
            raise UnknownKey(f"unknown key {key!r}", n)
        values[key] = _parse_value(key, value, n)
        lines[key] = n
    values["_lines"] = lines
    return values


def build_config(values: dict, drawing_type: str | None = None, env=None) -> PipelineConfig:
    values = dict(values)
    lines = values.pop("_lines", {})
    dtype = values.get("drawing_type") or drawing_type or "spiral"
    if dtype not in BRANCH_PRESETS:
        raise InvalidValue(f"drawing_type must be spiral or wave, got {dtype!r}",
                           lines.get("drawing_type"))
    aug = replace(DEFAULT_PARAMS[dtype], **{k: values[k] for k in _AUG_KEYS if k in values})
    seed = values.get("seed", 0)
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        try:
            seed = int(env[SEED_ENV])
        except ValueError:
            raise InvalidValue(f"{SEED_ENV} must be an integer") from None
    train_kw = {k: values[k] for k in _TRAIN_KEYS if k in values}
    train_kw.setdefault("learning_rate", DEFAULT_LR[dtype])
    train = TrainConfig(seed=seed, **train_kw)
    top = {k: values[k] for k in _TOP_KEYS if k in values}
    top.update(drawing_type=dtype, seed=seed)
    top.setdefault("model_preset", BRANCH_PRESETS[dtype])
    cfg = PipelineConfig(augment=aug, train=train, **top)
    return cfg.validate()


def load_config(path, drawing_type: str | None = None, env=None) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    return build_config(parse_config_text(text), drawing_type, env)


def dump_config(cfg: PipelineConfig) -> str:
    out = []
    for key in _TOP_KEYS:
        out.append(f"{key} = {_fmt(getattr(cfg, key))}")
    for key in _AUG_KEYS:
        out.append(f"{key} = {_fmt(getattr(cfg.augment, key))}")
    for key in _TRAIN_KEYS:
        v = getattr(cfg.train, key)
        if v is not None:
            out.append(f"{key} = {_fmt(v)}")
    return "\n".join(out) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)
