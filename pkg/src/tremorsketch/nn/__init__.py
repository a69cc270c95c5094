from .functional import (attention_pool, attention_scores, conv2d, dense, dropout,
                         global_attention_pool, maxpool2d, softmax, spatial_attention_gate,
                         spatial_attention_weights)
from .model import (BRANCH_PRESETS, PRESETS, LayerSpec, Model, ModelConfig, build_model,
                    infer_shapes, preset)

__all__ = [
    "attention_pool", "attention_scores", "conv2d", "dense", "dropout",
    "global_attention_pool", "maxpool2d", "softmax", "spatial_attention_gate",
    "spatial_attention_weights", "BRANCH_PRESETS", "PRESETS", "LayerSpec", "Model",
    "ModelConfig", "build_model", "infer_shapes", "preset",
]
