"""Neural post-processing: architecture templates, numpy inference engine."""

from .arch import (
    ArchConfig,
    DecoderLevel,
    LayerConfig,
    arch_from_metadata,
    arch_to_metadata,
    efficientdeepmb_arch,
    is_trainable,
    scale_channels,
    template_arch,
    unet_arch,
    weight_manifest,
)
from .model import (
    ManifestError,
    Model,
    infer,
    infer_array,
    load_model,
    parameter_count,
    random_weights,
    save_model,
    validate_weights,
)

__all__ = [
    "ArchConfig",
    "DecoderLevel",
    "LayerConfig",
    "ManifestError",
    "Model",
    "arch_from_metadata",
    "arch_to_metadata",
    "efficientdeepmb_arch",
    "infer",
    "infer_array",
    "is_trainable",
    "load_model",
    "parameter_count",
    "random_weights",
    "save_model",
    "scale_channels",
    "template_arch",
    "unet_arch",
    "validate_weights",
    "weight_manifest",
]
