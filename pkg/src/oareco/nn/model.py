"""Model container: weights keyed by manifest names plus the forward pass.

Weight files are OARR arrays in manifest order with an architecture
sidecar, so a model round-trips through save_model/load_model and can be
produced by any tool that follows the same naming scheme.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..domain import Image
from ..oarr import read_arrays, read_sidecar, write_arrays, write_sidecar
from .arch import (
    ArchConfig,
    arch_from_metadata,
    arch_to_metadata,
    is_trainable,
    weight_manifest,
)
from .blocks import conv_bn_silu, decoder_level, double_conv, final_conv, mbconv


class ManifestError(ValueError):
    """Weight set does not match the architecture manifest."""


def validate_weights(arch: ArchConfig, weights: dict) -> None:
    """Check names and shapes against the manifest, naming every offender."""
    manifest = weight_manifest(arch)
    missing = [n for n in manifest if n not in weights]
    unexpected = [n for n in weights if n not in manifest]
    problems = []
    if missing:
        problems.append(f"missing tensors: {', '.join(missing)}")
    if unexpected:
        problems.append(f"unexpected tensors: {', '.join(unexpected)}")
    for name, shape in manifest.items():
        if name in weights and tuple(weights[name].shape) != shape:
            problems.append(
                f"shape mismatch for {name}: expected {shape}, got {tuple(weights[name].shape)}"
            )
    if problems:
        raise ManifestError("; ".join(problems))
    dtypes = {w.dtype for w in weights.values()}
    if len(dtypes) > 1:
        raise ManifestError(f"weights mix dtypes {sorted(str(d) for d in dtypes)}")


@dataclass(frozen=True)
class Model:
    arch: ArchConfig
    weights: dict

    def __post_init__(self):
        validate_weights(self.arch, self.weights)

    @property
    def dtype(self):
        return next(iter(self.weights.values())).dtype


def parameter_count(arch: ArchConfig) -> int:
    """Trainable parameters; batch-norm running stats are excluded."""
    return sum(
        int(np.prod(shape)) for name, shape in weight_manifest(arch).items() if is_trainable(name)
    )


def random_weights(arch: ArchConfig, seed: int = 0, dtype=np.float32) -> dict:
    """He-style random init, deterministic under the seed."""
    rng = np.random.default_rng(seed)
    weights = {}
    for name, shape in weight_manifest(arch).items():
        if name.endswith(".weight"):
            fan_in = int(np.prod(shape[1:]))
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        elif name.endswith((".gamma", ".var")):
            w = np.ones(shape)
        else:
            w = np.zeros(shape)
        weights[name] = w.astype(dtype)
    return weights


def save_model(model: Model, path) -> None:
    manifest = weight_manifest(model.arch)
    arrays = {name: model.weights[name] for name in manifest}
    write_arrays(path, arrays)
    meta = arch_to_metadata(model.arch)
    meta["manifest"] = ",".join(manifest)
    write_sidecar(path, meta)


def load_model(path) -> Model:
    arrays = read_arrays(path)
    meta = read_sidecar(path)
    arch = arch_from_metadata(meta)
    expected = list(weight_manifest(arch))
    if "manifest" in meta:
        declared = meta["manifest"].split(",")
        if declared != expected:
            raise ManifestError("sidecar manifest does not match the architecture manifest")
    stored = list(arrays)
    if stored != expected:
        if set(stored) != set(expected):
            validate_weights(arch, arrays)  # raises, naming every offender
        first = next(i for i, (s, e) in enumerate(zip(stored, expected)) if s != e)
        raise ManifestError(
            f"record order diverges from the manifest at index {first}: "
            f"stored {stored[first]!r}, expected {expected[first]!r}"
        )
    return Model(arch=arch, weights=arrays)


def infer_array(model: Model, x: np.ndarray) -> np.ndarray:
    """Run the network on a 2D array; computation uses the weights' dtype."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError(f"expected a 2D input, got shape {x.shape}")
    factor = model.arch.downsample_factor
    if x.shape[0] % factor or x.shape[1] % factor:
        raise ValueError(
            f"input sides {x.shape} must be divisible by the downsample factor {factor}"
        )
    out = x.astype(model.dtype)[np.newaxis]
    if model.arch.input_norm == "max_abs":
        peak = np.abs(out).max()
        if peak > 0:
            out = out / peak
    w = model.weights
    taps = {}
    tap_set = set(model.arch.skip_taps)
    for i, layer in enumerate(model.arch.encoder, start=1):
        prefix = f"enc{i}"
        if layer.kind == "Conv":
            out = conv_bn_silu(out, w, prefix, stride=layer.stride)
        elif layer.kind == "DoubleConv":
            out = double_conv(out, w, prefix, stride=layer.stride)
        else:
            out = mbconv(out, w, prefix, layer)
        if i in tap_set:
            taps[i] = out
    for i, tap in enumerate(reversed(model.arch.skip_taps), start=1):
        out = decoder_level(out, taps[tap], w, f"dec{i}")
    out = final_conv(out, w)
    return out[0]


def infer(model: Model, image: Image) -> Image:
    result = infer_array(model, image.data)
    return Image(data=result.astype(np.float64), grid=image.grid)
