"""Forward passes for the network building blocks.

Each function takes the input tensor in (channels, height, width) layout
plus a weight lookup (name -> array) and a name prefix, mirroring the
manifest naming in arch.weight_manifest.
"""

from __future__ import annotations

from .ops import (
    batch_norm,
    bilinear_upsample_2x,
    concat_channels,
    conv2d,
    relu,
    se_block,
    silu,
)


def _conv_bn(x, w, prefix, stride=1, groups=1):
    x = conv2d(x, w[f"{prefix}.weight"], w[f"{prefix}.bias"], stride=stride, groups=groups)
    return batch_norm(
        x,
        w[f"{prefix}_bn.gamma"],
        w[f"{prefix}_bn.beta"],
        w[f"{prefix}_bn.mean"],
        w[f"{prefix}_bn.var"],
    )


def conv_bn_silu(x, w, prefix, stride=1):
    """Stem block: 3x3 conv, batch norm, SiLU."""
    return silu(_conv_bn(x, w, f"{prefix}.conv", stride=stride))


def mbconv(x, w, prefix, layer):
    """Inverted-residual block with squeeze-excitation.

    MBConv6 expands 6x with a 1x1 conv first; MBConv1 has no expansion
    stage. Then depthwise 3x3 (carrying the stride), SE gating, and a
    linear 1x1 projection. The identity shortcut applies only at stride 1
    with matching channel counts.
    """
    out = x
    if layer.expansion != 1:
        out = silu(_conv_bn(out, w, f"{prefix}.expand"))
    exp = out.shape[0]
    out = silu(_conv_bn(out, w, f"{prefix}.depthwise", stride=layer.stride, groups=exp))
    out = se_block(
        out,
        w[f"{prefix}.se.reduce.weight"],
        w[f"{prefix}.se.expand.weight"],
        w[f"{prefix}.se.reduce.bias"],
        w[f"{prefix}.se.expand.bias"],
    )
    out = _conv_bn(out, w, f"{prefix}.project")
    if layer.residual_active:
        out = out + x
    return out


def double_conv(x, w, prefix, stride=1):
    """Two 3x3 conv + BN + ReLU stages; an optional stride sits on the first."""
    x = relu(_conv_bn(x, w, f"{prefix}.conv1", stride=stride))
    return relu(_conv_bn(x, w, f"{prefix}.conv2"))


def decoder_level(x, skip, w, prefix):
    """Upsample 2x, concatenate the encoder tap, run a DoubleConv."""
    x = bilinear_upsample_2x(x)
    if x.shape[1:] != skip.shape[1:]:
        raise ValueError(
            f"{prefix}: upsampled shape {x.shape[1:]} does not match skip {skip.shape[1:]}; "
            "input sides must be divisible by the downsample factor"
        )
    x = concat_channels(skip, x)
    return double_conv(x, w, prefix)


def final_conv(x, w):
    """Output head: 3x3 conv to one channel, ReLU to enforce nonnegativity."""
    return relu(conv2d(x, w["final.weight"], w["final.bias"]))
