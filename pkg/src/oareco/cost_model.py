"""Layer-exact FLOPs, MACs, and learnable-parameter accounting.

Counting conventions, fixed so independent counters can be compared:
  - conv/linear: MACs = Hout*Wout*k^2*(Cin/groups)*Cout, FLOPs = 2*MACs,
    params = weight elements only (bias is its own entry);
  - bias add: 1 FLOP per output element, Cout params;
  - batch norm: 2 FLOPs per element (scale, shift), 2*C learnable params,
    running statistics excluded;
  - activations, residual adds, SE gating, pooling: 1 FLOP per element;
  - bilinear 2x upsample: 8 FLOPs per output element (four lerp
    multiply-adds), 0 MACs;
  - concatenation: free.
MACs are reserved for convolutional/linear entries, so flops == 2*macs
holds exactly on every MAC-bearing row and totals stay exact integers.
"""

from __future__ import annotations

from dataclasses import dataclass

from .nn.arch import ArchConfig, LayerConfig


@dataclass(frozen=True)
class CostEntry:
    name: str
    flops: int
    macs: int
    params: int


@dataclass(frozen=True)
class CostReport:
    per_layer: tuple
    input_shape: tuple

    @property
    def flops(self) -> int:
        return sum(e.flops for e in self.per_layer)

    @property
    def macs(self) -> int:
        return sum(e.macs for e in self.per_layer)

    @property
    def params(self) -> int:
        return sum(e.params for e in self.per_layer)

    def totals(self) -> tuple:
        return (self.flops, self.macs, self.params)


def _conv_out(size: int, stride: int) -> int:
    # same padding (k//2) keeps stride-1 sizes and ceil-divides stride 2
    return -(-size // stride)


def _conv_entries(name, in_ch, out_ch, h_out, w_out, kernel=3, groups=1, bn=True, act=1):
    """Conv + bias (+ BN, + activation) entry group; returns entries."""
    macs = h_out * w_out * kernel * kernel * (in_ch // groups) * out_ch
    elems = h_out * w_out * out_ch
    entries = [
        CostEntry(name, 2 * macs, macs, kernel * kernel * (in_ch // groups) * out_ch),
        CostEntry(f"{name}.bias", elems, 0, out_ch),
    ]
    if bn:
        entries.append(CostEntry(f"{name}_bn", 2 * elems, 0, 2 * out_ch))
    if act:
        entries.append(CostEntry(f"{name}.act", act * elems, 0, 0))
    return entries


def block_entries(prefix: str, layer: LayerConfig, in_h: int, in_w: int):
    """Cost entries for one block; returns (entries, out_h, out_w)."""
    h = _conv_out(in_h, layer.stride)
    w = _conv_out(in_w, layer.stride)
    entries = []
    if layer.kind == "Conv":
        entries += _conv_entries(f"{prefix}.conv", layer.in_ch, layer.out_ch, h, w)
    elif layer.kind == "DoubleConv":
        entries += _conv_entries(f"{prefix}.conv1", layer.in_ch, layer.out_ch, h, w)
        entries += _conv_entries(f"{prefix}.conv2", layer.out_ch, layer.out_ch, h, w)
    elif layer.kind in ("MBConv1", "MBConv6"):
        exp = layer.expanded_ch
        if layer.expansion != 1:
            entries += _conv_entries(f"{prefix}.expand", layer.in_ch, exp, in_h, in_w, kernel=1)
        entries += _conv_entries(
            f"{prefix}.depthwise", exp, exp, h, w, kernel=3, groups=exp
        )
        se = layer.se_ch
        entries.append(CostEntry(f"{prefix}.se.pool", exp * h * w, 0, 0))
        entries += _conv_entries(f"{prefix}.se.reduce", exp, se, 1, 1, kernel=1, bn=False)
        entries += _conv_entries(
            f"{prefix}.se.expand", se, exp, 1, 1, kernel=1, bn=False
        )
        entries.append(CostEntry(f"{prefix}.se.gate", exp * h * w, 0, 0))
        entries += _conv_entries(
            f"{prefix}.project", exp, layer.out_ch, h, w, kernel=1, act=0
        )
        if layer.residual_active:
            entries.append(CostEntry(f"{prefix}.residual", layer.out_ch * h * w, 0, 0))
    elif layer.kind == "Upsample":
        h, w = in_h * 2, in_w * 2
        entries.append(CostEntry(f"{prefix}.upsample", 8 * layer.out_ch * h * w, 0, 0))
    elif layer.kind == "Concat":
        entries.append(CostEntry(f"{prefix}.concat", 0, 0, 0))
    elif layer.kind == "FinalConv":
        entries += _conv_entries(f"{prefix}", layer.in_ch, layer.out_ch, h, w, bn=False)
    else:
        raise ValueError(f"unknown layer kind {layer.kind!r}")
    return entries, h, w


def layer_cost(layer: LayerConfig, in_h: int, in_w: int) -> tuple:
    """(flops, macs, params) of a single block at the given input size."""
    if in_h < 1 or in_w < 1:
        raise ValueError("spatial dims must be positive")
    entries, _, _ = block_entries("layer", layer, in_h, in_w)
    return (
        sum(e.flops for e in entries),
        sum(e.macs for e in entries),
        sum(e.params for e in entries),
    )


def network_cost(arch: ArchConfig, input_h: int, input_w: int) -> CostReport:
    """Full-network report, threading spatial dims through strides/upsamples."""
    factor = arch.downsample_factor
    if input_h < 1 or input_w < 1:
        raise ValueError("input dims must be positive")
    if input_h % factor or input_w % factor:
        raise ValueError(f"input dims must be divisible by the downsample factor {factor}")
    entries = []
    h, w = input_h, input_w
    tap_shapes = {}
    for i, layer in enumerate(arch.encoder, start=1):
        block, h, w = block_entries(f"enc{i}", layer, h, w)
        entries += block
        tap_shapes[i] = (layer.out_ch, h, w)
    for i, (lvl, tap) in enumerate(zip(arch.decoder, reversed(arch.skip_taps)), start=1):
        up, cat, conv = lvl.layers()
        block, h, w = block_entries(f"dec{i}", up, h, w)
        entries += block
        skip_ch, skip_h, skip_w = tap_shapes[tap]
        if (skip_h, skip_w) != (h, w):
            raise ValueError(
                f"dec{i}: upsampled {h}x{w} does not meet skip tap {tap} at {skip_h}x{skip_w}"
            )
        block, h, w = block_entries(f"dec{i}", cat, h, w)
        entries += block
        conv_entries, h, w = block_entries(f"dec{i}", conv, h, w)
        entries += conv_entries
    block, h, w = block_entries("final", arch.final, h, w)
    entries += block
    return CostReport(per_layer=tuple(entries), input_shape=(input_h, input_w))


@dataclass(frozen=True)
class FitResult:
    width_multiplier: float
    achieved_params: int
    target_params: int

    @property
    def rel_error(self) -> float:
        return abs(self.achieved_params - self.target_params) / self.target_params


class NoFitError(ValueError):
    """No channel-lattice point reaches the parameter target within tolerance."""

    def __init__(self, target, below, above):
        self.target = target
        self.nearest_below = below
        self.nearest_above = above
        super().__init__(
            f"no width multiplier reaches {target} params within tolerance; "
            f"nearest achievable counts are {below} and {above}"
        )


def fit_width_multiplier(
    arch_template,
    input_h: int,
    input_w: int,
    target_params: int,
    tol_rel: float = 0.10,
) -> FitResult:
    """Smallest multiplier whose parameter count falls within tol_rel of target.

    arch_template is a callable width_multiplier -> ArchConfig. Parameter
    count is non-decreasing in the multiplier on the rounded-to-8 channel
    lattice, so a bisection on the multiplier finds the boundary.
    """
    if target_params <= 0:
        raise ValueError("target_params must be positive")
    if not 0 < tol_rel < 1:
        raise ValueError("tol_rel must lie in (0, 1)")

    def params_at(wm):
        return network_cost(arch_template(wm), input_h, input_w).params

    lo_target = target_params * (1.0 - tol_rel)
    hi = 1.0
    while params_at(hi) < lo_target:
        hi *= 2.0
        if hi > 4096:
            raise NoFitError(target_params, params_at(2048.0), params_at(4096.0))
    lo = 1e-3
    # smallest multiplier with params >= lo_target, to 4 decimal places
    while hi - lo > 1e-4:
        mid = (lo + hi) / 2.0
        if params_at(mid) >= lo_target:
            hi = mid
        else:
            lo = mid
    wm = round(hi, 4)
    achieved = params_at(wm)
    if achieved < lo_target:
        wm = round(hi + 1e-4, 4)
        achieved = params_at(wm)
    if achieved > target_params * (1.0 + tol_rel):
        raise NoFitError(target_params, params_at(max(lo, 1e-3)), achieved)
    return FitResult(width_multiplier=wm, achieved_params=achieved, target_params=target_params)


def format_report(report: CostReport, name: str = "network") -> str:
    """Human-readable cost table."""
    lines = [f"{name}  (input {report.input_shape[0]}x{report.input_shape[1]})"]
    lines.append(f"{'layer':<26}{'FLOPs':>16}{'MACs':>16}{'params':>12}")
    for e in report.per_layer:
        lines.append(f"{e.name:<26}{e.flops:>16}{e.macs:>16}{e.params:>12}")
    lines.append(
        f"{'total':<26}{report.flops:>16}{report.macs:>16}{report.params:>12}"
    )
    return "\n".join(lines)
