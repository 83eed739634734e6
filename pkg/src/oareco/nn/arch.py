"""Declarative network architecture: block list, channels, strides, taps.

The stock encoder is an EfficientNet-derived stack of seven blocks (stem
conv, one MBConv1, five MBConv6) feeding a traditional U-Net decoder of
bilinear upsample + channel-wise concatenation + DoubleConv levels, closed
by a 3x3 convolution to one channel and a ReLU. All channel counts scale
with a width multiplier on an 8-channel lattice.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

ENCODER_KINDS = ("Conv", "MBConv1", "MBConv6", "DoubleConv")
ALL_KINDS = ENCODER_KINDS + ("Upsample", "Concat", "FinalConv")

KERNEL = 3
INPUT_NORMS = ("none", "max_abs")


def scale_channels(base: int, width_multiplier: float) -> int:
    """Scale a channel count, rounding to the nearest multiple of 8 (min 8)."""
    if width_multiplier <= 0:
        raise ValueError(f"width_multiplier must be > 0, got {width_multiplier}")
    return max(8, int(base * width_multiplier / 8.0 + 0.5) * 8)


@dataclass(frozen=True)
class LayerConfig:
    """One block of the network; channels are concrete (already scaled)."""

    kind: str
    in_ch: int
    out_ch: int
    stride: int = 1
    kernel: int = KERNEL
    expansion: int = 1
    se_reduction: int = 4

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.in_ch < 1 or self.out_ch < 1:
            raise ValueError(f"{self.kind}: channel counts must be positive")
        if self.stride not in (1, 2):
            raise ValueError(f"{self.kind}: stride must be 1 or 2, got {self.stride}")
        if self.kernel != KERNEL:
            raise ValueError(f"{self.kind}: all spatial kernels are {KERNEL}x{KERNEL}")
        if self.kind == "MBConv6" and self.expansion != 6:
            raise ValueError("MBConv6 requires expansion 6")
        if self.kind == "MBConv1" and self.expansion != 1:
            raise ValueError("MBConv1 requires expansion 1")

    @property
    def expanded_ch(self) -> int:
        return self.in_ch * self.expansion

    @property
    def se_ch(self) -> int:
        return max(self.expanded_ch // self.se_reduction, 1)

    @property
    def residual_active(self) -> bool:
        return self.kind in ("MBConv1", "MBConv6") and self.stride == 1 and self.in_ch == self.out_ch


def mbconv1(in_ch, out_ch, stride=1) -> LayerConfig:
    return LayerConfig("MBConv1", in_ch, out_ch, stride=stride, expansion=1)


def mbconv6(in_ch, out_ch, stride=1) -> LayerConfig:
    return LayerConfig("MBConv6", in_ch, out_ch, stride=stride, expansion=6)


@dataclass(frozen=True)
class DecoderLevel:
    """One expanding-path level: upsample 2x, concat a skip tap, DoubleConv."""

    in_ch: int
    skip_ch: int
    out_ch: int

    def layers(self) -> tuple:
        merged = self.in_ch + self.skip_ch
        return (
            LayerConfig("Upsample", self.in_ch, self.in_ch),
            LayerConfig("Concat", merged, merged),
            LayerConfig("DoubleConv", merged, self.out_ch),
        )


@dataclass(frozen=True)
class ArchConfig:
    """Full network description with validated channel bookkeeping."""

    name: str
    encoder: tuple
    skip_taps: tuple
    decoder: tuple
    final: LayerConfig
    width_multiplier: float = 1.0
    input_norm: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "encoder", tuple(self.encoder))
        object.__setattr__(self, "skip_taps", tuple(int(t) for t in self.skip_taps))
        object.__setattr__(self, "decoder", tuple(self.decoder))
        self._validate()

    def _validate(self):
        if not self.encoder:
            raise ValueError("encoder must contain at least one block")
        if self.input_norm not in INPUT_NORMS:
            raise ValueError(f"input_norm must be one of {INPUT_NORMS}")
        prev = 1
        for i, layer in enumerate(self.encoder, start=1):
            if layer.kind not in ENCODER_KINDS:
                raise ValueError(f"encoder block {i}: {layer.kind} is not an encoder kind")
            if layer.in_ch != prev:
                raise ValueError(
                    f"encoder block {i}: in_ch {layer.in_ch} does not chain from {prev}"
                )
            prev = layer.out_ch
        n_enc = len(self.encoder)
        if len(self.skip_taps) != len(self.decoder):
            raise ValueError("one skip tap is required per decoder level")
        if list(self.skip_taps) != sorted(set(self.skip_taps)):
            raise ValueError("skip_taps must be strictly ascending")
        for t in self.skip_taps:
            if not 1 <= t <= n_enc:
                raise ValueError(f"skip tap {t} outside encoder range 1..{n_enc}")
        n_down = sum(1 for l in self.encoder if l.stride == 2)
        if n_down != len(self.decoder):
            raise ValueError(
                f"{n_down} stride-2 encoder stages need {n_down} decoder levels, "
                f"got {len(self.decoder)}"
            )
        prev = self.encoder[-1].out_ch
        for lvl, tap in zip(self.decoder, reversed(self.skip_taps)):
            if lvl.in_ch != prev:
                raise ValueError(f"decoder level in_ch {lvl.in_ch} does not chain from {prev}")
            tap_ch = self.encoder[tap - 1].out_ch
            if lvl.skip_ch != tap_ch:
                raise ValueError(
                    f"decoder skip_ch {lvl.skip_ch} does not match tap {tap} channels {tap_ch}"
                )
            prev = lvl.out_ch
        if self.final.kind != "FinalConv" or self.final.out_ch != 1:
            raise ValueError("final block must be a FinalConv to 1 channel")
        if self.final.in_ch != prev:
            raise ValueError(f"final in_ch {self.final.in_ch} does not chain from {prev}")

    @property
    def downsample_factor(self) -> int:
        return 2 ** sum(1 for l in self.encoder if l.stride == 2)

    def tap_shapes(self, input_h: int, input_w: int) -> list:
        """(channels, height, width) of each skipped encoder output."""
        shapes = {}
        h, w = input_h, input_w
        for i, layer in enumerate(self.encoder, start=1):
            if layer.stride == 2:
                h, w = -(-h // 2), -(-w // 2)
            shapes[i] = (layer.out_ch, h, w)
        return [shapes[t] for t in self.skip_taps]


_EDMB_ENCODER = (
    ("Conv", 1, 32, 1),
    ("MBConv1", 32, 16, 1),
    ("MBConv6", 16, 24, 2),
    ("MBConv6", 24, 40, 2),
    ("MBConv6", 40, 80, 2),
    ("MBConv6", 80, 112, 1),
    ("MBConv6", 112, 192, 2),
)
_EDMB_TAPS = (2, 3, 4, 6)

_UNET_ENCODER = (
    ("DoubleConv", 1, 64, 1),
    ("DoubleConv", 64, 128, 2),
    ("DoubleConv", 128, 256, 2),
    ("DoubleConv", 256, 512, 2),
)
_UNET_TAPS = (1, 2, 3)


def _build_from_template(name, blocks, taps, width_multiplier, input_norm) -> ArchConfig:
    def ch(base):
        return scale_channels(base, width_multiplier)

    encoder = []
    for kind, cin, cout, stride in blocks:
        expansion = 6 if kind == "MBConv6" else 1
        encoder.append(
            LayerConfig(
                kind,
                1 if cin == 1 else ch(cin),
                ch(cout),
                stride=stride,
                expansion=expansion,
            )
        )
    decoder = []
    prev = encoder[-1].out_ch
    for tap in reversed(taps):
        skip = encoder[tap - 1].out_ch
        decoder.append(DecoderLevel(in_ch=prev, skip_ch=skip, out_ch=skip))
        prev = skip
    final = LayerConfig("FinalConv", prev, 1)
    return ArchConfig(
        name=name,
        encoder=tuple(encoder),
        skip_taps=taps,
        decoder=tuple(decoder),
        final=final,
        width_multiplier=float(width_multiplier),
        input_norm=input_norm,
    )


def efficientdeepmb_arch(width_multiplier: float = 1.0, input_norm: str = "none") -> ArchConfig:
    """Stock seven-block inverted-residual encoder with a U-Net decoder."""
    arch = _build_from_template(
        "efficientdeepmb", _EDMB_ENCODER, _EDMB_TAPS, width_multiplier, input_norm
    )
    assert len(arch.encoder) == 7
    return arch


def unet_arch(width_multiplier: float = 1.0, input_norm: str = "none") -> ArchConfig:
    """Four-level U-Net with doubling channels (64 to 512), the reference
    config for cost comparisons against the inverted-residual encoder."""
    return _build_from_template("unet", _UNET_ENCODER, _UNET_TAPS, width_multiplier, input_norm)


TEMPLATES = {
    "efficientdeepmb": efficientdeepmb_arch,
    "default": efficientdeepmb_arch,
    "unet": unet_arch,
}


def template_arch(name: str, width_multiplier: float = 1.0, input_norm: str = "none") -> ArchConfig:
    if name not in TEMPLATES:
        raise ValueError(f"unknown architecture template {name!r}; choose from {sorted(TEMPLATES)}")
    return TEMPLATES[name](width_multiplier, input_norm)


def arch_to_metadata(arch: ArchConfig) -> dict:
    """Flatten an ArchConfig into sidecar key/value pairs."""
    return {
        "format": "oareco-arch-v1",
        "name": arch.name,
        "width_multiplier": arch.width_multiplier,
        "input_norm": arch.input_norm,
        "encoder": ",".join(
            f"{l.kind}:{l.in_ch}:{l.out_ch}:{l.stride}" for l in arch.encoder
        ),
        "skip_taps": ",".join(str(t) for t in arch.skip_taps),
        "decoder": ",".join(f"{d.in_ch}:{d.skip_ch}:{d.out_ch}" for d in arch.decoder),
        "final": f"{arch.final.in_ch}:{arch.final.out_ch}",
    }


def _conv_entries(prefix, in_ch, out_ch, kernel=KERNEL, bn=True):
    entries = [
        (f"{prefix}.weight", (out_ch, in_ch, kernel, kernel)),
        (f"{prefix}.bias", (out_ch,)),
    ]
    if bn:
        for stat in ("gamma", "beta", "mean", "var"):
            entries.append((f"{prefix}_bn.{stat}", (out_ch,)))
    return entries


def weight_manifest(arch: ArchConfig) -> dict:
    """Ordered mapping of tensor name -> shape for every weight in the net.

    The ordering defines the record order in weight files. Batch-norm
    running statistics (.mean, .var) appear here but are not trainable.
    """
    names = {}

    def add(entries):
        for name, shape in entries:
            names[name] = shape

    for i, layer in enumerate(arch.encoder, start=1):
        p = f"enc{i}"
        if layer.kind == "Conv":
            add(_conv_entries(f"{p}.conv", layer.in_ch, layer.out_ch))
        elif layer.kind == "DoubleConv":
            add(_conv_entries(f"{p}.conv1", layer.in_ch, layer.out_ch))
            add(_conv_entries(f"{p}.conv2", layer.out_ch, layer.out_ch))
        else:
            exp = layer.expanded_ch
            if layer.kind == "MBConv6":
                add(_conv_entries(f"{p}.expand", layer.in_ch, exp, kernel=1))
            add(
                [
                    (f"{p}.depthwise.weight", (exp, 1, KERNEL, KERNEL)),
                    (f"{p}.depthwise.bias", (exp,)),
                ]
            )
            for stat in ("gamma", "beta", "mean", "var"):
                names[f"{p}.depthwise_bn.{stat}"] = (exp,)
            se = layer.se_ch
            add(
                [
                    (f"{p}.se.reduce.weight", (se, exp, 1, 1)),
                    (f"{p}.se.reduce.bias", (se,)),
                    (f"{p}.se.expand.weight", (exp, se, 1, 1)),
                    (f"{p}.se.expand.bias", (exp,)),
                ]
            )
            add(_conv_entries(f"{p}.project", exp, layer.out_ch, kernel=1))
    for i, lvl in enumerate(arch.decoder, start=1):
        p = f"dec{i}"
        merged = lvl.in_ch + lvl.skip_ch
        add(_conv_entries(f"{p}.conv1", merged, lvl.out_ch))
        add(_conv_entries(f"{p}.conv2", lvl.out_ch, lvl.out_ch))
    add(
        [
            ("final.weight", (1, arch.final.in_ch, KERNEL, KERNEL)),
            ("final.bias", (1,)),
        ]
    )
    return names


def is_trainable(tensor_name: str) -> bool:
    """Running statistics ride along in weight files but are not parameters."""
    return not tensor_name.endswith((".mean", ".var"))


def arch_from_metadata(meta: dict) -> ArchConfig:
    """Rebuild an ArchConfig from sidecar key/value pairs."""
    if meta.get("format", "oareco-arch-v1") != "oareco-arch-v1":
        raise ValueError(f"unsupported architecture format {meta.get('format')!r}")
    encoder = []
    for item in meta["encoder"].split(","):
        kind, cin, cout, stride = item.strip().split(":")
        expansion = 6 if kind == "MBConv6" else 1
        encoder.append(
            LayerConfig(kind, int(cin), int(cout), stride=int(stride), expansion=expansion)
        )
    taps = tuple(int(t) for t in meta["skip_taps"].split(","))
    decoder = []
    for item in meta["decoder"].split(","):
        cin, skip, cout = (int(v) for v in item.strip().split(":"))
        decoder.append(DecoderLevel(cin, skip, cout))
    fin_in, fin_out = (int(v) for v in meta["final"].split(":"))
    return ArchConfig(
        name=meta.get("name", "custom"),
        encoder=tuple(encoder),
        skip_taps=taps,
        decoder=tuple(decoder),
        final=LayerConfig("FinalConv", fin_in, fin_out),
        width_multiplier=float(meta.get("width_multiplier", 1.0)),
        input_norm=meta.get("input_norm", "none"),
    )
