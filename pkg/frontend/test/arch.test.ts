import { describe, expect, it } from "vitest";

import {
  archFromMetadata,
  archToMetadata,
  downsampleFactor,
  efficientdeepmbArch,
  isTrainable,
  makeLayer,
  parameterCount,
  residualActive,
  scaleChannels,
  templateArch,
  unetArch,
  validateArch,
  weightManifest,
} from "../src/arch.js";
import { tinyArch } from "./helpers.js";

describe("scaleChannels", () => {
  it("rounds to multiples of 8 with a floor of 8", () => {
    expect(scaleChannels(32, 1.0)).toBe(32);
    expect(scaleChannels(32, 0.25)).toBe(8);
    expect(scaleChannels(16, 0.25)).toBe(8);
    expect(scaleChannels(24, 0.25)).toBe(8);
    expect(scaleChannels(40, 0.25)).toBe(8);
    expect(scaleChannels(80, 0.25)).toBe(24);
    expect(scaleChannels(112, 0.25)).toBe(32);
    expect(scaleChannels(192, 0.25)).toBe(48);
    expect(scaleChannels(32, 1.1)).toBe(32);
    expect(scaleChannels(36, 1.1)).toBe(40);
    expect(scaleChannels(8, 0.01)).toBe(8);
  });

  it("rejects non-positive multipliers", () => {
    expect(() => scaleChannels(32, 0)).toThrow(/widthMultiplier/);
    expect(() => scaleChannels(32, -1)).toThrow(/widthMultiplier/);
  });
});

describe("makeLayer", () => {
  it("enforces kind-specific expansion factors", () => {
    expect(() => makeLayer("MBConv6", 8, 16, 1, 1)).toThrow(/expansion 6/);
    expect(() => makeLayer("MBConv1", 8, 16, 1, 6)).toThrow(/expansion 1/);
    expect(() => makeLayer("Conv", 8, 16, 3)).toThrow(/stride/);
    expect(() => makeLayer("Conv", 0, 16)).toThrow(/positive/);
    expect(() => makeLayer("Nope" as "Conv", 8, 16)).toThrow(/unknown layer kind/);
  });

  it("knows when the identity shortcut is active", () => {
    expect(residualActive(makeLayer("MBConv1", 8, 8, 1))).toBe(true);
    expect(residualActive(makeLayer("MBConv6", 8, 8, 1, 6))).toBe(true);
    expect(residualActive(makeLayer("MBConv6", 8, 8, 2, 6))).toBe(false);
    expect(residualActive(makeLayer("MBConv6", 8, 16, 1, 6))).toBe(false);
    expect(residualActive(makeLayer("Conv", 8, 8, 1))).toBe(false);
  });
});

describe("templates", () => {
  it("efficientdeepmb downsamples 16x; unet downsamples 8x", () => {
    expect(downsampleFactor(efficientdeepmbArch())).toBe(16);
    expect(downsampleFactor(unetArch())).toBe(8);
    expect(downsampleFactor(tinyArch())).toBe(2);
  });

  it("'default' is an alias of efficientdeepmb", () => {
    expect(archToMetadata(templateArch("default"))).toEqual(
      archToMetadata(templateArch("efficientdeepmb")),
    );
  });

  it("rejects unknown template names with the known list", () => {
    expect(() => templateArch("resnet")).toThrow(/default, efficientdeepmb, unet/);
  });

  it("builds the published efficientdeepmb encoder at width 1.0", () => {
    const arch = efficientdeepmbArch(1.0);
    expect(arch.encoder.map((l) => [l.kind, l.inCh, l.outCh, l.stride])).toEqual([
      ["Conv", 1, 32, 1],
      ["MBConv1", 32, 16, 1],
      ["MBConv6", 16, 24, 2],
      ["MBConv6", 24, 40, 2],
      ["MBConv6", 40, 80, 2],
      ["MBConv6", 80, 112, 1],
      ["MBConv6", 112, 192, 2],
    ]);
    expect(arch.skipTaps).toEqual([2, 3, 4, 6]);
    expect(arch.decoder.map((d) => [d.inCh, d.skipCh, d.outCh])).toEqual([
      [192, 112, 112],
      [112, 40, 40],
      [40, 24, 24],
      [24, 16, 16],
    ]);
    expect(arch.finalInCh).toBe(16);
  });

  it("scales channels at width 0.25 including the 8-channel floor", () => {
    const arch = efficientdeepmbArch(0.25);
    expect(arch.encoder.map((l) => l.outCh)).toEqual([8, 8, 8, 8, 24, 32, 48]);
    expect(arch.decoder.map((d) => [d.inCh, d.skipCh, d.outCh])).toEqual([
      [48, 32, 32],
      [32, 8, 8],
      [8, 8, 8],
      [8, 8, 8],
    ]);
  });
});

describe("parameterCount", () => {
  it("counts 1,269,633 trainable parameters at width 1.0", () => {
    expect(parameterCount(efficientdeepmbArch(1.0))).toBe(1_269_633);
  });

  it("matches a hand total on the tiny architecture", () => {
    // enc1 96, enc2 226, enc3 3132, dec1 2352, final 73
    expect(parameterCount(tinyArch())).toBe(5879);
  });
});

describe("weightManifest", () => {
  it("lists tensors in engine order with the documented names", () => {
    const names = [...weightManifest(efficientdeepmbArch(1.0)).keys()];
    expect(names.length).toBe(182);
    expect(names.slice(0, 14)).toEqual([
      "enc1.conv.weight",
      "enc1.conv.bias",
      "enc1.conv_bn.gamma",
      "enc1.conv_bn.beta",
      "enc1.conv_bn.mean",
      "enc1.conv_bn.var",
      "enc2.depthwise.weight",
      "enc2.depthwise.bias",
      "enc2.depthwise_bn.gamma",
      "enc2.depthwise_bn.beta",
      "enc2.depthwise_bn.mean",
      "enc2.depthwise_bn.var",
      "enc2.se.reduce.weight",
      "enc2.se.reduce.bias",
    ]);
    expect(names.slice(-2)).toEqual(["final.weight", "final.bias"]);
    // MBConv1 blocks carry no expand stage
    expect(names.some((n) => n.startsWith("enc2.expand"))).toBe(false);
    expect(names.some((n) => n.startsWith("enc3.expand"))).toBe(true);
  });

  it("emits the expected shapes for the tiny architecture", () => {
    const m = weightManifest(tinyArch());
    expect(m.get("enc1.conv.weight")).toEqual([8, 1, 3, 3]);
    expect(m.get("enc2.depthwise.weight")).toEqual([8, 1, 3, 3]);
    expect(m.get("enc2.se.reduce.weight")).toEqual([2, 8, 1, 1]);
    expect(m.get("enc3.expand.weight")).toEqual([48, 8, 1, 1]);
    expect(m.get("enc3.depthwise.weight")).toEqual([48, 1, 3, 3]);
    expect(m.get("enc3.se.reduce.weight")).toEqual([12, 48, 1, 1]);
    expect(m.get("enc3.se.expand.weight")).toEqual([48, 12, 1, 1]);
    expect(m.get("enc3.project.weight")).toEqual([16, 48, 1, 1]);
    expect(m.get("dec1.conv1.weight")).toEqual([8, 24, 3, 3]);
    expect(m.get("dec1.conv2.weight")).toEqual([8, 8, 3, 3]);
    expect(m.get("final.weight")).toEqual([1, 8, 3, 3]);
  });

  it("marks running statistics as non-trainable", () => {
    expect(isTrainable("enc1.conv_bn.gamma")).toBe(true);
    expect(isTrainable("enc1.conv_bn.beta")).toBe(true);
    expect(isTrainable("enc1.conv.weight")).toBe(true);
    expect(isTrainable("enc1.conv_bn.mean")).toBe(false);
    expect(isTrainable("enc1.conv_bn.var")).toBe(false);
  });
});

describe("metadata round trip", () => {
  it("serializes and rebuilds the tiny architecture", () => {
    const arch = tinyArch();
    const meta = archToMetadata(arch);
    expect(meta.format).toBe("oareco-arch-v1");
    expect(meta.width_multiplier).toBe("1.0");
    expect(meta.encoder).toBe("Conv:1:8:1,MBConv1:8:8:1,MBConv6:8:16:2");
    expect(meta.skip_taps).toBe("2");
    expect(meta.decoder).toBe("16:8:8");
    expect(meta.final).toBe("8:1");
    const back = archFromMetadata(meta);
    expect(archToMetadata(back)).toEqual(meta);
  });

  it("round-trips the width-0.25 template", () => {
    const arch = efficientdeepmbArch(0.25, "max_abs");
    const meta = archToMetadata(arch);
    expect(meta.width_multiplier).toBe("0.25");
    expect(meta.input_norm).toBe("max_abs");
    const back = archFromMetadata(meta);
    expect(back.widthMultiplier).toBe(0.25);
    expect(back.inputNorm).toBe("max_abs");
    expect(archToMetadata(back)).toEqual(meta);
  });

  it("rejects foreign formats and multi-channel outputs", () => {
    const meta = archToMetadata(tinyArch());
    expect(() => archFromMetadata({ ...meta, format: "v2" })).toThrow(/format/);
    expect(() => archFromMetadata({ ...meta, final: "8:3" })).toThrow(/1 channel/);
  });
});

describe("validateArch", () => {
  it("rejects broken channel chains and tap layouts", () => {
    const good = tinyArch();
    expect(() =>
      validateArch({ ...good, encoder: [makeLayer("Conv", 2, 8, 1), ...good.encoder.slice(1)] }),
    ).toThrow(/chain/);
    expect(() => validateArch({ ...good, skipTaps: [9] })).toThrow(/outside encoder range/);
    expect(() => validateArch({ ...good, skipTaps: [] })).toThrow(/one skip tap/);
    expect(() => validateArch({ ...good, decoder: [], skipTaps: [] })).toThrow(/stride-2/);
    expect(() =>
      validateArch({ ...good, decoder: [{ inCh: 16, skipCh: 4, outCh: 8 }] }),
    ).toThrow(/skipCh/);
    expect(() => validateArch({ ...good, finalInCh: 12 })).toThrow(/final/);
    expect(() =>
      validateArch({
        ...good,
        encoder: [...good.encoder, makeLayer("MBConv6", 16, 16, 2, 6)],
        skipTaps: [2, 2],
        decoder: [
          { inCh: 16, skipCh: 8, outCh: 8 },
          { inCh: 8, skipCh: 8, outCh: 8 },
        ],
      }),
    ).toThrow(/ascending/);
  });
});
