import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import {
  OarrFormatError,
  OarrRecord,
  formatFloat,
  formatKeyValues,
  parseKeyValues,
  readOarr,
  readOarrRecord,
  readSidecar,
  sidecarPath,
  writeOarr,
  writeSidecar,
} from "../src/oarr.js";

const dir = mkdtempSync(join(tmpdir(), "oarr-test-"));
afterAll(() => rmSync(dir, { recursive: true, force: true }));

let fileNo = 0;
function tmpfile(): string {
  return join(dir, `t${fileNo++}.oarr`);
}

/** The documented byte layout of a single float64 record, by hand. */
function handcrafted(): Buffer {
  const data = Buffer.alloc(8 * 2);
  data.writeDoubleLE(1.5, 0);
  data.writeDoubleLE(-2.0, 8);
  return Buffer.concat([
    Buffer.from("OARR", "latin1"),
    Buffer.from([1]), // version
    Buffer.from([1, 0]), // name length, little endian
    Buffer.from("t", "utf-8"),
    Buffer.from([1]), // dtype code: float64
    Buffer.from([1]), // rank
    Buffer.from([2, 0, 0, 0]), // dim 0
    data,
  ]);
}

describe("OARR1 records", () => {
  it("round-trips multiple float64 records preserving order and shape", () => {
    const path = tmpfile();
    const records: OarrRecord[] = [
      { name: "b", dtype: "float64", shape: [2, 3], data: Float64Array.from([1, 2, 3, 4, 5, 6]) },
      { name: "a", dtype: "float64", shape: [2], data: Float64Array.from([-0.5, 7]) },
    ];
    writeOarr(path, records);
    const back = readOarr(path);
    expect(back.map((r) => r.name)).toEqual(["b", "a"]);
    expect(back[0].shape).toEqual([2, 3]);
    expect(Array.from(back[0].data)).toEqual([1, 2, 3, 4, 5, 6]);
    expect(Array.from(back[1].data)).toEqual([-0.5, 7]);
  });

  it("stores float32 records at single precision and widens on read", () => {
    const path = tmpfile();
    writeOarr(path, [
      { name: "x", dtype: "float32", shape: [1], data: Float64Array.from([1.1]) },
    ]);
    const back = readOarrRecord(path);
    expect(back.dtype).toBe("float32");
    expect(back.data[0]).toBe(Math.fround(1.1));
    expect(back.data[0]).not.toBe(1.1);
  });

  it("writes exactly the documented byte layout", () => {
    const path = tmpfile();
    writeOarr(path, [{ name: "t", dtype: "float64", shape: [2], data: Float64Array.from([1.5, -2]) }]);
    expect(readFileSync(path).equals(handcrafted())).toBe(true);
  });

  it("decodes a hand-crafted buffer", () => {
    const path = tmpfile();
    writeFileSync(path, handcrafted());
    const rec = readOarrRecord(path, "t");
    expect(rec.shape).toEqual([2]);
    expect(Array.from(rec.data)).toEqual([1.5, -2]);
  });

  it("rewrites a mixed-dtype file bit-for-bit", () => {
    const path = tmpfile();
    writeOarr(path, [
      { name: "f32", dtype: "float32", shape: [3], data: Float64Array.from([0.1, 0.2, 0.3]) },
      { name: "f64", dtype: "float64", shape: [1, 2], data: Float64Array.from([0.1, 0.2]) },
    ]);
    const copy = tmpfile();
    writeOarr(copy, readOarr(path));
    expect(readFileSync(copy).equals(readFileSync(path))).toBe(true);
  });

  it("rejects duplicate names when writing and reading", () => {
    const rec: OarrRecord = { name: "d", dtype: "float64", shape: [1], data: Float64Array.from([0]) };
    expect(() => writeOarr(tmpfile(), [rec, rec])).toThrow(/duplicate record name/);
    const path = tmpfile();
    writeOarr(path, [rec]);
    const doubled = tmpfile();
    writeFileSync(doubled, Buffer.concat([readFileSync(path), readFileSync(path)]));
    expect(() => readOarr(doubled)).toThrow(/duplicate record name/);
  });

  it("rejects truncated files, bad magic, bad version and bad dtype", () => {
    const whole = handcrafted();
    const truncated = tmpfile();
    writeFileSync(truncated, whole.subarray(0, whole.length - 4));
    expect(() => readOarr(truncated)).toThrow(OarrFormatError);

    const magic = tmpfile();
    const bad = Buffer.from(whole);
    bad.write("NOPE", 0, "latin1");
    writeFileSync(magic, bad);
    expect(() => readOarr(magic)).toThrow(/bad magic/);

    const version = tmpfile();
    const v9 = Buffer.from(whole);
    v9[4] = 9;
    writeFileSync(version, v9);
    expect(() => readOarr(version)).toThrow(/unsupported version 9/);

    const dtype = tmpfile();
    const code7 = Buffer.from(whole);
    code7[8] = 7; // dtype byte sits after magic+version+u16 len+1-byte name
    writeFileSync(dtype, code7);
    expect(() => readOarr(dtype)).toThrow(/unknown dtype code 7/);
  });

  it("readOarrRecord enforces single-record files and finds by name", () => {
    const path = tmpfile();
    writeOarr(path, [
      { name: "a", dtype: "float64", shape: [1], data: Float64Array.from([1]) },
      { name: "b", dtype: "float64", shape: [1], data: Float64Array.from([2]) },
    ]);
    expect(() => readOarrRecord(path)).toThrow(/single record/);
    expect(readOarrRecord(path, "b").data[0]).toBe(2);
    expect(() => readOarrRecord(path, "zz")).toThrow(/no record named "zz"/);
  });

  it("rejects records whose shape disagrees with the data length", () => {
    expect(() =>
      writeOarr(tmpfile(), [
        { name: "x", dtype: "float64", shape: [3], data: Float64Array.from([1, 2]) },
      ]),
    ).toThrow(/does not match/);
  });

  it("round-trips non-ASCII record names", () => {
    const path = tmpfile();
    writeOarr(path, [
      { name: "señal", dtype: "float64", shape: [1], data: Float64Array.from([4]) },
    ]);
    expect(readOarrRecord(path, "señal").data[0]).toBe(4);
  });
});

describe("metadata sidecars", () => {
  it("writes <file>.meta and reads back string values", () => {
    const path = tmpfile();
    writeOarr(path, [{ name: "x", dtype: "float64", shape: [1], data: Float64Array.from([0]) }]);
    writeSidecar(path, { grid: 64, method: "das", noise_std: formatFloat(0.25) });
    expect(sidecarPath(path)).toBe(path + ".meta");
    expect(readSidecar(path)).toEqual({ grid: "64", method: "das", noise_std: "0.25" });
  });

  it("formats floats so integral values stay floats", () => {
    expect(formatFloat(1)).toBe("1.0");
    expect(formatFloat(0.25)).toBe("0.25");
    expect(formatFloat(-3)).toBe("-3.0");
    expect(formatFloat(0.1 + 0.2)).toBe("0.30000000000000004");
  });

  it("parses comments, blank lines and embedded equals signs", () => {
    const parsed = parseKeyValues("# header\n\n a = b = c \nkey=value\n");
    expect(parsed).toEqual({ a: "b = c", key: "value" });
  });

  it("rejects malformed lines, duplicate keys and empty keys", () => {
    expect(() => parseKeyValues("novalue\n")).toThrow(/expected 'key = value'/);
    expect(() => parseKeyValues("a = 1\na = 2\n")).toThrow(/duplicate key/);
    expect(() => parseKeyValues("= 2\n")).toThrow(/empty key/);
  });

  it("formatKeyValues emits one key = value line per entry", () => {
    expect(formatKeyValues({ a: 1, b: "x" })).toBe("a = 1\nb = x\n");
    expect(parseKeyValues(formatKeyValues({ a: 1, b: "x" }))).toEqual({ a: "1", b: "x" });
  });
});
