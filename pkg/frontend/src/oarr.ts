/**
 * OARR1 array container format and its text metadata sidecar.
 *
 * One record = magic bytes "OARR", version byte 0x01, then a little-endian
 * header: name length (u16) + UTF-8 name, dtype code (u8; 0 = IEEE-754
 * binary32, 1 = binary64, both little-endian), rank (u8), dims (u32 each),
 * followed by the raw row-major data. A file may hold several records back
 * to back; the record order is the file's manifest.
 *
 * The sidecar `<file>.meta` is UTF-8 text with one `key = value` pair per
 * line. Records are surfaced as float64 regardless of storage dtype; the
 * storage dtype is kept on the record so rewrites round-trip bit-for-bit.
 */

import { readFileSync, writeFileSync } from "node:fs";

const MAGIC = "OARR";
const VERSION = 1;
export const SIDECAR_SUFFIX = ".meta";

export type DType = "float32" | "float64";

export interface OarrRecord {
  name: string;
  dtype: DType;
  shape: number[];
  data: Float64Array;
}

export class OarrFormatError extends Error {}

const littleEndian = new Uint8Array(new Uint32Array([1]).buffer)[0] === 1;
if (!littleEndian) {
  throw new Error("OARR1 I/O requires a little-endian host");
}

function ensure(buf: Buffer, off: number, need: number, path: string): void {
  if (off + need > buf.length) {
    throw new OarrFormatError(`${path}: truncated file`);
  }
}

function readU8(buf: Buffer, off: number, path: string): number {
  ensure(buf, off, 1, path);
  return buf.readUInt8(off);
}

function readU16(buf: Buffer, off: number, path: string): number {
  ensure(buf, off, 2, path);
  return buf.readUInt16LE(off);
}

function readU32(buf: Buffer, off: number, path: string): number {
  ensure(buf, off, 4, path);
  return buf.readUInt32LE(off);
}

export function readOarr(path: string): OarrRecord[] {
  const buf = readFileSync(path);
  const records: OarrRecord[] = [];
  const seen = new Set<string>();
  let off = 0;
  while (off < buf.length) {
    if (off + 4 > buf.length) {
      throw new OarrFormatError(`${path}: truncated file`);
    }
    const magic = buf.toString("latin1", off, off + 4);
    if (magic !== MAGIC) {
      throw new OarrFormatError(`${path}: bad magic ${JSON.stringify(magic)}`);
    }
    off += 4;
    const version = readU8(buf, off++, path);
    if (version !== VERSION) {
      throw new OarrFormatError(`${path}: unsupported version ${version}`);
    }
    const nameLen = readU16(buf, off, path);
    off += 2;
    ensure(buf, off, nameLen, path);
    const name = buf.toString("utf-8", off, off + nameLen);
    off += nameLen;
    const code = readU8(buf, off++, path);
    const rank = readU8(buf, off++, path);
    if (code !== 0 && code !== 1) {
      throw new OarrFormatError(`${path}: unknown dtype code ${code}`);
    }
    const shape: number[] = [];
    let count = 1;
    for (let d = 0; d < rank; d++) {
      const dim = readU32(buf, off, path);
      off += 4;
      shape.push(dim);
      count *= dim;
    }
    const itemSize = code === 0 ? 4 : 8;
    ensure(buf, off, count * itemSize, path);
    // copy out so the view is aligned and detached from the read buffer
    const raw = Uint8Array.prototype.slice.call(buf, off, off + count * itemSize);
    off += count * itemSize;
    const data =
      code === 0
        ? Float64Array.from(new Float32Array(raw.buffer, 0, count))
        : new Float64Array(raw.buffer, 0, count);
    if (seen.has(name)) {
      throw new OarrFormatError(`${path}: duplicate record name ${JSON.stringify(name)}`);
    }
    seen.add(name);
    records.push({ name, dtype: code === 0 ? "float32" : "float64", shape, data });
  }
  return records;
}

export function readOarrMap(path: string): Map<string, OarrRecord> {
  return new Map(readOarr(path).map((r) => [r.name, r]));
}

/** Read one record; with no name the file must hold exactly one. */
export function readOarrRecord(path: string, name?: string): OarrRecord {
  const records = readOarr(path);
  if (name === undefined) {
    if (records.length !== 1) {
      throw new OarrFormatError(`${path}: expected a single record, found ${records.length}`);
    }
    return records[0];
  }
  const found = records.find((r) => r.name === name);
  if (!found) {
    throw new OarrFormatError(`${path}: no record named ${JSON.stringify(name)}`);
  }
  return found;
}

export function writeOarr(
  path: string,
  records: readonly OarrRecord[],
  metadata?: Record<string, unknown>,
): void {
  const parts: Buffer[] = [];
  const seen = new Set<string>();
  for (const rec of records) {
    if (seen.has(rec.name)) {
      throw new OarrFormatError(`duplicate record name ${JSON.stringify(rec.name)}`);
    }
    seen.add(rec.name);
    parts.push(encodeRecord(rec));
  }
  writeFileSync(path, Buffer.concat(parts));
  if (metadata !== undefined) {
    writeSidecar(path, metadata);
  }
}

function encodeRecord(rec: OarrRecord): Buffer {
  const nameBytes = Buffer.from(rec.name, "utf-8");
  if (nameBytes.length > 0xffff) {
    throw new OarrFormatError("record name too long");
  }
  const count = rec.shape.reduce((acc, d) => acc * d, 1);
  if (count !== rec.data.length) {
    throw new OarrFormatError(
      `record ${rec.name}: shape [${rec.shape.join(", ")}] does not match ` +
        `data length ${rec.data.length}`,
    );
  }
  const head = Buffer.alloc(4 + 1 + 2 + nameBytes.length + 1 + 1 + 4 * rec.shape.length);
  let off = head.write(MAGIC, 0, "latin1");
  off = head.writeUInt8(VERSION, off);
  off = head.writeUInt16LE(nameBytes.length, off);
  off += nameBytes.copy(head, off);
  off = head.writeUInt8(rec.dtype === "float32" ? 0 : 1, off);
  off = head.writeUInt8(rec.shape.length, off);
  for (const dim of rec.shape) {
    off = head.writeUInt32LE(dim, off);
  }
  const payload =
    rec.dtype === "float32" ? Float32Array.from(rec.data) : rec.data.slice();
  return Buffer.concat([head, Buffer.from(payload.buffer, 0, payload.byteLength)]);
}

export function sidecarPath(path: string): string {
  return path + SIDECAR_SUFFIX;
}

export function writeSidecar(path: string, metadata: Record<string, unknown>): void {
  writeFileSync(sidecarPath(path), formatKeyValues(metadata), "utf-8");
}

export function readSidecar(path: string): Record<string, string> {
  const text = readFileSync(sidecarPath(path), "utf-8");
  return parseKeyValues(text, sidecarPath(path));
}

/** Serialize a mapping to `key = value` text; floats keep full precision. */
export function formatKeyValues(metadata: Record<string, unknown>): string {
  const lines = Object.entries(metadata).map(
    ([key, value]) => `${key} = ${formatValue(value)}`,
  );
  return lines.join("\n") + "\n";
}

export function parseKeyValues(text: string, source = "<text>"): Record<string, string> {
  const out: Record<string, string> = {};
  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const stripped = lines[i].trim();
    if (stripped === "" || stripped.startsWith("#")) {
      continue;
    }
    const eq = stripped.indexOf("=");
    if (eq < 0) {
      throw new OarrFormatError(
        `${source}:${i + 1}: expected 'key = value', got ${JSON.stringify(lines[i])}`,
      );
    }
    const key = stripped.slice(0, eq).trim();
    if (key === "") {
      throw new OarrFormatError(`${source}:${i + 1}: empty key`);
    }
    if (key in out) {
      throw new OarrFormatError(`${source}:${i + 1}: duplicate key ${JSON.stringify(key)}`);
    }
    out[key] = stripped.slice(eq + 1).trim();
  }
  return out;
}

function formatValue(value: unknown): string {
  return String(value);
}

// Integers and floats share one JS number type, so formatValue cannot tell
// 1 from 1.0; callers pre-format values that must stay recognizably floats.
export function formatFloat(value: number): string {
  if (Number.isInteger(value) && Math.abs(value) < 1e16) {
    return value.toFixed(1);
  }
  return String(value);
}
