/**
 * Minimal 8-bit grayscale PNG encoder and a synthetic image generator.
 *
 * Training consumes ordinary image files; this gives the CLI and the test
 * suite a dependency-free way to produce smooth, non-negative sources
 * (sums of Gaussian blobs) that behave like natural initial-pressure maps.
 */

import { deflateSync } from "node:zlib";

import { Rng } from "./tensor.js";

const CRC_TABLE = new Uint32Array(256);
for (let n = 0; n < 256; n++) {
  let c = n;
  for (let k = 0; k < 8; k++) {
    c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
  }
  CRC_TABLE[n] = c >>> 0;
}

function crc32(buf: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < buf.length; i++) {
    c = CRC_TABLE[(c ^ buf[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, payload: Uint8Array): Buffer {
  const out = Buffer.alloc(12 + payload.length);
  out.writeUInt32BE(payload.length, 0);
  out.write(type, 4, "latin1");
  out.set(payload, 8);
  out.writeUInt32BE(crc32(out.subarray(4, 8 + payload.length)), 8 + payload.length);
  return out;
}

/** Encode row-major 8-bit grayscale pixels as a PNG file. */
export function encodeGrayPng(width: number, height: number, pixels: Uint8Array): Buffer {
  if (pixels.length !== width * height) {
    throw new Error(`expected ${width * height} pixels, got ${pixels.length}`);
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr.writeUInt8(8, 8); // bit depth
  ihdr.writeUInt8(0, 9); // color type: grayscale
  // compression, filter, interlace all zero
  const raw = Buffer.alloc(height * (width + 1));
  for (let y = 0; y < height; y++) {
    raw[y * (width + 1)] = 0; // filter: none
    raw.set(pixels.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", deflateSync(raw)),
    chunk("IEND", new Uint8Array(0)),
  ]);
}

/** A smooth sum of random Gaussian blobs, scaled to the 0..255 range. */
export function blobImage(size: number, rng: Rng, numBlobs = 4): Uint8Array {
  const field = new Float64Array(size * size);
  for (let b = 0; b < numBlobs; b++) {
    const cx = (0.2 + 0.6 * rng.next()) * size;
    const cy = (0.2 + 0.6 * rng.next()) * size;
    const sigma = (0.05 + 0.15 * rng.next()) * size;
    const amp = 0.4 + 0.6 * rng.next();
    const inv = 1 / (2 * sigma * sigma);
    for (let y = 0; y < size; y++) {
      for (let x = 0; x < size; x++) {
        const d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        field[y * size + x] += amp * Math.exp(-d2 * inv);
      }
    }
  }
  let peak = 0;
  for (const v of field) {
    if (v > peak) peak = v;
  }
  const pixels = new Uint8Array(size * size);
  if (peak > 0) {
    for (let i = 0; i < field.length; i++) {
      pixels[i] = Math.round((field[i] / peak) * 255);
    }
  }
  return pixels;
}
