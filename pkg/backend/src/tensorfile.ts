/**
 * Flat float32 tensor files (magic "TNS1"): little-endian header of four
 * uint32 (height, width, channels, levels) followed by row-major,
 * channel-last float32 data. Shared with the estimation toolkit for
 * golden-tensor parity tests.
 */

import * as fs from "fs";
import { Plane, planeFrom } from "./tensor";

const MAGIC = "TNS1";
const HEADER_BYTES = 4 + 4 * 4;

export function readTensor(path: string): { plane: Plane; levels: number } {
  const buf = fs.readFileSync(path);
  if (buf.length < HEADER_BYTES) throw new Error(`tensor file ${path} truncated`);
  if (buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`bad tensor magic in ${path}`);
  }
  const height = buf.readUInt32LE(4);
  const width = buf.readUInt32LE(8);
  const channels = buf.readUInt32LE(12);
  const levels = buf.readUInt32LE(16);
  const count = height * width * channels;
  if (buf.length !== HEADER_BYTES + 4 * count) {
    throw new Error(`tensor file ${path}: expected ${HEADER_BYTES + 4 * count} bytes, got ${buf.length}`);
  }
  const data = new Float64Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = buf.readFloatLE(HEADER_BYTES + 4 * i);
  }
  return { plane: planeFrom(data, height, width, channels), levels };
}

export function writeTensor(path: string, plane: Plane, levels = 0): void {
  const count = plane.data.length;
  const buf = Buffer.alloc(HEADER_BYTES + 4 * count);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(plane.height, 4);
  buf.writeUInt32LE(plane.width, 8);
  buf.writeUInt32LE(plane.channels, 12);
  buf.writeUInt32LE(levels, 16);
  for (let i = 0; i < count; i++) {
    buf.writeFloatLE(Math.fround(plane.data[i]), HEADER_BYTES + 4 * i);
  }
  fs.writeFileSync(path, buf);
}
