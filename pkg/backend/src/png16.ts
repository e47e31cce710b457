/** 16-bit RGB image and 8-bit mask codecs matching the wire protocol. */

import { PNG } from "pngjs";
import { Plane, makePlane } from "./tensor";

/** Decode a 16-bit 3-channel PNG to floats in [0, 1]. */
export function decodeImagePng16(buf: Buffer): Plane {
  let png;
  try {
    png = PNG.sync.read(buf, { skipRescale: true });
  } catch (err) {
    throw new Error(`image payload is not decodable PNG data: ${err}`);
  }
  if (png.depth !== 16) {
    throw new Error(`expected a 16-bit PNG, got depth ${png.depth}`);
  }
  const { width, height } = png;
  const src = png.data as unknown as Uint16Array; // RGBA u16 with skipRescale
  const out = makePlane(height, width, 3);
  for (let i = 0; i < width * height; i++) {
    out.data[3 * i] = src[4 * i] / 65535;
    out.data[3 * i + 1] = src[4 * i + 1] / 65535;
    out.data[3 * i + 2] = src[4 * i + 2] / 65535;
  }
  return out;
}

/** Encode floats in [0, 1] as a 16-bit RGB PNG. */
export function encodeImagePng16(img: Plane): Buffer {
  if (img.channels !== 3) throw new Error("encodeImagePng16 expects 3 channels");
  const { width, height } = img;
  const png = new PNG({ width, height, colorType: 2, inputColorType: 2, bitDepth: 16, inputHasAlpha: false });
  const vals = new Uint16Array(width * height * 3);
  for (let i = 0; i < vals.length; i++) {
    const v = Math.min(1, Math.max(0, img.data[i]));
    vals[i] = Math.round(v * 65535);
  }
  png.data = Buffer.from(vals.buffer) as Buffer & typeof png.data;
  return PNG.sync.write(png, { colorType: 2, inputColorType: 2, bitDepth: 16, inputHasAlpha: false });
}

/** Decode an 8-bit single-channel mask PNG to {0,1} floats (>127 is set). */
export function decodeMaskPng(buf: Buffer): Plane {
  let png;
  try {
    png = PNG.sync.read(buf, { skipRescale: true });
  } catch (err) {
    throw new Error(`mask payload is not decodable PNG data: ${err}`);
  }
  if (png.depth !== 8) {
    throw new Error(`expected an 8-bit mask PNG, got depth ${png.depth}`);
  }
  const { width, height } = png;
  const out = makePlane(height, width, 1);
  for (let i = 0; i < width * height; i++) {
    out.data[i] = png.data[4 * i] > 127 ? 1 : 0;
  }
  return out;
}

export function encodeMaskPng(mask: Plane): Buffer {
  if (mask.channels !== 1) throw new Error("encodeMaskPng expects 1 channel");
  const { width, height } = mask;
  const png = new PNG({ width, height, colorType: 0, inputColorType: 0, bitDepth: 8, inputHasAlpha: false });
  const bytes = Buffer.alloc(width * height);
  for (let i = 0; i < bytes.length; i++) bytes[i] = mask.data[i] > 0.5 ? 255 : 0;
  png.data = bytes as Buffer & typeof png.data;
  return PNG.sync.write(png, { colorType: 0, inputColorType: 0, bitDepth: 8, inputHasAlpha: false });
}
