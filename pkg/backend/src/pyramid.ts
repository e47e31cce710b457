/**
 * High-frequency extraction via a small Laplacian pyramid.
 *
 * The conventions here are protocol constants shared with the estimation
 * toolkit: separable [1,2,1]/4 binomial blur with replicate borders, 2x2
 * average pooling with replicate-extension of odd dims, corner-aligned
 * bilinear upsampling, and per-level bands accumulated at full resolution.
 * The golden tensors under ../golden pin them; parity is tested to 1e-5.
 */

import { Plane, at, makePlane } from "./tensor";

export function gaussianBlur3(p: Plane): Plane {
  const { height, width, channels } = p;
  const tmp = makePlane(height, width, channels);
  const out = makePlane(height, width, channels);
  // vertical pass, replicate rows
  for (let y = 0; y < height; y++) {
    const yp = Math.max(y - 1, 0);
    const yn = Math.min(y + 1, height - 1);
    for (let x = 0; x < width; x++) {
      for (let c = 0; c < channels; c++) {
        tmp.data[(y * width + x) * channels + c] =
          (at(p, yp, x, c) + 2 * at(p, y, x, c) + at(p, yn, x, c)) / 4;
      }
    }
  }
  // horizontal pass, replicate columns
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const xp = Math.max(x - 1, 0);
      const xn = Math.min(x + 1, width - 1);
      for (let c = 0; c < channels; c++) {
        out.data[(y * width + x) * channels + c] =
          (at(tmp, y, xp, c) + 2 * at(tmp, y, x, c) + at(tmp, y, xn, c)) / 4;
      }
    }
  }
  return out;
}

export function downsampleAvg2(p: Plane): Plane {
  if (p.height < 2 || p.width < 2) {
    throw new Error(`cannot downsample plane of ${p.height}x${p.width}`);
  }
  const h2 = Math.ceil(p.height / 2);
  const w2 = Math.ceil(p.width / 2);
  const out = makePlane(h2, w2, p.channels);
  for (let y = 0; y < h2; y++) {
    const y0 = 2 * y;
    const y1 = Math.min(2 * y + 1, p.height - 1); // replicate-extend odd edge
    for (let x = 0; x < w2; x++) {
      const x0 = 2 * x;
      const x1 = Math.min(2 * x + 1, p.width - 1);
      for (let c = 0; c < p.channels; c++) {
        out.data[(y * w2 + x) * p.channels + c] =
          (at(p, y0, x0, c) + at(p, y0, x1, c) + at(p, y1, x0, c) + at(p, y1, x1, c)) / 4;
      }
    }
  }
  return out;
}

function axisCoord(i: number, nSrc: number, nDst: number): [number, number] {
  if (nSrc === 1 || nDst === 1) return [0, 0];
  const pos = (i * (nSrc - 1)) / (nDst - 1);
  const i0 = Math.min(Math.floor(pos), nSrc - 2);
  return [i0, pos - i0];
}

/** Corner-aligned bilinear resize; works for both up- and downscaling. */
export function resizeBilinear(p: Plane, targetH: number, targetW: number): Plane {
  const out = makePlane(targetH, targetW, p.channels);
  for (let y = 0; y < targetH; y++) {
    const [y0, fy] = axisCoord(y, p.height, targetH);
    const y1 = Math.min(y0 + 1, p.height - 1);
    for (let x = 0; x < targetW; x++) {
      const [x0, fx] = axisCoord(x, p.width, targetW);
      const x1 = Math.min(x0 + 1, p.width - 1);
      for (let c = 0; c < p.channels; c++) {
        const tl = at(p, y0, x0, c);
        const tr = at(p, y0, x1, c);
        const bl = at(p, y1, x0, c);
        const br = at(p, y1, x1, c);
        const top = tl + fx * (tr - tl);
        const bottom = bl + fx * (br - bl);
        out.data[(y * targetW + x) * p.channels + c] = top + fy * (bottom - top);
      }
    }
  }
  return out;
}

export function upsample2(p: Plane, targetH: number, targetW: number): Plane {
  if (targetH < p.height || targetW < p.width) {
    throw new Error(`upsample target ${targetH}x${targetW} smaller than source`);
  }
  return resizeBilinear(p, targetH, targetW);
}

export function highFreqExtract(p: Plane, levels: number): Plane {
  if (levels < 1 || levels > 6) throw new Error(`levels must be in [1, 6], got ${levels}`);
  if (Math.min(p.height, p.width) < 2 ** levels) {
    throw new Error(`plane ${p.height}x${p.width} too small for ${levels} levels`);
  }
  let curr = p;
  let acc: Plane | null = null;
  for (let level = 0; level < levels; level++) {
    const blurred = gaussianBlur3(curr);
    const band = makePlane(curr.height, curr.width, curr.channels);
    for (let i = 0; i < band.data.length; i++) {
      band.data[i] = curr.data[i] - blurred.data[i];
    }
    if (level === 0) {
      acc = band;
    } else {
      const up = upsample2(band, p.height, p.width);
      for (let i = 0; i < acc!.data.length; i++) acc!.data[i] += up.data[i];
    }
    if (level + 1 < levels) curr = downsampleAvg2(blurred);
  }
  return acc!;
}
