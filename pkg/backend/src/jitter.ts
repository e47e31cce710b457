/**
 * Masked color jitter for training: out = (1 - M) * img + M * T(img) with
 * T = brightness -> contrast -> saturation, factors drawn uniformly from
 * the configured ranges, each stage clamped to [0, 1]. Pixels outside the
 * mask are untouched. Matches the estimation toolkit's augmentation
 * semantics (Rec. 709 luma, masked-region mean as the contrast anchor).
 */

import { Plane, clonePlane } from "./tensor";
import { Rng } from "./rng";

const LUMA_R = 0.2126;
const LUMA_G = 0.7152;
const LUMA_B = 0.0722;

export interface JitterRanges {
  brightness: [number, number];
  contrast: [number, number];
  saturation: [number, number];
}

export const DEFAULT_JITTER: JitterRanges = {
  brightness: [0.8, 2.0],
  contrast: [0.8, 1.4],
  saturation: [0.8, 1.4],
};

export interface JitterFactors {
  brightness: number;
  contrast: number;
  saturation: number;
}

export function sampleJitterFactors(ranges: JitterRanges, rng: Rng): JitterFactors {
  return {
    brightness: rng.uniform(...ranges.brightness),
    contrast: rng.uniform(...ranges.contrast),
    saturation: rng.uniform(...ranges.saturation),
  };
}

const clamp01 = (v: number) => Math.min(1, Math.max(0, v));

export function applyColorJitter(img: Plane, mask: Plane, f: JitterFactors): Plane {
  if (img.height !== mask.height || img.width !== mask.width) {
    throw new Error("jitter: mask dimensions do not match image");
  }
  const n = img.height * img.width;
  const out = clonePlane(img);

  const maskedIdx: number[] = [];
  for (let i = 0; i < n; i++) if (mask.data[i] > 0.5) maskedIdx.push(i);
  if (maskedIdx.length === 0) return out;

  // working copy of the masked pixels
  const work = new Float64Array(maskedIdx.length * 3);
  for (let k = 0; k < maskedIdx.length; k++) {
    const i = maskedIdx[k];
    work[3 * k] = img.data[3 * i];
    work[3 * k + 1] = img.data[3 * i + 1];
    work[3 * k + 2] = img.data[3 * i + 2];
  }

  // brightness
  for (let j = 0; j < work.length; j++) work[j] = clamp01(work[j] * f.brightness);

  // contrast around the masked-region mean luma
  let anchor = 0;
  for (let k = 0; k < maskedIdx.length; k++) {
    anchor += LUMA_R * work[3 * k] + LUMA_G * work[3 * k + 1] + LUMA_B * work[3 * k + 2];
  }
  anchor /= maskedIdx.length;
  for (let j = 0; j < work.length; j++) {
    work[j] = clamp01((work[j] - anchor) * f.contrast + anchor);
  }

  // saturation: lerp between per-pixel luma and color
  for (let k = 0; k < maskedIdx.length; k++) {
    const luma = LUMA_R * work[3 * k] + LUMA_G * work[3 * k + 1] + LUMA_B * work[3 * k + 2];
    for (let c = 0; c < 3; c++) {
      work[3 * k + c] = clamp01(luma + (work[3 * k + c] - luma) * f.saturation);
    }
  }

  for (let k = 0; k < maskedIdx.length; k++) {
    const i = maskedIdx[k];
    out.data[3 * i] = work[3 * k];
    out.data[3 * i + 1] = work[3 * k + 1];
    out.data[3 * i + 2] = work[3 * k + 2];
  }
  return out;
}
