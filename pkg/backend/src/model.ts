/**
 * Model plumbing: a frozen latent codec, the trainable denoiser, and
 * checkpoint I/O.
 *
 * The production path wraps a pretrained latent inpainting model
 * (PRODUCTION_MODEL_ID); its autoencoder and denoiser are consumed as
 * downloaded artifacts, never reimplemented here. CI and small machines
 * use the "tiny-seeded" fallback: a deterministic linear codec (8x block
 * means, so the latent grid matches the x8 mask downscale) and a small
 * seeded conv net with the same input/output contract
 * (h x w x (2*4+1) -> h x w x 4).
 */

import * as tf from "@tensorflow/tfjs";
import * as fs from "fs";
import * as path from "path";
import { Plane, makePlane } from "./tensor";
import { resizeBilinear } from "./pyramid";
import { Rng } from "./rng";
import { X0Formula } from "./scheduler";

export const LATENT_CHANNELS = 4;
export const LATENT_FACTOR = 8;

export const PRODUCTION_MODEL_ID = "stabilityai/stable-diffusion-2-inpainting";
export const FALLBACK_MODEL_ID = "tiny-seeded";

const LUMA = [0.2126, 0.7152, 0.0722];

/** Frozen, loss-tolerant autoencoder stand-in: 8x8 block means of RGB plus
 * a luma channel, affinely centered to roughly [-1, 1]. */
export class LatentCodec {
  latentDims(height: number, width: number): [number, number] {
    return [Math.ceil(height / LATENT_FACTOR), Math.ceil(width / LATENT_FACTOR)];
  }

  encode(img: Plane): Plane {
    const [lh, lw] = this.latentDims(img.height, img.width);
    const out = makePlane(lh, lw, LATENT_CHANNELS);
    for (let ly = 0; ly < lh; ly++) {
      const y0 = ly * LATENT_FACTOR;
      const y1 = Math.min(y0 + LATENT_FACTOR, img.height);
      for (let lx = 0; lx < lw; lx++) {
        const x0 = lx * LATENT_FACTOR;
        const x1 = Math.min(x0 + LATENT_FACTOR, img.width);
        let r = 0, g = 0, b = 0;
        const count = (y1 - y0) * (x1 - x0);
        for (let y = y0; y < y1; y++) {
          for (let x = x0; x < x1; x++) {
            const i = (y * img.width + x) * 3;
            r += img.data[i];
            g += img.data[i + 1];
            b += img.data[i + 2];
          }
        }
        r /= count; g /= count; b /= count;
        const o = (ly * lw + lx) * LATENT_CHANNELS;
        out.data[o] = 2 * (r - 0.5);
        out.data[o + 1] = 2 * (g - 0.5);
        out.data[o + 2] = 2 * (b - 0.5);
        out.data[o + 3] = 2 * (LUMA[0] * r + LUMA[1] * g + LUMA[2] * b - 0.5);
      }
    }
    return out;
  }

  decode(latent: Plane, outHeight: number, outWidth: number): Plane {
    const rgb = makePlane(latent.height, latent.width, 3);
    for (let i = 0; i < latent.height * latent.width; i++) {
      for (let c = 0; c < 3; c++) {
        rgb.data[3 * i + c] = latent.data[LATENT_CHANNELS * i + c] / 2 + 0.5;
      }
    }
    return resizeBilinear(rgb, outHeight, outWidth);
  }
}

/** Mask resampled x8 to the latent grid (block means, stays in [0, 1]). */
export function downscaleMask(mask: Plane, lh: number, lw: number): Plane {
  const out = makePlane(lh, lw, 1);
  for (let ly = 0; ly < lh; ly++) {
    const y0 = ly * LATENT_FACTOR;
    const y1 = Math.min(y0 + LATENT_FACTOR, mask.height);
    for (let lx = 0; lx < lw; lx++) {
      const x0 = lx * LATENT_FACTOR;
      const x1 = Math.min(x0 + LATENT_FACTOR, mask.width);
      let sum = 0;
      for (let y = y0; y < y1; y++) {
        for (let x = x0; x < x1; x++) sum += mask.data[y * mask.width + x];
      }
      out.data[ly * lw + lx] = sum / ((y1 - y0) * (x1 - x0));
    }
  }
  return out;
}

interface LayerSpec {
  name: string;
  inCh: number;
  outCh: number;
}

const LAYERS: LayerSpec[] = [
  { name: "conv1", inCh: 2 * LATENT_CHANNELS + 1, outCh: 8 },
  { name: "conv2", inCh: 8, outCh: 8 },
  { name: "conv3", inCh: 8, outCh: LATENT_CHANNELS },
];

/** Small conv denoiser with the combined-latent input contract. Runs at the
 * single fixed timestep, so the timestep enters as learned biases; the text
 * condition is accepted but ignored by this fallback (the production model
 * consumes it through cross-attention). */
let instanceCounter = 0;

export class TinyDenoiser {
  readonly kernels: tf.Variable[] = [];
  readonly biases: tf.Variable[] = [];

  constructor(weights: { kernels: Float32Array[]; biases: Float32Array[] }) {
    // tf registers variable names globally, so each instance gets a suffix
    const id = instanceCounter++;
    LAYERS.forEach((spec, i) => {
      this.kernels.push(tf.variable(
        tf.tensor4d(weights.kernels[i], [3, 3, spec.inCh, spec.outCh]), true,
        `${spec.name}_k_${id}`));
      this.biases.push(tf.variable(
        tf.tensor1d(weights.biases[i]), true, `${spec.name}_b_${id}`));
    });
  }

  static seeded(seed: number): TinyDenoiser {
    const rng = new Rng(seed);
    const kernels: Float32Array[] = [];
    const biases: Float32Array[] = [];
    for (const spec of LAYERS) {
      const fanIn = 9 * spec.inCh;
      const std = Math.sqrt(2 / fanIn);
      const k = new Float32Array(9 * spec.inCh * spec.outCh);
      for (let i = 0; i < k.length; i++) k[i] = Math.fround(rng.gaussian() * std);
      kernels.push(k);
      biases.push(new Float32Array(spec.outCh));
    }
    return new TinyDenoiser({ kernels, biases });
  }

  trainableVariables(): tf.Variable[] {
    return [...this.kernels, ...this.biases];
  }

  /** Differentiable forward pass on an NHWC batch. */
  forward(x: tf.Tensor4D): tf.Tensor4D {
    let h = x;
    for (let i = 0; i < LAYERS.length; i++) {
      h = tf.add(tf.conv2d(h, this.kernels[i] as tf.Tensor4D, 1, "same"), this.biases[i]) as tf.Tensor4D;
      if (i + 1 < LAYERS.length) h = tf.relu(h);
    }
    return h;
  }

  /** Plane-in/plane-out prediction for inference. */
  predict(zCombined: Plane): Plane {
    const out = tf.tidy(() => {
      const x = tf.tensor4d(
        Float32Array.from(zCombined.data),
        [1, zCombined.height, zCombined.width, zCombined.channels],
      );
      return this.forward(x);
    });
    const values = out.dataSync() as Float32Array;
    out.dispose();
    return {
      data: Float64Array.from(values),
      height: zCombined.height,
      width: zCombined.width,
      channels: LATENT_CHANNELS,
    };
  }

  save(dir: string, meta: Record<string, unknown>): void {
    fs.mkdirSync(dir, { recursive: true });
    const layers = LAYERS.map((spec, i) => ({
      name: spec.name,
      kernel_shape: [3, 3, spec.inCh, spec.outCh],
      kernel_b64: Buffer.from((this.kernels[i].dataSync() as Float32Array).buffer).toString("base64"),
      bias_b64: Buffer.from((this.biases[i].dataSync() as Float32Array).buffer).toString("base64"),
    }));
    fs.writeFileSync(
      path.join(dir, "weights.json"),
      JSON.stringify({ format: "tiny-denoiser-v1", meta, layers }, null, 1),
    );
  }

  static load(dir: string): TinyDenoiser {
    const payload = JSON.parse(fs.readFileSync(path.join(dir, "weights.json"), "utf-8"));
    if (payload.format !== "tiny-denoiser-v1") {
      throw new Error(`unsupported checkpoint format ${payload.format}`);
    }
    const kernels: Float32Array[] = [];
    const biases: Float32Array[] = [];
    for (const layer of payload.layers) {
      const kb = Buffer.from(layer.kernel_b64, "base64");
      kernels.push(new Float32Array(kb.buffer, kb.byteOffset, kb.length / 4).slice());
      const bb = Buffer.from(layer.bias_b64, "base64");
      biases.push(new Float32Array(bb.buffer, bb.byteOffset, bb.length / 4).slice());
    }
    return new TinyDenoiser({ kernels, biases });
  }
}

export interface ModelBundle {
  codec: LatentCodec;
  denoiser: TinyDenoiser;
  modelId: string;
  x0Formula: X0Formula;
}

/** Resolve a model spec: "tiny-seeded", "tiny-seeded:<seed>", or a
 * checkpoint directory produced by training. */
export function createModel(spec: string, x0Formula: X0Formula = "forward_scaled"): ModelBundle {
  tf.setBackend("cpu");
  if (spec === FALLBACK_MODEL_ID || spec.startsWith(`${FALLBACK_MODEL_ID}:`)) {
    const seed = spec.includes(":") ? Number(spec.split(":")[1]) : 42;
    return {
      codec: new LatentCodec(),
      denoiser: TinyDenoiser.seeded(seed),
      modelId: `${FALLBACK_MODEL_ID}:${seed}`,
      x0Formula,
    };
  }
  if (fs.existsSync(path.join(spec, "weights.json"))) {
    return {
      codec: new LatentCodec(),
      denoiser: TinyDenoiser.load(spec),
      modelId: spec,
      x0Formula,
    };
  }
  throw new Error(
    `unknown model spec "${spec}": use "${FALLBACK_MODEL_ID}", a checkpoint directory, ` +
    `or convert the pretrained ${PRODUCTION_MODEL_ID} weights (see README)`,
  );
}
