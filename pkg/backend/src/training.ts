/**
 * Fine-tuning loop.
 *
 * Per step: draw scenes with checker boxes from the manifest, optionally
 * rescale RGB in the raw domain and random-crop (always containing the
 * checker box), convert to the display domain (gamma 1/2.2), jitter the
 * masked checker region, build the combined latent (structure bands of the
 * augmented latent scaled by sqrt(alphaBar), x8 mask, masked-image
 * latent), run the denoiser once with the noise term fixed at zero,
 * decode, and take the pixel-space MSE against the clean (un-jittered)
 * image. Training drives only the denoiser; the codec is frozen.
 */

import * as tf from "@tensorflow/tfjs";
import * as fs from "fs";
import * as path from "path";

import { DEFAULT_JITTER, JitterRanges, applyColorJitter, sampleJitterFactors } from "./jitter";
import { ModelBundle, LATENT_CHANNELS, downscaleMask } from "./model";
import { decodeImagePng16 } from "./png16";
import { highFreqExtract, resizeBilinear } from "./pyramid";
import { Rng } from "./rng";
import { SQRT_ALPHA_BAR_T, SQRT_ONE_MINUS_ALPHA_BAR_T, X0Formula } from "./scheduler";
import { Plane, clonePlane, concatChannels, makePlane } from "./tensor";
import { PNG } from "pngjs";

export interface TrainConfig {
  steps: number;            // 20k in the full runs
  batchSize: number;        // 8
  gradAccum: number;        // 1, or 2 for an effective batch of 16
  learningRate: number;     // 5e-5
  warmupSteps: number;      // 150, then exponential decay
  decay: number;
  resolution: number;       // 512 full, 128 for the CPU fallback
  pColor: number;           // raw-domain RGB rescale probability
  rgbRescaleRange: [number, number];
  pCrop: number;
  cropScaleRange: [number, number];
  jitter: JitterRanges;
  pyramidLevels: number;
  laplacian: boolean;
  seed: number;
  checkpointEvery: number;
  x0Formula: X0Formula;
}

export const DEFAULT_TRAIN_CONFIG: TrainConfig = {
  steps: 20000,
  batchSize: 8,
  gradAccum: 1,
  learningRate: 5e-5,
  warmupSteps: 150,
  decay: 0.9995,
  resolution: 512,
  pColor: 0.3,
  rgbRescaleRange: [0.6, 1.4],
  pCrop: 0.7,
  cropScaleRange: [0.7, 1.0],
  jitter: DEFAULT_JITTER,
  pyramidLevels: 2,
  laplacian: true,
  seed: 0,
  checkpointEvery: 1000,
  x0Formula: "forward_scaled",
};

interface TrainSample {
  imageLinear: Plane;            // [0,1] linear
  bbox: [number, number, number, number];
}

interface ManifestEntryJson {
  image_path: string;
  checker_bbox?: number[];
  dark_level?: number | number[];
  bit_depth?: number;
}

export function loadTrainSamples(manifestPath: string): TrainSample[] {
  const obj = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
  if (obj.schema_version !== 1) {
    throw new Error(`manifest schema_version ${obj.schema_version} unsupported`);
  }
  const baseDir = path.dirname(manifestPath);
  const samples: TrainSample[] = [];
  for (const entry of obj.entries as ManifestEntryJson[]) {
    if (!entry.checker_bbox) continue; // training needs the checker box
    let imgPath = entry.image_path;
    if (!path.isAbsolute(imgPath)) imgPath = path.join(baseDir, imgPath);
    const image = readAnyPng(imgPath, entry.dark_level);
    samples.push({
      imageLinear: image,
      bbox: entry.checker_bbox as [number, number, number, number],
    });
  }
  if (samples.length === 0) {
    throw new Error("manifest has no entries with checker boxes; nothing to train on");
  }
  return samples;
}

function readAnyPng(filePath: string, darkLevel?: number | number[]): Plane {
  const buf = fs.readFileSync(filePath);
  const probe = PNG.sync.read(buf, { skipRescale: true });
  const scale = probe.depth === 16 ? 65535 : 255;
  const out = makePlane(probe.height, probe.width, 3);
  const dark = darkLevel === undefined
    ? [0, 0, 0]
    : Array.isArray(darkLevel) ? darkLevel : [darkLevel, darkLevel, darkLevel];
  for (let i = 0; i < probe.width * probe.height; i++) {
    for (let c = 0; c < 3; c++) {
      out.data[3 * i + c] = Math.max(0, (probe.data[4 * i + c] - dark[c]) / scale);
    }
  }
  return out;
}

const GAMMA = 2.2;

function toDisplay(linear: Plane): Plane {
  const out = clonePlane(linear);
  for (let i = 0; i < out.data.length; i++) {
    out.data[i] = Math.pow(Math.min(1, Math.max(0, out.data[i])), 1 / GAMMA);
  }
  return out;
}

function maskFromBbox(bbox: [number, number, number, number],
                      height: number, width: number, margin = 0.05): Plane {
  const [x0, y0, x1, y1] = bbox;
  const pad = margin * Math.hypot(x1 - x0, y1 - y0);
  const ix0 = Math.max(0, Math.floor(x0 - pad));
  const iy0 = Math.max(0, Math.floor(y0 - pad));
  const ix1 = Math.min(width, Math.ceil(x1 + pad));
  const iy1 = Math.min(height, Math.ceil(y1 + pad));
  const mask = makePlane(height, width, 1);
  for (let y = iy0; y < iy1; y++) {
    for (let x = ix0; x < ix1; x++) mask.data[y * width + x] = 1;
  }
  return mask;
}

interface PreparedSample {
  clean: Plane;      // display-domain target at the training resolution
  zCombined: Plane;  // denoiser input
}

function prepareSample(sample: TrainSample, cfg: TrainConfig,
                       model: ModelBundle, rng: Rng): PreparedSample {
  let linear = clonePlane(sample.imageLinear);
  let bbox: [number, number, number, number] = [...sample.bbox];

  if (rng.next() < cfg.pColor) {
    const gains = [rng.uniform(...cfg.rgbRescaleRange),
                   rng.uniform(...cfg.rgbRescaleRange),
                   rng.uniform(...cfg.rgbRescaleRange)];
    for (let i = 0; i < linear.data.length; i += 3) {
      linear.data[i] = Math.min(1, linear.data[i] * gains[0]);
      linear.data[i + 1] = Math.min(1, linear.data[i + 1] * gains[1]);
      linear.data[i + 2] = Math.min(1, linear.data[i + 2] * gains[2]);
    }
  }

  if (rng.next() < cfg.pCrop) {
    const scale = rng.uniform(...cfg.cropScaleRange);
    const ch = Math.max(1, Math.round(scale * linear.height));
    const cw = Math.max(1, Math.round(scale * linear.width));
    const [bx0, by0, bx1, by1] = bbox;
    const yLo = Math.max(0, Math.ceil(by1) - ch);
    const yHi = Math.min(linear.height - ch, Math.floor(by0));
    const xLo = Math.max(0, Math.ceil(bx1) - cw);
    const xHi = Math.min(linear.width - cw, Math.floor(bx0));
    if (yHi >= yLo && xHi >= xLo) {  // otherwise: no window contains the box, skip
      const oy = rng.int(yLo, yHi + 1);
      const ox = rng.int(xLo, xHi + 1);
      const cropped = makePlane(ch, cw, 3);
      for (let y = 0; y < ch; y++) {
        const src = ((y + oy) * linear.width + ox) * 3;
        cropped.data.set(linear.data.subarray(src, src + cw * 3), y * cw * 3);
      }
      linear = cropped;
      bbox = [bx0 - ox, by0 - oy, bx1 - ox, by1 - oy];
    }
  }

  const sy = cfg.resolution / linear.height;
  const sx = cfg.resolution / linear.width;
  const resized = resizeBilinear(linear, cfg.resolution, cfg.resolution);
  const scaledBbox: [number, number, number, number] = [
    bbox[0] * sx, bbox[1] * sy, bbox[2] * sx, bbox[3] * sy,
  ];

  const clean = toDisplay(resized);
  const mask = maskFromBbox(scaledBbox, cfg.resolution, cfg.resolution);
  const jittered = applyColorJitter(clean, mask, sampleJitterFactors(cfg.jitter, rng));

  const maskedImage = clonePlane(jittered);
  for (let i = 0; i < mask.data.length; i++) {
    if (mask.data[i] > 0.5) {
      maskedImage.data[3 * i] = 0;
      maskedImage.data[3 * i + 1] = 0;
      maskedImage.data[3 * i + 2] = 0;
    }
  }

  const zStar = model.codec.encode(jittered);
  const zStructure = cfg.laplacian ? highFreqExtract(zStar, cfg.pyramidLevels) : zStar;
  const zT = makePlane(zStar.height, zStar.width, zStar.channels);
  for (let i = 0; i < zT.data.length; i++) zT.data[i] = SQRT_ALPHA_BAR_T * zStructure.data[i];
  const mPrime = downscaleMask(mask, zStar.height, zStar.width);
  const zMasked = model.codec.encode(maskedImage);

  return { clean, zCombined: concatChannels([zT, mPrime, zMasked]) };
}

export interface StepLog {
  step: number;
  loss: number;
  lr: number;
}

export interface TrainResult {
  checkpointDir: string;
  losses: number[];
}

export function fineTune(manifestPath: string, outDir: string,
                         model: ModelBundle, cfgPartial: Partial<TrainConfig> = {},
                         onStep?: (log: StepLog) => void): TrainResult {
  const cfg: TrainConfig = { ...DEFAULT_TRAIN_CONFIG, ...cfgPartial };
  const samples = loadTrainSamples(manifestPath);
  fs.mkdirSync(outDir, { recursive: true });
  const logPath = path.join(outDir, "training_log.jsonl");
  fs.writeFileSync(logPath, "");
  fs.writeFileSync(path.join(outDir, "train_config.json"), JSON.stringify(cfg, null, 1));

  const rng = new Rng(cfg.seed);
  const optimizer = tf.train.adam(cfg.learningRate);
  const vars = model.denoiser.trainableVariables();
  const losses: number[] = [];

  const latentSide = Math.ceil(cfg.resolution / 8);
  const inCh = 2 * LATENT_CHANNELS + 1;

  for (let step = 1; step <= cfg.steps; step++) {
    const lr = cfg.learningRate
      * Math.min(1, step / cfg.warmupSteps)
      * Math.pow(cfg.decay, Math.max(0, step - cfg.warmupSteps));
    // tfjs reads this field on every applyGradients call
    (optimizer as unknown as { learningRate: number }).learningRate = lr;

    let stepLoss = 0;
    const accumulated: { [name: string]: tf.Tensor } = {};

    for (let micro = 0; micro < cfg.gradAccum; micro++) {
      const batch: PreparedSample[] = [];
      for (let b = 0; b < cfg.batchSize; b++) {
        batch.push(prepareSample(samples[rng.int(0, samples.length)], cfg, model, rng));
      }
      const zData = new Float32Array(cfg.batchSize * latentSide * latentSide * inCh);
      const tData = new Float32Array(cfg.batchSize * cfg.resolution * cfg.resolution * 3);
      batch.forEach((s, b) => {
        zData.set(Float32Array.from(s.zCombined.data), b * latentSide * latentSide * inCh);
        tData.set(Float32Array.from(s.clean.data), b * cfg.resolution * cfg.resolution * 3);
      });

      const { value, grads } = tf.tidy(() => {
        const z = tf.tensor4d(zData, [cfg.batchSize, latentSide, latentSide, inCh]);
        const target = tf.tensor4d(tData, [cfg.batchSize, cfg.resolution, cfg.resolution, 3]);
        return tf.variableGrads(() => {
          const eps = model.denoiser.forward(z);
          const zT = tf.slice(z, [0, 0, 0, 0], [-1, -1, -1, LATENT_CHANNELS]);
          const zHat = cfg.x0Formula === "forward_scaled"
            ? tf.sub(tf.mul(zT, SQRT_ALPHA_BAR_T), tf.mul(eps, SQRT_ONE_MINUS_ALPHA_BAR_T))
            : tf.div(tf.sub(zT, tf.mul(eps, SQRT_ONE_MINUS_ALPHA_BAR_T)), SQRT_ALPHA_BAR_T);
          // frozen decoder, mirrored in tf ops so gradients flow to the denoiser
          const rgb = tf.slice(zHat, [0, 0, 0, 0], [-1, -1, -1, 3]);
          const img01 = tf.add(tf.div(rgb, 2), 0.5);
          const decoded = tf.image.resizeBilinear(
            img01 as tf.Tensor4D, [cfg.resolution, cfg.resolution], true);
          return tf.mean(tf.square(tf.sub(decoded, target))) as tf.Scalar;
        }, vars);
      });

      stepLoss += (value.dataSync() as Float32Array)[0];
      value.dispose();
      for (const [name, grad] of Object.entries(grads)) {
        if (accumulated[name]) {
          const prev = accumulated[name];
          accumulated[name] = tf.add(prev, grad);
          prev.dispose();
          grad.dispose();
        } else {
          accumulated[name] = grad;
        }
      }
    }

    const scaled: { [name: string]: tf.Tensor } = {};
    for (const [name, grad] of Object.entries(accumulated)) {
      scaled[name] = tf.div(grad, cfg.gradAccum);
      grad.dispose();
    }
    optimizer.applyGradients(scaled as unknown as Parameters<typeof optimizer.applyGradients>[0]);
    for (const t of Object.values(scaled)) t.dispose();

    const loss = stepLoss / cfg.gradAccum;
    if (!Number.isFinite(loss)) {
      throw new Error(`training diverged: loss is not finite at step ${step}`);
    }
    losses.push(loss);
    const log: StepLog = { step, loss, lr };
    fs.appendFileSync(logPath, JSON.stringify(log) + "\n");
    onStep?.(log);

    if (step % cfg.checkpointEvery === 0) {
      model.denoiser.save(path.join(outDir, `checkpoint-${step}`),
                          { step, model_id: model.modelId, x0_formula: cfg.x0Formula });
    }
  }

  const finalDir = path.join(outDir, "checkpoint-final");
  model.denoiser.save(finalDir, {
    step: cfg.steps, model_id: model.modelId, x0_formula: cfg.x0Formula,
  });
  return { checkpointDir: finalDir, losses };
}

/** Smoothed-loss reduction between the first and last windows of a run. */
export function smoothedLossReduction(losses: number[], window = 10): number {
  if (losses.length < 2 * window) throw new Error("not enough steps to smooth");
  const head = losses.slice(0, window).reduce((a, b) => a + b, 0) / window;
  const tail = losses.slice(-window).reduce((a, b) => a + b, 0) / window;
  return (head - tail) / head;
}
