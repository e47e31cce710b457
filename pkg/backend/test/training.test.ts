import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { encodeImagePng16 } from "../src/png16";
import { createModel } from "../src/model";
import { inpaintSinglePass } from "../src/inference";
import { decodeRequest } from "../src/protocol";
import { fineTune, loadTrainSamples, smoothedLossReduction } from "../src/training";
import { Rng } from "../src/rng";
import { makePlane } from "../src/tensor";

let workDir: string;

/** Synthetic training scene: smooth tinted gradient with a patch grid in the box. */
function makeScene(seed: number, size = 128) {
  const rng = new Rng(seed);
  const img = makePlane(size, size, 3);
  const tint = [rng.uniform(0.5, 1), rng.uniform(0.5, 1), rng.uniform(0.5, 1)];
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const base = 0.15 + 0.5 * ((x + y) / (2 * size));
      for (let c = 0; c < 3; c++) {
        img.data[(y * size + x) * 3 + c] = base * tint[c];
      }
    }
  }
  // checker-like 4x6 patch grid inside the box
  const bx0 = Math.floor(size * 0.3), by0 = Math.floor(size * 0.35);
  const bw = Math.floor(size * 0.42), bh = Math.floor(bw * 4 / 6);
  const grays = [0.9, 0.75, 0.55, 0.4, 0.25, 0.12];
  for (let y = by0; y < by0 + bh; y++) {
    for (let x = bx0; x < bx0 + bw; x++) {
      const r = Math.min(3, Math.floor((y - by0) / (bh / 4)));
      const cIdx = Math.min(5, Math.floor((x - bx0) / (bw / 6)));
      const v = grays[(r * 6 + cIdx) % 6];
      for (let c = 0; c < 3; c++) {
        img.data[(y * size + x) * 3 + c] = v * tint[c];
      }
    }
  }
  return { img, bbox: [bx0, by0, bx0 + bw, by0 + bh] };
}

beforeAll(() => {
  workDir = fs.mkdtempSync(path.join(os.tmpdir(), "backend-train-"));
  const entries = [];
  for (let i = 0; i < 8; i++) {
    const { img, bbox } = makeScene(1000 + i);
    const name = `scene${i}.png`;
    fs.writeFileSync(path.join(workDir, name), encodeImagePng16(img));
    entries.push({
      image_id: `scene${i}`,
      image_path: name,
      camera_id: "synthetic",
      gt_illuminant: [1, 1, 1],
      checker_bbox: bbox,
      bit_depth: 16,
    });
  }
  fs.writeFileSync(
    path.join(workDir, "manifest.json"),
    JSON.stringify({ schema_version: 1, name: "train-smoke", entries }),
  );
});

afterAll(() => {
  fs.rmSync(workDir, { recursive: true, force: true });
});

describe("fine-tuning smoke", () => {
  it("200 steps on 8 synthetic scenes cut the smoothed loss by > 20%", () => {
    const model = createModel("tiny-seeded:3");
    const result = fineTune(path.join(workDir, "manifest.json"),
                            path.join(workDir, "run"), model, {
      steps: 200,
      batchSize: 4,
      gradAccum: 1,
      learningRate: 5e-3,   // smoke override; full runs keep the 5e-5 default
      warmupSteps: 20,
      decay: 0.999,
      resolution: 128,
      pCrop: 0.5,
      seed: 11,
      checkpointEvery: 1000,
    });

    expect(result.losses).toHaveLength(200);
    const reduction = smoothedLossReduction(result.losses, 10);
    expect(reduction).toBeGreaterThan(0.2);

    // artifacts: final checkpoint + per-step JSONL log
    expect(fs.existsSync(path.join(result.checkpointDir, "weights.json"))).toBe(true);
    const logLines = fs.readFileSync(path.join(workDir, "run", "training_log.jsonl"), "utf-8")
      .trim().split("\n");
    expect(logLines).toHaveLength(200);
    const first = JSON.parse(logLines[0]);
    expect(first).toHaveProperty("loss");
    expect(first).toHaveProperty("lr");
  }, 180_000);

  it("a trained checkpoint reloads and predicts deterministically", () => {
    const ckpt = path.join(workDir, "run", "checkpoint-final");
    const a = createModel(ckpt);
    const b = createModel(ckpt);
    const payload = fs.readFileSync(
      path.resolve(__dirname, "..", "..", "golden", "requests", "req_64_default.bin"));
    const req = decodeRequest(payload);
    const outA = inpaintSinglePass(req, a);
    const outB = inpaintSinglePass(req, b);
    for (let i = 0; i < outA.data.length; i++) {
      expect(outA.data[i]).toBe(outB.data[i]);
    }
  });

  it("rejects manifests without checker boxes", () => {
    const badDir = fs.mkdtempSync(path.join(os.tmpdir(), "backend-bad-"));
    fs.writeFileSync(path.join(badDir, "manifest.json"), JSON.stringify({
      schema_version: 1,
      entries: [{ image_path: "x.png", gt_illuminant: [1, 1, 1] }],
    }));
    expect(() => loadTrainSamples(path.join(badDir, "manifest.json"))).toThrow();
    fs.rmSync(badDir, { recursive: true, force: true });
  });
});
