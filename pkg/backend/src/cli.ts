#!/usr/bin/env node
/**
 * Backend entry point.
 *
 *   serve --transport stdio|http:PORT --model tiny-seeded|<checkpoint dir>
 *         [--x0 forward_scaled|ddim_inverse]
 *   train --manifest m.json --out runs/ft [--steps N --batch-size B
 *         --grad-accum K --lr R --warmup W --decay D --resolution S
 *         --p-color P --p-crop P --seed N --model ...]
 *
 * In stdio mode stdout carries protocol frames only, so all console output
 * is rerouted to stderr before any model code (which may print banners)
 * loads.
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

function muteStdoutLogging() {
  // eslint-disable-next-line no-console
  console.log = console.info = console.warn = ((...args: unknown[]) => {
    process.stderr.write(args.map(String).join(" ") + "\n");
  }) as typeof console.log;
}

async function runServe(argv: { transport: string; model: string; x0: string }) {
  if (argv.transport === "stdio") muteStdoutLogging();
  const { createModel } = await import("./model");
  const { makeHandler, serveHttp, serveStdio } = await import("./server");

  const model = createModel(argv.model, argv.x0 as "forward_scaled" | "ddim_inverse");
  const handler = makeHandler(model);

  if (argv.transport === "stdio") {
    await serveStdio(handler);
    return;
  }
  if (argv.transport.startsWith("http:")) {
    const port = Number(argv.transport.split(":")[1]);
    const server = serveHttp(handler, model, port);
    server.on("listening", () => {
      const addr = server.address();
      const boundPort = typeof addr === "object" && addr ? addr.port : port;
      process.stderr.write(`listening on http://127.0.0.1:${boundPort}\n`);
    });
    return;
  }
  throw new Error(`--transport must be stdio or http:PORT, got ${argv.transport}`);
}

async function runTrain(argv: Record<string, unknown>) {
  const { createModel } = await import("./model");
  const { fineTune } = await import("./training");

  const model = createModel(String(argv.model), argv.x0 as "forward_scaled" | "ddim_inverse");
  const result = fineTune(String(argv.manifest), String(argv.out), model, {
    steps: Number(argv.steps),
    batchSize: Number(argv.batchSize),
    gradAccum: Number(argv.gradAccum),
    learningRate: Number(argv.lr),
    warmupSteps: Number(argv.warmup),
    decay: Number(argv.decay),
    resolution: Number(argv.resolution),
    pColor: Number(argv.pColor),
    pCrop: Number(argv.pCrop),
    seed: Number(argv.seed),
    x0Formula: argv.x0 as "forward_scaled" | "ddim_inverse",
  }, (log) => {
    if (log.step % 25 === 0 || log.step === 1) {
      process.stderr.write(`step ${log.step}  loss ${log.loss.toExponential(4)}  lr ${log.lr.toExponential(2)}\n`);
    }
  });
  process.stderr.write(`final checkpoint: ${result.checkpointDir}\n`);
}

yargs(hideBin(process.argv))
  .command(
    "serve",
    "answer inpainting requests over stdio or HTTP",
    (y) => y
      .option("transport", { type: "string", default: "stdio" })
      .option("model", { type: "string", default: "tiny-seeded" })
      .option("x0", { type: "string", default: "forward_scaled",
                      choices: ["forward_scaled", "ddim_inverse"] }),
    (argv) => runServe(argv as unknown as { transport: string; model: string; x0: string }),
  )
  .command(
    "train",
    "fine-tune the denoiser on a manifest of checker scenes",
    (y) => y
      .option("manifest", { type: "string", demandOption: true })
      .option("out", { type: "string", demandOption: true })
      .option("model", { type: "string", default: "tiny-seeded" })
      .option("steps", { type: "number", default: 20000 })
      .option("batch-size", { type: "number", default: 8 })
      .option("grad-accum", { type: "number", default: 1 })
      .option("lr", { type: "number", default: 5e-5 })
      .option("warmup", { type: "number", default: 150 })
      .option("decay", { type: "number", default: 0.9995 })
      .option("resolution", { type: "number", default: 512 })
      .option("p-color", { type: "number", default: 0.3 })
      .option("p-crop", { type: "number", default: 0.7 })
      .option("seed", { type: "number", default: 0 })
      .option("x0", { type: "string", default: "forward_scaled",
                      choices: ["forward_scaled", "ddim_inverse"] }),
    (argv) => runTrain(argv as Record<string, unknown>),
  )
  .demandCommand(1)
  .strict()
  .fail((msg, err) => {
    process.stderr.write(`${msg ?? err?.message ?? err}\n`);
    process.exit(1);
  })
  .parse();
