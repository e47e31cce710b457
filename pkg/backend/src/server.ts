/**
 * Transports: length-prefixed frames over stdio (4-byte big-endian length,
 * one request in flight) and HTTP (POST /inpaint, GET /health). Malformed
 * requests are answered with error envelopes; the process stays up.
 */

import express from "express";
import { ModelBundle } from "./model";
import { inpaintSinglePass } from "./inference";
import { ProtocolFault, decodeRequest, encodeError, encodeResponse } from "./protocol";

export function makeHandler(model: ModelBundle): (payload: Buffer) => Buffer {
  return (payload: Buffer): Buffer => {
    let requestId: string | null = null;
    try {
      const req = decodeRequest(payload);
      requestId = req.requestId;
      const started = Date.now();
      const image = inpaintSinglePass(req, model);
      return encodeResponse(req.requestId, image, {
        name: "checker-inpaint-backend",
        modelId: model.modelId,
        elapsedMs: Date.now() - started,
        x0Formula: model.x0Formula,
      });
    } catch (err) {
      if (err instanceof ProtocolFault) {
        return encodeError(requestId, err.code, err.message);
      }
      return encodeError(requestId, "internal", String(err));
    }
  };
}

/** Serve frames on stdin/stdout until EOF. stdout carries frames only. */
export function serveStdio(handler: (payload: Buffer) => Buffer): Promise<void> {
  return new Promise((resolve) => {
    let pending = Buffer.alloc(0);
    process.stdin.on("data", (chunk: Buffer) => {
      pending = Buffer.concat([pending, chunk]);
      while (pending.length >= 4) {
        const length = pending.readUInt32BE(0);
        if (pending.length < 4 + length) break;
        const frame = pending.subarray(4, 4 + length);
        pending = pending.subarray(4 + length);
        const response = handler(Buffer.from(frame));
        const header = Buffer.alloc(4);
        header.writeUInt32BE(response.length, 0);
        process.stdout.write(Buffer.concat([header, response]));
      }
    });
    process.stdin.on("end", () => resolve());
  });
}

export function serveHttp(handler: (payload: Buffer) => Buffer, model: ModelBundle,
                          port: number, host = "127.0.0.1") {
  const app = express();
  app.use(express.raw({ type: () => true, limit: "512mb" }));

  app.get("/health", (_req, res) => {
    res.json({ name: "checker-inpaint-backend", model_id: model.modelId });
  });

  app.post("/inpaint", (req, res) => {
    const body: Buffer = Buffer.isBuffer(req.body) ? req.body : Buffer.alloc(0);
    const response = handler(body);
    const isError = response.subarray(0, 9).toString() === '{"error":';
    res.status(isError ? 400 : 200).type("application/json").send(response);
  });

  return app.listen(port, host);
}
