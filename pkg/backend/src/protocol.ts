/**
 * Wire protocol (version 1): JSON envelopes with base64 16-bit PNG images
 * and 8-bit PNG masks. Full schema in ../docs/protocol.md. Unknown fields
 * are ignored; anything else malformed gets a typed error.
 */

import { z } from "zod";
import { Plane } from "./tensor";
import { decodeImagePng16, decodeMaskPng, encodeImagePng16 } from "./png16";

export const PROTOCOL_VERSION = 1;

export class ProtocolFault extends Error {
  constructor(public code: "decode_error" | "protocol_error" | "internal", message: string) {
    super(message);
  }
}

const planeField = z.object({
  width: z.number().int().positive(),
  height: z.number().int().positive(),
  encoding: z.string(),
  data: z.string(),
});

const requestSchema = z.object({
  protocol_version: z.number(),
  request_id: z.union([z.string(), z.number()]).transform(String),
  image: planeField,
  mask: planeField,
  config: z
    .object({
      timestep_mode: z.string().default("fixed_T"),
      pyramid_levels: z.number().int().min(1).default(2),
      text_prompt: z.string().default(""),
      model_id: z.string().default(""),
      ablation: z.object({ laplacian: z.boolean().default(true) }).loose().default({ laplacian: true }),
    })
    .loose(),
});

export interface InpaintRequest {
  requestId: string;
  image: Plane;   // HxWx3 in [0,1], display domain
  mask: Plane;    // HxWx1 in {0,1}
  config: {
    timestepMode: string;
    pyramidLevels: number;
    textPrompt: string;
    modelId: string;
    laplacian: boolean;
  };
}

function b64decode(text: string, where: string): Buffer {
  if (!/^[A-Za-z0-9+/]*={0,2}$/.test(text)) {
    throw new ProtocolFault("decode_error", `${where}.data is not valid base64`);
  }
  return Buffer.from(text, "base64");
}

export function decodeRequest(payload: Buffer): InpaintRequest {
  let obj: unknown;
  try {
    obj = JSON.parse(payload.toString("utf-8"));
  } catch (err) {
    throw new ProtocolFault("decode_error", `request envelope is not valid JSON: ${err}`);
  }
  const parsed = requestSchema.safeParse(obj);
  if (!parsed.success) {
    throw new ProtocolFault("decode_error", `request envelope: ${parsed.error.issues[0]?.message ?? "invalid"}`);
  }
  const env = parsed.data;
  if (env.protocol_version !== PROTOCOL_VERSION) {
    throw new ProtocolFault(
      "protocol_error",
      `unsupported protocol_version ${env.protocol_version}, this backend speaks ${PROTOCOL_VERSION}`,
    );
  }

  let image: Plane;
  let mask: Plane;
  try {
    image = decodeImagePng16(b64decode(env.image.data, "image"));
    mask = decodeMaskPng(b64decode(env.mask.data, "mask"));
  } catch (err) {
    if (err instanceof ProtocolFault) throw err;
    throw new ProtocolFault("decode_error", String(err));
  }
  if (image.width !== env.image.width || image.height !== env.image.height) {
    throw new ProtocolFault(
      "decode_error",
      `image: declared ${env.image.width}x${env.image.height} but PNG decodes to ${image.width}x${image.height}`,
    );
  }
  if (mask.width !== image.width || mask.height !== image.height) {
    throw new ProtocolFault("decode_error", "mask dimensions do not match image");
  }
  return {
    requestId: env.request_id,
    image,
    mask,
    config: {
      timestepMode: env.config.timestep_mode,
      pyramidLevels: env.config.pyramid_levels,
      textPrompt: env.config.text_prompt,
      modelId: env.config.model_id,
      laplacian: env.config.ablation.laplacian,
    },
  };
}

export interface BackendInfo {
  name: string;
  modelId: string;
  elapsedMs: number;
  x0Formula: string;
}

export function encodeResponse(requestId: string, image: Plane, info: BackendInfo): Buffer {
  // Keys are written in sorted order so identical responses are identical bytes.
  const envelope = {
    backend_info: {
      elapsed_ms: info.elapsedMs,
      model_id: info.modelId,
      name: info.name,
      x0_formula: info.x0Formula,
    },
    image: {
      data: encodeImagePng16(image).toString("base64"),
      encoding: "png16",
      height: image.height,
      width: image.width,
    },
    protocol_version: PROTOCOL_VERSION,
    request_id: requestId,
  };
  return Buffer.from(JSON.stringify(envelope), "utf-8");
}

export function encodeError(requestId: string | null, code: string, message: string): Buffer {
  const envelope = {
    error: { code, message },
    protocol_version: PROTOCOL_VERSION,
    request_id: requestId,
  };
  return Buffer.from(JSON.stringify(envelope), "utf-8");
}
