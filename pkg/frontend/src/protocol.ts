/**
 * Wire protocol: newline-delimited JSON, one request object per line.
 *
 *   request:  {"id": str, "task": "count" | "segment" | "fuse",
 *              "width": int, "height": int,
 *              "visible_png_b64": str, "infrared_png_b64": str}
 *   response: {"id": str, "ok": true, "count": number}
 *           | {"id": str, "ok": true, "labels_b64": str}    row-major bytes
 *           | {"id": str, "ok": true, "fused_png_b64": str} grayscale PNG
 *           | {"id": str | null, "ok": false, "error": str}
 *
 * Resilience contract: every input line gets exactly one response line.
 * Garbage that does not decode to an object with a string id is answered
 * with id null; a well-formed envelope with a bad task or payload gets its
 * id echoed back. handleLine never throws.
 */
import {
  decodeGrayPng,
  decodeRgbPng,
  encodeGrayPng,
  IntensityImage,
  toGrayscale,
} from "./pixels";
import { countBlobs, fuseMax, segmentBands } from "./surrogates";

export const TASKS = ["count", "segment", "fuse"] as const;
export type Task = (typeof TASKS)[number];

export interface WireRequest {
  id: string;
  task: Task;
  width: number;
  height: number;
  visible_png_b64: string;
  infrared_png_b64: string;
}

export type WireResponse =
  | { id: string; ok: true; count: number }
  | { id: string; ok: true; labels_b64: string }
  | { id: string; ok: true; fused_png_b64: string }
  | { id: string | null; ok: false; error: string };

function failure(id: string | null, error: string): WireResponse {
  return { id, ok: false, error };
}

function isPositiveInt(value: unknown): value is number {
  return typeof value === "number" && Number.isInteger(value) && value > 0;
}

/** Narrow an arbitrary decoded value to a WireRequest or explain why not. */
export function validateRequest(
  value: unknown,
): { ok: true; request: WireRequest } | { ok: false; response: WireResponse } {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    return { ok: false, response: failure(null, "request is not a JSON object") };
  }
  const obj = value as Record<string, unknown>;
  const id = typeof obj.id === "string" ? obj.id : null;
  if (id === null) {
    return { ok: false, response: failure(null, "request has no string id") };
  }
  if (!TASKS.includes(obj.task as Task)) {
    return {
      ok: false,
      response: failure(id, `unknown task ${JSON.stringify(obj.task)}; expected count, segment, or fuse`),
    };
  }
  if (!isPositiveInt(obj.width) || !isPositiveInt(obj.height)) {
    return { ok: false, response: failure(id, "width and height must be positive integers") };
  }
  if (typeof obj.visible_png_b64 !== "string" || typeof obj.infrared_png_b64 !== "string") {
    return { ok: false, response: failure(id, "visible_png_b64 and infrared_png_b64 must be strings") };
  }
  return {
    ok: true,
    request: {
      id,
      task: obj.task as Task,
      width: obj.width,
      height: obj.height,
      visible_png_b64: obj.visible_png_b64,
      infrared_png_b64: obj.infrared_png_b64,
    },
  };
}

function decodeImages(
  request: WireRequest,
): { grayVisible: IntensityImage; infrared: IntensityImage } {
  const visible = decodeRgbPng(Buffer.from(request.visible_png_b64, "base64"));
  const infrared = decodeGrayPng(Buffer.from(request.infrared_png_b64, "base64"));
  for (const [name, image] of [
    ["visible", visible],
    ["infrared", infrared],
  ] as const) {
    if (image.width !== request.width || image.height !== request.height) {
      throw new Error(
        `${name} image is ${image.width}x${image.height}, request says ${request.width}x${request.height}`,
      );
    }
  }
  return { grayVisible: toGrayscale(visible), infrared };
}

export function handleRequest(request: WireRequest): WireResponse {
  let images;
  try {
    images = decodeImages(request);
  } catch (error) {
    return failure(request.id, `undecodable image payload: ${(error as Error).message}`);
  }
  const { grayVisible, infrared } = images;
  if (request.task === "count") {
    return { id: request.id, ok: true, count: countBlobs(infrared) };
  }
  if (request.task === "segment") {
    const labels = segmentBands(grayVisible, infrared);
    return { id: request.id, ok: true, labels_b64: Buffer.from(labels).toString("base64") };
  }
  const fused = encodeGrayPng(fuseMax(grayVisible, infrared));
  return { id: request.id, ok: true, fused_png_b64: fused.toString("base64") };
}

/** Answer one raw input line. Never throws; always returns one response. */
export function handleLine(line: string): WireResponse {
  let decoded: unknown;
  try {
    decoded = JSON.parse(line);
  } catch (error) {
    return failure(null, `request is not JSON: ${(error as Error).message}`);
  }
  const validated = validateRequest(decoded);
  if (!validated.ok) {
    return validated.response;
  }
  try {
    return handleRequest(validated.request);
  } catch (error) {
    return failure(validated.request.id, `internal error: ${(error as Error).message}`);
  }
}
