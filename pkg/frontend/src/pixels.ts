/**
 * Pixel plumbing: 8-bit PNGs in and out of float64 intensity planes.
 *
 * Every numeric step mirrors the in-process reference targets exactly:
 * intensities are byte / 255 in float64, grayscale is BT.601 luma evaluated
 * as (wr*r + wg*g) + wb*b, and quantization is floor(v * 255 + 0.5). Keeping
 * the operation order identical is what makes counts match exactly and fused
 * images byte-identical across the wire.
 */
import { PNG } from "pngjs";

export interface IntensityImage {
  width: number;
  height: number;
  /** Row-major [0, 1] samples, one per pixel. */
  values: Float64Array;
}

export interface RgbImage {
  width: number;
  height: number;
  r: Float64Array;
  g: Float64Array;
  b: Float64Array;
}

export function decodeRgbPng(buffer: Buffer): RgbImage {
  const png = PNG.sync.read(buffer);
  const n = png.width * png.height;
  const r = new Float64Array(n);
  const g = new Float64Array(n);
  const b = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    r[i] = png.data[4 * i] / 255;
    g[i] = png.data[4 * i + 1] / 255;
    b[i] = png.data[4 * i + 2] / 255;
  }
  return { width: png.width, height: png.height, r, g, b };
}

export function decodeGrayPng(buffer: Buffer): IntensityImage {
  const png = PNG.sync.read(buffer);
  const n = png.width * png.height;
  const values = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    values[i] = png.data[4 * i] / 255;
  }
  return { width: png.width, height: png.height, values };
}

const GRAY_WEIGHTS = [0.299, 0.587, 0.114] as const;

export function toGrayscale(image: RgbImage): IntensityImage {
  const [wr, wg, wb] = GRAY_WEIGHTS;
  const n = image.width * image.height;
  const values = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    values[i] = wr * image.r[i] + wg * image.g[i] + wb * image.b[i];
  }
  return { width: image.width, height: image.height, values };
}

/** Round-half-up quantization of [0, 1] intensities to bytes. */
export function quantize(values: Float64Array): Uint8Array {
  const out = new Uint8Array(values.length);
  for (let i = 0; i < values.length; i++) {
    out[i] = Math.floor(values[i] * 255 + 0.5);
  }
  return out;
}

export function encodeGrayPng(image: IntensityImage): Buffer {
  const bytes = quantize(image.values);
  const png = new PNG({ width: image.width, height: image.height });
  for (let i = 0; i < bytes.length; i++) {
    png.data[4 * i] = bytes[i];
    png.data[4 * i + 1] = bytes[i];
    png.data[4 * i + 2] = bytes[i];
    png.data[4 * i + 3] = 255;
  }
  return PNG.sync.write(png, { colorType: 0 });
}
