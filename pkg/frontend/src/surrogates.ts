/**
 * The three model callbacks served over the wire: blob counting, intensity
 * band segmentation, and max fusion.
 *
 * These are float64-faithful ports of the in-process reference targets. The
 * blur reproduces a separable Gaussian (sigma 2, kernel truncated at three
 * sigma, reflected borders) bit for bit: columns are filtered before rows,
 * and each output sample accumulates center-first, then symmetric tap pairs
 * from the outermost inward as (left + right) * weight. With the kernel
 * weights fixed as literals below, every arithmetic step is a correctly
 * rounded IEEE-754 operation, so the blurred field -- and therefore every
 * thresholded component -- matches the reference implementation exactly.
 */
import { IntensityImage, quantize } from "./pixels";

/** Sampled normalized Gaussian, sigma 2, radius 6 (center first). */
const KERNEL = [
  0.19967562749792112,
  0.17621312278855084,
  0.12110939007484814,
  0.06482518513852684,
  0.027023157602879527,
  0.008773134791588384,
  0.0022181958546457657,
] as const;
const RADIUS = KERNEL.length - 1;

export const COUNT_THRESHOLD = 0.6;
export const COUNT_MIN_AREA = 9;
export const SEGMENT_BANDS = 4;

/** Mirror an out-of-range index back into [0, n) with the edge duplicated. */
function reflectIndex(i: number, n: number): number {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

function blurLine(ext: Float64Array, out: Float64Array, n: number): void {
  for (let c = 0; c < n; c++) {
    const e = c + RADIUS;
    let acc = ext[e] * KERNEL[0];
    for (let d = RADIUS; d >= 1; d--) {
      acc += (ext[e - d] + ext[e + d]) * KERNEL[d];
    }
    out[c] = acc;
  }
}

export function gaussianBlur(image: IntensityImage): IntensityImage {
  const { width, height, values } = image;
  const tmp = new Float64Array(values.length);
  const out = new Float64Array(values.length);

  const extCol = new Float64Array(height + 2 * RADIUS);
  const outCol = new Float64Array(height);
  for (let x = 0; x < width; x++) {
    for (let i = -RADIUS; i < height + RADIUS; i++) {
      extCol[i + RADIUS] = values[reflectIndex(i, height) * width + x];
    }
    blurLine(extCol, outCol, height);
    for (let y = 0; y < height; y++) {
      tmp[y * width + x] = outCol[y];
    }
  }

  const extRow = new Float64Array(width + 2 * RADIUS);
  const outRow = new Float64Array(width);
  for (let y = 0; y < height; y++) {
    for (let i = -RADIUS; i < width + RADIUS; i++) {
      extRow[i + RADIUS] = tmp[y * width + reflectIndex(i, width)];
    }
    blurLine(extRow, outRow, width);
    out.set(outRow.subarray(0, width), y * width);
  }

  return { width, height, values: out };
}

/**
 * Count the 4-connected components of a binary mask that cover at least
 * minArea pixels.
 */
export function countComponents(
  mask: Uint8Array,
  width: number,
  height: number,
  minArea: number,
): number {
  const seen = new Uint8Array(width * height);
  const stack: number[] = [];
  let count = 0;

  for (let start = 0; start < seen.length; start++) {
    if (seen[start] || !mask[start]) continue;
    let area = 0;
    seen[start] = 1;
    stack.push(start);
    while (stack.length > 0) {
      const idx = stack.pop() as number;
      area++;
      const x = idx % width;
      for (const next of [idx - width, idx + width, idx - 1, idx + 1]) {
        if (next === idx - 1 && x === 0) continue;
        if (next === idx + 1 && x === width - 1) continue;
        if (next < 0 || next >= seen.length) continue;
        if (seen[next] || !mask[next]) continue;
        seen[next] = 1;
        stack.push(next);
      }
    }
    if (area >= minArea) count++;
  }
  return count;
}

/**
 * Count bright blobs: blur, binarize strictly above the threshold, label
 * 4-connected components, and keep those covering at least minArea pixels.
 */
export function countBlobs(
  infrared: IntensityImage,
  threshold: number = COUNT_THRESHOLD,
  minArea: number = COUNT_MIN_AREA,
): number {
  const { width, height } = infrared;
  const blurred = gaussianBlur(infrared).values;
  const mask = new Uint8Array(width * height);
  for (let i = 0; i < mask.length; i++) {
    mask[i] = blurred[i] > threshold ? 1 : 0;
  }
  return countComponents(mask, width, height, minArea);
}

/**
 * Band labels of the fused intensity g = 0.5 * gray(visible) + 0.5 *
 * infrared: label = min(floor(g * bands), bands - 1) so g = 1 stays in the
 * top band.
 */
export function segmentBands(
  grayVisible: IntensityImage,
  infrared: IntensityImage,
  bands: number = SEGMENT_BANDS,
): Uint8Array {
  const n = grayVisible.values.length;
  const labels = new Uint8Array(n);
  for (let i = 0; i < n; i++) {
    const g = 0.5 * grayVisible.values[i] + 0.5 * infrared.values[i];
    labels[i] = Math.min(Math.floor(g * bands), bands - 1);
  }
  return labels;
}

/** Pixelwise maximum of grayscale visible and infrared. */
export function fuseMax(
  grayVisible: IntensityImage,
  infrared: IntensityImage,
): IntensityImage {
  const n = grayVisible.values.length;
  const values = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    values[i] = Math.max(grayVisible.values[i], infrared.values[i]);
  }
  return { width: grayVisible.width, height: grayVisible.height, values };
}

/** Convenience for tests: the fused image as round-half-up bytes. */
export function fusedBytes(
  grayVisible: IntensityImage,
  infrared: IntensityImage,
): Uint8Array {
  return quantize(fuseMax(grayVisible, infrared).values);
}
