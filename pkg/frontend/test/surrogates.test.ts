import { describe, expect, it } from "vitest";

import { IntensityImage, quantize } from "../src/pixels";
import {
  countBlobs,
  countComponents,
  fuseMax,
  gaussianBlur,
  segmentBands,
} from "../src/surrogates";

function image(width: number, height: number, fill = 0): IntensityImage {
  return { width, height, values: new Float64Array(width * height).fill(fill) };
}

function paintRect(
  img: IntensityImage,
  x0: number,
  y0: number,
  w: number,
  h: number,
  value: number,
): void {
  for (let y = y0; y < y0 + h; y++) {
    for (let x = x0; x < x0 + w; x++) {
      img.values[y * img.width + x] = value;
    }
  }
}

describe("gaussianBlur", () => {
  it("preserves constant fields up to kernel normalization noise", () => {
    const img = image(25, 19, 0.37);
    const blurred = gaussianBlur(img);
    for (const v of blurred.values) {
      expect(Math.abs(v - 0.37)).toBeLessThan(1e-12);
    }
  });

  it("is symmetric around a centered impulse", () => {
    const img = image(31, 31);
    img.values[15 * 31 + 15] = 1;
    const blurred = gaussianBlur(img).values;
    for (let y = 0; y < 31; y++) {
      for (let x = 0; x < 31; x++) {
        expect(blurred[y * 31 + x]).toBe(blurred[x * 31 + y]);
        expect(blurred[y * 31 + x]).toBe(blurred[(30 - y) * 31 + (30 - x)]);
      }
    }
  });

  it("conserves total mass away from borders", () => {
    const img = image(41, 41);
    img.values[20 * 41 + 20] = 1;
    const blurred = gaussianBlur(img).values;
    const total = blurred.reduce((acc, v) => acc + v, 0);
    expect(Math.abs(total - 1)).toBeLessThan(1e-12);
  });
});

describe("countBlobs", () => {
  it("counts well-separated bright squares", () => {
    const img = image(64, 64, 0);
    paintRect(img, 6, 6, 10, 10, 1);
    paintRect(img, 40, 40, 10, 10, 1);
    expect(countBlobs(img)).toBe(2);
  });

  it("sees an empty field as zero", () => {
    expect(countBlobs(image(32, 32, 0))).toBe(0);
  });

  it("drops components smaller than the area floor", () => {
    const img = image(64, 64, 0);
    paintRect(img, 10, 10, 14, 14, 1); // big blob: kept
    // A lone bright pixel blurs far below the 0.6 threshold, and even a
    // supra-threshold plateau smaller than minArea must be discarded.
    expect(countBlobs(img, 0.6, 9)).toBe(1);
    expect(countBlobs(img, 0.6, 400)).toBe(0);
  });

  it("binarizes strictly above the threshold", () => {
    // The blur of an all-zero field is exactly zero, so threshold 0 with a
    // strict comparison keeps nothing while any negative threshold keeps
    // every pixel as one giant component.
    const img = image(32, 32, 0);
    expect(countBlobs(img, 0, 1)).toBe(0);
    expect(countBlobs(img, -1, 1)).toBe(1);
  });
});

describe("countComponents", () => {
  function mask(rows: number[][]): { mask: Uint8Array; width: number; height: number } {
    const height = rows.length;
    const width = rows[0].length;
    const flat = new Uint8Array(width * height);
    rows.forEach((row, y) => row.forEach((v, x) => (flat[y * width + x] = v)));
    return { mask: flat, width, height };
  }

  it("does not connect diagonally", () => {
    const m = mask([
      [1, 0],
      [0, 1],
    ]);
    expect(countComponents(m.mask, m.width, m.height, 1)).toBe(2);
  });

  it("connects across rows and columns", () => {
    const m = mask([
      [0, 1, 0],
      [1, 1, 1],
      [0, 1, 0],
    ]);
    expect(countComponents(m.mask, m.width, m.height, 1)).toBe(1);
  });

  it("applies the inclusive area floor per component", () => {
    const m = mask([
      [1, 1, 0, 0, 1],
      [1, 1, 0, 0, 0],
      [0, 0, 0, 0, 0],
    ]);
    expect(countComponents(m.mask, m.width, m.height, 1)).toBe(2);
    expect(countComponents(m.mask, m.width, m.height, 4)).toBe(1);
    expect(countComponents(m.mask, m.width, m.height, 5)).toBe(0);
  });
});

describe("segmentBands", () => {
  it("labels band boundaries with floor semantics and a capped top band", () => {
    const gray = image(6, 1);
    const inf = image(6, 1);
    const g = [0.0, 0.249, 0.25, 0.5, 0.75, 1.0];
    for (let i = 0; i < 6; i++) {
      gray.values[i] = g[i];
      inf.values[i] = g[i]; // 0.5*a + 0.5*a = a exactly in IEEE-754
    }
    expect(Array.from(segmentBands(gray, inf, 4))).toEqual([0, 0, 1, 2, 3, 3]);
  });
});

describe("fuseMax and quantize", () => {
  it("takes the pixelwise maximum", () => {
    const gray = image(3, 1);
    const inf = image(3, 1);
    gray.values.set([0.2, 0.9, 0.5]);
    inf.values.set([0.7, 0.1, 0.5]);
    expect(Array.from(fuseMax(gray, inf).values)).toEqual([0.7, 0.9, 0.5]);
  });

  it("quantizes round-half-up", () => {
    const values = new Float64Array([0, 1, 0.5, 1 / 255, 0.4 / 255]);
    expect(Array.from(quantize(values))).toEqual([0, 255, 128, 1, 0]);
  });
});
