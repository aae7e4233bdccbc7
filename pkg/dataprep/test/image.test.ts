import { describe, expect, it } from "vitest";

import { GrayImage, areaResize, decodePgm, encodePgm } from "../src/image";

function gray(width: number, height: number, fill: (x: number, y: number) => number): GrayImage {
  const pixels = new Float64Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      pixels[y * width + x] = fill(x, y);
    }
  }
  return { width, height, pixels };
}

describe("pgm round trip", () => {
  it("preserves quantized intensities", () => {
    const image = gray(6, 4, (x, y) => (x + y * 6) / 23);
    const decoded = decodePgm(encodePgm(image));
    expect(decoded.width).toBe(6);
    expect(decoded.height).toBe(4);
    for (let i = 0; i < image.pixels.length; i++) {
      expect(Math.abs(decoded.pixels[i] - image.pixels[i])).toBeLessThan(1 / 255 / 2 + 1e-12);
    }
  });

  it("rejects non-pgm buffers", () => {
    expect(() => decodePgm(Buffer.from("P6\n1 1\n255\nxxx"))).toThrow(/PGM/);
  });
});

describe("areaResize", () => {
  it("is exact on constant images", () => {
    const image = gray(9, 7, () => 0.25);
    const out = areaResize(image, { x1: 0.5, y1: 1.25, x2: 8.0, y2: 6.5 }, 4, 4);
    for (const value of out) {
      expect(value).toBeCloseTo(0.25, 12);
    }
  });

  it("averages a checkerboard to one half", () => {
    const image = gray(2, 2, (x, y) => (x + y) % 2);
    const out = areaResize(image, { x1: 0, y1: 0, x2: 2, y2: 2 }, 1, 1);
    expect(out[0]).toBeCloseTo(0.5, 12);
  });

  it("conserves the crop mean", () => {
    const image = gray(12, 10, (x, y) => ((x * 37 + y * 11) % 19) / 19);
    const box = { x1: 1.5, y1: 0.75, x2: 11.25, y2: 9.5 };
    const out = areaResize(image, box, 5, 3);
    const gridMean = out.reduce((a, b) => a + b, 0) / out.length;
    const whole = areaResize(image, box, 1, 1)[0];
    expect(gridMean).toBeCloseTo(whole, 9);
  });

  it("rejects boxes outside the image", () => {
    const image = gray(4, 4, () => 0);
    expect(() => areaResize(image, { x1: 5, y1: 5, x2: 9, y2: 9 }, 2, 2)).toThrow(/outside/);
  });
});
