/**
 * Image helpers: JPEG decoding to grayscale, binary PGM output, and exact
 * area-weighted crop resizing.
 *
 * Grayscale is the arithmetic mean of the RGB channels, matching the engine's
 * loader, so features computed on prepared images line up with features the
 * engine computes itself.
 */

import { decode } from "jpeg-js";

export interface GrayImage {
  width: number;
  height: number;
  /** Row-major intensities in [0, 1]. */
  pixels: Float64Array;
}

export function decodeJpegToGray(data: Buffer): GrayImage {
  const raw = decode(data, { useTArray: true, formatAsRGBA: true });
  const pixels = new Float64Array(raw.width * raw.height);
  for (let i = 0; i < pixels.length; i++) {
    const offset = i * 4;
    pixels[i] = (raw.data[offset] + raw.data[offset + 1] + raw.data[offset + 2]) / 3 / 255;
  }
  return { width: raw.width, height: raw.height, pixels };
}

export function encodePgm(image: GrayImage): Buffer {
  const header = Buffer.from(`P5\n${image.width} ${image.height}\n255\n`, "ascii");
  const body = Buffer.alloc(image.pixels.length);
  for (let i = 0; i < image.pixels.length; i++) {
    body[i] = Math.min(255, Math.max(0, Math.round(image.pixels[i] * 255)));
  }
  return Buffer.concat([header, body]);
}

export function decodePgm(data: Buffer): GrayImage {
  const text = data.toString("latin1");
  const match = /^P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s/.exec(text);
  if (!match) {
    throw new Error("not a binary PGM");
  }
  const [, w, h, maxval] = match;
  if (Number(maxval) !== 255) {
    throw new Error(`unsupported maxval ${maxval}`);
  }
  const width = Number(w);
  const height = Number(h);
  const offset = match[0].length;
  const pixels = new Float64Array(width * height);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = data[offset + i] / 255;
  }
  return { width, height, pixels };
}

/**
 * Exact area-average resize of a crop onto a gw x gh grid.
 *
 * Pixels are unit squares of constant intensity; the cumulative integral is
 * bilinear inside each pixel cell, so evaluating it at the grid lines gives
 * each output cell's exact mean.
 */
export function areaResize(
  image: GrayImage,
  box: { x1: number; y1: number; x2: number; y2: number },
  gw: number,
  gh: number,
): Float64Array {
  const { width, height, pixels } = image;
  const x1 = Math.max(0, Math.min(box.x1, width));
  const x2 = Math.max(0, Math.min(box.x2, width));
  const y1 = Math.max(0, Math.min(box.y1, height));
  const y2 = Math.max(0, Math.min(box.y2, height));
  if (!(x1 < x2 && y1 < y2)) {
    throw new Error(`box [${box.x1},${box.y1},${box.x2},${box.y2}] lies outside the image`);
  }

  // cumulative integral with a zero row/column prefix
  const iw = width + 1;
  const integral = new Float64Array((width + 1) * (height + 1));
  for (let y = 1; y <= height; y++) {
    let rowSum = 0;
    for (let x = 1; x <= width; x++) {
      rowSum += pixels[(y - 1) * width + (x - 1)];
      integral[y * iw + x] = integral[(y - 1) * iw + x] + rowSum;
    }
  }

  const at = (xc: number, yc: number): number => {
    const xi = Math.min(Math.floor(xc), width - 1);
    const yi = Math.min(Math.floor(yc), height - 1);
    const tx = xc - xi;
    const ty = yc - yi;
    const i00 = integral[yi * iw + xi];
    const i01 = integral[yi * iw + xi + 1];
    const i10 = integral[(yi + 1) * iw + xi];
    const i11 = integral[(yi + 1) * iw + xi + 1];
    return (
      i00 * (1 - tx) * (1 - ty) + i01 * tx * (1 - ty) + i10 * (1 - tx) * ty + i11 * tx * ty
    );
  };

  const xs = new Float64Array(gw + 1);
  const ys = new Float64Array(gh + 1);
  for (let i = 0; i <= gw; i++) xs[i] = x1 + ((x2 - x1) * i) / gw;
  for (let j = 0; j <= gh; j++) ys[j] = y1 + ((y2 - y1) * j) / gh;

  const cellArea = ((x2 - x1) / gw) * ((y2 - y1) / gh);
  const out = new Float64Array(gw * gh);
  for (let j = 0; j < gh; j++) {
    for (let i = 0; i < gw; i++) {
      const mass = at(xs[i + 1], ys[j + 1]) - at(xs[i], ys[j + 1]) - at(xs[i + 1], ys[j]) + at(xs[i], ys[j]);
      out[j * gw + i] = Math.min(1, Math.max(0, mass / cellArea));
    }
  }
  return out;
}
