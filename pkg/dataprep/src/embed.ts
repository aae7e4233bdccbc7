/**
 * Crop embedders behind the feature-server: every request crops the scene to
 * the box, resizes to 224x224, and maps that to a fixed-dimension vector.
 *
 * Two backends exist. "builtin" is a deterministic stand-in used when no
 * pretrained network is on disk: it pools the 224x224 crop onto a coarse grid
 * and expands each cell mean into a bank of harmonics, honoring the advertised
 * dimension (25088 in pool mode, 4096 in dense mode). "model" loads a
 * TensorFlow.js model directory and runs it; its output must match the mode's
 * dimension.
 */

import { GrayImage, areaResize } from "./image";

export const INPUT_SIDE = 224;
export const POOL_DIM = 25088; // 512 channels x 7 x 7 cells
export const DENSE_DIM = 4096; // 64 channels x 8 x 8 cells

export type Mode = "pool" | "dense";

export interface Embedder {
  dim: number;
  embed(image: GrayImage, box: { x1: number; y1: number; x2: number; y2: number }): number[];
}

export function modeDim(mode: Mode): number {
  return mode === "pool" ? POOL_DIM : DENSE_DIM;
}

function resizedCrop(image: GrayImage, box: { x1: number; y1: number; x2: number; y2: number }) {
  return areaResize(image, box, INPUT_SIDE, INPUT_SIDE);
}

export class BuiltinEmbedder implements Embedder {
  readonly dim: number;
  private readonly gridSide: number;
  private readonly channels: number;

  constructor(mode: Mode) {
    this.gridSide = mode === "pool" ? 7 : 8;
    this.dim = modeDim(mode);
    this.channels = this.dim / (this.gridSide * this.gridSide);
  }

  embed(image: GrayImage, box: { x1: number; y1: number; x2: number; y2: number }): number[] {
    const resized: Float64Array = resizedCrop(image, box);
    const resizedImage: GrayImage = { width: INPUT_SIDE, height: INPUT_SIDE, pixels: resized };
    const cells = areaResize(
      resizedImage,
      { x1: 0, y1: 0, x2: INPUT_SIDE, y2: INPUT_SIDE },
      this.gridSide,
      this.gridSide,
    );
    const out = new Array<number>(this.dim);
    const nCells = this.gridSide * this.gridSide;
    for (let channel = 0; channel < this.channels; channel++) {
      for (let cell = 0; cell < nCells; cell++) {
        const phase = (channel + 1) * 2 * Math.PI * cells[cell] + 0.37 * channel;
        out[channel * nCells + cell] = round6(0.5 * (1 + Math.sin(phase)));
      }
    }
    return out;
  }
}

function round6(value: number): number {
  return Math.round(value * 1e6) / 1e6;
}

/** Runs a TensorFlow.js model directory on the resized crop. */
export class ModelEmbedder implements Embedder {
  private constructor(
    readonly dim: number,
    private readonly tf: any,
    private readonly model: any,
  ) {}

  static async load(modelPath: string, mode: Mode): Promise<ModelEmbedder> {
    // resolved at runtime only; the package is not a hard dependency
    const tfModule = "@tensorflow/tfjs";
    let tf: any;
    try {
      tf = await import(tfModule);
    } catch (err) {
      throw new Error(
        `--model requires @tensorflow/tfjs to be installed: ${(err as Error).message}`,
      );
    }
    const url = `file://${modelPath}`;
    const model = await tf.loadLayersModel(url).catch(() => tf.loadGraphModel(url));
    return new ModelEmbedder(modeDim(mode), tf, model);
  }

  embed(image: GrayImage, box: { x1: number; y1: number; x2: number; y2: number }): number[] {
    const resized = resizedCrop(image, box);
    // grayscale crop replicated over the three input channels
    const input = this.tf.tidy(() => {
      const gray = this.tf.tensor(resized, [1, INPUT_SIDE, INPUT_SIDE, 1]);
      return gray.tile([1, 1, 1, 3]);
    });
    const output = this.model.predict(input);
    const values = Array.from(output.dataSync() as Float32Array, (v: number) => v);
    input.dispose();
    output.dispose();
    if (values.length !== this.dim) {
      throw new Error(`model produced ${values.length} values, mode expects ${this.dim}`);
    }
    return values;
  }
}
