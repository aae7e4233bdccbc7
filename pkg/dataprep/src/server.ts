/**
 * Feature server speaking the engine's JSON-lines protocol.
 *
 * Handshake first: {"proto": 1, "dim": N}. Then one response per request
 * line, either {"id", "features": [...]} with exactly N values or
 * {"id", "error": "..."}. Malformed input gets an error response, never a
 * process exit.
 */

import * as fs from "fs";
import * as net from "net";
import * as path from "path";
import * as readline from "readline";

import { Embedder } from "./embed";
import { GrayImage, decodeJpegToGray, decodePgm } from "./image";

export const PROTO_VERSION = 1;

export interface SceneStore {
  load(sceneId: string): GrayImage | undefined;
}

/**
 * Scene lookup over a prepared dataset dir (manifest.jsonl + PGMs) or a raw
 * VOC root (JPEGImages/<id>.jpg). Images are cached after first load.
 */
export class DirectorySceneStore implements SceneStore {
  private readonly pgmById = new Map<string, string>();
  private readonly jpegDir: string | null;
  private readonly cache = new Map<string, GrayImage>();

  constructor(root: string) {
    const manifest = path.join(root, "manifest.jsonl");
    if (fs.existsSync(manifest)) {
      for (const line of fs.readFileSync(manifest, "utf-8").split("\n")) {
        if (!line.trim()) continue;
        const record = JSON.parse(line);
        this.pgmById.set(record.id, path.join(root, record.image));
      }
      this.jpegDir = null;
    } else if (fs.existsSync(path.join(root, "JPEGImages"))) {
      this.jpegDir = path.join(root, "JPEGImages");
    } else {
      throw new Error(`${root}: neither manifest.jsonl nor a JPEGImages directory found`);
    }
  }

  load(sceneId: string): GrayImage | undefined {
    const cached = this.cache.get(sceneId);
    if (cached) return cached;
    let image: GrayImage | undefined;
    const pgm = this.pgmById.get(sceneId);
    if (pgm && fs.existsSync(pgm)) {
      image = decodePgm(fs.readFileSync(pgm));
    } else if (this.jpegDir) {
      const jpeg = path.join(this.jpegDir, `${sceneId}.jpg`);
      if (fs.existsSync(jpeg)) {
        image = decodeJpegToGray(fs.readFileSync(jpeg));
      }
    }
    if (image) this.cache.set(sceneId, image);
    return image;
  }
}

export function handleRequestLine(line: string, store: SceneStore, embedder: Embedder): string {
  let requestId: unknown = -1;
  try {
    const request = JSON.parse(line);
    requestId = request.id ?? -1;
    const sceneId = request.scene;
    const box = request.box;
    if (typeof sceneId !== "string" || !Array.isArray(box) || box.length !== 4) {
      return JSON.stringify({ id: requestId, error: "malformed request" });
    }
    const image = store.load(sceneId);
    if (!image) {
      return JSON.stringify({ id: requestId, error: "unknown scene" });
    }
    const features = embedder.embed(image, {
      x1: Number(box[0]),
      y1: Number(box[1]),
      x2: Number(box[2]),
      y2: Number(box[3]),
    });
    return JSON.stringify({ id: requestId, features });
  } catch (err) {
    return JSON.stringify({ id: requestId, error: `bad request: ${(err as Error).message}` });
  }
}

function handshakeLine(dim: number): string {
  return JSON.stringify({ proto: PROTO_VERSION, dim });
}

export function serveOnStreams(
  input: NodeJS.ReadableStream,
  output: NodeJS.WritableStream,
  store: SceneStore,
  embedder: Embedder,
): Promise<void> {
  output.write(handshakeLine(embedder.dim) + "\n");
  const lines = readline.createInterface({ input, terminal: false });
  return new Promise((resolve) => {
    lines.on("line", (line) => {
      if (!line.trim()) return;
      output.write(handleRequestLine(line, store, embedder) + "\n");
    });
    lines.on("close", resolve);
  });
}

export function serveTcp(port: number, store: SceneStore, embedder: Embedder): net.Server {
  const server = net.createServer((socket) => {
    serveOnStreams(socket, socket, store, embedder);
  });
  server.listen(port);
  return server;
}
