/**
 * Stub feature server for protocol tests: honors the full wire contract with
 * cheap deterministic vectors derived from the request id and box.
 */

import * as readline from "readline";

import { PROTO_VERSION } from "./server";

export function stubResponseLine(line: string, dim: number): string {
  let requestId: unknown = -1;
  try {
    const request = JSON.parse(line);
    requestId = request.id ?? -1;
    if (request.scene === "unknown-scene") {
      return JSON.stringify({ id: requestId, error: "unknown scene" });
    }
    const box: number[] = request.box ?? [0, 0, 1, 1];
    const seed = Number(request.id) + box.reduce((a, b) => a + b, 0);
    const features = new Array<number>(dim);
    for (let k = 0; k < dim; k++) {
      features[k] = Math.round((((seed + k) % 7) / 7) * 1e6) / 1e6;
    }
    return JSON.stringify({ id: requestId, features });
  } catch (err) {
    return JSON.stringify({ id: requestId, error: `bad request: ${(err as Error).message}` });
  }
}

export function runStub(dim: number): void {
  process.stdout.write(JSON.stringify({ proto: PROTO_VERSION, dim }) + "\n");
  const lines = readline.createInterface({ input: process.stdin, terminal: false });
  lines.on("line", (line) => {
    if (!line.trim()) return;
    process.stdout.write(stubResponseLine(line, dim) + "\n");
  });
}
