#!/usr/bin/env node
/**
 * dataprep CLI.
 *
 *   dataprep build --voc <root> --class <name> --out <dir> [--imageset trainval]
 *   dataprep serve --mode pool|dense --root <dir> [--port N] [--model <path>]
 *   dataprep stub [--dim N]
 */

import { BuiltinEmbedder, Embedder, Mode, ModelEmbedder } from "./embed";
import { buildManifest } from "./manifest";
import { DirectorySceneStore, serveOnStreams, serveTcp } from "./server";
import { runStub } from "./stub_server";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith("--") || value === undefined) {
      throw new UsageError(`bad flag pair near ${key}`);
    }
    flags.set(key.slice(2), value);
  }
  return flags;
}

class UsageError extends Error {}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (!value) {
    throw new UsageError(`missing required flag --${name}`);
  }
  return value;
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  try {
    if (command === "build") {
      const flags = parseFlags(rest);
      const result = buildManifest(
        required(flags, "voc"),
        required(flags, "class"),
        required(flags, "out"),
        flags.get("imageset") ?? "trainval",
      );
      console.log(`kept ${result.kept.length} images, skipped ${result.skipped.length}`);
      console.log(`manifest: ${result.manifestPath}`);
      return 0;
    }
    if (command === "serve") {
      const flags = parseFlags(rest);
      const mode = (flags.get("mode") ?? "pool") as Mode;
      if (mode !== "pool" && mode !== "dense") {
        throw new UsageError(`--mode must be pool or dense, got ${mode}`);
      }
      const store = new DirectorySceneStore(required(flags, "root"));
      const modelPath = flags.get("model");
      const embedder: Embedder = modelPath
        ? await ModelEmbedder.load(modelPath, mode)
        : new BuiltinEmbedder(mode);
      const port = flags.get("port");
      if (port) {
        serveTcp(Number(port), store, embedder);
        console.error(`feature server listening on :${port} (dim ${embedder.dim})`);
        return await new Promise<number>(() => {});
      }
      await serveOnStreams(process.stdin, process.stdout, store, embedder);
      return 0;
    }
    if (command === "stub") {
      const flags = parseFlags(rest);
      runStub(Number(flags.get("dim") ?? 4096));
      return await new Promise<number>(() => {});
    }
    throw new UsageError(`unknown command ${command ?? "(none)"}; expected build, serve, or stub`);
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`usage error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

main().then((code) => {
  if (code !== 0) process.exit(code);
});
