/**
 * Convert a VOC-style directory into the engine's dataset format: one PGM per
 * kept image plus a JSON-lines manifest the engine loads directly.
 */

import * as fs from "fs";
import * as path from "path";

import { decodeJpegToGray, encodePgm } from "./image";
import { WarnFn, parseClassList, parseVocAnnotation } from "./voc";

export interface BuildResult {
  manifestPath: string;
  kept: string[];
  skipped: string[];
}

export function buildManifest(
  vocRoot: string,
  className: string,
  outDir: string,
  imageSet = "trainval",
  warn: WarnFn = (m) => console.warn(m),
): BuildResult {
  const listPath = path.join(vocRoot, "ImageSets", "Main", `${className}_${imageSet}.txt`);
  const entries = parseClassList(fs.readFileSync(listPath, "utf-8"), listPath);
  const positives = entries.filter((e) => e.flag === 1).map((e) => e.imageId);
  positives.sort();

  const imagesDir = path.join(outDir, "images");
  fs.mkdirSync(imagesDir, { recursive: true });

  const lines: string[] = [];
  const kept: string[] = [];
  const skipped: string[] = [];
  for (const imageId of positives) {
    const xmlPath = path.join(vocRoot, "Annotations", `${imageId}.xml`);
    const jpegPath = path.join(vocRoot, "JPEGImages", `${imageId}.jpg`);
    if (!fs.existsSync(xmlPath) || !fs.existsSync(jpegPath)) {
      warn(`skipping ${imageId}: annotation or image file missing`);
      skipped.push(imageId);
      continue;
    }
    const record = parseVocAnnotation(fs.readFileSync(xmlPath, "utf-8"), xmlPath, warn);
    const gray = decodeJpegToGray(fs.readFileSync(jpegPath));
    if (gray.width !== record.width || gray.height !== record.height) {
      warn(
        `skipping ${imageId}: image is ${gray.width}x${gray.height}, ` +
          `annotation says ${record.width}x${record.height}`,
      );
      skipped.push(imageId);
      continue;
    }
    const rel = path.posix.join("images", `${imageId}.pgm`);
    fs.writeFileSync(path.join(outDir, rel), encodePgm(gray));
    lines.push(
      JSON.stringify({
        id: imageId,
        image: rel,
        width: record.width,
        height: record.height,
        objects: record.objects.map((obj) => ({
          class: obj.className,
          box: [obj.xmin, obj.ymin, obj.xmax, obj.ymax],
        })),
      }),
    );
    kept.push(imageId);
  }

  const manifestPath = path.join(outDir, "manifest.jsonl");
  fs.writeFileSync(manifestPath, lines.map((l) => l + "\n").join(""));
  return { manifestPath, kept, skipped };
}
