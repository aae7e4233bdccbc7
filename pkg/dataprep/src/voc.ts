/**
 * VOC-style annotation and class-list parsing.
 *
 * Boxes are kept verbatim from the XML (no coordinate shifting); boxes that
 * spill past the declared image size are clamped with a warning, degenerate
 * boxes are rejected.
 */

import { XMLParser } from "fast-xml-parser";

export interface VocObject {
  className: string;
  xmin: number;
  ymin: number;
  xmax: number;
  ymax: number;
  difficult: boolean;
}

export interface VocRecord {
  filename: string;
  width: number;
  height: number;
  objects: VocObject[];
}

export interface ClassListEntry {
  imageId: string;
  flag: 1 | -1;
}

export type WarnFn = (message: string) => void;

const parser = new XMLParser({
  ignoreAttributes: true,
  parseTagValue: false,
  isArray: (name) => name === "object",
});

function asNumber(value: unknown, what: string, source: string): number {
  const num = Number(value);
  if (value === undefined || value === null || Number.isNaN(num)) {
    throw new Error(`${source}: missing or non-numeric ${what}`);
  }
  return num;
}

export function parseVocAnnotation(
  xml: string,
  source = "<xml>",
  warn: WarnFn = (m) => console.warn(m),
): VocRecord {
  let doc: any;
  try {
    doc = parser.parse(xml);
  } catch (err) {
    throw new Error(`${source}: malformed XML: ${(err as Error).message}`);
  }
  const annotation = doc?.annotation;
  if (!annotation) {
    throw new Error(`${source}: no <annotation> element`);
  }
  const size = annotation.size;
  if (!size) {
    throw new Error(`${source}: missing <size> element`);
  }
  const width = asNumber(size.width, "size/width", source);
  const height = asNumber(size.height, "size/height", source);
  const filename = String(annotation.filename ?? "");

  const objects: VocObject[] = [];
  for (const obj of annotation.object ?? []) {
    const name = String(obj.name ?? "");
    const box = obj.bndbox;
    if (!box) {
      throw new Error(`${source}: object ${name} has no <bndbox>`);
    }
    let xmin = asNumber(box.xmin, "bndbox/xmin", source);
    let ymin = asNumber(box.ymin, "bndbox/ymin", source);
    let xmax = asNumber(box.xmax, "bndbox/xmax", source);
    let ymax = asNumber(box.ymax, "bndbox/ymax", source);
    if (xmin < 0 || ymin < 0 || xmax > width || ymax > height) {
      warn(`${source}: box [${xmin},${ymin},${xmax},${ymax}] exceeds ${width}x${height}, clamping`);
      xmin = Math.max(0, xmin);
      ymin = Math.max(0, ymin);
      xmax = Math.min(width, xmax);
      ymax = Math.min(height, ymax);
    }
    if (!(xmin < xmax && ymin < ymax)) {
      throw new Error(`${source}: degenerate box [${xmin},${ymin},${xmax},${ymax}] for ${name}`);
    }
    objects.push({
      className: name,
      xmin,
      ymin,
      xmax,
      ymax,
      difficult: String(obj.difficult ?? "0") === "1",
    });
  }
  return { filename, width, height, objects };
}

export function parseClassList(text: string, source = "<list>"): ClassListEntry[] {
  const entries: ClassListEntry[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    const parts = line.split(/\s+/);
    if (parts.length !== 2) {
      throw new Error(`${source}:${i + 1}: expected "id flag", got ${JSON.stringify(line)}`);
    }
    const flag = Number(parts[1]);
    if (flag !== 1 && flag !== -1) {
      throw new Error(`${source}:${i + 1}: flag must be 1 or -1, got ${parts[1]}`);
    }
    entries.push({ imageId: parts[0], flag: flag as 1 | -1 });
  }
  return entries;
}
