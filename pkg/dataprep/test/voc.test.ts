import * as fs from "fs";
import * as path from "path";

import { describe, expect, it } from "vitest";

import { parseClassList, parseVocAnnotation } from "../src/voc";

const FIXTURES = path.join(__dirname, "..", "fixtures", "voc");

function fixtureXml(name: string): string {
  return fs.readFileSync(path.join(FIXTURES, "Annotations", name), "utf-8");
}

describe("parseVocAnnotation", () => {
  it("extracts every object with class names", () => {
    const record = parseVocAnnotation(fixtureXml("img2.xml"), "img2.xml");
    expect(record.width).toBe(20);
    expect(record.height).toBe(14);
    expect(record.objects).toHaveLength(2);
    expect(record.objects.map((o) => o.className)).toEqual(["aeroplane", "aeroplane"]);
    expect(record.objects[0]).toMatchObject({ xmin: 1, ymin: 2, xmax: 9, ymax: 12 });
  });

  it("keeps difficult objects", () => {
    const record = parseVocAnnotation(fixtureXml("img2.xml"), "img2.xml");
    expect(record.objects[0].difficult).toBe(true);
    expect(record.objects[1].difficult).toBe(false);
  });

  it("accepts an empty object list", () => {
    const xml = `<annotation><filename>x.jpg</filename>
      <size><width>8</width><height>8</height><depth>3</depth></size></annotation>`;
    const record = parseVocAnnotation(xml, "x.xml");
    expect(record.objects).toEqual([]);
  });

  it("rejects degenerate boxes naming the file", () => {
    const xml = `<annotation><filename>bad.jpg</filename>
      <size><width>8</width><height>8</height></size>
      <object><name>cat</name><bndbox>
        <xmin>3</xmin><ymin>1</ymin><xmax>3</xmax><ymax>5</ymax>
      </bndbox></object></annotation>`;
    expect(() => parseVocAnnotation(xml, "bad.xml")).toThrow(/bad\.xml.*degenerate/);
  });

  it("clamps out-of-bounds boxes with a warning", () => {
    const xml = `<annotation><filename>w.jpg</filename>
      <size><width>10</width><height>10</height></size>
      <object><name>cat</name><bndbox>
        <xmin>4</xmin><ymin>4</ymin><xmax>14</xmax><ymax>9</ymax>
      </bndbox></object></annotation>`;
    const warnings: string[] = [];
    const record = parseVocAnnotation(xml, "w.xml", (m) => warnings.push(m));
    expect(record.objects[0].xmax).toBe(10);
    expect(warnings).toHaveLength(1);
    expect(warnings[0]).toMatch(/clamping/);
  });

  it("rejects annotations without a size element", () => {
    const xml = `<annotation><filename>n.jpg</filename></annotation>`;
    expect(() => parseVocAnnotation(xml, "n.xml")).toThrow(/size/);
  });

  it("rejects non-xml input", () => {
    expect(() => parseVocAnnotation("{not xml", "j.xml")).toThrow();
  });
});

describe("parseClassList", () => {
  it("parses id/flag lines", () => {
    expect(parseClassList("img1 1\nimg2 -1\n")).toEqual([
      { imageId: "img1", flag: 1 },
      { imageId: "img2", flag: -1 },
    ]);
  });

  it("rejects unknown flags with the line number", () => {
    expect(() => parseClassList("img1 1\nimg2 0\n", "list.txt")).toThrow(/list\.txt:2/);
  });

  it("returns nothing for an empty file", () => {
    expect(parseClassList("")).toEqual([]);
  });
});
