"""Scenes, datasets, synthetic scene generation, and manifest ingestion.

A scene is a grayscale pixel grid plus named ground-truth boxes. Datasets are
immutable after construction and loadable from a JSON-lines manifest that
references binary PGM (P5) or PPM (P6) images.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .geometry import Box


class Annotation(NamedTuple):
    class_name: str
    box: Box


@dataclass(frozen=True, eq=False)
class Scene:
    """One image with its ground-truth boxes. Pixels are row-major intensities
    in [0, 1], shape (height, width)."""

    id: str
    width: int
    height: int
    pixels: np.ndarray
    annotations: tuple[Annotation, ...] = ()

    def __post_init__(self) -> None:
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(
                f"scene {self.id!r}: pixel grid {self.pixels.shape} does not match "
                f"{self.height}x{self.width}"
            )
        for ann in self.annotations:
            b = ann.box
            if not (0 <= b.x1 and b.x2 <= self.width and 0 <= b.y1 and b.y2 <= self.height):
                raise ValueError(f"scene {self.id!r}: box {b.as_tuple()} outside image bounds")
        self.pixels.setflags(write=False)


@dataclass(frozen=True)
class Dataset:
    scenes: tuple[Scene, ...]
    split: str = "train"

    def __post_init__(self) -> None:
        ids = [s.id for s in self.scenes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate scene ids in dataset")

    def __len__(self) -> int:
        return len(self.scenes)

    def __iter__(self):
        return iter(self.scenes)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a deterministic synthetic dataset: one bright rectangular
    target per scene on a darker textured background, plus unlabeled dimmer
    distractor rectangles."""

    count: int
    width: int = 64
    height: int = 64
    class_name: str = "target"
    target_frac: tuple[float, float] = (0.35, 0.6)
    distractors: tuple[int, int] = (1, 3)
    noise: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be >= 1")
        lo, hi = self.target_frac
        if not (0.0 < lo <= hi < 1.0):
            raise ValueError(f"target_frac must be a non-empty range in (0,1), got {self.target_frac}")
        if self.distractors[0] > self.distractors[1] or self.distractors[0] < 0:
            raise ValueError(f"invalid distractor range {self.distractors}")


def _sample_side(rng: np.random.Generator, frac: tuple[float, float], limit: int) -> int:
    # Continuous size, rounded to the nearest pixel, never below 4 px.
    side = round(float(rng.uniform(frac[0], frac[1])) * limit)
    return int(min(max(side, 4), limit))


def _paint_rect(pixels: np.ndarray, rng: np.random.Generator, box: Box, lo: float, hi: float) -> None:
    x1, y1, x2, y2 = (int(v) for v in box.as_tuple())
    pixels[y1:y2, x1:x2] = lo + (hi - lo) * rng.random((y2 - y1, x2 - x1))


def generate_synthetic(spec: SynthSpec) -> Dataset:
    """Deterministic dataset of ``spec.count`` scenes; equal specs give equal
    datasets, byte for byte."""
    rng = np.random.default_rng(spec.seed)
    scenes = []
    for i in range(spec.count):
        pixels = np.clip(0.2 + spec.noise * (rng.random((spec.height, spec.width)) - 0.5), 0.0, 0.4)

        n_distract = int(rng.integers(spec.distractors[0], spec.distractors[1] + 1))
        for _ in range(n_distract):
            w = _sample_side(rng, (0.1, 0.35), spec.width)
            h = _sample_side(rng, (0.1, 0.35), spec.height)
            x1 = int(rng.integers(0, spec.width - w + 1))
            y1 = int(rng.integers(0, spec.height - h + 1))
            _paint_rect(pixels, rng, Box(x1, y1, x1 + w, y1 + h), 0.5, 0.6)

        w = _sample_side(rng, spec.target_frac, spec.width)
        h = _sample_side(rng, spec.target_frac, spec.height)
        x1 = int(rng.integers(0, spec.width - w + 1))
        y1 = int(rng.integers(0, spec.height - h + 1))
        target = Box(float(x1), float(y1), float(x1 + w), float(y1 + h))
        _paint_rect(pixels, rng, target, 0.8, 1.0)

        # Quantize to 255 levels so a PGM round trip is lossless.
        pixels = np.round(pixels * 255.0) / 255.0
        scenes.append(
            Scene(
                id=f"synth-{spec.seed}-{i:04d}",
                width=spec.width,
                height=spec.height,
                pixels=pixels,
                annotations=(Annotation(spec.class_name, target),),
            )
        )
    return Dataset(tuple(scenes), split="train")


def filter_by_class(dataset: Dataset, class_name: str) -> Dataset:
    """Keep only scenes annotated with ``class_name``, and within them only
    that class's boxes. Scene order is preserved."""
    kept = []
    for scene in dataset.scenes:
        anns = tuple(a for a in scene.annotations if a.class_name == class_name)
        if anns:
            kept.append(replace(scene, annotations=anns))
    return Dataset(tuple(kept), split=dataset.split)


def split_train_test(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint (train, test) partition with floor(n * fraction) test scenes,
    drawn by a seeded permutation. Scene order within each split follows the
    input dataset."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0,1), got {test_fraction}")
    n = len(dataset.scenes)
    if n < 2:
        raise ValueError("need at least 2 scenes to split")
    n_test = int(n * test_fraction)
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = set(perm[:n_test].tolist())
    train = tuple(s for i, s in enumerate(dataset.scenes) if i not in test_idx)
    test = tuple(s for i, s in enumerate(dataset.scenes) if i in test_idx)
    return Dataset(train, split="train"), Dataset(test, split="test")


# --- PNM image I/O (binary PGM/PPM, maxval 255) ---

def read_pnm(path: Path) -> np.ndarray:
    """Read a binary PGM (P5) or PPM (P6) file into a uint8 array of shape
    (H, W) or (H, W, 3)."""
    data = Path(path).read_bytes()
    header = []
    pos = 0
    # Magic, width, height, maxval; '#' comments allowed between tokens.
    while len(header) < 4:
        match = re.match(rb"\s*(?:#[^\n]*\n\s*)*(\S+)", data[pos:])
        if not match:
            raise ValueError(f"{path}: truncated PNM header")
        header.append(match.group(1))
        pos += match.end()
    magic, width, height, maxval = header[0], int(header[1]), int(header[2]), int(header[3])
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: unsupported PNM magic {magic!r}")
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 supported, got {maxval}")
    channels = 1 if magic == b"P5" else 3
    pos += 1  # single whitespace byte after maxval
    raw = np.frombuffer(data, dtype=np.uint8, count=width * height * channels, offset=pos)
    if raw.size != width * height * channels:
        raise ValueError(f"{path}: truncated pixel data")
    if channels == 1:
        return raw.reshape(height, width)
    return raw.reshape(height, width, 3)


def write_pgm(path: Path, pixels: np.ndarray) -> None:
    """Write intensities in [0, 1] as a binary PGM with maxval 255."""
    grid = np.round(np.asarray(pixels, dtype=np.float64) * 255.0).astype(np.uint8)
    height, width = grid.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(grid.tobytes())


def _to_gray(raw: np.ndarray) -> np.ndarray:
    # RGB inputs collapse to the arithmetic channel mean.
    arr = raw.astype(np.float64) / 255.0
    if arr.ndim == 3:
        arr = arr.mean(axis=2)
    return arr


def load_dataset(manifest_path: Path, split: str = "train") -> Dataset:
    """Load a dataset from a JSON-lines manifest.

    Each line describes one scene:
    ``{"id": str, "image": relative-path, "width": int, "height": int,
    "objects": [{"class": str, "box": [x1, y1, x2, y2]}]}``.
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    scenes = []
    with open(manifest_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                scene_id = record["id"]
                image = record["image"]
                width = int(record["width"])
                height = int(record["height"])
                objects = record["objects"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{manifest_path}:{lineno}: malformed manifest line: {exc}") from exc

            raw = read_pnm(base / image)
            if raw.shape[:2] != (height, width):
                raise ValueError(
                    f"scene {scene_id!r}: image is {raw.shape[1]}x{raw.shape[0]}, "
                    f"manifest says {width}x{height}"
                )
            annotations = []
            for obj in objects:
                try:
                    box = Box(*(float(v) for v in obj["box"]))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"scene {scene_id!r}: bad annotation: {exc}") from exc
                annotations.append(Annotation(str(obj["class"]), box))
            scenes.append(Scene(scene_id, width, height, _to_gray(raw), tuple(annotations)))
    return Dataset(tuple(scenes), split=split)


def save_dataset(dataset: Dataset, out_dir: Path) -> Path:
    """Write PGM images plus ``manifest.jsonl`` under ``out_dir``; returns the
    manifest path. Output is deterministic for a given dataset."""
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for scene in dataset.scenes:
            rel = f"images/{scene.id}.pgm"
            write_pgm(out_dir / rel, scene.pixels)
            record = {
                "id": scene.id,
                "image": rel,
                "width": scene.width,
                "height": scene.height,
                "objects": [
                    {"class": ann.class_name, "box": list(ann.box.as_tuple())}
                    for ann in scene.annotations
                ],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return manifest
