"""Greedy-policy evaluation, episode traces, and SVG search-path rendering.

A trace is a faithful transcript of one episode: replaying its actions through
the environment from the initial whole-image box reproduces the stored boxes
and rewards exactly. Rendering shows the scene raster with the ground truth in
blue, the search path in thin red, and the final box in bold red.
"""

from __future__ import annotations

import base64
import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import env as env_mod
from .env import EnvConfig
from .geometry import Box, best_iou
from .learner import Mlp, load_checkpoint, select_action
from .scene import Scene


@dataclass
class EpisodeTrace:
    scene_id: str
    boxes: list[Box]  # initial -> final; the trigger adds no box
    actions: list[int]
    rewards: list[float]
    ious: list[float]  # best-ground-truth IoU after each action
    triggered: bool
    final_iou: float

    def to_dict(self) -> dict:
        return {
            "scene": self.scene_id,
            "boxes": [list(b.as_tuple()) for b in self.boxes],
            "actions": self.actions,
            "rewards": self.rewards,
            "ious": self.ious,
            "triggered": self.triggered,
            "final_iou": self.final_iou,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "EpisodeTrace":
        return cls(
            scene_id=record["scene"],
            boxes=[Box(*b) for b in record["boxes"]],
            actions=list(record["actions"]),
            rewards=list(record["rewards"]),
            ious=list(record["ious"]),
            triggered=bool(record["triggered"]),
            final_iou=float(record["final_iou"]),
        )


@dataclass
class EvalReport:
    traces: list[EpisodeTrace]
    average_iou: float
    trigger_rate: float
    mean_steps: float
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "average_iou": self.average_iou,
            "trigger_rate": self.trigger_rate,
            "mean_steps": self.mean_steps,
            "config": self.config,
            "scenes": [t.to_dict() for t in self.traces],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _run_episode(net, env_cfg, scene, extractor, max_steps, eps, rng) -> EpisodeTrace:
    episode, state = env_mod.reset(env_cfg, scene, extractor, max_steps=max_steps)
    trigger = env_mod.trigger_action(env_cfg)
    boxes = [episode.box]
    actions: list[int] = []
    rewards: list[float] = []
    ious: list[float] = []
    triggered = False
    while not episode.done:
        action = select_action(net, state.vector, eps, rng)
        result = env_mod.step(episode, action, extractor)
        actions.append(action)
        rewards.append(result.reward)
        ious.append(result.iou_now)
        if action == trigger:
            triggered = True
        else:
            boxes.append(result.box)
        state = result.next_state
    return EpisodeTrace(
        scene_id=scene.id,
        boxes=boxes,
        actions=actions,
        rewards=rewards,
        ious=ious,
        triggered=triggered,
        final_iou=best_iou(boxes[-1], episode.gts)[1],
    )


def run_episode_greedy(
    net: Mlp, env_cfg: EnvConfig, scene: Scene, extractor, max_steps: Optional[int] = None
) -> EpisodeTrace:
    """One episode under the learned policy: epsilon 0, no learning."""
    return _run_episode(net, env_cfg, scene, extractor, max_steps, eps=0.0, rng=None)


def evaluate(
    net: Mlp,
    env_cfg: EnvConfig,
    dataset,
    extractor,
    max_steps: Optional[int] = None,
    explore_eps: float = 0.0,
    rng=None,
) -> EvalReport:
    """Greedy episode per scene; the reported IoU of each scene is the maximum
    over all its ground-truth boxes. ``explore_eps=1`` turns the run into the
    uniform-random-policy baseline measured by the same machinery."""
    scenes = list(dataset)
    if not scenes:
        raise ValueError("cannot evaluate on an empty dataset")
    traces = [
        _run_episode(net, env_cfg, scene, extractor, max_steps, explore_eps, rng)
        for scene in scenes
    ]
    config = {
        "variant": env_cfg.variant,
        "tau": env_cfg.tau,
        "eta": env_cfg.eta,
        "reward_metric": env_cfg.reward_metric,
        "target_mode": env_cfg.target_mode,
        "max_steps": env_cfg.max_steps if max_steps is None else max_steps,
        "explore_eps": explore_eps,
    }
    return EvalReport(
        traces=traces,
        average_iou=float(np.mean([t.final_iou for t in traces])),
        trigger_rate=float(np.mean([t.triggered for t in traces])),
        mean_steps=float(np.mean([len(t.actions) for t in traces])),
        config=config,
    )


def select_best_epoch(
    checkpoints: list[Union[Mlp, Path, str]],
    env_cfg: EnvConfig,
    dataset,
    extractor,
    max_steps: Optional[int] = None,
) -> tuple[int, float]:
    """Evaluate every per-epoch checkpoint and return (epoch index, average
    IoU) of the best one; ties go to the earliest epoch."""
    if not checkpoints:
        raise ValueError("no checkpoints to select from")
    averages = []
    for entry in checkpoints:
        net = entry
        if not isinstance(entry, Mlp):
            net, _ = load_checkpoint(entry, variant=env_cfg.variant)
        averages.append(evaluate(net, env_cfg, dataset, extractor, max_steps).average_iou)
    best = max(range(len(averages)), key=lambda i: (averages[i], -i))
    return best, averages[best]


def save_traces(traces: list[EpisodeTrace], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(json.dumps(trace.to_dict(), sort_keys=True) + "\n")


def load_traces(path: Path) -> list[EpisodeTrace]:
    traces = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                traces.append(EpisodeTrace.from_dict(json.loads(line)))
    return traces


def _png_chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload))
    )


def _gray_png(pixels: np.ndarray) -> bytes:
    """Minimal 8-bit grayscale PNG; deterministic bytes for golden tests."""
    grid = np.round(np.asarray(pixels, dtype=np.float64) * 255.0).astype(np.uint8)
    height, width = grid.shape
    raw = b"".join(b"\x00" + row.tobytes() for row in grid)
    header = struct.pack(">IIBBBBB", width, height, 8, 0, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + _png_chunk(b"IHDR", header)
        + _png_chunk(b"IDAT", zlib.compress(raw, 6))
        + _png_chunk(b"IEND", b"")
    )


def _fmt(value: float) -> str:
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


def _rect(box: Box, stroke: str, stroke_width: int) -> str:
    return (
        f'<rect x="{_fmt(box.x1)}" y="{_fmt(box.y1)}" '
        f'width="{_fmt(box.width)}" height="{_fmt(box.height)}" '
        f'fill="none" stroke="{stroke}" stroke-width="{stroke_width}"/>'
    )


def render_trace(trace: EpisodeTrace, scene: Scene, out_path: Path) -> Path:
    """Write an SVG of the search path: scene raster, ground truth in blue
    (width 2), intermediate boxes in red (width 1), final box in bold red
    (width 4). One SVG user unit equals one pixel."""
    gt_index = best_iou(trace.boxes[-1], [a.box for a in scene.annotations])[0]
    gt_box = scene.annotations[gt_index].box
    png = base64.b64encode(_gray_png(scene.pixels)).decode("ascii")
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{scene.width}" '
        f'height="{scene.height}" viewBox="0 0 {scene.width} {scene.height}">',
        f'<image x="0" y="0" width="{scene.width}" height="{scene.height}" '
        f'href="data:image/png;base64,{png}"/>',
        _rect(gt_box, "blue", 2),
    ]
    for box in trace.boxes[:-1]:
        lines.append(_rect(box, "red", 1))
    lines.append(_rect(trace.boxes[-1], "red", 4))
    lines.append("</svg>")
    out_path = Path(out_path)
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out_path
