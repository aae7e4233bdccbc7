"""Episode dynamics: state construction, step transitions, and rewards.

Two action sets share one lifecycle. The zoom variant picks one of five
sub-regions of the current box each step; the dynamic variant applies one of
eight relative deformations. Both end with a trigger action (always the last
action id) or when the step budget runs out.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import geometry
from .geometry import Alpha, Box, BoxMove, ZoomMove, ZoomParams, best_iou
from .scene import Scene

VARIANTS = ("hierarchical", "dynamic")


@dataclass(frozen=True)
class EnvConfig:
    variant: str = "hierarchical"
    zoom: ZoomParams = ZoomParams()
    alpha: Alpha = Alpha()
    history_len: Optional[int] = None  # defaults: 4 hierarchical, 10 dynamic
    tau: Optional[float] = None  # defaults: 0.5 hierarchical, 0.6 dynamic
    eta: float = 3.0
    reward_metric: str = "iou"  # iou | recall
    target_mode: str = "dynamic"  # dynamic | fixed
    max_steps: int = 10

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.history_len is None:
            object.__setattr__(self, "history_len", 4 if self.variant == "hierarchical" else 10)
        if self.tau is None:
            object.__setattr__(self, "tau", 0.5 if self.variant == "hierarchical" else 0.6)
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0,1), got {self.tau}")
        if self.eta <= 0.0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.history_len < 0:
            raise ValueError(f"history_len must be >= 0, got {self.history_len}")
        if self.reward_metric not in ("iou", "recall"):
            raise ValueError(f"unknown reward metric {self.reward_metric!r}")
        if self.target_mode not in ("dynamic", "fixed"):
            raise ValueError(f"unknown target mode {self.target_mode!r}")


def num_actions(cfg: EnvConfig) -> int:
    """6 for the zoom variant (5 moves + trigger), 9 for dynamic (8 + trigger)."""
    return 6 if cfg.variant == "hierarchical" else 9


def trigger_action(cfg: EnvConfig) -> int:
    return num_actions(cfg) - 1


def state_dim(cfg: EnvConfig, feature_dim: int) -> int:
    return feature_dim + cfg.history_len * num_actions(cfg)


@dataclass(frozen=True, eq=False)
class State:
    features: np.ndarray
    history: np.ndarray

    @cached_property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.features, self.history])


@dataclass(eq=False)
class StepResult:
    next_state: State
    reward: float
    done: bool
    box: Box
    iou_now: float
    action_taken: int


@dataclass(eq=False)
class Episode:
    """Single-owner mutable episode state; distinct episodes are independent."""

    cfg: EnvConfig
    scene: Scene
    box: Box
    gts: list[Box]
    fixed_target: Optional[int]
    max_steps: int
    actions: deque = field(default_factory=deque)
    steps: int = 0
    done: bool = False


def movement_reward(metric_before: float, metric_after: float) -> float:
    """+1 when the move improved the metric, -1 otherwise (ties included)."""
    return 1.0 if metric_after > metric_before else -1.0


def trigger_reward(metric_value: float, tau: float, eta: float) -> float:
    """+eta when the metric reaches the trigger threshold, -eta otherwise."""
    return eta if metric_value >= tau else -eta


def encode_history(actions, history_len: int, n_actions: int) -> np.ndarray:
    """One-hot history vector: slot k holds the k-th most recent action;
    unfilled slots stay zero."""
    if len(actions) > history_len:
        raise ValueError(f"{len(actions)} actions do not fit a history of {history_len}")
    vec = np.zeros(history_len * n_actions)
    for slot, action in enumerate(actions):
        if not 0 <= action < n_actions:
            raise ValueError(f"action id {action} out of range 0..{n_actions - 1}")
        vec[slot * n_actions + action] = 1.0
    return vec


def _reward_targets(ep: Episode) -> list[Box]:
    if ep.fixed_target is not None:
        return [ep.gts[ep.fixed_target]]
    return ep.gts


def _metric(cfg: EnvConfig, box: Box, targets: list[Box]) -> float:
    fn = geometry.iou if cfg.reward_metric == "iou" else geometry.recall
    return max(fn(box, g) for g in targets)


def _observe(ep: Episode, extractor) -> State:
    features = extractor.extract(ep.scene, ep.box)
    history = encode_history(list(ep.actions), ep.cfg.history_len, num_actions(ep.cfg))
    return State(features, history)


def reset(cfg: EnvConfig, scene: Scene, extractor, max_steps: Optional[int] = None) -> tuple[Episode, State]:
    """Start an episode on ``scene`` with the whole image as the initial box.

    In fixed target mode the episode commits to the ground truth with the
    highest IoU against that initial box (ties to the lowest index) and every
    reward is measured against it.
    """
    gts = [ann.box for ann in scene.annotations]
    if not gts:
        raise ValueError(f"scene {scene.id!r} has no annotations")
    box = Box(0.0, 0.0, float(scene.width), float(scene.height))
    fixed = best_iou(box, gts)[0] if cfg.target_mode == "fixed" else None
    ep = Episode(
        cfg=cfg,
        scene=scene,
        box=box,
        gts=gts,
        fixed_target=fixed,
        max_steps=cfg.max_steps if max_steps is None else max_steps,
        actions=deque(maxlen=cfg.history_len),
    )
    return ep, _observe(ep, extractor)


def step(ep: Episode, action: int, extractor) -> StepResult:
    """Apply one action; returns the transition the learner stores."""
    if ep.done:
        raise RuntimeError("step called on a finished episode")
    n = num_actions(ep.cfg)
    if not 0 <= action < n:
        raise ValueError(f"action id {action} out of range 0..{n - 1}")

    bounds = (float(ep.scene.width), float(ep.scene.height))
    targets = _reward_targets(ep)
    if action == trigger_action(ep.cfg):
        reward = trigger_reward(_metric(ep.cfg, ep.box, targets), ep.cfg.tau, ep.cfg.eta)
        triggered = True
    else:
        if ep.cfg.variant == "hierarchical":
            moved = geometry.subregion(ep.box, ZoomMove(action), ep.cfg.zoom)
            moved = geometry.clamp(moved, bounds)
        else:
            moved = geometry.transform(ep.box, BoxMove(action), ep.cfg.alpha, bounds)
        before = _metric(ep.cfg, ep.box, targets)
        after = _metric(ep.cfg, moved, targets)
        reward = movement_reward(before, after)
        ep.box = moved
        triggered = False

    ep.actions.appendleft(action)
    ep.steps += 1
    ep.done = triggered or ep.steps >= ep.max_steps
    return StepResult(
        next_state=_observe(ep, extractor),
        reward=reward,
        done=ep.done,
        box=ep.box,
        iou_now=best_iou(ep.box, ep.gts)[1],
        action_taken=action,
    )
