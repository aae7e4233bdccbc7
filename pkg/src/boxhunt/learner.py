"""Q-learning machinery: MLP Q-network trained by plain SGD, replay memory,
epsilon-greedy selection, Bellman targets against a periodically synced target
network, and the training loop with per-epoch checkpoints.

Everything here is deterministic given the seed: weight init, scene order,
exploration draws, and replay sampling all flow from seeded generators, so a
rerun with the same configuration reproduces checkpoints byte for byte.
"""

from __future__ import annotations

import json
import struct
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import env as env_mod
from .env import EnvConfig, State

CHECKPOINT_MAGIC = b"BOXHUNTQ"
CHECKPOINT_VERSION = 1


@dataclass(eq=False)
class Mlp:
    """Dense rectifier network with a linear output layer. ``weights[i]`` has
    shape (fan_in, fan_out); inputs are row vectors."""

    dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def init_mlp(dims, seed: int) -> Mlp:
    """Symmetric uniform fan-based weights, zero biases, deterministic in seed."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"bad layer dims {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims, weights, biases)


def clone(net: Mlp) -> Mlp:
    return Mlp(net.dims, [w.copy() for w in net.weights], [b.copy() for b in net.biases])


def _forward_full(net: Mlp, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Forward pass keeping hidden activations for backprop. ``x`` is (B, d)."""
    activations = [x]
    a = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        a = np.maximum(a @ w + b, 0.0)
        activations.append(a)
    q = a @ net.weights[-1] + net.biases[-1]
    return activations, q


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Q-values for one state vector (d,) or a batch (B, d); raw linear outputs."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.shape[1] != net.dims[0]:
        raise ValueError(f"input dim {batch.shape[1]} does not match network input {net.dims[0]}")
    q = _forward_full(net, batch)[1]
    return q[0] if single else q


def gradients(net: Mlp, x, action, target) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Loss and parameter gradients for squared error on the chosen actions.

    Loss is the batch mean of ``(q[action] - target)**2``; outputs other than
    the chosen action receive zero gradient.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    actions = np.atleast_1d(np.asarray(action, dtype=np.intp))
    targets = np.atleast_1d(np.asarray(target, dtype=np.float64))
    batch = x.shape[0]
    activations, q = _forward_full(net, x)

    rows = np.arange(batch)
    err = q[rows, actions] - targets
    loss = float(np.mean(err**2))
    if not np.isfinite(loss):
        raise FloatingPointError(
            f"non-finite loss {loss} (q range [{q.min()}, {q.max()}], targets {targets})"
        )

    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * err / batch
    grads_w: list[np.ndarray] = [None] * len(net.weights)
    grads_b: list[np.ndarray] = [None] * len(net.biases)
    delta = dq
    for layer in range(len(net.weights) - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ net.weights[layer].T) * (activations[layer] > 0.0)
    return loss, grads_w, grads_b


def sgd_step(net: Mlp, x, action, target, lr: float) -> float:
    """One in-place gradient-descent update; returns the pre-update loss."""
    loss, grads_w, grads_b = gradients(net, x, action, target)
    for w, gw in zip(net.weights, grads_w):
        w -= lr * gw
    for b, gb in zip(net.biases, grads_b):
        b -= lr * gb
    return loss


@dataclass(eq=False)
class Experience:
    state: State
    action: int
    reward: float
    next_state: Optional[State]
    done: bool

    def __post_init__(self) -> None:
        if self.done != (self.next_state is None):
            raise ValueError("next_state must be absent exactly when done")


class ReplayBuffer:
    """FIFO ring of experiences, uniform sampling without replacement."""

    def __init__(self, capacity: int = 1000):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items: deque[Experience] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def push(self, exp: Experience) -> None:
        self._items.append(exp)

    def sample(self, n: int, rng: np.random.Generator) -> list[Experience]:
        """Uniform batch of ``n`` items; all stored items when fewer than ``n``."""
        if n < 1:
            raise ValueError(f"sample size must be >= 1, got {n}")
        if len(self._items) <= n:
            return list(self._items)
        items = list(self._items)
        idx = rng.choice(len(items), size=n, replace=False)
        return [items[i] for i in idx]


def bellman_target(exp: Experience, target_net: Mlp, gamma: float) -> float:
    """Reward for terminal transitions, otherwise reward plus the discounted
    best next q-value under the target network."""
    if exp.done:
        return exp.reward
    return exp.reward + gamma * float(np.max(forward(target_net, exp.next_state.vector)))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    steps_per_epoch: int = 10
    batch_size: int = 100
    replay_capacity: int = 1000
    gamma: float = 0.9
    learning_rate: float = 1e-3
    eps_start: Optional[float] = None  # defaults: 0.9 hierarchical, 1.0 dynamic
    eps_step: float = 0.1
    eps_floor: float = 0.1
    target_sync_interval: int = 10  # 0 = single-network mode
    hidden_dims: tuple[int, ...] = (1024, 1024)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.steps_per_epoch < 1:
            raise ValueError(f"steps_per_epoch must be >= 1, got {self.steps_per_epoch}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0,1], got {self.gamma}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 1 <= self.batch_size <= self.replay_capacity:
            raise ValueError(
                f"batch_size {self.batch_size} must be in 1..replay_capacity {self.replay_capacity}"
            )
        for eps in (self.eps_start, self.eps_step, self.eps_floor):
            if eps is not None and not 0.0 <= eps <= 1.0:
                raise ValueError(f"epsilon values must be in [0,1], got {eps}")
        if self.target_sync_interval < 0:
            raise ValueError(f"target_sync_interval must be >= 0, got {self.target_sync_interval}")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError(f"hidden dims must be positive, got {self.hidden_dims}")

    def resolved(self, variant: str) -> "TrainConfig":
        """Fill the variant-dependent exploration default."""
        if self.eps_start is not None:
            return self
        return replace(self, eps_start=0.9 if variant == "hierarchical" else 1.0)


def desk_profile(**overrides) -> TrainConfig:
    """Small-network profile that trains in minutes on synthetic scenes."""
    params = {"hidden_dims": (64, 64)}
    params.update(overrides)
    return TrainConfig(**params)


def epsilon(epoch_index: int, cfg: TrainConfig) -> float:
    """Exploration rate for an epoch: starts at eps_start, drops by eps_step
    per epoch, never below eps_floor."""
    if epoch_index < 0:
        raise ValueError(f"epoch_index must be >= 0, got {epoch_index}")
    if cfg.eps_start is None:
        raise ValueError("eps_start unresolved; call cfg.resolved(variant) first")
    # Rounding absorbs float drift so decimal schedules hit exact decimals.
    return max(cfg.eps_floor, round(cfg.eps_start - cfg.eps_step * epoch_index, 12))


def select_action(net: Mlp, x: np.ndarray, eps: float, rng=None) -> int:
    """Epsilon-greedy pick; pure exploration (eps=1) never consults the q-values."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must be in [0,1], got {eps}")
    if eps > 0.0:
        if rng is None:
            raise ValueError("exploration requires an rng")
        if rng.random() < eps:
            return int(rng.integers(net.dims[-1]))
    return int(np.argmax(forward(net, x)))


def select_action_random(n_actions: int, rng) -> int:
    """Uniform action pick for policy-free baselines."""
    return int(rng.integers(n_actions))


def sync_target(policy_net: Mlp, target_net: Mlp) -> None:
    """Copy policy parameters into the target network buffers."""
    if policy_net.dims != target_net.dims:
        raise ValueError(f"dim mismatch: policy {policy_net.dims}, target {target_net.dims}")
    for dst, src in zip(target_net.weights, policy_net.weights):
        np.copyto(dst, src)
    for dst, src in zip(target_net.biases, policy_net.biases):
        np.copyto(dst, src)


@dataclass
class EpochStats:
    epoch: int
    epsilon: float
    mean_reward: float
    trigger_rate: float
    mean_episode_len: float
    checkpoint: Optional[str] = None


@dataclass
class StepStats:
    global_step: int
    loss: float
    probe_q: Optional[list[list[float]]] = None


@dataclass
class TrainLog:
    epochs: list[EpochStats] = field(default_factory=list)
    steps: list[StepStats] = field(default_factory=list)

    def to_jsonl(self) -> str:
        lines = []
        for e in self.epochs:
            record = {
                "epoch": e.epoch,
                "epsilon": e.epsilon,
                "mean_reward": e.mean_reward,
                "trigger_rate": e.trigger_rate,
                "mean_episode_len": e.mean_episode_len,
                "checkpoint": e.checkpoint,
            }
            lines.append(json.dumps(record, sort_keys=True))
        return "\n".join(lines) + "\n" if lines else ""


@dataclass(eq=False)
class TrainResult:
    net: Mlp
    log: TrainLog
    checkpoints: list[Mlp]
    checkpoint_paths: list[Path]


def _train_on_batch(net: Mlp, target_net: Mlp, batch: list[Experience], gamma: float, lr: float) -> float:
    x = np.stack([e.state.vector for e in batch])
    actions = np.array([e.action for e in batch], dtype=np.intp)
    targets = np.array([e.reward for e in batch], dtype=np.float64)
    live = [i for i, e in enumerate(batch) if not e.done]
    if live:
        next_x = np.stack([batch[i].next_state.vector for i in live])
        best_next = np.max(forward(target_net, next_x), axis=1)
        targets[live] += gamma * best_next
    return sgd_step(net, x, actions, targets, lr)


def train(
    dataset,
    env_cfg: EnvConfig,
    train_cfg: TrainConfig,
    extractor,
    checkpoint_dir: Optional[Path] = None,
    probes: Optional[list[np.ndarray]] = None,
) -> TrainResult:
    """Run the full training loop.

    Per epoch, scenes are visited in a freshly shuffled order and each hosts
    one episode capped at ``steps_per_epoch`` steps. Every environment step
    pushes one experience and performs one SGD update on a replay batch with
    Bellman targets from the target network; the target network re-syncs every
    ``target_sync_interval`` global steps. A checkpoint is taken after every
    epoch.
    """
    scenes = list(dataset)
    if not scenes:
        raise ValueError("cannot train on an empty dataset")
    cfg = train_cfg.resolved(env_cfg.variant)
    n_actions = env_mod.num_actions(env_cfg)
    input_dim = env_mod.state_dim(env_cfg, extractor.dim)
    net = init_mlp((input_dim, *cfg.hidden_dims, n_actions), cfg.seed)
    single_network = cfg.target_sync_interval == 0
    target_net = net if single_network else clone(net)
    buffer = ReplayBuffer(cfg.replay_capacity)
    rng = np.random.default_rng(cfg.seed)

    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    log = TrainLog()
    checkpoints: list[Mlp] = []
    checkpoint_paths: list[Path] = []
    global_step = 0

    for epoch in range(cfg.epochs):
        eps = epsilon(epoch, cfg)
        order = rng.permutation(len(scenes))
        rewards: list[float] = []
        episode_lengths: list[int] = []
        triggered_episodes = 0

        for scene_idx in order:
            episode, state = env_mod.reset(
                env_cfg, scenes[scene_idx], extractor, max_steps=cfg.steps_per_epoch
            )
            while not episode.done:
                action = select_action(net, state.vector, eps, rng)
                result = env_mod.step(episode, action, extractor)
                buffer.push(
                    Experience(
                        state=state,
                        action=action,
                        reward=result.reward,
                        next_state=None if result.done else result.next_state,
                        done=result.done,
                    )
                )
                batch = buffer.sample(cfg.batch_size, rng)
                loss = _train_on_batch(net, target_net, batch, cfg.gamma, cfg.learning_rate)
                global_step += 1
                if not single_network and global_step % cfg.target_sync_interval == 0:
                    sync_target(net, target_net)
                probe_q = None
                if probes is not None:
                    probe_q = [forward(target_net, p).tolist() for p in probes]
                log.steps.append(StepStats(global_step, loss, probe_q))
                rewards.append(result.reward)
                state = result.next_state
                if result.done and result.action_taken == env_mod.trigger_action(env_cfg):
                    triggered_episodes += 1
            episode_lengths.append(episode.steps)

        snapshot = clone(net)
        checkpoints.append(snapshot)
        checkpoint_name = None
        if checkpoint_dir is not None:
            path = checkpoint_dir / f"epoch-{epoch:03d}.ckpt"
            save_checkpoint(snapshot, path, env_cfg.variant)
            checkpoint_paths.append(path)
            checkpoint_name = path.name
        log.epochs.append(
            EpochStats(
                epoch=epoch,
                epsilon=eps,
                mean_reward=float(np.mean(rewards)),
                trigger_rate=triggered_episodes / len(scenes),
                mean_episode_len=float(np.mean(episode_lengths)),
                checkpoint=checkpoint_name,
            )
        )
    return TrainResult(net, log, checkpoints, checkpoint_paths)


def save_checkpoint(net: Mlp, path: Path, variant: str) -> None:
    """Versioned binary checkpoint: magic, version, variant tag, dims, then
    float64 little-endian parameters (weights row-major, then biases)."""
    tag = variant.encode("utf-8")
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<I", CHECKPOINT_VERSION),
        struct.pack("<I", len(tag)),
        tag,
        struct.pack("<I", len(net.dims)),
        struct.pack(f"<{len(net.dims)}I", *net.dims),
    ]
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path: Path, variant: Optional[str] = None) -> tuple[Mlp, str]:
    """Read a checkpoint; raises when the file is not a checkpoint, the format
    version is unknown, or the stored variant differs from ``variant``."""
    data = Path(path).read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint")
    offset = 8

    def unpack(fmt):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(data):
            raise ValueError(f"{path}: truncated checkpoint")
        values = struct.unpack_from(fmt, data, offset)
        offset += size
        return values

    (version,) = unpack("<I")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    (tag_len,) = unpack("<I")
    stored_variant = data[offset : offset + tag_len].decode("utf-8")
    offset += tag_len
    if variant is not None and stored_variant != variant:
        raise ValueError(
            f"{path}: checkpoint was trained for variant {stored_variant!r}, requested {variant!r}"
        )
    (ndims,) = unpack("<I")
    dims = unpack(f"<{ndims}I")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        count = fan_in * fan_out
        w = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(fan_in, fan_out)
        offset += count * 8
        b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=offset)
        offset += fan_out * 8
        weights.append(w.copy())
        biases.append(b.copy())
    if offset != len(data):
        raise ValueError(f"{path}: trailing bytes, checkpoint corrupt")
    return Mlp(tuple(dims), weights, biases), stored_variant
