"""Command-line surface: synth, train, eval, render, ablate.

Run directories are named by a hash of the full configuration, so a rerun
with identical flags lands in the same place and reproduces identical bytes.
Exit codes: 0 success, 2 configuration or usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .env import EnvConfig
from .eval_render import evaluate, load_traces, render_trace, save_traces
from .features import BuiltinExtractor, ExtractorConfig, make_extractor
from .geometry import Alpha, ZoomParams
from .learner import TrainConfig, load_checkpoint, train
from .scene import SynthSpec, filter_by_class, generate_synthetic, load_dataset, save_dataset

FEATURE_SERVER_ENV = "BOXHUNT_FEATURE_SERVER"


class ConfigError(ValueError):
    """Bad configuration: maps to exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    """Union of dataset, environment, training, and feature settings for one run."""

    data: str = ""
    class_name: str = "target"
    variant: str = "hierarchical"
    scale_subregion: float = 0.75
    scale_mask: float = 1 / 3
    alpha: float = 0.2
    history_len: Optional[int] = None
    tau: Optional[float] = None
    eta: float = 3.0
    reward_metric: str = "iou"
    target_mode: str = "dynamic"
    max_steps: int = 10
    epochs: int = 10
    steps_per_epoch: int = 10
    batch_size: int = 100
    replay_capacity: int = 1000
    gamma: float = 0.9
    learning_rate: float = 1e-3
    eps_start: Optional[float] = None
    eps_step: float = 0.1
    eps_floor: float = 0.1
    target_sync_interval: int = 10
    hidden_dims: tuple[int, ...] = (64, 64)
    feature_grid: int = 16
    feature_server: Optional[str] = None
    seed: int = 0

    def to_dict(self) -> dict:
        record = asdict(self)
        record["hidden_dims"] = list(self.hidden_dims)
        return record

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]

    def env_config(self) -> EnvConfig:
        try:
            return EnvConfig(
                variant=self.variant,
                zoom=ZoomParams(self.scale_subregion, self.scale_mask),
                alpha=Alpha(self.alpha),
                history_len=self.history_len,
                tau=self.tau,
                eta=self.eta,
                reward_metric=self.reward_metric,
                target_mode=self.target_mode,
                max_steps=self.max_steps,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig(
                epochs=self.epochs,
                steps_per_epoch=self.steps_per_epoch,
                batch_size=self.batch_size,
                replay_capacity=self.replay_capacity,
                gamma=self.gamma,
                learning_rate=self.learning_rate,
                eps_start=self.eps_start,
                eps_step=self.eps_step,
                eps_floor=self.eps_floor,
                target_sync_interval=self.target_sync_interval,
                hidden_dims=tuple(self.hidden_dims),
                seed=self.seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def extractor(self):
        server = self.feature_server or os.environ.get(FEATURE_SERVER_ENV)
        if server:
            return make_extractor(ExtractorConfig(kind="external", server=server))
        return BuiltinExtractor(self.feature_grid)


_CONFIG_FIELDS = {f.name for f in fields(RunConfig)}


def build_run_config(config_path: Optional[str], overrides: dict) -> RunConfig:
    """Start from defaults, apply the JSON config file, then non-None flags."""
    values: dict = {}
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {config_path} must hold a JSON object")
        values.update(loaded)
    values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(values) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "hidden_dims" in values:
        values["hidden_dims"] = tuple(int(d) for d in values["hidden_dims"])
    try:
        return RunConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _load_filtered(manifest: str, class_name: str):
    path = Path(manifest)
    if path.is_dir():
        path = path / "manifest.jsonl"
    dataset = load_dataset(path)
    filtered = filter_by_class(dataset, class_name)
    if len(filtered) == 0:
        raise ConfigError(f"no scene in {path} carries class {class_name!r}")
    return filtered


def _parse_hidden_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad hidden dims {text!r}") from exc
    if not dims:
        raise argparse.ArgumentTypeError("hidden dims must name at least one layer")
    return dims


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def cmd_synth(args) -> int:
    spec = SynthSpec(
        count=args.count,
        width=args.width,
        height=args.height,
        class_name=args.class_name,
        target_frac=tuple(args.target_frac),
        distractors=tuple(args.distractors),
        noise=args.noise,
        seed=args.seed,
    )
    manifest = save_dataset(generate_synthetic(spec), Path(args.out))
    print(f"wrote {spec.count} scenes to {manifest}")
    return 0


def _add_config_flags(parser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its fields")
    parser.add_argument("--data", help="dataset manifest (or directory holding manifest.jsonl)")
    parser.add_argument("--class-name", dest="class_name")
    parser.add_argument("--variant", choices=["hierarchical", "dynamic"])
    parser.add_argument("--scale-subregion", dest="scale_subregion", type=float)
    parser.add_argument("--scale-mask", dest="scale_mask", type=float)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--history-len", dest="history_len", type=int)
    parser.add_argument("--tau", type=float)
    parser.add_argument("--eta", type=float)
    parser.add_argument("--reward-metric", dest="reward_metric", choices=["iou", "recall"])
    parser.add_argument("--target-mode", dest="target_mode", choices=["dynamic", "fixed"])
    parser.add_argument("--max-steps", dest="max_steps", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--steps-per-epoch", dest="steps_per_epoch", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--replay-capacity", dest="replay_capacity", type=int)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--lr", dest="learning_rate", type=float)
    parser.add_argument("--eps-start", dest="eps_start", type=float)
    parser.add_argument("--eps-step", dest="eps_step", type=float)
    parser.add_argument("--eps-floor", dest="eps_floor", type=float)
    parser.add_argument("--sync-interval", dest="target_sync_interval", type=int)
    parser.add_argument("--hidden-dims", dest="hidden_dims", type=_parse_hidden_dims)
    parser.add_argument("--feature-grid", dest="feature_grid", type=int)
    parser.add_argument("--feature-server", dest="feature_server")
    parser.add_argument("--seed", type=int)


def _overrides_from(args) -> dict:
    return {name: getattr(args, name, None) for name in _CONFIG_FIELDS}


def run_training(cfg: RunConfig, out_base: Path, tag: Optional[str] = None) -> Path:
    """Train per ``cfg`` into ``out_base/run-<hash>[-tag]``; returns the run dir."""
    if not cfg.data:
        raise ConfigError("no dataset given; pass --data or set it in the config")
    dataset = _load_filtered(cfg.data, cfg.class_name)
    run_name = f"run-{cfg.digest()}" + (f"-{tag}" if tag else "")
    run_dir = Path(out_base) / run_name
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(
        json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    result = train(dataset, cfg.env_config(), cfg.train_config(), cfg.extractor(), checkpoint_dir=run_dir)
    (run_dir / "trainlog.jsonl").write_text(result.log.to_jsonl(), encoding="utf-8")
    for stats in result.log.epochs:
        print(
            f"epoch {stats.epoch}: eps={stats.epsilon} mean_reward={stats.mean_reward:.4f} "
            f"trigger_rate={stats.trigger_rate:.3f} mean_len={stats.mean_episode_len:.2f}"
        )
    return run_dir


def cmd_train(args) -> int:
    cfg = build_run_config(args.config, _overrides_from(args))
    run_dir = run_training(cfg, Path(args.out), args.tag)
    print(f"run directory: {run_dir}")
    return 0


def cmd_eval(args) -> int:
    cfg = build_run_config(args.config, _overrides_from(args))
    if not cfg.data:
        raise ConfigError("no dataset given; pass --data or set it in the config")
    checkpoint = Path(args.checkpoint)
    paths = sorted(checkpoint.glob("*.ckpt")) if checkpoint.is_dir() else [checkpoint]
    if not paths:
        raise ConfigError(f"no checkpoints under {checkpoint}")
    dataset = _load_filtered(cfg.data, cfg.class_name)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    extractor = cfg.extractor()

    # the checkpoint's stored variant drives the env; a conflicting --variant is an error
    _, stored_variant = load_checkpoint(paths[0])
    if args.variant and args.variant != stored_variant:
        raise ConfigError(
            f"checkpoint variant {stored_variant!r} does not match requested {args.variant!r}"
        )
    cfg = replace(cfg, variant=stored_variant)
    env_cfg = cfg.env_config()

    best = (-1.0, 0)
    for index, path in enumerate(paths):
        net, _ = load_checkpoint(path, variant=stored_variant)
        report = evaluate(net, env_cfg, dataset, extractor, max_steps=args.max_steps)
        stem = path.stem
        (out_dir / f"report-{stem}.json").write_text(report.to_json(), encoding="utf-8")
        save_traces(report.traces, out_dir / f"traces-{stem}.jsonl")
        print(f"{path.name}: average_iou={report.average_iou:.4f}")
        if report.average_iou > best[0]:
            best = (report.average_iou, index)
    print(f"best epoch {best[1]}, avg IoU {best[0]:.4f}")
    return 0


def cmd_render(args) -> int:
    dataset = load_dataset(
        Path(args.data) / "manifest.jsonl" if Path(args.data).is_dir() else Path(args.data)
    )
    by_id = {scene.id: scene for scene in dataset}
    traces = load_traces(Path(args.traces))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for index, trace in enumerate(traces):
        scene = by_id.get(trace.scene_id)
        if scene is None:
            raise ConfigError(f"trace references unknown scene id {trace.scene_id!r}")
        render_trace(trace, scene, out_dir / f"{index:03d}-{trace.scene_id}.svg")
    print(f"rendered {len(traces)} traces to {out_dir}")
    return 0


def _ablation_row(row) -> dict:
    """Train + evaluate one grid row; isolated so rows can run in worker processes."""
    index, config_values, out_dir, max_steps = row
    try:
        cfg = RunConfig(**config_values)
        row_dir = run_training(cfg, Path(out_dir), tag=f"row{index}")
        dataset = _load_filtered(cfg.data, cfg.class_name)
        extractor = cfg.extractor()
        env_cfg = cfg.env_config()
        best = -1.0
        for path in sorted(Path(row_dir).glob("*.ckpt")):
            net, _ = load_checkpoint(path, variant=cfg.variant)
            report = evaluate(net, env_cfg, dataset, extractor, max_steps=max_steps)
            best = max(best, report.average_iou)
        return {"row": index, "best_average_iou": best}
    except Exception as exc:  # noqa: BLE001 - row failures must not kill siblings
        return {"row": index, "error": f"{type(exc).__name__}: {exc}"}


def _axis_sort_key(value):
    # sort numeric axes by value, numeric pairs elementwise, anything else as text
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (0, (float(value),))
    if isinstance(value, (list, tuple)):
        try:
            return (1, tuple(float(v) for v in value))
        except (TypeError, ValueError):
            pass
    return (2, (str(value),))


def cmd_ablate(args) -> int:
    try:
        grid = json.loads(Path(args.grid).read_text(encoding="utf-8"))
        base = grid["base"]
        axis = grid["axis"]
        values = grid["values"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"bad grid config {args.grid}: {exc}") from exc
    axis_fields = [axis] if isinstance(axis, str) else list(axis)
    for name in axis_fields:
        if name not in _CONFIG_FIELDS:
            raise ConfigError(f"axis names unknown config field {name!r}")

    rows = []
    for index, value in enumerate(values):
        entry = dict(base)
        bundle = [value] if isinstance(axis, str) else list(value)
        if len(bundle) != len(axis_fields):
            raise ConfigError(f"value {value!r} does not match axis {axis_fields}")
        entry.update(dict(zip(axis_fields, bundle)))
        row_cfg = build_run_config(None, entry)
        rows.append((index, row_cfg.to_dict(), str(args.out), args.max_steps))

    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_ablation_row, rows))
    else:
        results = [_ablation_row(row) for row in rows]

    by_row = {r["row"]: r for r in results}
    table = []
    failed = False
    for index, value in enumerate(values):
        result = by_row[index]
        if "error" in result:
            failed = True
            table.append({"value": value, "error": result["error"]})
        else:
            table.append({"value": value, "best_average_iou": result["best_average_iou"]})

    table.sort(key=lambda row: _axis_sort_key(row["value"]))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "results.json").write_text(
        json.dumps({"axis": axis, "rows": table}, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    print(f"{axis}\thighest average IoU")
    for row in table:
        outcome = row.get("best_average_iou")
        print(f"{row['value']}\t{outcome if outcome is not None else 'ERROR: ' + row['error']}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boxhunt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--count", type=_positive_int, required=True)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--width", type=int, default=64)
    p_synth.add_argument("--height", type=int, default=64)
    p_synth.add_argument("--class-name", dest="class_name", default="target")
    p_synth.add_argument("--target-frac", dest="target_frac", nargs=2, type=float, default=[0.35, 0.6])
    p_synth.add_argument("--distractors", nargs=2, type=int, default=[1, 3])
    p_synth.add_argument("--noise", type=float, default=0.1)
    p_synth.set_defaults(handler=cmd_synth)

    p_train = sub.add_parser("train", help="train an agent, one checkpoint per epoch")
    _add_config_flags(p_train)
    p_train.add_argument("--out", default="runs")
    p_train.add_argument("--tag", help="human label appended to the run directory name")
    p_train.set_defaults(handler=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate checkpoint(s) on a dataset")
    _add_config_flags(p_eval)
    p_eval.add_argument("--checkpoint", required=True, help="checkpoint file or run directory")
    p_eval.add_argument("--out", default="eval-out")
    p_eval.set_defaults(handler=cmd_eval)

    p_render = sub.add_parser("render", help="render episode traces as SVG files")
    p_render.add_argument("--traces", required=True)
    p_render.add_argument("--data", required=True)
    p_render.add_argument("--out", required=True)
    p_render.set_defaults(handler=cmd_render)

    p_ablate = sub.add_parser("ablate", help="sweep one config axis, one run per value")
    p_ablate.add_argument("--grid", required=True, help="JSON: base config + axis + values")
    p_ablate.add_argument("--out", default="ablation")
    p_ablate.add_argument("--jobs", type=_positive_int, default=1)
    p_ablate.add_argument("--max-steps", dest="max_steps", type=int, default=None)
    p_ablate.set_defaults(handler=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
