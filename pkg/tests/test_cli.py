import json

import pytest

from boxhunt.cli import RunConfig, build_run_config, main
from boxhunt.scene import SynthSpec, generate_synthetic, save_dataset


@pytest.fixture()
def manifest(tmp_path):
    data = generate_synthetic(SynthSpec(count=5, width=32, height=32, seed=2))
    return save_dataset(data, tmp_path / "data")


def small_train_args(manifest, out):
    return [
        "train",
        "--data",
        str(manifest),
        "--out",
        str(out),
        "--epochs",
        "2",
        "--batch-size",
        "8",
        "--replay-capacity",
        "32",
        "--seed",
        "3",
    ]


class TestSynth:
    def test_writes_images_and_manifest(self, tmp_path):
        out = tmp_path / "synth"
        assert main(["synth", "--count", "4", "--out", str(out), "--seed", "9"]) == 0
        assert (out / "manifest.jsonl").exists()
        assert len(list((out / "images").glob("*.pgm"))) == 4

    def test_rerun_identical_bytes(self, tmp_path):
        out = tmp_path / "synth"
        main(["synth", "--count", "3", "--out", str(out), "--seed", "5"])
        before = {p.name: p.read_bytes() for p in out.rglob("*") if p.is_file()}
        main(["synth", "--count", "3", "--out", str(out), "--seed", "5"])
        after = {p.name: p.read_bytes() for p in out.rglob("*") if p.is_file()}
        assert before == after

    def test_zero_count_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(["synth", "--count", "0", "--out", str(tmp_path)])
        assert excinfo.value.code == 2


class TestRunConfig:
    def test_feature_server_env_var(self, monkeypatch):
        import sys
        from pathlib import Path

        stub = Path(__file__).parent / "stub_feature_server.py"
        monkeypatch.setenv("BOXHUNT_FEATURE_SERVER", f"{sys.executable} {stub} --dim 8")
        extractor = RunConfig(data="x").extractor()
        try:
            assert extractor.dim == 8
        finally:
            extractor.close()

    def test_builtin_extractor_without_env_var(self, monkeypatch):
        monkeypatch.delenv("BOXHUNT_FEATURE_SERVER", raising=False)
        extractor = RunConfig(data="x", feature_grid=8).extractor()
        assert extractor.dim == 64

    def test_flags_override_config_file(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"gamma": 0.5, "seed": 1}))
        cfg = build_run_config(str(config), {"gamma": 0.7})
        assert cfg.gamma == 0.7
        assert cfg.seed == 1

    def test_unknown_field_rejected(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"gamm": 0.5}))
        from boxhunt.cli import ConfigError

        with pytest.raises(ConfigError, match="gamm"):
            build_run_config(str(config), {})

    def test_digest_stable_and_sensitive(self):
        a = RunConfig(data="x", gamma=0.9)
        b = RunConfig(data="x", gamma=0.9)
        c = RunConfig(data="x", gamma=0.5)
        assert a.digest() == b.digest()
        assert a.digest() != c.digest()


class TestTrain:
    def test_run_directory_contents(self, tmp_path, manifest):
        out = tmp_path / "runs"
        assert main(small_train_args(manifest, out)) == 0
        (run_dir,) = list(out.iterdir())
        names = {p.name for p in run_dir.iterdir()}
        assert "config.json" in names
        assert "trainlog.jsonl" in names
        assert {"epoch-000.ckpt", "epoch-001.ckpt"} <= names
        echoed = json.loads((run_dir / "config.json").read_text())
        assert echoed["epochs"] == 2

    def test_missing_data_is_config_error(self, tmp_path):
        assert main(["train", "--out", str(tmp_path)]) == 2

    def test_bad_config_file_is_config_error(self, tmp_path):
        config = tmp_path / "broken.json"
        config.write_text("{nope")
        assert main(["train", "--config", str(config), "--out", str(tmp_path)]) == 2

    def test_missing_manifest_is_runtime_error(self, tmp_path):
        args = ["train", "--data", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path)]
        assert main(args) == 1

    def test_dynamic_variant_checkpoints(self, tmp_path, manifest):
        out = tmp_path / "runs"
        assert main(small_train_args(manifest, out) + ["--variant", "dynamic"]) == 0
        from boxhunt.learner import load_checkpoint

        (run_dir,) = list(out.iterdir())
        net, variant = load_checkpoint(run_dir / "epoch-000.ckpt")
        assert variant == "dynamic"
        assert net.dims[-1] == 9


class TestEval:
    def test_eval_directory_reports_best_epoch(self, tmp_path, manifest, capsys):
        out = tmp_path / "runs"
        main(small_train_args(manifest, out))
        (run_dir,) = list(out.iterdir())
        eval_out = tmp_path / "eval"
        code = main(
            ["eval", "--checkpoint", str(run_dir), "--data", str(manifest), "--out", str(eval_out)]
        )
        assert code == 0
        captured = capsys.readouterr().out
        assert "best epoch" in captured
        assert len(list(eval_out.glob("report-*.json"))) == 2
        assert len(list(eval_out.glob("traces-*.jsonl"))) == 2

    def test_variant_mismatch_rejected(self, tmp_path, manifest):
        out = tmp_path / "runs"
        main(small_train_args(manifest, out))
        (run_dir,) = list(out.iterdir())
        code = main(
            [
                "eval",
                "--checkpoint",
                str(run_dir / "epoch-000.ckpt"),
                "--data",
                str(manifest),
                "--variant",
                "dynamic",
                "--out",
                str(tmp_path / "eval"),
            ]
        )
        assert code == 2

    def test_max_steps_flag(self, tmp_path, manifest):
        out = tmp_path / "runs"
        main(small_train_args(manifest, out))
        (run_dir,) = list(out.iterdir())
        eval_out = tmp_path / "eval"
        code = main(
            [
                "eval",
                "--checkpoint",
                str(run_dir / "epoch-000.ckpt"),
                "--data",
                str(manifest),
                "--max-steps",
                "7",
                "--out",
                str(eval_out),
            ]
        )
        assert code == 0
        report = json.loads(next(eval_out.glob("report-*.json")).read_text())
        assert report["config"]["max_steps"] == 7
        assert all(len(scene["actions"]) <= 7 for scene in report["scenes"])


class TestRender:
    def test_renders_one_svg_per_trace(self, tmp_path, manifest):
        out = tmp_path / "runs"
        main(small_train_args(manifest, out))
        (run_dir,) = list(out.iterdir())
        eval_out = tmp_path / "eval"
        main(
            [
                "eval",
                "--checkpoint",
                str(run_dir / "epoch-000.ckpt"),
                "--data",
                str(manifest),
                "--out",
                str(eval_out),
            ]
        )
        traces = next(eval_out.glob("traces-*.jsonl"))
        svg_out = tmp_path / "svg"
        assert main(["render", "--traces", str(traces), "--data", str(manifest), "--out", str(svg_out)]) == 0
        assert len(list(svg_out.glob("*.svg"))) == 5

    def test_unknown_scene_id_names_it(self, tmp_path, manifest, capsys):
        traces = tmp_path / "traces.jsonl"
        record = {
            "scene": "ghost",
            "boxes": [[0, 0, 32, 32]],
            "actions": [],
            "rewards": [],
            "ious": [],
            "triggered": False,
            "final_iou": 0.0,
        }
        traces.write_text(json.dumps(record) + "\n")
        code = main(["render", "--traces", str(traces), "--data", str(manifest), "--out", str(tmp_path / "svg")])
        assert code == 2
        assert "ghost" in capsys.readouterr().err


class TestAblate:
    def test_single_value_axis_matches_manual_composition(self, tmp_path, manifest):
        base = {
            "data": str(manifest),
            "epochs": 2,
            "batch_size": 8,
            "replay_capacity": 32,
            "seed": 3,
        }
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"base": base, "axis": "gamma", "values": [0.9]}))
        ablate_out = tmp_path / "ablate"
        assert main(["ablate", "--grid", str(grid), "--out", str(ablate_out)]) == 0
        results = json.loads((ablate_out / "results.json").read_text())
        (row,) = results["rows"]

        # manual composition: train then evaluate each epoch, take the best
        train_out = tmp_path / "manual"
        assert main(small_train_args(manifest, train_out) + ["--gamma", "0.9"]) == 0
        (run_dir,) = list(train_out.iterdir())
        from boxhunt.cli import RunConfig, _load_filtered
        from boxhunt.eval_render import evaluate
        from boxhunt.learner import load_checkpoint

        cfg = RunConfig(**{**base, "gamma": 0.9})
        dataset = _load_filtered(cfg.data, cfg.class_name)
        best = max(
            evaluate(
                load_checkpoint(p, variant="hierarchical")[0],
                cfg.env_config(),
                dataset,
                cfg.extractor(),
            ).average_iou
            for p in sorted(run_dir.glob("*.ckpt"))
        )
        assert row["best_average_iou"] == pytest.approx(best, abs=1e-12)

    def test_row_failure_does_not_abort_siblings(self, tmp_path, manifest):
        base = {"data": str(manifest), "epochs": 1, "batch_size": 8, "replay_capacity": 32}
        grid = tmp_path / "grid.json"
        # gamma 0 violates the config invariant and must fail alone
        grid.write_text(json.dumps({"base": base, "axis": "gamma", "values": [0.0, 0.9]}))
        ablate_out = tmp_path / "ablate"
        assert main(["ablate", "--grid", str(grid), "--out", str(ablate_out)]) == 1
        rows = json.loads((ablate_out / "results.json").read_text())["rows"]
        outcomes = {json.dumps(r["value"]): ("error" in r) for r in rows}
        assert outcomes == {"0.0": True, "0.9": False}

    def test_unknown_axis_rejected(self, tmp_path, manifest):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"base": {"data": str(manifest)}, "axis": "nope", "values": [1]}))
        assert main(["ablate", "--grid", str(grid), "--out", str(tmp_path / "x")]) == 2

    def test_parallel_jobs_reproduce_serial_results(self, tmp_path, manifest):
        base = {
            "data": str(manifest),
            "epochs": 1,
            "batch_size": 8,
            "replay_capacity": 32,
            "seed": 6,
        }
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"base": base, "axis": "gamma", "values": [0.5, 0.9]}))
        serial_out = tmp_path / "serial"
        parallel_out = tmp_path / "parallel"
        assert main(["ablate", "--grid", str(grid), "--out", str(serial_out)]) == 0
        assert main(["ablate", "--grid", str(grid), "--out", str(parallel_out), "--jobs", "2"]) == 0
        serial = json.loads((serial_out / "results.json").read_text())
        parallel = json.loads((parallel_out / "results.json").read_text())
        assert serial["rows"] == parallel["rows"]
