"""boxhunt: reinforcement-learned object localization by box zooming or deformation."""

from .env import EnvConfig, State, StepResult, num_actions, reset, step, trigger_action
from .estimator import QLocalizer
from .eval_render import (
    EpisodeTrace,
    EvalReport,
    evaluate,
    render_trace,
    run_episode_greedy,
    select_best_epoch,
)
from .features import BuiltinExtractor, ExtractorConfig, FeatureServerClient, make_extractor
from .geometry import Alpha, Box, BoxMove, ZoomMove, ZoomParams, best_iou, iou, recall
from .learner import (
    Mlp,
    ReplayBuffer,
    TrainConfig,
    desk_profile,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .scene import (
    Annotation,
    Dataset,
    Scene,
    SynthSpec,
    filter_by_class,
    generate_synthetic,
    load_dataset,
    save_dataset,
    split_train_test,
)

__version__ = "0.1.0"

__all__ = [
    "Alpha",
    "Annotation",
    "Box",
    "BoxMove",
    "BuiltinExtractor",
    "Dataset",
    "EnvConfig",
    "EpisodeTrace",
    "EvalReport",
    "ExtractorConfig",
    "FeatureServerClient",
    "Mlp",
    "QLocalizer",
    "ReplayBuffer",
    "Scene",
    "State",
    "StepResult",
    "SynthSpec",
    "TrainConfig",
    "ZoomMove",
    "ZoomParams",
    "best_iou",
    "desk_profile",
    "evaluate",
    "filter_by_class",
    "generate_synthetic",
    "iou",
    "load_checkpoint",
    "load_dataset",
    "make_extractor",
    "num_actions",
    "recall",
    "render_trace",
    "reset",
    "run_episode_greedy",
    "save_checkpoint",
    "save_dataset",
    "select_best_epoch",
    "split_train_test",
    "step",
    "train",
    "trigger_action",
]
