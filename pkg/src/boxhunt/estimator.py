"""Scikit-learn style facade over the full localization pipeline."""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .env import EnvConfig
from .eval_render import evaluate, run_episode_greedy
from .features import BuiltinExtractor, ExtractorConfig, make_extractor
from .geometry import Alpha, Box, ZoomParams
from .learner import TrainConfig, train
from .scene import Annotation, Dataset, Scene
from .validation import as_dataset, require_annotated


class QLocalizer(BaseEstimator):
    """Deep-Q object localizer with a fit/predict interface.

    ``fit`` trains the Q-network on a dataset of annotated scenes; ``predict``
    runs the learned greedy policy on new scenes and returns one box per
    scene; ``score`` reports the average best-ground-truth IoU, the metric the
    training protocol selects models by.

    Parameters mirror the underlying environment and training configs. The
    default network is the small desk profile; pass ``hidden_dims=(1024, 1024)``
    and an external ``feature_server`` to reproduce the full-size setup.
    """

    def __init__(
        self,
        variant: str = "hierarchical",
        scale_subregion: float = 0.75,
        scale_mask: float = 1 / 3,
        alpha: float = 0.2,
        history_len: Optional[int] = None,
        tau: Optional[float] = None,
        eta: float = 3.0,
        reward_metric: str = "iou",
        target_mode: str = "dynamic",
        max_steps: int = 10,
        epochs: int = 10,
        steps_per_epoch: int = 10,
        batch_size: int = 100,
        replay_capacity: int = 1000,
        gamma: float = 0.9,
        learning_rate: float = 1e-3,
        eps_start: Optional[float] = None,
        eps_step: float = 0.1,
        eps_floor: float = 0.1,
        target_sync_interval: int = 10,
        hidden_dims: tuple[int, ...] = (64, 64),
        feature_grid: int = 16,
        feature_server: Optional[str] = None,
        class_name: str = "target",
        seed: int = 0,
    ):
        self.variant = variant
        self.scale_subregion = scale_subregion
        self.scale_mask = scale_mask
        self.alpha = alpha
        self.history_len = history_len
        self.tau = tau
        self.eta = eta
        self.reward_metric = reward_metric
        self.target_mode = target_mode
        self.max_steps = max_steps
        self.epochs = epochs
        self.steps_per_epoch = steps_per_epoch
        self.batch_size = batch_size
        self.replay_capacity = replay_capacity
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.eps_start = eps_start
        self.eps_step = eps_step
        self.eps_floor = eps_floor
        self.target_sync_interval = target_sync_interval
        self.hidden_dims = hidden_dims
        self.feature_grid = feature_grid
        self.feature_server = feature_server
        self.class_name = class_name
        self.seed = seed

    def _env_config(self) -> EnvConfig:
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

    def _train_config(self) -> TrainConfig:
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

    def _make_extractor(self):
        if self.feature_server:
            return make_extractor(ExtractorConfig(kind="external", server=self.feature_server))
        return BuiltinExtractor(self.feature_grid)

    def fit(self, X, y=None) -> "QLocalizer":
        """Train on annotated scenes (a Dataset or iterable of Scene)."""
        dataset = require_annotated(as_dataset(X), self.class_name)
        self.env_config_ = self._env_config()
        self.extractor_ = self._make_extractor()
        result = train(dataset, self.env_config_, self._train_config(), self.extractor_)
        self.net_ = result.net
        self.train_log_ = result.log
        self.checkpoints_ = result.checkpoints
        self.n_features_in_ = self.net_.dims[0]
        return self

    def localize(self, scene: Scene):
        """Greedy episode trace for one scene; annotations are optional (greedy
        action choice never looks at them, a placeholder fills the logs)."""
        check_is_fitted(self, "net_")
        if not scene.annotations:
            placeholder = Annotation(self.class_name, Box(0, 0, scene.width, scene.height))
            scene = replace(scene, annotations=(placeholder,))
        return run_episode_greedy(
            self.net_, self.env_config_, scene, self.extractor_, max_steps=self.max_steps
        )

    def predict(self, X) -> list[Box]:
        """Final localization box for each scene."""
        return [self.localize(scene).boxes[-1] for scene in as_dataset(X)]

    def score(self, X, y=None) -> float:
        """Average best-ground-truth IoU of the greedy policy over ``X``."""
        check_is_fitted(self, "net_")
        dataset = require_annotated(as_dataset(X), self.class_name)
        report = evaluate(self.net_, self.env_config_, dataset, self.extractor_, self.max_steps)
        return report.average_iou
