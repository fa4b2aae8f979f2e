"""Declarative experiment configuration (JSON) and named network presets."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from stressseq.augment import AugmentationSpec
from stressseq.autoencoder import AePretrainSpec
from stressseq.nn.model import NetworkSpec
from stressseq.training import LossWeights, TrainSpec

# Grid-searched hyperparameters for the three study settings, plus a small
# preset sized for the synthetic benchmark. input_dim is filled from the
# dataset at train time.
NETWORK_PRESETS = {
    "smile": {
        "network": {
            "lstm_units": (64, 64, 64),
            "lstm_dropout": 0.3,
            "lstm_recurrent_dropout": 0.4,
            "use_batchnorm": True,
            "dense_hidden": 512,
            "dense_dropout": 0.5,
        },
        "learning_rate": 1e-4,
    },
    "tiles": {
        "network": {
            "lstm_units": (32, 32, 32),
            "lstm_dropout": 0.3,
            "lstm_recurrent_dropout": 0.0,
            "use_batchnorm": True,
            "dense_hidden": 256,
            "dense_dropout": 0.5,
        },
        "learning_rate": 5e-5,
    },
    "crosscheck": {
        "network": {
            "lstm_units": (32, 32, 32),
            "lstm_dropout": 0.3,
            "lstm_recurrent_dropout": 0.0,
            "use_batchnorm": True,
            "dense_hidden": 256,
            "dense_dropout": 0.5,
        },
        "learning_rate": 5e-5,
    },
    "synth-small": {
        "network": {
            "lstm_units": (16, 16),
            "lstm_dropout": 0.1,
            "lstm_recurrent_dropout": 0.0,
            "use_batchnorm": True,
            "dense_hidden": 32,
            "dense_dropout": 0.2,
        },
        "learning_rate": 3e-3,
    },
}

DEFAULT_FOLD_COUNT = 5  # the text's protocol; one table caption says 10


def resolve_network(spec, input_dim: int = 1) -> tuple:
    """(NetworkSpec, preset learning rate or None) from a preset name or a
    dict of NetworkSpec fields."""
    if isinstance(spec, str):
        if spec not in NETWORK_PRESETS:
            raise ValueError(f"unknown network preset {spec!r}; known: {sorted(NETWORK_PRESETS)}")
        preset = NETWORK_PRESETS[spec]
        return NetworkSpec(input_dim=input_dim, **preset["network"]), preset["learning_rate"]
    d = dict(spec)
    d.setdefault("input_dim", input_dim)
    return NetworkSpec.from_dict(d), None


@dataclass
class ExperimentConfig:
    dataset: str = ""
    method: str = "baseline"
    network: object = "synth-small"  # preset name or dict
    epochs: int = 50
    batch_size: int = 8
    learning_rate: float | None = None  # falls back to the preset's rate
    loss_weights: LossWeights = field(default_factory=LossWeights)
    augmentation: AugmentationSpec = field(default_factory=AugmentationSpec)
    unlabeled_batch_ratio: float = 1.0
    fold_count: int = DEFAULT_FOLD_COUNT
    split_seed: int = 0
    pretrain: AePretrainSpec = field(default_factory=AePretrainSpec)
    active_threshold: float | None = None
    active_k_max: int = 10
    pretrained_checkpoint: str | None = None

    def train_spec(self, input_dim: int = 1) -> TrainSpec:
        network, preset_rate = resolve_network(self.network, input_dim)
        rate = self.learning_rate if self.learning_rate is not None else preset_rate
        if rate is None:
            raise ValueError("learning_rate missing and network preset has none")
        return TrainSpec(
            method=self.method,
            network=network,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=rate,
            loss_weights=self.loss_weights,
            augmentation=self.augmentation,
            unlabeled_batch_ratio=self.unlabeled_batch_ratio,
        )

    def k_range(self) -> range:
        return range(1, self.active_k_max + 1)


def load_experiment_config(path) -> ExperimentConfig:
    raw = json.loads(Path(path).read_text())
    return experiment_config_from_dict(raw)


def experiment_config_from_dict(raw: dict) -> ExperimentConfig:
    config = ExperimentConfig()
    config.dataset = raw.get("dataset", "")
    config.method = raw.get("method", "baseline")
    config.network = raw.get("network", "synth-small")
    config.epochs = int(raw.get("epochs", config.epochs))
    config.batch_size = int(raw.get("batch_size", config.batch_size))
    if "learning_rate" in raw:
        config.learning_rate = float(raw["learning_rate"])
    if "loss_weights" in raw:
        config.loss_weights = LossWeights.from_dict(raw["loss_weights"])
    if "augmentation" in raw:
        config.augmentation = AugmentationSpec.from_dict(raw["augmentation"])
    config.unlabeled_batch_ratio = float(
        raw.get("unlabeled_batch_ratio", config.unlabeled_batch_ratio)
    )
    config.fold_count = int(raw.get("fold_count", config.fold_count))
    config.split_seed = int(raw.get("split_seed", config.split_seed))
    if "pretrain" in raw:
        config.pretrain = AePretrainSpec.from_dict(raw["pretrain"])
    if "active_threshold" in raw and raw["active_threshold"] is not None:
        config.active_threshold = float(raw["active_threshold"])
    config.active_k_max = int(raw.get("active_k_max", config.active_k_max))
    config.pretrained_checkpoint = raw.get("pretrained_checkpoint")
    return config
