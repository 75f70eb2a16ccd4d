"""Training and merge settings with their invariants."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from finetune.model import model_spec

PRECISIONS = ("fp16", "fp32")


class ConfigError(ValueError):
    pass


@dataclass
class FinetuneConfig:
    """Hyperparameters for one fine-tuning run.

    Defaults are the reference recipe: one epoch, per-device batch 18,
    256-character query and passage budgets, learning rate 5e-5, fp16
    training. Precision only affects training math; merging and export
    always run in full precision.
    """

    output_dir: Path
    base_model: str = "trigram-small"
    epochs: int = 1
    batch_size: int = 18
    query_max_len: int = 256
    passage_max_len: int = 256
    learning_rate: float = 5e-5
    precision: str = "fp16"
    seed: int = 0

    def __post_init__(self):
        self.output_dir = Path(self.output_dir)
        model_spec(self.base_model)
        if self.epochs < 1:
            raise ConfigError(f"epochs must be at least 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.query_max_len <= 0:
            raise ConfigError(f"query_max_len must be positive, got {self.query_max_len}")
        if self.passage_max_len <= 0:
            raise ConfigError(
                f"passage_max_len must be positive, got {self.passage_max_len}"
            )
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.precision not in PRECISIONS:
            raise ConfigError(
                f"precision must be one of {list(PRECISIONS)}, got {self.precision!r}"
            )

    def as_dict(self) -> dict:
        out = asdict(self)
        out["output_dir"] = str(self.output_dir)
        return out


@dataclass
class MergeSpec:
    """Two checkpoints and the weight each contributes.

    Ratios must lie in [0, 1] and sum to one; the default is an even
    split between the fine-tuned checkpoint and its base.
    """

    checkpoint_a: Path
    checkpoint_b: Path
    output_dir: Path
    ratio_a: float = 0.5
    ratio_b: float = 0.5

    def __post_init__(self):
        self.checkpoint_a = Path(self.checkpoint_a)
        self.checkpoint_b = Path(self.checkpoint_b)
        self.output_dir = Path(self.output_dir)
        for label, ratio in (("ratio_a", self.ratio_a), ("ratio_b", self.ratio_b)):
            if not (math.isfinite(ratio) and 0.0 <= ratio <= 1.0):
                raise ConfigError(f"{label} must lie in [0, 1], got {ratio}")
        if abs(self.ratio_a + self.ratio_b - 1.0) > 1e-9:
            raise ConfigError(
                f"ratios must sum to 1, got {self.ratio_a} + {self.ratio_b}"
            )


@dataclass
class TrainJob:
    triplets: Path
    config: FinetuneConfig


_TRAIN_KEYS = {
    "base_model",
    "epochs",
    "batch_size",
    "query_max_len",
    "passage_max_len",
    "learning_rate",
    "precision",
    "seed",
}


def load_train_config(path) -> TrainJob:
    """Parse a TOML training config; paths resolve relative to the file."""
    path = Path(path)
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    paths = raw.get("paths")
    if not isinstance(paths, dict):
        raise ConfigError(f"{path}: missing [paths] table")
    for key in ("triplets", "output_dir"):
        if key not in paths:
            raise ConfigError(f"{path}: [paths] needs {key!r}")
    base = path.parent
    train_raw = raw.get("train", {})
    unknown = sorted(set(train_raw) - _TRAIN_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown train settings: {unknown}")
    config = FinetuneConfig(output_dir=base / paths["output_dir"], **train_raw)
    return TrainJob(triplets=base / paths["triplets"], config=config)
