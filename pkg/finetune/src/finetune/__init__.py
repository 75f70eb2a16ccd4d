"""Triplet fine-tuning for the retrieval encoder.

Trains a small sentence-embedding model on (anchor, positive, negative)
triplets, merges a fine-tuned checkpoint with its base by a ratio, and
exports event vectors in the retrieval store format. All coupling with
the indexing side goes through plain files: triplets in, store out.
"""

from finetune.config import ConfigError, FinetuneConfig, MergeSpec, load_train_config
from finetune.data import DataFormatError, Triplet, load_events, load_triplets
from finetune.export import export_vectors
from finetune.merge import merge, merge_state_dicts
from finetune.model import (
    CheckpointError,
    TrigramEncoder,
    base_state_dict,
    load_checkpoint,
    model_spec,
    save_checkpoint,
)
from finetune.train import TrainResult, train

__all__ = [
    "CheckpointError",
    "ConfigError",
    "DataFormatError",
    "FinetuneConfig",
    "MergeSpec",
    "TrainResult",
    "TrigramEncoder",
    "Triplet",
    "base_state_dict",
    "export_vectors",
    "load_checkpoint",
    "load_events",
    "load_train_config",
    "load_triplets",
    "merge",
    "merge_state_dicts",
    "model_spec",
    "save_checkpoint",
    "train",
]
