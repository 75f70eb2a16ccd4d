"""Ratio-weighted checkpoint merging.

The merged tensor is ratio_a * A + ratio_b * B computed elementwise in
float64, then cast back to the stored dtype. Merging a checkpoint with
itself reproduces it bit for bit, and a ratio of 1.0 returns that side
exactly.
"""

from __future__ import annotations

from pathlib import Path

import torch

from finetune.config import MergeSpec
from finetune.model import CheckpointError, load_checkpoint, save_checkpoint


def merge_state_dicts(
    state_a: dict[str, torch.Tensor],
    state_b: dict[str, torch.Tensor],
    ratio_a: float,
    ratio_b: float,
) -> dict[str, torch.Tensor]:
    missing = sorted(set(state_a) ^ set(state_b))
    if missing:
        raise CheckpointError(f"state dicts disagree on tensors: {missing}")
    merged = {}
    for name in state_a:
        a, b = state_a[name], state_b[name]
        if a.shape != b.shape:
            raise CheckpointError(
                f"tensor {name!r} shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}"
            )
        merged[name] = (ratio_a * a.double() + ratio_b * b.double()).to(a.dtype)
    return merged


def merge(spec: MergeSpec) -> Path:
    """Merge two checkpoint directories into a new one."""
    config_a, state_a = load_checkpoint(spec.checkpoint_a)
    config_b, state_b = load_checkpoint(spec.checkpoint_b)
    dims_a = (config_a["vocab_dim"], config_a["embed_dim"])
    dims_b = (config_b["vocab_dim"], config_b["embed_dim"])
    if dims_a != dims_b:
        raise CheckpointError(
            f"checkpoint dimensions differ: {dims_a} vs {dims_b}"
        )
    merged = merge_state_dicts(state_a, state_b, spec.ratio_a, spec.ratio_b)
    return save_checkpoint(
        spec.output_dir,
        base_model=config_a["base_model"],
        state_dict=merged,
        extra={
            "merged_from": [str(spec.checkpoint_a), str(spec.checkpoint_b)],
            "ratio_a": spec.ratio_a,
            "ratio_b": spec.ratio_b,
        },
    )
