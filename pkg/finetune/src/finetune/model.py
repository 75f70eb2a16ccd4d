"""Desk-scale trigram sentence encoder and its checkpoint format.

The encoder hashes character trigrams into a fixed bucket vector and
projects it through one learned linear layer; outputs are unit length.
Base weights are derived deterministically from the model name, so "the
base model" is reproducible without any download. A checkpoint is a
directory holding config.json and weights.pt.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import torch

_HASH_KEY = b"finetune-trigram-v1"

# The small model is the default; the large one is the same family with
# a wider hash space and embedding, selected purely through config.
MODEL_REGISTRY = {
    "trigram-small": {"vocab_dim": 2048, "embed_dim": 256},
    "trigram-large": {"vocab_dim": 8192, "embed_dim": 1024},
}


class CheckpointError(RuntimeError):
    """A checkpoint directory is missing, malformed, or inconsistent."""


def model_spec(name: str) -> dict:
    try:
        return MODEL_REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown base model {name!r}; known: {sorted(MODEL_REGISTRY)}"
        ) from None


def _bucket(gram: str, vocab_dim: int) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=_HASH_KEY).digest()
    return int.from_bytes(digest, "big") % vocab_dim


def featurize(text: str, vocab_dim: int) -> np.ndarray:
    """Hashed trigram counts, L2 normalized, as float32.

    Texts shorter than three characters (the empty string included) hash
    as one gram so every input maps to a nonzero feature vector.
    """
    vec = np.zeros(vocab_dim, dtype=np.float32)
    if len(text) < 3:
        vec[_bucket(text, vocab_dim)] = 1.0
        return vec
    for i in range(len(text) - 2):
        vec[_bucket(text[i : i + 3], vocab_dim)] += 1.0
    norm = float(np.linalg.norm(vec))
    return vec / norm


def featurize_batch(texts, vocab_dim: int) -> np.ndarray:
    return np.stack([featurize(t, vocab_dim) for t in texts])


class TrigramEncoder(torch.nn.Module):
    def __init__(self, vocab_dim: int, embed_dim: int):
        super().__init__()
        self.vocab_dim = vocab_dim
        self.embed_dim = embed_dim
        self.proj = torch.nn.Linear(vocab_dim, embed_dim, bias=True)

    def forward(self, feats: torch.Tensor) -> torch.Tensor:
        return torch.nn.functional.normalize(self.proj(feats), dim=1)


def _name_seed(name: str) -> int:
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") & 0x7FFFFFFF


def base_state_dict(name: str) -> dict[str, torch.Tensor]:
    """Deterministic base weights for a registry model.

    The generator is seeded from the model name, so every caller sees
    the identical base checkpoint for the same identifier.
    """
    spec = model_spec(name)
    gen = torch.Generator().manual_seed(_name_seed(name))
    weight = torch.empty(spec["embed_dim"], spec["vocab_dim"])
    torch.nn.init.normal_(weight, std=spec["vocab_dim"] ** -0.5, generator=gen)
    return {"proj.weight": weight, "proj.bias": torch.zeros(spec["embed_dim"])}


def save_checkpoint(
    path: Path,
    *,
    base_model: str,
    state_dict: dict[str, torch.Tensor],
    extra: dict | None = None,
) -> Path:
    spec = model_spec(base_model)
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    config = {
        "base_model": base_model,
        "vocab_dim": spec["vocab_dim"],
        "embed_dim": spec["embed_dim"],
    }
    if extra:
        config.update(extra)
    (path / "config.json").write_text(
        json.dumps(config, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    torch.save({k: v.detach().clone() for k, v in state_dict.items()}, path / "weights.pt")
    return path


def load_checkpoint(path: Path) -> tuple[dict, dict[str, torch.Tensor]]:
    """Read a checkpoint directory back into (config, state dict)."""
    path = Path(path)
    config_path = path / "config.json"
    weights_path = path / "weights.pt"
    for needed in (config_path, weights_path):
        if not needed.is_file():
            raise CheckpointError(
                f"not a checkpoint directory: {path} (missing {needed.name})"
            )
    config = json.loads(config_path.read_text(encoding="utf-8"))
    for key in ("base_model", "vocab_dim", "embed_dim"):
        if key not in config:
            raise CheckpointError(f"{config_path}: missing config key {key!r}")
    state_dict = torch.load(weights_path, weights_only=True)
    weight = state_dict.get("proj.weight")
    if weight is None:
        raise CheckpointError(f"{weights_path}: missing tensor 'proj.weight'")
    expected = (config["embed_dim"], config["vocab_dim"])
    if tuple(weight.shape) != expected:
        raise CheckpointError(
            f"tensor 'proj.weight' has shape {tuple(weight.shape)}, "
            f"config declares {expected}"
        )
    return config, state_dict


def build_encoder(config: dict, state_dict: dict[str, torch.Tensor]) -> TrigramEncoder:
    encoder = TrigramEncoder(config["vocab_dim"], config["embed_dim"])
    encoder.load_state_dict(state_dict)
    encoder.eval()
    return encoder
