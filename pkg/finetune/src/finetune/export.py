"""Export event vectors from a checkpoint into the retrieval store format.

Each output line carries exactly the store fields: id, vector,
heat_index, level, content. Encoding runs in full precision regardless
of the training setting, and the same checkpoint and corpus always
produce the same bytes.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import torch

from finetune.data import load_events
from finetune.model import build_encoder, featurize_batch, load_checkpoint

_CHUNK = 256


def export_vectors(checkpoint_dir, corpus_path, output_path, expected_dim=None) -> int:
    """Encode every event and write a store JSONL; returns the count."""
    config, state_dict = load_checkpoint(checkpoint_dir)
    if expected_dim is not None and expected_dim != config["embed_dim"]:
        raise ValueError(
            f"checkpoint produces {config['embed_dim']}-dim vectors "
            f"but the store declares {expected_dim}"
        )
    events = load_events(corpus_path)
    if not events:
        raise ValueError(f"{corpus_path}: no events to export")

    encoder = build_encoder(config, state_dict)
    vectors = []
    with torch.no_grad():
        for start in range(0, len(events), _CHUNK):
            chunk = events[start : start + _CHUNK]
            feats = torch.from_numpy(
                featurize_batch([e["content"] for e in chunk], config["vocab_dim"])
            )
            out = encoder(feats)
            norms = torch.linalg.norm(out, dim=1)
            for event, norm in zip(chunk, norms):
                if float(norm) == 0.0:
                    raise ValueError(f"event {event['id']!r} produced a zero vector")
            vectors.append(out)
    matrix = torch.cat(vectors).numpy()

    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=output_path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for event, row in zip(events, matrix):
                record = {
                    "id": event["id"],
                    "vector": [float(x) for x in row],
                    "heat_index": event["heat_index"],
                    "level": event["level"],
                    "content": event["content"],
                }
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        os.replace(tmp, output_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return len(events)
