"""Command-line entry point: train, merge, export."""

from __future__ import annotations

import argparse
import sys

from finetune.config import MergeSpec, load_train_config
from finetune.export import export_vectors
from finetune.merge import merge
from finetune.model import CheckpointError
from finetune.train import train

_EXPECTED_ERRORS = (ValueError, FileNotFoundError, CheckpointError)


def _cmd_train(args) -> int:
    job = load_train_config(args.config)
    result = train(job.triplets, job.config)
    for epoch, mean in enumerate(result.epoch_means, 1):
        print(f"epoch {epoch}: mean loss {mean:.6f}")
    print(f"checkpoint written to {result.checkpoint_dir}")
    print(f"base checkpoint written to {result.base_dir}")
    return 0


def _cmd_merge(args) -> int:
    spec = MergeSpec(
        checkpoint_a=args.checkpoint_a,
        checkpoint_b=args.checkpoint_b,
        output_dir=args.output,
        ratio_a=args.ratio_a,
        ratio_b=args.ratio_b,
    )
    out = merge(spec)
    print(f"merged checkpoint written to {out}")
    return 0


def _cmd_export(args) -> int:
    count = export_vectors(args.checkpoint, args.corpus, args.output, args.dim)
    print(f"wrote {count} vectors to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finetune",
        description="fine-tune the trigram encoder, merge checkpoints, export vectors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fine-tune from a TOML config")
    p_train.add_argument("--config", required=True, help="path to the training config")
    p_train.set_defaults(func=_cmd_train)

    p_merge = sub.add_parser("merge", help="merge two checkpoints by ratio")
    p_merge.add_argument("--checkpoint-a", required=True, help="fine-tuned checkpoint")
    p_merge.add_argument("--checkpoint-b", required=True, help="base checkpoint")
    p_merge.add_argument("--output", required=True, help="merged checkpoint directory")
    p_merge.add_argument("--ratio-a", type=float, default=0.5)
    p_merge.add_argument("--ratio-b", type=float, default=0.5)
    p_merge.set_defaults(func=_cmd_merge)

    p_export = sub.add_parser("export", help="write store vectors for a corpus")
    p_export.add_argument("--checkpoint", required=True)
    p_export.add_argument("--corpus", required=True, help="leveled events JSONL")
    p_export.add_argument("--output", required=True, help="store JSONL to write")
    p_export.add_argument(
        "--dim", type=int, help="declared store dimension, checked against the model"
    )
    p_export.set_defaults(func=_cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _EXPECTED_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
