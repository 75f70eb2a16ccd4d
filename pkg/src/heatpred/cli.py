"""Command-line entry point wiring every stage of the batch pipeline."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from heatpred import clustering, corpus as corpusmod, embedding, evaluation
from heatpred.llm import ReplayCacheMiss, TransportError
from heatpred.pipeline import (
    PipelineConfig,
    StageDependencyError,
    load_config,
    make_client,
    make_embedder,
    parse_k_range,
    run_pipeline,
    stage_clean,
    stage_cluster,
    stage_eval,
    stage_index,
    stage_report,
    stage_summarize,
)

_EXPECTED_ERRORS = (
    ValueError,
    FileNotFoundError,
    StageDependencyError,
    corpusmod.CorpusFormatError,
    corpusmod.SummarizeError,
    embedding.EmbeddingError,
    TransportError,
    ReplayCacheMiss,
    evaluation.DependencyError,
)


def _load_cfg(args) -> PipelineConfig:
    if not args.config:
        raise ValueError("--config is required for this command")
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seeds.clustering = args.seed
        cfg.seeds.sampling = args.seed
        cfg.seeds.simulated = args.seed
    return cfg


def _cmd_corpus(args) -> int:
    cfg = _load_cfg(args)
    if args.corpus_cmd == "clean":
        stage_clean(cfg)
        print(f"cleaned events written to {cfg.paths.cleaned}")
    elif args.corpus_cmd == "summarize":
        stage_summarize(cfg, args.model)
        print(f"summarized events written to {cfg.paths.summarized}")
    elif args.corpus_cmd == "triplets":
        src = cfg.paths.cleaned
        if not src.exists():
            raise StageDependencyError(src, "clean")
        events = corpusmod.load_events(src)
        tset = corpusmod.build_triplets(events, cap=args.cap, seed=args.seed or 0)
        out = cfg.paths.out_dir / "triplets.jsonl"
        corpusmod.save_triplets(tset, out)
        print(f"{len(tset.triplets)} triplets written to {out}")
    return 0


def _cmd_cluster(args) -> int:
    cfg = _load_cfg(args)
    if args.cluster_cmd == "fit":
        if args.k_range:
            cfg.cluster.k_range = parse_k_range(args.k_range)
        stage_cluster(cfg)
        scheme = clustering.load_scheme(cfg.paths.scheme)
        print(f"scheme with {scheme.num_levels} levels written to {cfg.paths.scheme}")
        print(f"boundaries: {', '.join(f'{b:.6f}' for b in scheme.boundaries)}")
    elif args.cluster_cmd == "assign":
        scheme = clustering.load_scheme(cfg.paths.scheme)
        src = Path(args.input) if args.input else cfg.paths.cleaned
        events = corpusmod.load_events(src)
        leveled = clustering.apply_scheme(events, scheme)
        out = Path(args.output) if args.output else cfg.paths.out_dir / "leveled.jsonl"
        corpusmod.save_events(leveled, out)
        print(f"{len(leveled)} leveled events written to {out}")
    elif args.cluster_cmd == "sample-eval":
        scheme = clustering.load_scheme(cfg.paths.scheme)
        src = cfg.paths.cleaned
        if not src.exists():
            raise StageDependencyError(src, "clean")
        events = corpusmod.load_events(src)
        evalset = clustering.sample_eval_set(
            events, scheme, n_per_level=args.per_level, seed=args.seed or 0
        )
        out = Path(args.output) if args.output else cfg.paths.out_dir / "evalset.jsonl"
        corpusmod.save_events(
            corpusmod.EventCorpus(events=evalset.records, source_meta={}), out
        )
        print(f"{len(evalset.records)} events written to {out}")
    return 0


def _cmd_index(args) -> int:
    cfg = _load_cfg(args)
    if args.index_cmd == "build":
        stage_index(cfg)
        print(f"vector store written to {cfg.paths.store}")
    elif args.index_cmd == "query":
        store = embedding.load_store(cfg.paths.store)
        backend = make_embedder(cfg)
        query = backend.embed(args.text)
        for nb in embedding.top_k(store, query, args.k):
            print(f"{nb.event_id}\t{nb.score:.6f}")
    return 0


def _cmd_baseline(args) -> int:
    cfg = _load_cfg(args)
    scenario = f"baseline_vote{args.scenario}"
    run_dir, _ = stage_eval(cfg, scenario, None)
    result = evaluation.load_run(run_dir)
    scoring = "either_of_top_two" if args.scenario == 2 else "top1"
    report = evaluation.compute_metrics(result, scoring=scoring)
    sys.stdout.write(evaluation.render_report([report], "markdown"))
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    if args.eval_cmd == "run":
        run_dir, did_work = stage_eval(cfg, args.scenario, args.model)
        print(f"run {'written' if did_work else 'up to date'}: {run_dir}")
    elif args.eval_cmd == "report":
        run_dirs = []
        if args.runs:
            for run_id in args.runs.split(","):
                run_dir = cfg.paths.runs_dir / run_id.strip()
                if not (run_dir / "result.jsonl").exists():
                    raise StageDependencyError(run_dir / "result.jsonl", "eval")
                run_dirs.append(run_dir)
        written = stage_report(cfg, run_dirs)
        for path in written:
            print(f"wrote {path}")
    return 0


def _cmd_pipeline(args) -> int:
    cfg = _load_cfg(args)
    stages = [s.strip() for s in args.stages.split(",") if s.strip()]
    return run_pipeline(cfg, stages, scenario=args.scenario, model=args.model)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatpred",
        description="Derive heat levels from event heat indices, retrieve "
        "similar events, and evaluate level prediction.",
    )
    parser.add_argument("--config", help="TOML pipeline configuration file")
    parser.add_argument(
        "--seed", type=int, default=None, help="override every configured seed"
    )
    parser.add_argument("--verbose", action="store_true", help="log stage progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p_corpus = sub.add_parser("corpus", help="load, clean, summarize, build triplets")
    corpus_sub = p_corpus.add_subparsers(dest="corpus_cmd", required=True)
    corpus_sub.add_parser("clean", help="drop garbled events, fill empty content")
    p_sum = corpus_sub.add_parser("summarize", help="summarize long content via a model")
    p_sum.add_argument("--model", required=True, help="roster model for summaries")
    p_tri = corpus_sub.add_parser("triplets", help="build training triplets")
    p_tri.add_argument("--cap", type=int, default=corpusmod.DEFAULT_TRIPLET_CAP)
    p_corpus.set_defaults(func=_cmd_corpus)

    p_cluster = sub.add_parser("cluster", help="fit levels, assign, sample eval sets")
    cluster_sub = p_cluster.add_subparsers(dest="cluster_cmd", required=True)
    p_fit = cluster_sub.add_parser("fit", help="scan k, derive the level scheme")
    p_fit.add_argument("--k-range", help='candidate range, e.g. "2..10"')
    p_assign = cluster_sub.add_parser("assign", help="assign levels to an event file")
    p_assign.add_argument("--input", help="events file (default: cleaned artifact)")
    p_assign.add_argument("--output", help="destination (default: leveled.jsonl)")
    p_sample = cluster_sub.add_parser("sample-eval", help="stratified eval sample")
    p_sample.add_argument("--per-level", type=int, default=250)
    p_sample.add_argument("--output", help="destination (default: evalset.jsonl)")
    p_cluster.set_defaults(func=_cmd_cluster)

    p_index = sub.add_parser("index", help="build and query the vector store")
    index_sub = p_index.add_subparsers(dest="index_cmd", required=True)
    index_sub.add_parser("build", help="embed events into the store")
    p_query = index_sub.add_parser("query", help="nearest events for a text")
    p_query.add_argument("--text", required=True)
    p_query.add_argument("--k", type=int, default=10)
    p_index.set_defaults(func=_cmd_index)

    p_baseline = sub.add_parser("baseline", help="embedding-only voting baselines")
    baseline_sub = p_baseline.add_subparsers(dest="baseline_cmd", required=True)
    p_vote = baseline_sub.add_parser("vote", help="vote over recalled cases")
    p_vote.add_argument(
        "--scenario", type=int, choices=(1, 2), required=True,
        help="1 = modal level, 2 = either of the top two levels",
    )
    p_baseline.set_defaults(func=_cmd_baseline)

    p_eval = sub.add_parser("eval", help="run scenarios, aggregate reports")
    eval_sub = p_eval.add_subparsers(dest="eval_cmd", required=True)
    p_run = eval_sub.add_parser("run", help="evaluate one scenario")
    p_run.add_argument(
        "--scenario", required=True,
        help="no-case | recalled | simulated | vote1 | vote2",
    )
    p_run.add_argument("--model", help="roster model name (LLM scenarios)")
    p_report = eval_sub.add_parser("report", help="aggregate runs into reports")
    p_report.add_argument("--runs", help="comma-separated run ids (default: all)")
    p_eval.set_defaults(func=_cmd_eval)

    p_pipe = sub.add_parser("pipeline", help="run several stages in order")
    pipe_sub = p_pipe.add_subparsers(dest="pipeline_cmd", required=True)
    p_prun = pipe_sub.add_parser("run", help="execute a stage subset")
    p_prun.add_argument(
        "--stages", required=True,
        help="comma-separated subset of clean,summarize,cluster,index,eval,report",
    )
    p_prun.add_argument("--scenario", help="scenario for the eval stage")
    p_prun.add_argument("--model", help="roster model for eval/summarize stages")
    p_pipe.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except _EXPECTED_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
