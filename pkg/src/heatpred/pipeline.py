"""Batch pipeline: clean, summarize, cluster, index, evaluate, report.

Stages run in dependency order, write plain-file artifacts atomically
(temp file, then rename), and skip themselves when a content hash says
inputs and parameters have not changed. A stage that fails leaves no
half-written artifact behind.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from heatpred import clustering, corpus as corpusmod, embedding, evaluation, llm

logger = logging.getLogger(__name__)

STAGE_ORDER = ("clean", "summarize", "cluster", "index", "eval", "report")

_SCENARIO_ALIASES = {
    "no-case": "no_case",
    "no_case": "no_case",
    "recalled": "recalled_cases",
    "recalled_cases": "recalled_cases",
    "simulated": "simulated_cases",
    "simulated_cases": "simulated_cases",
    "vote1": "baseline_vote1",
    "baseline_vote1": "baseline_vote1",
    "vote2": "baseline_vote2",
    "baseline_vote2": "baseline_vote2",
}


class StageDependencyError(RuntimeError):
    """A prerequisite artifact is missing; message names the stage to run."""

    def __init__(self, missing: Path, stage_to_run: str):
        super().__init__(
            f"missing artifact {missing}; run stage {stage_to_run!r} first"
        )
        self.stage_to_run = stage_to_run


def canonical_scenario(name: str) -> str:
    try:
        return _SCENARIO_ALIASES[name]
    except KeyError:
        raise ValueError(
            f"unknown scenario {name!r}; expected one of "
            f"{sorted(set(_SCENARIO_ALIASES.values()))}"
        ) from None


def parse_k_range(text: str) -> range:
    """Parse "2..8" into range(2, 9)."""
    lo, sep, hi = text.partition("..")
    if not sep:
        raise ValueError(f"bad k range {text!r}; expected LO..HI")
    return range(int(lo), int(hi) + 1)


@dataclass
class PipelinePaths:
    corpus: Path
    out_dir: Path

    @property
    def cleaned(self) -> Path:
        return self.out_dir / "cleaned.jsonl"

    @property
    def summarized(self) -> Path:
        return self.out_dir / "summarized.jsonl"

    @property
    def scheme(self) -> Path:
        return self.out_dir / "scheme.json"

    @property
    def diagnostics(self) -> Path:
        return self.out_dir / "diagnostics.csv"

    @property
    def store(self) -> Path:
        return self.out_dir / "store.jsonl"

    @property
    def runs_dir(self) -> Path:
        return self.out_dir / "runs"


@dataclass
class PipelineSeeds:
    clustering: int = 0
    sampling: int = 0
    simulated: int = 0
    embedder: int = 0


@dataclass
class ClusterStageParams:
    k_range: range = field(default_factory=lambda: range(2, 9))
    batch_size: int = 256
    max_iters: int = 100
    full_batch: bool = True


@dataclass
class EmbedderParams:
    kind: str = "hashed"  # "hashed" or "remote"
    dim: int = embedding.DEFAULT_DIM
    endpoint: str = ""


@dataclass
class EvalParams:
    per_level: int = 250
    recall_k: int = 10
    parallelism: int = 1


@dataclass
class PipelineConfig:
    paths: PipelinePaths
    seeds: PipelineSeeds = field(default_factory=PipelineSeeds)
    cluster: ClusterStageParams = field(default_factory=ClusterStageParams)
    embedder: EmbedderParams = field(default_factory=EmbedderParams)
    eval: EvalParams = field(default_factory=EvalParams)
    # models: name -> table with "kind" (mock|live|record|replay) + options
    models: dict[str, dict] = field(default_factory=dict)
    use_summaries: bool = False
    garbled_threshold: float = corpusmod.DEFAULT_GARBLED_THRESHOLD
    summary_max_len: int = corpusmod.DEFAULT_SUMMARY_MAX_LEN


def load_config(path: str | Path) -> PipelineConfig:
    """Read the TOML config; paths resolve relative to the config file."""
    path = Path(path)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    base = path.parent
    try:
        paths_tab = data["paths"]
        paths = PipelinePaths(
            corpus=base / paths_tab["corpus"],
            out_dir=base / paths_tab.get("out_dir", "out"),
        )
    except KeyError as exc:
        raise ValueError(f"{path}: missing config key {exc}") from None
    seeds = PipelineSeeds(**data.get("seeds", {}))
    ctab = dict(data.get("cluster", {}))
    if "k_range" in ctab:
        ctab["k_range"] = parse_k_range(ctab["k_range"])
    cluster_params = ClusterStageParams(**ctab)
    embedder = EmbedderParams(**data.get("embedder", {}))
    eval_params = EvalParams(**data.get("eval", {}))
    return PipelineConfig(
        paths=paths,
        seeds=seeds,
        cluster=cluster_params,
        embedder=embedder,
        eval=eval_params,
        models=data.get("models", {}),
        use_summaries=data.get("use_summaries", False),
        garbled_threshold=data.get("garbled_threshold", corpusmod.DEFAULT_GARBLED_THRESHOLD),
        summary_max_len=data.get("summary_max_len", corpusmod.DEFAULT_SUMMARY_MAX_LEN),
    )


def make_embedder(cfg: PipelineConfig):
    p = cfg.embedder
    if p.kind == "hashed":
        return embedding.HashedTrigramEmbedder(dim=p.dim, seed=cfg.seeds.embedder)
    if p.kind == "remote":
        return embedding.RemoteEmbedder(endpoint=p.endpoint or None, dim=p.dim)
    raise ValueError(f"unknown embedder kind {p.kind!r}")


def make_client(cfg: PipelineConfig, model_name: str):
    """Build the LLM client named in the model roster."""
    try:
        table = dict(cfg.models[model_name])
    except KeyError:
        raise ValueError(
            f"model {model_name!r} not in roster {sorted(cfg.models)}"
        ) from None
    kind = table.pop("kind", "live")
    if kind == "mock":
        return llm.MockClient(model=model_name, **table)
    if kind == "replay":
        cache = table.pop("cache", None)
        if cache is None:
            raise ValueError(f"model {model_name!r}: replay needs a 'cache' path")
        return llm.ReplayClient(cfg.paths.out_dir / cache, model=table.pop("model", model_name))
    record_cache = table.pop("record_cache", None) if kind == "record" else None
    config = llm.ModelConfig(name=model_name, **table)
    client = llm.LiveClient(config)
    if kind == "record":
        if record_cache is None:
            raise ValueError(f"model {model_name!r}: record needs a 'record_cache' path")
        return llm.RecordingClient(client, cfg.paths.out_dir / record_cache)
    if kind != "live":
        raise ValueError(f"model {model_name!r}: unknown backend kind {kind!r}")
    return client


def _atomic_write(path: Path, writer) -> None:
    """Run ``writer(tmp_path)`` then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    tmp = Path(tmp_name)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def _hash_inputs(files: list[Path], params: dict) -> str:
    h = hashlib.sha256()
    for f in files:
        h.update(str(f.name).encode())
        h.update(f.read_bytes())
    h.update(json.dumps(params, sort_keys=True, default=str).encode())
    return h.hexdigest()


def _stamp_path(artifact: Path) -> Path:
    return artifact.with_name(artifact.name + ".stamp")


def _is_fresh(artifacts: list[Path], stamp: Path, input_hash: str) -> bool:
    if not all(a.exists() for a in artifacts):
        return False
    if not stamp.exists():
        return False
    try:
        recorded = json.loads(stamp.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return False
    return recorded.get("input_sha256") == input_hash


def _write_stamp(stamp: Path, input_hash: str) -> None:
    _atomic_write(
        stamp,
        lambda tmp: tmp.write_text(
            json.dumps({"input_sha256": input_hash}) + "\n", encoding="utf-8"
        ),
    )


def _require_artifact(path: Path, producing_stage: str) -> None:
    if not path.exists():
        raise StageDependencyError(path, producing_stage)


def _events_input(cfg: PipelineConfig) -> tuple[Path, str]:
    """The cleaned-or-summarized events file feeding cluster and index."""
    if cfg.use_summaries:
        return cfg.paths.summarized, "summarize"
    return cfg.paths.cleaned, "clean"


def stage_clean(cfg: PipelineConfig) -> bool:
    """Returns True when work was done, False on a fresh no-op skip."""
    src = cfg.paths.corpus
    if not src.exists():
        raise FileNotFoundError(f"corpus file {src} does not exist")
    out = cfg.paths.cleaned
    input_hash = _hash_inputs([src], {"garbled_threshold": cfg.garbled_threshold})
    if _is_fresh([out], _stamp_path(out), input_hash):
        logger.info("clean: up to date")
        return False
    events = corpusmod.load_events(src)
    cleaned = corpusmod.clean_events(events, garbled_threshold=cfg.garbled_threshold)
    _atomic_write(out, lambda tmp: corpusmod.save_events(cleaned, tmp))
    _write_stamp(_stamp_path(out), input_hash)
    logger.info("clean: %d events kept", len(cleaned))
    return True


def stage_summarize(cfg: PipelineConfig, model_name: str) -> bool:
    _require_artifact(cfg.paths.cleaned, "clean")
    out = cfg.paths.summarized
    input_hash = _hash_inputs(
        [cfg.paths.cleaned],
        {"model": model_name, "max_len": cfg.summary_max_len},
    )
    if _is_fresh([out], _stamp_path(out), input_hash):
        logger.info("summarize: up to date")
        return False
    client = make_client(cfg, model_name)
    events = corpusmod.load_events(cfg.paths.cleaned)
    summarized = corpusmod.summarize_corpus(events, client, max_len=cfg.summary_max_len)
    _atomic_write(out, lambda tmp: corpusmod.save_events(summarized, tmp))
    _write_stamp(_stamp_path(out), input_hash)
    logger.info("summarize: %d events", len(summarized))
    return True


def stage_cluster(cfg: PipelineConfig) -> bool:
    src, producer = _events_input(cfg)
    _require_artifact(src, producer)
    out_scheme = cfg.paths.scheme
    out_diag = cfg.paths.diagnostics
    cparams = cfg.cluster
    params_dict = {
        "k_range": [cparams.k_range.start, cparams.k_range.stop],
        "batch_size": cparams.batch_size,
        "max_iters": cparams.max_iters,
        "full_batch": cparams.full_batch,
        "seed": cfg.seeds.clustering,
    }
    input_hash = _hash_inputs([src], params_dict)
    if _is_fresh([out_scheme, out_diag], _stamp_path(out_scheme), input_hash):
        logger.info("cluster: up to date")
        return False
    events = corpusmod.load_events(src)
    heats = [ev.heat_index for ev in events.events]
    batch_size = 2**31 if cparams.full_batch else cparams.batch_size
    params = clustering.KMeansParams(
        batch_size=batch_size,
        max_iters=cparams.max_iters,
        seed=cfg.seeds.clustering,
    )
    selection = clustering.select_k(heats, cparams.k_range, params)
    model = clustering.minibatch_kmeans(heats, selection.chosen, params)
    scheme = clustering.derive_levels(model, heats)
    _atomic_write(out_scheme, lambda tmp: clustering.save_scheme(scheme, tmp))
    _atomic_write(out_diag, lambda tmp: clustering.export_diagnostics(selection, tmp))
    _write_stamp(_stamp_path(out_scheme), input_hash)
    logger.info("cluster: chose k=%d", selection.chosen)
    return True


def stage_index(cfg: PipelineConfig) -> bool:
    src, producer = _events_input(cfg)
    _require_artifact(src, producer)
    _require_artifact(cfg.paths.scheme, "cluster")
    out = cfg.paths.store
    params_dict = {
        "embedder": cfg.embedder.kind,
        "dim": cfg.embedder.dim,
        "seed": cfg.seeds.embedder,
    }
    input_hash = _hash_inputs([src, cfg.paths.scheme], params_dict)
    if _is_fresh([out], _stamp_path(out), input_hash):
        logger.info("index: up to date")
        return False
    events = corpusmod.load_events(src)
    scheme = clustering.load_scheme(cfg.paths.scheme)
    leveled = clustering.apply_scheme(events, scheme)
    store = embedding.index_corpus(leveled, make_embedder(cfg))
    _atomic_write(out, lambda tmp: embedding.save_store(store, tmp))
    _write_stamp(_stamp_path(out), input_hash)
    logger.info("index: %d vectors", len(store))
    return True


def run_id_for(scenario: str, model: str, seed: int) -> str:
    return f"{scenario}-{model}-s{seed}"


def stage_eval(
    cfg: PipelineConfig,
    scenario: str,
    model_name: str | None,
) -> tuple[Path, bool]:
    """Run one scenario; returns (run_dir, did_work)."""
    scenario = canonical_scenario(scenario)
    src, producer = _events_input(cfg)
    _require_artifact(src, producer)
    _require_artifact(cfg.paths.scheme, "cluster")
    needs_store = scenario in ("recalled_cases", "baseline_vote1", "baseline_vote2")
    if needs_store:
        _require_artifact(cfg.paths.store, "index")
    is_baseline = scenario in evaluation.BASELINE_SCENARIOS
    if not is_baseline and model_name is None:
        raise ValueError(f"scenario {scenario!r} needs --model")
    label = scenario if is_baseline else model_name
    run_dir = cfg.paths.runs_dir / run_id_for(scenario, label, cfg.seeds.sampling)

    input_files = [src, cfg.paths.scheme] + ([cfg.paths.store] if needs_store else [])
    params_dict = {
        "scenario": scenario,
        "model": label,
        "model_table": cfg.models.get(model_name, {}) if model_name else {},
        "per_level": cfg.eval.per_level,
        "recall_k": cfg.eval.recall_k,
        "sampling_seed": cfg.seeds.sampling,
        "simulated_seed": cfg.seeds.simulated,
        "embedder": cfg.embedder.kind,
        "embedder_seed": cfg.seeds.embedder,
    }
    input_hash = _hash_inputs(input_files, params_dict)
    artifacts = [run_dir / "result.jsonl", run_dir / "manifest.json"]
    if _is_fresh(artifacts, run_dir / "stage.stamp", input_hash):
        logger.info("eval: run %s up to date", run_dir.name)
        return run_dir, False

    events = corpusmod.load_events(src)
    scheme = clustering.load_scheme(cfg.paths.scheme)
    evalset = clustering.sample_eval_set(
        events, scheme, n_per_level=cfg.eval.per_level, seed=cfg.seeds.sampling
    )
    deps = evaluation.ScenarioDeps(scheme=scheme)
    if needs_store:
        deps.store = embedding.load_store(cfg.paths.store)
        deps.embedder = make_embedder(cfg)
    if scenario == "simulated_cases":
        deps.corpus = clustering.apply_scheme(events, scheme)
    if not is_baseline:
        deps.client = make_client(cfg, model_name)
    spec = evaluation.ScenarioSpec(
        kind=scenario, k=cfg.eval.recall_k, seed=cfg.seeds.simulated
    )
    result = evaluation.run_scenario(
        evalset, spec, deps, parallelism=cfg.eval.parallelism
    )
    # write into a temp dir, then move files into place one rename at a time
    run_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=cfg.paths.runs_dir) as tmpdir:
        evaluation.save_run(result, tmpdir)
        for name in ("result.jsonl", "manifest.json"):
            os.replace(Path(tmpdir) / name, run_dir / name)
    _write_stamp(run_dir / "stage.stamp", input_hash)
    logger.info("eval: wrote %s", run_dir)
    return run_dir, True


def stage_report(cfg: PipelineConfig, run_dirs: list[Path]) -> list[Path]:
    """Aggregate runs into report.md, plotdata.csv, and report.csv."""
    if not run_dirs:
        if not cfg.paths.runs_dir.exists():
            raise StageDependencyError(cfg.paths.runs_dir, "eval")
        run_dirs = sorted(
            d for d in cfg.paths.runs_dir.iterdir() if (d / "result.jsonl").exists()
        )
        if not run_dirs:
            raise StageDependencyError(cfg.paths.runs_dir / "<run>", "eval")
    out_dir = cfg.paths.out_dir
    targets = [out_dir / n for n in ("report.md", "plotdata.csv", "report.csv")]
    input_hash = _hash_inputs(
        [d / "result.jsonl" for d in run_dirs],
        {"runs": [d.name for d in run_dirs]},
    )
    stamp = _stamp_path(targets[0])
    if _is_fresh(targets, stamp, input_hash):
        logger.info("report: up to date")
        return targets
    reports = []
    for run_dir in run_dirs:
        result = evaluation.load_run(run_dir)
        scoring = (
            "either_of_top_two" if result.scenario == "baseline_vote2" else "top1"
        )
        reports.append(evaluation.compute_metrics(result, scoring=scoring))
    for target, fmt in zip(targets, ("markdown", "plotdata", "csv")):
        _atomic_write(target, lambda tmp, f=fmt: evaluation.emit_report(reports, f, tmp))
    _write_stamp(stamp, input_hash)
    logger.info("report: wrote %s", ", ".join(p.name for p in targets))
    return targets


def run_pipeline(
    cfg: PipelineConfig,
    stages: list[str],
    scenario: str | None = None,
    model: str | None = None,
) -> int:
    """Execute the requested stages in canonical order; 0 on success."""
    unknown = [s for s in stages if s not in STAGE_ORDER]
    if unknown:
        raise ValueError(f"unknown stages {unknown}; valid: {list(STAGE_ORDER)}")
    ordered = [s for s in STAGE_ORDER if s in stages]
    run_dirs: list[Path] = []
    for stage in ordered:
        if stage == "clean":
            stage_clean(cfg)
        elif stage == "summarize":
            if model is None:
                raise ValueError("summarize stage needs --model")
            stage_summarize(cfg, model)
        elif stage == "cluster":
            stage_cluster(cfg)
        elif stage == "index":
            stage_index(cfg)
        elif stage == "eval":
            if scenario is None:
                raise ValueError("eval stage needs --scenario")
            run_dir, _ = stage_eval(cfg, scenario, model)
            run_dirs.append(run_dir)
        elif stage == "report":
            stage_report(cfg, run_dirs)
    return 0
