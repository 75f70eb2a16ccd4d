"""Scenario execution, accuracy metrics, and report emission.

A run takes an evaluation set through one scenario (direct prediction,
prediction with recalled cases, prediction with a fixed simulated case
set, or one of the two frequency-voting baselines) and produces one
record per event plus a manifest that makes the run replayable. Reports
are byte-deterministic: timestamps live only in the manifest.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from heatpred.clustering import EvalSet, HeatLevelScheme, default_level_names
from heatpred.corpus import EventCorpus
from heatpred.embedding import VectorStore
from heatpred.prompting import (
    PromptText,
    parse_answer,
    render_no_case_prompt,
    render_with_case_prompt,
)
from heatpred.retrieval import (
    CaseSet,
    recall_similar,
    sample_simulated_cases,
    vote_majority,
    vote_top_two,
)

LLM_SCENARIOS = ("no_case", "recalled_cases", "simulated_cases")
BASELINE_SCENARIOS = ("baseline_vote1", "baseline_vote2")
ALL_SCENARIOS = LLM_SCENARIOS + BASELINE_SCENARIOS

SCENARIO_LABELS = {
    "no_case": "without case references",
    "recalled_cases": "with case references",
    "simulated_cases": "with case references(simulated situation)",
    "baseline_vote1": "Scenario 1",
    "baseline_vote2": "Scenario 2",
}

_RESULT_FIELDS = ("event_id", "true_level", "predicted", "top_two", "raw")


class DependencyError(ValueError):
    """The scenario asked for a dependency the caller did not supply."""


@dataclass
class ScenarioSpec:
    kind: str
    k: int = 10
    seed: int = 0
    # draw a fresh simulated case set per event instead of one per run;
    # sensitivity analysis only, off by default
    resample_per_event: bool = False

    def __post_init__(self):
        if self.kind not in ALL_SCENARIOS:
            raise ValueError(
                f"unknown scenario {self.kind!r}; expected one of {ALL_SCENARIOS}"
            )
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class ScenarioDeps:
    scheme: HeatLevelScheme | None = None
    store: VectorStore | None = None
    embedder: object | None = None
    corpus: EventCorpus | None = None
    client: object | None = None


@dataclass
class EventRecord:
    event_id: str
    true_level: int
    predicted: int | None  # None = unparseable or errored
    top_two: list[int] | None = None
    raw: str | None = None


@dataclass
class RunResult:
    records: list[EventRecord]
    scenario: str
    model: str
    manifest: dict = field(default_factory=dict)


@dataclass
class MetricsReport:
    model: str
    scenario: str
    scoring: str
    overall_accuracy: float
    per_level_accuracy: dict[int, float]
    counts: dict[int, tuple[int, int]]  # level -> (correct, total)
    unparseable_count: int


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _template_hashes() -> dict[str, str]:
    root = resources.files("heatpred") / "templates"
    out = {}
    for name in ("no_case.txt", "with_case.txt", "option_line.txt"):
        out[name] = _sha256_text((root / name).read_text(encoding="utf-8"))
    return out


def _scheme_hash(scheme: HeatLevelScheme) -> str:
    payload = json.dumps(
        {"boundaries": [repr(b) for b in scheme.boundaries], "names": scheme.level_names}
    )
    return _sha256_text(payload)


def _require(deps: ScenarioDeps, kind: str, **needed) -> None:
    missing = [name for name, value in needed.items() if value is None]
    if missing:
        raise DependencyError(
            f"scenario {kind!r} needs {', '.join(missing)}; supply them in ScenarioDeps"
        )


def _validate_evalset(evalset: EvalSet) -> None:
    if not evalset.records:
        raise ValueError("evaluation set is empty")
    for ev in evalset.records:
        if ev.level is None:
            raise ValueError(f"event {ev.id!r} in evaluation set has no level")
        if not ev.content:
            raise ValueError(f"event {ev.id!r} in evaluation set has empty content")


def run_scenario(
    evalset: EvalSet,
    spec: ScenarioSpec,
    deps: ScenarioDeps,
    parallelism: int = 1,
) -> RunResult:
    """Run one scenario over the evaluation set, one record per event.

    LLM scenarios render a prompt per event, complete it through the
    supplied client, and parse the answer; a failed completion leaves the
    record unparseable with the error text in ``raw``. Baseline scenarios
    vote over each event's recalled cases and use no language model.
    Dependency problems surface before any request is issued.
    """
    _validate_evalset(evalset)
    kind = spec.kind
    if kind == "no_case":
        _require(deps, kind, scheme=deps.scheme, client=deps.client)
    elif kind == "recalled_cases":
        _require(
            deps,
            kind,
            scheme=deps.scheme,
            client=deps.client,
            store=deps.store,
            embedder=deps.embedder,
        )
    elif kind == "simulated_cases":
        _require(deps, kind, scheme=deps.scheme, client=deps.client, corpus=deps.corpus)
    else:
        _require(deps, kind, store=deps.store, embedder=deps.embedder)

    if kind in BASELINE_SCENARIOS:
        records = _run_baseline(evalset, spec, deps)
        model = kind
    else:
        records = _run_llm(evalset, spec, deps, parallelism)
        model = getattr(deps.client, "model", None) or getattr(
            getattr(deps.client, "config", None), "name", "unknown"
        )

    manifest = {
        "scenario": kind,
        "model": model,
        "k": spec.k,
        "seed": spec.seed,
        "resample_per_event": spec.resample_per_event,
        "n_events": len(records),
        "backend": getattr(deps.client, "backend", None),
        "scheme_sha256": _scheme_hash(deps.scheme) if deps.scheme else None,
        "template_sha256": _template_hashes(),
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    return RunResult(records=records, scenario=kind, model=model, manifest=manifest)


def _case_sets_for(
    evalset: EvalSet, spec: ScenarioSpec, deps: ScenarioDeps
) -> list[CaseSet | None]:
    if spec.kind == "no_case":
        return [None] * len(evalset.records)
    if spec.kind == "recalled_cases":
        return [
            recall_similar(ev, deps.store, deps.embedder, k=spec.k)
            for ev in evalset.records
        ]
    # simulated: one fixed nine-case draw shared by the whole run
    if not spec.resample_per_event:
        shared = sample_simulated_cases(deps.corpus, deps.scheme, spec.seed)
        return [shared] * len(evalset.records)
    rng = np.random.default_rng(spec.seed)
    return [
        sample_simulated_cases(deps.corpus, deps.scheme, int(rng.integers(2**31)))
        for _ in evalset.records
    ]


def _run_llm(
    evalset: EvalSet, spec: ScenarioSpec, deps: ScenarioDeps, parallelism: int
) -> list[EventRecord]:
    case_sets = _case_sets_for(evalset, spec, deps)
    prompts: list[PromptText] = []
    for ev, cases in zip(evalset.records, case_sets):
        if cases is None:
            prompts.append(render_no_case_prompt(ev, deps.scheme))
        else:
            prompts.append(render_with_case_prompt(ev, cases, deps.scheme))
    slots = deps.client.complete_batch(prompts, parallelism)
    records = []
    for ev, slot in zip(evalset.records, slots):
        if isinstance(slot, Exception):
            records.append(
                EventRecord(
                    event_id=ev.id,
                    true_level=ev.level,
                    predicted=None,
                    raw=f"<error> {slot}",
                )
            )
            continue
        parsed = parse_answer(slot.text)
        records.append(
            EventRecord(
                event_id=ev.id,
                true_level=ev.level,
                predicted=parsed.level,
                raw=slot.text,
            )
        )
    return records


def _run_baseline(
    evalset: EvalSet, spec: ScenarioSpec, deps: ScenarioDeps
) -> list[EventRecord]:
    vote = vote_majority if spec.kind == "baseline_vote1" else vote_top_two
    records = []
    for ev in evalset.records:
        cases = recall_similar(ev, deps.store, deps.embedder, k=spec.k)
        outcome = vote(cases)
        records.append(
            EventRecord(
                event_id=ev.id,
                true_level=ev.level,
                predicted=outcome.top_level,
                top_two=sorted(outcome.top_two),
            )
        )
    return records


def compute_metrics(result: RunResult, scoring: str = "top1") -> MetricsReport:
    """Exact integer counting; unparseable predictions are incorrect.

    ``either_of_top_two`` credits a record when the true level is either
    of its two most frequent vote levels; it requires vote records.
    """
    if scoring not in ("top1", "either_of_top_two"):
        raise ValueError(f"unknown scoring {scoring!r}")
    if not result.records:
        raise ValueError("run result has no records")
    if scoring == "either_of_top_two":
        missing = [r.event_id for r in result.records if r.top_two is None]
        if missing:
            raise ValueError(
                f"either_of_top_two scoring needs vote records; {len(missing)} "
                f"records (first: {missing[0]!r}) carry no top-two levels"
            )
    counts: dict[int, list[int]] = {}
    unparseable = 0
    for rec in result.records:
        correct_total = counts.setdefault(rec.true_level, [0, 0])
        correct_total[1] += 1
        if rec.predicted is None:
            unparseable += 1
        if scoring == "top1":
            hit = rec.predicted == rec.true_level
        else:
            hit = rec.true_level in rec.top_two
        if hit:
            correct_total[0] += 1
    total = sum(t for _, t in counts.values())
    correct = sum(c for c, _ in counts.values())
    return MetricsReport(
        model=result.model,
        scenario=result.scenario,
        scoring=scoring,
        overall_accuracy=100.0 * correct / total,
        per_level_accuracy={
            lvl: 100.0 * c / t for lvl, (c, t) in sorted(counts.items())
        },
        counts={lvl: (c, t) for lvl, (c, t) in sorted(counts.items())},
        unparseable_count=unparseable,
    )


def save_run(result: RunResult, run_dir: str | Path) -> Path:
    """Write result.jsonl and manifest.json under ``run_dir``."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    result_path = run_dir / "result.jsonl"
    with open(result_path, "w", encoding="utf-8") as fh:
        for rec in result.records:
            fh.write(
                json.dumps(
                    {
                        "event_id": rec.event_id,
                        "true_level": rec.true_level,
                        "predicted": rec.predicted,
                        "top_two": rec.top_two,
                        "raw": rec.raw,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    with open(run_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(result.manifest, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    return result_path


def load_run(run_dir: str | Path) -> RunResult:
    run_dir = Path(run_dir)
    with open(run_dir / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    records = []
    with open(run_dir / "result.jsonl", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            missing = set(_RESULT_FIELDS) - rec.keys()
            if missing:
                raise ValueError(
                    f"{run_dir / 'result.jsonl'}:{line_no}: missing fields {sorted(missing)}"
                )
            records.append(
                EventRecord(
                    event_id=rec["event_id"],
                    true_level=int(rec["true_level"]),
                    predicted=None if rec["predicted"] is None else int(rec["predicted"]),
                    top_two=rec["top_two"],
                    raw=rec["raw"],
                )
            )
    return RunResult(
        records=records,
        scenario=manifest.get("scenario", "unknown"),
        model=manifest.get("model", "unknown"),
        manifest=manifest,
    )


def _fmt(pct: float) -> str:
    return f"{pct:.2f}"


def _markdown_llm_table(reports: list[MetricsReport]) -> list[str]:
    scenarios = [s for s in LLM_SCENARIOS if any(r.scenario == s for r in reports)]
    models = []
    for r in reports:
        if r.model not in models:
            models.append(r.model)
    cell = {(r.model, r.scenario): r for r in reports}
    header = ["Model"] + [SCENARIO_LABELS[s] for s in scenarios]
    lines = [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join("---" for _ in header) + " |",
    ]
    for model in models:
        row = [model]
        for s in scenarios:
            r = cell.get((model, s))
            row.append(_fmt(r.overall_accuracy) if r else "-")
        lines.append("| " + " | ".join(row) + " |")
    return lines


def _markdown_baseline_table(reports: list[MetricsReport]) -> list[str]:
    level_names = [n.capitalize() for n in default_level_names(4)]
    scenarios = [s for s in BASELINE_SCENARIOS if any(r.scenario == s for r in reports)]
    by_scenario = {r.scenario: r for r in reports}
    header = ["Heat level"] + [SCENARIO_LABELS[s] for s in scenarios]
    lines = [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join("---" for _ in header) + " |",
    ]
    for lvl, name in enumerate(level_names, start=1):
        row = [name]
        for s in scenarios:
            acc = by_scenario[s].per_level_accuracy.get(lvl)
            row.append(_fmt(acc) if acc is not None else "-")
        lines.append("| " + " | ".join(row) + " |")
    return lines


def render_report(
    reports: MetricsReport | list[MetricsReport],
    format: str,
) -> str:
    """Render reports to text; identical inputs give identical bytes.

    ``markdown`` lays models out as rows and scenarios as columns, with a
    separate per-level section when voting baselines are included.
    ``plotdata`` is the long-form (model, scenario, level, accuracy) CSV
    for grouped-bar plots. ``csv`` is a flat one-row-per-report summary.
    """
    if isinstance(reports, MetricsReport):
        reports = [reports]
    if not reports:
        raise ValueError("no reports to emit")
    if format == "markdown":
        llm_reports = [r for r in reports if r.scenario in LLM_SCENARIOS]
        vote_reports = [r for r in reports if r.scenario in BASELINE_SCENARIOS]
        lines: list[str] = []
        if llm_reports:
            lines += ["## Prediction accuracy by scenario", ""]
            lines += _markdown_llm_table(llm_reports)
        if vote_reports:
            if lines:
                lines.append("")
            lines += ["## Voting baselines, per-level accuracy", ""]
            lines += _markdown_baseline_table(vote_reports)
    elif format == "plotdata":
        lines = ["model,scenario,level,accuracy"]
        for r in reports:
            for lvl, acc in sorted(r.per_level_accuracy.items()):
                lines.append(f"{r.model},{r.scenario},{lvl},{_fmt(acc)}")
    elif format == "csv":
        lines = ["model,scenario,scoring,overall_accuracy,unparseable_count"]
        for r in reports:
            lines.append(
                f"{r.model},{r.scenario},{r.scoring},{_fmt(r.overall_accuracy)},{r.unparseable_count}"
            )
    else:
        raise ValueError(f"unknown report format {format!r}")
    return "\n".join(lines) + "\n"


def emit_report(
    reports: MetricsReport | list[MetricsReport],
    format: str,
    path: str | Path,
) -> Path:
    """Write ``render_report`` output to ``path`` and return it."""
    text = render_report(reports, format)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
