# Render the two prompt layouts, parse a few model answers, and score a
# full offline evaluation against a mock chat backend.

from heatpred.clustering import EvalSet, HeatLevelScheme, apply_scheme, default_level_names
from heatpred.evaluation import (
    ScenarioDeps,
    ScenarioSpec,
    compute_metrics,
    run_scenario,
)
from heatpred.llm import MockClient
from heatpred.prompting import parse_answer, render_no_case_prompt, render_with_case_prompt
from heatpred.retrieval import Case, CaseSet
from heatpred.synthdata import balanced_corpus

scheme = HeatLevelScheme(
    boundaries=[8.777964, 21.462457, 42.399911],
    level_names=default_level_names(4),
    level_counts=[0, 0, 0, 0],
)

corpus = apply_scheme(balanced_corpus(scheme.boundaries, per_level=6, seed=1), scheme)
event = corpus.events[0]

print("--- prompt without references ---")
print(render_no_case_prompt(event, scheme).text)

cases = CaseSet(
    cases=[
        Case("Neighborhood watch reports a string of garage break-ins.", 9.8, 2),
        Case("Recall of a popular toy line fills the evening news.", 25.1, 3),
    ],
    provenance="recalled",
)
print("\n--- prompt with references ---")
print(render_with_case_prompt(event, cases, scheme).text)

# answers arrive in many shapes; the parser maps each to a level
print("\n--- answer parsing ---")
for reply in ("Option: B", "I would pick option d", "(C)", "heat level 1", "hard to say"):
    parsed = parse_answer(reply)
    print(f"  {reply!r:34s} -> {parsed.level}")

# a constant-answer mock gets exactly the level-1 share right
evalset = EvalSet(records=list(corpus.events), n_per_level=6)
deps = ScenarioDeps(scheme=scheme, client=MockClient(letter="A"))
result = run_scenario(evalset, ScenarioSpec(kind="no_case"), deps)
metrics = compute_metrics(result)
print(f"\nconstant-A accuracy: {metrics.overall_accuracy:.2f}%")

# an oracle mock that reads the true level scores 100%
truth = {ev.id: ev.level for ev in corpus.events}
deps.client = MockClient(model="oracle", levels=truth)
metrics = compute_metrics(run_scenario(evalset, ScenarioSpec(kind="no_case"), deps))
print(f"oracle accuracy:     {metrics.overall_accuracy:.2f}%")
