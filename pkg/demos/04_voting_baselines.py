# Score the two embedding-only baselines: predict an event's heat level
# from the levels of its nearest stored neighbors, no language model.

from heatpred.clustering import EvalSet, HeatLevelScheme, apply_scheme, default_level_names
from heatpred.embedding import HashedTrigramEmbedder, index_corpus
from heatpred.evaluation import (
    ScenarioDeps,
    ScenarioSpec,
    compute_metrics,
    render_report,
    run_scenario,
)
from heatpred.retrieval import recall_similar, vote_majority, vote_top_two
from heatpred.synthdata import balanced_corpus

scheme = HeatLevelScheme(
    boundaries=[8.777964, 21.462457, 42.399911],
    level_names=default_level_names(4),
    level_counts=[0, 0, 0, 0],
)
corpus = apply_scheme(balanced_corpus(scheme.boundaries, per_level=12, seed=0), scheme)
embedder = HashedTrigramEmbedder(dim=512, seed=0)
store = index_corpus(corpus, embedder)

# one event up close: recall, tally, predict
event = corpus.events[0]
cases = recall_similar(event, store, embedder, k=7)
print(f"true level {event.level}, recalled levels {cases.levels()}")
print(f"modal vote:    {vote_majority(cases).top_level}")
print(f"top-two votes: {sorted(vote_top_two(cases).top_two)}")

# both baselines over the whole set
evalset = EvalSet(records=list(corpus.events), n_per_level=12)
deps = ScenarioDeps(scheme=scheme, store=store, embedder=embedder)
r1 = run_scenario(evalset, ScenarioSpec(kind="baseline_vote1", k=7), deps)
r2 = run_scenario(evalset, ScenarioSpec(kind="baseline_vote2", k=7), deps)
m1 = compute_metrics(r1, scoring="top1")
m2 = compute_metrics(r2, scoring="either_of_top_two")

print()
print(render_report([m1, m2], "markdown"))
print(f"overall: modal {m1.overall_accuracy:.2f}%, "
      f"either-of-top-two {m2.overall_accuracy:.2f}%")
