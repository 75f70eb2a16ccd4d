"""Public-opinion heat levels: clustering, retrieval, and LLM evaluation.

The package turns a corpus of events with scalar heat indices into a
four-level heat scheme (mini-batch k-means plus silhouette model
selection), retrieves similar historical events from an exact cosine
vector store, and evaluates how well language models predict an event's
level with and without retrieved reference cases.
"""

from heatpred.clustering import (
    HeatLevelScheme,
    KMeansParams,
    assign_level,
    derive_levels,
    minibatch_kmeans,
    sample_eval_set,
    select_k,
    silhouette,
)
from heatpred.corpus import Event, EventCorpus, build_triplets, clean_events, load_events
from heatpred.embedding import (
    HashedTrigramEmbedder,
    VectorStore,
    cosine_similarity,
    index_corpus,
    top_k,
)
from heatpred.evaluation import (
    MetricsReport,
    ScenarioDeps,
    ScenarioSpec,
    compute_metrics,
    emit_report,
    run_scenario,
)
from heatpred.llm import MockClient, ModelConfig, ReplayClient
from heatpred.prompting import parse_answer, render_no_case_prompt, render_with_case_prompt
from heatpred.retrieval import recall_similar, sample_simulated_cases, vote_majority, vote_top_two

__version__ = "0.1.0"

__all__ = [
    "Event",
    "EventCorpus",
    "HashedTrigramEmbedder",
    "HeatLevelScheme",
    "KMeansParams",
    "MetricsReport",
    "MockClient",
    "ModelConfig",
    "ReplayClient",
    "ScenarioDeps",
    "ScenarioSpec",
    "VectorStore",
    "assign_level",
    "build_triplets",
    "clean_events",
    "compute_metrics",
    "cosine_similarity",
    "derive_levels",
    "emit_report",
    "index_corpus",
    "load_events",
    "minibatch_kmeans",
    "parse_answer",
    "recall_similar",
    "render_no_case_prompt",
    "render_with_case_prompt",
    "run_scenario",
    "sample_eval_set",
    "sample_simulated_cases",
    "select_k",
    "silhouette",
    "top_k",
    "vote_majority",
    "vote_top_two",
]
