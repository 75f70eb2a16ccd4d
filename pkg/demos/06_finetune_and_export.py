# Fine-tune the trigram encoder on triplets derived from a leveled
# corpus, merge the result with its base checkpoint, and export vectors
# the retrieval index loads directly. Every hand-off between the two
# packages is a plain file: triplets.jsonl in, store.jsonl out.

import warnings
from pathlib import Path

from heatpred.clustering import HeatLevelScheme, apply_scheme, default_level_names
from heatpred.corpus import build_triplets, save_events, save_triplets
from heatpred.embedding import load_store, top_k
from heatpred.synthdata import category_corpus

from finetune.config import FinetuneConfig, MergeSpec
from finetune.export import export_vectors
from finetune.merge import merge
from finetune.train import train

work = Path("finetune_demo")
work.mkdir(exist_ok=True)

# the indexing side produces the two input files
scheme = HeatLevelScheme(
    boundaries=[8.777964, 21.462457, 42.399911],
    level_names=default_level_names(4),
    level_counts=[0, 0, 0, 0],
)
corpus = apply_scheme(category_corpus(n_per_category=6, n_categories=6), scheme)
events_path = work / "leveled.jsonl"
save_events(corpus, events_path)
tset = build_triplets(corpus, seed=0)
triplets_path = work / "triplets.jsonl"
save_triplets(tset, triplets_path)
print(f"{len(tset.triplets)} triplets from {len(corpus.events)} leveled events")

# fine-tune, starting from the deterministic base checkpoint
config = FinetuneConfig(output_dir=work / "run", epochs=3)
result = train(triplets_path, config)
for epoch, mean in enumerate(result.epoch_means, 1):
    print(f"epoch {epoch}: mean loss {mean:.6f}")

# even blend of fine-tuned and base weights
merged = merge(MergeSpec(result.checkpoint_dir, result.base_dir, work / "run" / "merged"))
print(f"merged checkpoint at {merged}")

# export vectors and read them back with the retrieval code
store_path = work / "store.jsonl"
count = export_vectors(merged, events_path, store_path)
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    store = load_store(store_path)
print(f"exported {count} vectors; store loads {len(store)} entries, {len(caught)} warnings")

entry = store.entries[0]
print(f"nearest to {entry.event_id!r} ({entry.content[:40]}...):")
for neighbor in top_k(store, entry.vector, k=4):
    level = store.get(neighbor.event_id).level
    print(f"  {neighbor.event_id}  score {neighbor.score:.4f}  level {level}")
