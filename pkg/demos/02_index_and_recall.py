# Build an exact-search vector store over a leveled corpus, then recall
# the most similar historical events for a fresh query event.

from heatpred.clustering import HeatLevelScheme, default_level_names
from heatpred.corpus import Event
from heatpred.embedding import HashedTrigramEmbedder, index_corpus, top_k
from heatpred.retrieval import recall_similar
from heatpred.synthdata import category_corpus

scheme = HeatLevelScheme(
    boundaries=[8.777964, 21.462457, 42.399911],
    level_names=default_level_names(4),
    level_counts=[0, 0, 0, 0],
)

corpus = category_corpus(n_per_category=4, n_categories=6)
# the synthetic events carry no levels yet; band them by heat index
from heatpred.clustering import apply_scheme

leveled = apply_scheme(corpus, scheme)

embedder = HashedTrigramEmbedder(dim=512, seed=0)
store = index_corpus(leveled, embedder)
print(f"indexed {len(store)} events at dim {embedder.dim}")

query = Event(
    id="q-000",
    title="query",
    content="A sudden storm floods the riverside district and closes two bridges.",
    heat_index=15.0,
)

# raw neighbor scores straight from the store
neighbors = top_k(store, embedder.embed(query.content), k=5)
print("\nnearest neighbors:")
for nb in neighbors:
    entry = store.get(nb.event_id)
    print(f"  {nb.score:.4f}  [{entry.level}] {entry.content[:60]}")

# the same lookup packaged as reference cases for a prompt
cases = recall_similar(query, store, embedder, k=5)
print("\nrecalled case levels:", cases.levels())
