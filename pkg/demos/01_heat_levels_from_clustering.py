# Derive four heat levels from a skewed synthetic heat-index sample.
# The component sizes mimic a real event corpus: the overwhelming mass
# sits at low heat, with a tiny very-hot tail.

import numpy as np

from heatpred.clustering import (
    KMeansParams,
    derive_levels,
    minibatch_kmeans,
    select_k,
)
from heatpred.synthdata import synthetic_heat_samples

heats = synthetic_heat_samples(seed=0)
print(f"{len(heats)} samples, min {heats.min():.3f}, max {heats.max():.3f}")

# scan candidate cluster counts; the silhouette coefficient arbitrates
params = KMeansParams(batch_size=2**31, seed=0)
selection = select_k(heats, range(2, 9), params)
for cand in selection.candidates:
    marker = " <- chosen" if cand.k == selection.chosen else ""
    print(f"k={cand.k}  sse={cand.sse:10.2f}  silhouette={cand.silhouette:.6f}{marker}")

model = minibatch_kmeans(heats, selection.chosen, params)
scheme = derive_levels(model, heats)

print()
print("level boundaries:", ", ".join(f"{b:.4f}" for b in scheme.boundaries))
for name, count in zip(scheme.level_names, scheme.level_counts):
    print(f"  {name:10s} {count:4d} events")

# the same fit in streaming mode, batch by batch
stream_params = KMeansParams(batch_size=64, max_iters=200, seed=0)
stream_model = minibatch_kmeans(heats, selection.chosen, stream_params)
centers_full = np.sort(model.centroids.ravel())
centers_stream = np.sort(stream_model.centroids.ravel())
print()
print("full-batch centers:", np.round(centers_full, 3))
print("mini-batch centers:", np.round(centers_stream, 3))
