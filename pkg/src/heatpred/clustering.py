"""Heat-index clustering and level derivation.

Mini-batch k-means with seeded k-means++ initialization, SSE and silhouette
diagnostics, silhouette-argmax selection of the cluster count, and the
mapping from fitted 1-D clusters to ordered heat levels with member-derived
boundaries.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from heatpred.corpus import Event, EventCorpus

DEFAULT_LEVEL_NAMES_4 = ["low", "medium", "high", "very high"]
DEFAULT_K_RANGE = range(2, 11)


@dataclass
class KMeansParams:
    batch_size: int = 256
    max_iters: int = 100
    seed: int = 0
    convergence_tol: float = 1e-9
    # restarts guard against bad initial draws; the lowest-SSE fit wins.
    # Ignored when an explicit init is supplied.
    n_init: int = 10


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray  # (k, d)
    assignment: np.ndarray  # (n,) int, cluster index per point
    per_center_counts: np.ndarray  # (k,) int
    sse_per_iter: list[float] = field(default_factory=list)  # full-batch only
    n_iter: int = 0
    converged: bool = False


@dataclass
class ClusterDiagnostics:
    sse: float
    silhouette_mean: float
    a: np.ndarray  # mean intra-cluster distance per point
    b: np.ndarray  # mean distance to the nearest other cluster per point
    s: np.ndarray  # per-point silhouette score
    n: int


@dataclass
class KCandidate:
    k: int
    silhouette: float
    sse: float


@dataclass
class KSelection:
    candidates: list[KCandidate]
    chosen: int


@dataclass
class HeatLevelScheme:
    """Ascending boundaries partitioning [0, inf) into half-open level bands.

    ``boundaries`` has num_levels - 1 entries; level i covers
    [boundaries[i-2], boundaries[i-1]) with level 1 starting at 0 and the
    top level open-ended.
    """

    boundaries: list[float]
    level_names: list[str]
    level_counts: list[int] | None = None

    @property
    def num_levels(self) -> int:
        return len(self.boundaries) + 1


@dataclass
class EvalSet:
    records: list[Event]
    n_per_level: int


def _as_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"points must be a 1-D or 2-D array, got ndim={X.ndim}")
    if X.size and not np.isfinite(X).all():
        raise ValueError("points contain non-finite values")
    return X


def _pairwise_sq_dist(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    # (n, k) squared euclidean distances
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def kmeanspp_init(points, k: int, seed: int | np.random.Generator = 0) -> np.ndarray:
    """Seeded k-means++ initial centroids over the full dataset.

    Accepts a seed or an already-constructed Generator so callers can
    reproduce the exact initialization a fit used.
    """
    X = _as_points(points)
    n = len(X)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[int(rng.integers(n))]
    closest = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total > 0:
            probs = closest / total
            idx = int(rng.choice(n, p=probs))
        else:
            idx = int(rng.integers(n))  # all remaining points coincide
        centroids[j] = X[idx]
        closest = np.minimum(closest, ((X - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _assign_with_repair(X: np.ndarray, centroids: np.ndarray):
    """Nearest-centroid assignment; empty clusters get re-seeded on the point
    farthest from its current centroid, then assignment is recomputed."""
    k = len(centroids)
    n = len(X)
    for _ in range(k + 1):
        d2 = _pairwise_sq_dist(X, centroids)
        assignment = np.argmin(d2, axis=1)
        counts = np.bincount(assignment, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return assignment, centroids, d2
        j = int(empty[0])
        own = d2[np.arange(n), assignment]
        centroids = centroids.copy()
        centroids[j] = X[int(np.argmax(own))]
    return assignment, centroids, d2


def minibatch_kmeans(
    points,
    k: int,
    params: KMeansParams | None = None,
    init: np.ndarray | None = None,
) -> ClusterModel:
    """Cluster points with mini-batch k-means.

    Parameters
    ----------
    points : array-like, shape (n,) or (n, d)
        1-D inputs are treated as scalar features.
    k : int
        Number of clusters; must not exceed the point count.
    params : KMeansParams
        ``batch_size >= n`` switches to full-batch Lloyd iteration, which
        terminates once the assignment is stable (exact centroid fixpoint)
        or centroid movement drops below ``convergence_tol``. Smaller
        batches run streaming updates with per-center learning rates
        1 / count.
    init : ndarray, optional
        Explicit initial centroids; defaults to seeded k-means++ with
        ``params.n_init`` restarts, keeping the lowest-SSE fit. An
        explicit init always means exactly one fit.

    Returns
    -------
    ClusterModel
        Final centroids, a nearest-centroid assignment for every point,
        per-center counts, and (in full-batch mode) the per-iteration SSE
        trace.
    """
    params = params or KMeansParams()
    X = _as_points(points)
    n = len(X)
    if n == 0:
        raise ValueError("cannot cluster an empty point set")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")

    rng = np.random.default_rng(params.seed)
    if init is not None:
        centroids = np.array(init, dtype=float)
        if centroids.shape != (k, X.shape[1]):
            raise ValueError(
                f"init has shape {centroids.shape}, expected {(k, X.shape[1])}"
            )
        inits = [centroids]
    else:
        n_init = max(1, params.n_init)
        inits = [kmeanspp_init(X, k, rng) for _ in range(n_init)]

    best: ClusterModel | None = None
    best_sse = np.inf
    for start in inits:
        if params.batch_size >= n:
            model = _fit_full_batch(X, k, start, params)
        else:
            model = _fit_minibatch(X, k, start, params, rng)
        model_sse = sse(X, model)
        if model_sse < best_sse:
            best, best_sse = model, model_sse
    return best


def _fit_full_batch(X, k, centroids, params) -> ClusterModel:
    sse_per_iter: list[float] = []
    assignment, centroids, d2 = _assign_with_repair(X, centroids)
    sse_per_iter.append(float(d2[np.arange(len(X)), assignment].sum()))
    converged = False
    n_iter = 0
    for n_iter in range(1, params.max_iters + 1):
        new_centroids = np.stack(
            [X[assignment == j].mean(axis=0) for j in range(k)]
        )
        shift = float(np.linalg.norm(new_centroids - centroids, axis=1).max())
        centroids = new_centroids
        new_assignment, centroids, d2 = _assign_with_repair(X, centroids)
        sse_per_iter.append(float(d2[np.arange(len(X)), new_assignment].sum()))
        if np.array_equal(new_assignment, assignment):
            assignment = new_assignment
            converged = True
            break
        assignment = new_assignment
        if shift < params.convergence_tol:
            converged = True
            break
    counts = np.bincount(assignment, minlength=k)
    return ClusterModel(
        k=k,
        centroids=centroids,
        assignment=assignment,
        per_center_counts=counts,
        sse_per_iter=sse_per_iter,
        n_iter=n_iter,
        converged=converged,
    )


def _fit_minibatch(X, k, centroids, params, rng) -> ClusterModel:
    n = len(X)
    stream_counts = np.zeros(k, dtype=int)
    n_iter = 0
    converged = False
    for n_iter in range(1, params.max_iters + 1):
        batch_idx = rng.choice(n, size=params.batch_size, replace=False)
        B = X[batch_idx]
        labels = np.argmin(_pairwise_sq_dist(B, centroids), axis=1)
        before = centroids.copy()
        for x, c in zip(B, labels):
            stream_counts[c] += 1
            eta = 1.0 / stream_counts[c]
            centroids[c] = (1.0 - eta) * centroids[c] + eta * x
        shift = float(np.linalg.norm(centroids - before, axis=1).max())
        if shift < params.convergence_tol:
            converged = True
            break
    assignment, centroids, _ = _assign_with_repair(X, centroids)
    return ClusterModel(
        k=k,
        centroids=centroids,
        assignment=assignment,
        per_center_counts=stream_counts,
        sse_per_iter=[],
        n_iter=n_iter,
        converged=converged,
    )


def sse(points, model: ClusterModel) -> float:
    """Sum of squared distances from each point to its assigned centroid."""
    X = _as_points(points)
    if X.shape[1] != model.centroids.shape[1]:
        raise ValueError(
            f"dimension mismatch: points are {X.shape[1]}-D, "
            f"centroids are {model.centroids.shape[1]}-D"
        )
    if len(model.assignment) != len(X):
        raise ValueError(
            f"assignment covers {len(model.assignment)} points, got {len(X)}"
        )
    diff = X - model.centroids[model.assignment]
    return float(np.einsum("nd,nd->", diff, diff))


def silhouette(points, assignment) -> ClusterDiagnostics:
    """Per-point silhouette scores and their mean.

    For each point, ``a`` is the mean distance to the other members of its
    cluster and ``b`` the smallest mean distance to any other cluster;
    the score is (b - a) / max(a, b). Points in singleton clusters score 0.

    Raises
    ------
    ValueError
        If fewer than two clusters are populated or n < 3.
    """
    X = _as_points(points)
    A = np.asarray(assignment, dtype=int)
    n = len(X)
    if len(A) != n:
        raise ValueError("assignment length does not match point count")
    if n < 3:
        raise ValueError("silhouette needs at least 3 points")
    labels = np.unique(A)
    if len(labels) < 2:
        raise ValueError("silhouette undefined for a single cluster")

    diff = X[:, None, :] - X[None, :, :]
    D = np.sqrt(np.einsum("ijd,ijd->ij", diff, diff))

    a = np.zeros(n)
    b = np.full(n, np.inf)
    singleton = np.zeros(n, dtype=bool)
    for lab in labels:
        members = A == lab
        m = int(members.sum())
        sums_to_cluster = D[:, members].sum(axis=1)
        if m == 1:
            singleton |= members
        else:
            a[members] = sums_to_cluster[members] / (m - 1)
        outside = ~members
        b[outside] = np.minimum(b[outside], sums_to_cluster[outside] / m)

    with np.errstate(invalid="ignore"):
        denom = np.maximum(a, b)
        s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s[singleton] = 0.0

    # SSE against per-cluster means, so diagnostics stand on their own
    total = 0.0
    for lab in labels:
        members = X[A == lab]
        mu = members.mean(axis=0)
        total += float(((members - mu) ** 2).sum())

    return ClusterDiagnostics(
        sse=total,
        silhouette_mean=float(s.mean()),
        a=a,
        b=b,
        s=s,
        n=n,
    )


def select_k(points, k_range=DEFAULT_K_RANGE, params: KMeansParams | None = None) -> KSelection:
    """Fit every k in ``k_range`` and pick the silhouette argmax.

    Ties break toward the smaller k. SSE per candidate is recorded for
    elbow inspection.
    """
    params = params or KMeansParams()
    X = _as_points(points)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("empty k range")
    n = len(X)
    for k in ks:
        if k < 2 or k > n - 1:
            raise ValueError(f"k={k} outside the valid scan range [2, {n - 1}]")
    candidates: list[KCandidate] = []
    for k in ks:
        model = minibatch_kmeans(X, k, params)
        diag = silhouette(X, model.assignment)
        candidates.append(
            KCandidate(k=k, silhouette=diag.silhouette_mean, sse=sse(X, model))
        )
    best = max(c.silhouette for c in candidates)
    chosen = min(c.k for c in candidates if c.silhouette == best)
    return KSelection(candidates=candidates, chosen=chosen)


def export_diagnostics(selection: KSelection, path: str | Path) -> None:
    """CSV of (k, sse, silhouette) rows for elbow / silhouette plots."""
    lines = ["k,sse,silhouette"]
    for c in selection.candidates:
        lines.append(f"{c.k},{c.sse!r},{c.silhouette!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def default_level_names(k: int) -> list[str]:
    if k == 4:
        return list(DEFAULT_LEVEL_NAMES_4)
    return [f"level-{i}" for i in range(1, k + 1)]


def derive_levels(model: ClusterModel, points) -> HeatLevelScheme:
    """Order fitted 1-D clusters by centroid and derive level boundaries.

    The boundary between adjacent levels is the minimum heat index among
    the upper cluster's members, giving member-derived cutoffs.
    """
    X = _as_points(points)
    if X.shape[1] != 1:
        raise ValueError("level derivation requires 1-D heat indexes")
    order = np.argsort(model.centroids[:, 0], kind="stable")
    boundaries: list[float] = []
    counts: list[int] = []
    for pos, j in enumerate(order):
        members = X[model.assignment == j, 0]
        if members.size == 0:
            raise ValueError(f"cluster {int(j)} has no members")
        counts.append(int(members.size))
        if pos > 0:
            boundaries.append(float(members.min()))
    for lo, hi in zip(boundaries, boundaries[1:]):
        if not lo < hi:
            raise ValueError(f"degenerate level boundaries: {boundaries}")
    if boundaries and boundaries[0] <= 0:
        raise ValueError(f"degenerate level boundaries: {boundaries}")
    return HeatLevelScheme(
        boundaries=boundaries,
        level_names=default_level_names(model.k),
        level_counts=counts,
    )


def assign_level(scheme: HeatLevelScheme, heat_index: float) -> int:
    """Level whose half-open band [lower, upper) contains ``heat_index``."""
    h = float(heat_index)
    if not np.isfinite(h) or h < 0:
        raise ValueError(f"heat_index must be a finite non-negative number, got {heat_index!r}")
    return bisect.bisect_right(scheme.boundaries, h) + 1


def apply_scheme(corpus: EventCorpus, scheme: HeatLevelScheme) -> EventCorpus:
    """Return a corpus copy with every event's level assigned from the scheme."""
    events = [
        replace(ev, level=assign_level(scheme, ev.heat_index)) for ev in corpus.events
    ]
    return EventCorpus(events=events, source_meta=dict(corpus.source_meta))


def sample_eval_set(
    corpus: EventCorpus,
    scheme: HeatLevelScheme,
    n_per_level: int = 250,
    seed: int = 0,
) -> EvalSet:
    """Stratified evaluation sample: exactly ``n_per_level`` events per level.

    Sampling is uniform without replacement within each level, seeded, and
    depends only on the per-level id sets and the seed. Records come back
    ordered by (level, id).
    """
    if n_per_level < 1:
        raise ValueError("n_per_level must be >= 1")
    rng = np.random.default_rng(seed)
    by_level: dict[int, list[Event]] = {lvl: [] for lvl in range(1, scheme.num_levels + 1)}
    for ev in corpus.events:
        lvl = assign_level(scheme, ev.heat_index)
        by_level[lvl].append(replace(ev, level=lvl))
    records: list[Event] = []
    for lvl in range(1, scheme.num_levels + 1):
        pool = sorted(by_level[lvl], key=lambda e: e.id)
        if len(pool) < n_per_level:
            raise ValueError(
                f"level {lvl} has only {len(pool)} events, need {n_per_level}"
            )
        idx = np.sort(rng.choice(len(pool), size=n_per_level, replace=False))
        records.extend(pool[i] for i in idx)
    return EvalSet(records=records, n_per_level=n_per_level)


def save_scheme(scheme: HeatLevelScheme, path: str | Path) -> None:
    payload = {
        "boundaries": [float(b) for b in scheme.boundaries],
        "level_names": list(scheme.level_names),
        "level_counts": scheme.level_counts,
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def load_scheme(path: str | Path) -> HeatLevelScheme:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    boundaries = [float(b) for b in payload["boundaries"]]
    if any(not lo < hi for lo, hi in zip(boundaries, boundaries[1:])):
        raise ValueError(f"{path}: boundaries are not strictly ascending")
    return HeatLevelScheme(
        boundaries=boundaries,
        level_names=list(payload.get("level_names") or default_level_names(len(boundaries) + 1)),
        level_counts=payload.get("level_counts"),
    )
