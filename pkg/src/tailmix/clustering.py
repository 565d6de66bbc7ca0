"""Clustering utilities: k-means starts and k-medoids dimension reduction.

k-means supplies starting values for the coefficient matrix; PAM
(k-medoids, BUILD then SWAP) groups variables by the extremal
pseudo-distance so that high-dimensional datasets can be reduced to a
few representative margins before direction discovery.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .empirical import chi_pseudo_distance, ranks

__all__ = [
    "KmeansResult",
    "PamResult",
    "chi_distance_matrix",
    "kmeans",
    "pam",
]


class KmeansResult(NamedTuple):
    centers: np.ndarray      # (t, dim)
    assignment: np.ndarray   # (n,) cluster index per point
    inertia: float
    inertia_trace: list      # inertia after each Lloyd iteration


def _plusplus_seed(points: np.ndarray, t: int, rng: np.random.Generator):
    n = points.shape[0]
    centers = np.empty((t, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, t):
        total = d2.sum()
        if total <= 0.0:
            centers[j] = points[rng.integers(n)]
            continue
        centers[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def kmeans(points, t: int, seed: int = 0, max_iter: int = 100) -> KmeansResult:
    """Lloyd's algorithm with greedy-spreading initialization.

    Empty clusters are repaired by re-seeding the dead center at the
    point currently farthest from its own center.  Deterministic for a
    fixed seed.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    if not 1 <= t <= n:
        raise ValueError(f"cluster count must lie in [1, {n}], got {t}")

    rng = np.random.default_rng(seed)
    centers = _plusplus_seed(points, t, rng)
    assignment = np.full(n, -1)
    trace = []
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assignment = d2.argmin(axis=1)
        own = d2[np.arange(n), new_assignment]
        for j in range(t):
            members = new_assignment == j
            if members.any():
                centers[j] = points[members].mean(axis=0)
            else:
                far = int(np.argmax(own))
                centers[j] = points[far]
                new_assignment[far] = j
                own[far] = 0.0
        trace.append(float(own.sum()))
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment

    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assignment = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), assignment].sum())
    return KmeansResult(centers, assignment, inertia, trace)


class PamResult(NamedTuple):
    medoids: list            # cluster-center indices
    assignment: np.ndarray   # (n,) medoid position per point
    cost: float
    build_cost: float


def pam(distances, n_clusters: int, seed: int = 0) -> PamResult:
    """Partitioning Around Medoids on a precomputed distance matrix.

    Classic BUILD (greedy medoid addition) followed by best-improvement
    SWAP passes run to local optimality.  The algorithm itself is
    deterministic (ties broken by lowest index); ``seed`` is accepted for
    interface symmetry with :func:`kmeans`.
    """
    del seed
    dist = np.atleast_2d(np.asarray(distances, dtype=float))
    n = dist.shape[0]
    if dist.shape != (n, n):
        raise ValueError("distance matrix must be square")
    if not 1 <= n_clusters <= n:
        raise ValueError(f"cluster count must lie in [1, {n}], got {n_clusters}")

    # BUILD: start from the most central point, then greedily add the
    # point with the largest cost reduction.
    medoids = [int(np.argmin(dist.sum(axis=1)))]
    nearest = dist[:, medoids[0]].copy()
    while len(medoids) < n_clusters:
        best_gain, best_c = -np.inf, -1
        for c in range(n):
            if c in medoids:
                continue
            gain = np.maximum(nearest - dist[:, c], 0.0).sum()
            if gain > best_gain:
                best_gain, best_c = gain, c
        medoids.append(best_c)
        nearest = np.minimum(nearest, dist[:, best_c])
    build_cost = float(nearest.sum())

    # SWAP: replace one medoid by one non-medoid while it lowers the cost.
    cost = build_cost
    improved = True
    while improved:
        improved = False
        best = (cost, None, None)
        med_arr = np.array(medoids)
        for pos in range(len(medoids)):
            keep = np.delete(med_arr, pos)
            base = dist[:, keep].min(axis=1) if keep.size else np.full(n, np.inf)
            for c in range(n):
                if c in medoids:
                    continue
                cand_cost = float(np.minimum(base, dist[:, c]).sum())
                if cand_cost < best[0] - 1e-15:
                    best = (cand_cost, pos, c)
        if best[1] is not None:
            cost, pos, c = best
            medoids[pos] = c
            improved = True

    assignment = dist[:, medoids].argmin(axis=1)
    cost = float(dist[np.arange(n), np.array(medoids)[assignment]].sum())
    return PamResult(medoids, assignment, cost, build_cost)


def chi_distance_matrix(sample, k: int) -> np.ndarray:
    """Pairwise extremal pseudo-distances between the margins of a sample.

    Entry (s, t) is ``(1 - chi_st) / (2 (3 - chi_st))`` with chi the
    empirical extremal correlation at tail count k; values lie in
    [0, 1/6], zero diagonal.
    """
    sample = np.atleast_2d(np.asarray(sample, dtype=float))
    n, d = sample.shape
    if d < 2:
        raise ValueError("need at least two margins")
    r = ranks(sample)
    exceed = r > (n + 0.5 - k)  # (n, d): margin in its top-k window
    co = exceed.T.astype(float) @ exceed.astype(float)  # pair co-exceedances
    counts = np.diag(co)
    ell = (counts[:, None] + counts[None, :] - co) / k
    chi = np.clip(2.0 - ell, 0.0, 1.0)
    out = np.empty((d, d))
    for s in range(d):
        out[s, s] = 0.0
        for t in range(s + 1, d):
            out[s, t] = out[t, s] = chi_pseudo_distance(chi[s, t])
    return out
