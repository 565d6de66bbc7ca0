"""Rank-based nonparametric tail estimation.

The empirical stable tail dependence function counts observations whose
rank in at least one margin falls in that margin's top k-window, so every
output here is invariant under strictly increasing transforms of the
individual columns.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "chi_pseudo_distance",
    "empirical_chi",
    "empirical_stdf",
    "empirical_stdf_grid",
    "ranks",
    "resolve_tail_count",
    "unit_pareto_transform",
]


def _as_sample(sample) -> np.ndarray:
    x = np.atleast_2d(np.asarray(sample, dtype=float))
    if x.size == 0:
        raise ValueError("sample is empty")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def ranks(sample) -> np.ndarray:
    """Columnwise ascending ranks in {1, ..., n}.

    Ties are broken by original row index (ordinal ranking), so each
    column is always a permutation of 1..n.  The estimators below assume
    continuous margins; the deterministic rule only matters for data with
    ties, e.g. discretized measurements.
    """
    x = _as_sample(sample)
    order = np.argsort(x, axis=0, kind="stable")
    r = np.empty_like(order)
    n = x.shape[0]
    rows = np.arange(1, n + 1)[:, None]
    np.put_along_axis(r, order, np.broadcast_to(rows, x.shape), axis=0)
    return r


def resolve_tail_count(tail, n: int) -> int:
    """Tail count k from either an integer count or a fraction of n.

    A float in (0, 1) is interpreted as the tail fraction k/n and rounded;
    the result is clipped to [1, n].
    """
    if isinstance(tail, (bool, np.bool_)):
        raise ValueError("tail must be an integer count or a fraction")
    if isinstance(tail, (int, np.integer)):
        k = int(tail)
        if not 1 <= k <= n:
            raise ValueError(f"tail count must lie in [1, {n}], got {k}")
        return k
    f = float(tail)
    if not 0.0 < f < 1.0:
        raise ValueError(f"tail fraction must lie in (0, 1), got {f}")
    return int(np.clip(round(f * n), 1, n))


def empirical_stdf_grid(rank_matrix: np.ndarray, k: int, points,
                        chunk: int = 64) -> np.ndarray:
    """Empirical stdf at many points from a precomputed rank matrix.

    For point x the estimate is the number of observations whose rank in
    some margin j exceeds ``n + 1/2 - k x_j``, divided by k.
    """
    r = np.atleast_2d(np.asarray(rank_matrix))
    n, d = r.shape
    if not 1 <= k <= n:
        raise ValueError(f"tail count must lie in [1, {n}], got {k}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != d:
        raise ValueError("points and sample dimension mismatch")
    if np.any(pts < 0.0):
        raise ValueError("evaluation points must be nonnegative")

    thresholds = n + 0.5 - k * pts  # (q, d)
    out = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], chunk):
        block = thresholds[start:start + chunk]  # (c, d)
        hits = (r[None, :, :] > block[:, None, :]).any(axis=2)  # (c, n)
        out[start:start + chunk] = hits.sum(axis=1) / k
    return out


def empirical_stdf(sample, k: int, x) -> float:
    """Empirical stable tail dependence function at a single point."""
    r = ranks(sample)
    return float(empirical_stdf_grid(r, k, np.atleast_2d(x))[0])


def empirical_chi(sample, k: int, pair) -> float:
    """Empirical extremal correlation of one margin pair, clamped to [0, 1].

    ``2 - stdf(1, 1)`` on the two-coordinate margin: 1 means full tail
    dependence, 0 tail independence.
    """
    s, t = pair
    if s == t:
        raise ValueError("extremal correlation needs two distinct margins")
    x = _as_sample(sample)
    sub = x[:, [s, t]]
    chi = 2.0 - empirical_stdf(sub, k, np.array([1.0, 1.0]))
    return float(np.clip(chi, 0.0, 1.0))


def chi_pseudo_distance(chi: float) -> float:
    """Pseudo-distance (1 - chi) / (2 (3 - chi)), decreasing on [0, 1]."""
    if not 0.0 <= chi <= 1.0:
        raise ValueError(f"chi must lie in [0, 1], got {chi}")
    return (1.0 - chi) / (2.0 * (3.0 - chi))


def unit_pareto_transform(sample) -> np.ndarray:
    """Rank transform n / (n + 1 - R), mapping each margin near unit Pareto."""
    r = ranks(sample)
    n = r.shape[0]
    return n / (n + 1.0 - r)
