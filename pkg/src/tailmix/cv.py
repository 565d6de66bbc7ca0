"""Penalization-parameter selection by K-fold cross-validation.

A candidate lambda is scored by fitting on each fold's complement and
measuring the plain (unpenalized) squared distance between the held-out
fold's empirical stdf and the fitted model over the evaluation grid.
Tail counts shrink proportionally on both sides: k (K-1)/K for training,
k/K for validation.

The greedy grid search re-centers an arithmetic lambda grid around the
current optimum, shrinking the step tenfold whenever the optimum sits at
the lower edge, until the optimum is interior and stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .empirical import empirical_stdf_grid, ranks, resolve_tail_count
from .estimate import FitConfig, default_theta0, fit_from_stdf
from .model import MixtureParams

__all__ = [
    "CvGridResult",
    "CvPlan",
    "GreedyCvResult",
    "cv_score",
    "cv_score_grid",
    "greedy_lambda_grid",
    "make_cv_plan",
]


@dataclass(frozen=True)
class CvPlan:
    """Partition of {0..n-1} into near-equal folds (sizes differ by <= 1)."""

    n: int
    n_folds: int
    folds: tuple
    seed: int

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValueError("need at least two folds")
        if self.n < self.n_folds:
            raise ValueError("more folds than observations")
        sizes = [len(f) for f in self.folds]
        if max(sizes) - min(sizes) > 1 or sum(sizes) != self.n:
            raise ValueError("folds must partition the sample near-equally")
        combined = np.sort(np.concatenate(self.folds))
        if not np.array_equal(combined, np.arange(self.n)):
            raise ValueError("folds must be disjoint and cover the sample")


def make_cv_plan(n: int, n_folds: int, seed: int = 0,
                 shuffle: bool = True) -> CvPlan:
    """Seeded shuffle split into contiguous near-equal blocks.

    ``shuffle=False`` keeps the original order, for experiments on data
    whose index carries meaning.
    """
    idx = np.arange(n)
    if shuffle:
        idx = np.random.default_rng(seed).permutation(n)
    folds = tuple(np.sort(part) for part in np.array_split(idx, n_folds))
    return CvPlan(n=n, n_folds=n_folds, folds=folds, seed=seed)


class CvGridResult(NamedTuple):
    lams: np.ndarray
    scores: np.ndarray        # mean validation score per lambda, inf on failure
    fold_scores: np.ndarray   # (n_folds, n_lams)
    failures: list            # (fold, lambda, message)


def cv_score_grid(sample, r: int, config: FitConfig, lams,
                  plan: CvPlan) -> CvGridResult:
    """Cross-validation scores for many lambdas with shared fold setup.

    Per fold, the training empirical stdf, validation empirical stdf, and
    the clustering-based start are computed once and reused across the
    whole lambda grid.
    """
    from dataclasses import replace

    sample = np.atleast_2d(np.asarray(sample, dtype=float))
    n = sample.shape[0]
    if n != plan.n:
        raise ValueError("plan was built for a different sample size")
    lams = np.asarray(list(lams), dtype=float)
    if np.any(lams < 0.0):
        raise ValueError("penalization parameters must be nonnegative")

    k = resolve_tail_count(config.tail, n)
    k_train = max(1, (k * (plan.n_folds - 1)) // plan.n_folds)
    k_val = max(1, k // plan.n_folds)

    prepared = []
    for fold in plan.folds:
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        train = sample[mask]
        ell_train = empirical_stdf_grid(ranks(train), k_train, config.grid)
        ell_val = empirical_stdf_grid(ranks(sample[fold]), k_val, config.grid)
        theta0 = default_theta0(train, r, config)
        prepared.append((ell_train, ell_val, theta0))

    fold_scores = np.full((plan.n_folds, len(lams)), np.inf)
    failures = []
    for j, lam in enumerate(lams):
        lam_config = replace(config, lam=float(lam))
        for i, (ell_train, ell_val, theta0) in enumerate(prepared):
            try:
                report = fit_from_stdf(ell_train, r, lam_config, theta0,
                                       k=k_train)
            except Exception as exc:  # failed fold marks the lambda failed
                failures.append((i, float(lam), str(exc)))
                continue
            model_val = _model_on_grid(report.theta, lam_config)
            resid = model_val - ell_val
            fold_scores[i, j] = float(resid @ resid)

    scores = fold_scores.mean(axis=0)
    scores[~np.isfinite(fold_scores).all(axis=0)] = np.inf
    return CvGridResult(lams=lams, scores=scores, fold_scores=fold_scores,
                        failures=failures)


def _model_on_grid(theta: MixtureParams, config: FitConfig) -> np.ndarray:
    from .model import stdf_mixture_grid

    return stdf_mixture_grid(config.grid, theta, seed=config.seed,
                             hr_points=config.hr_points)


def cv_score(sample, r: int, config: FitConfig, lam: float,
             plan: CvPlan) -> float:
    """Mean over folds of the held-out squared stdf distance at one lambda."""
    return float(cv_score_grid(sample, r, config, [lam], plan).scores[0])


class GreedyCvResult(NamedTuple):
    lam_star: float
    grid: np.ndarray
    scores: np.ndarray
    n_passes: int
    boundary: bool
    trace: list               # (grid, scores) per pass


def greedy_lambda_grid(sample, r: int, config: FitConfig, initial_grid,
                       plan: CvPlan, max_refinements: int = 5) -> GreedyCvResult:
    """Iterative grid refinement so the optimum ends up mid-grid.

    Each pass scores the current arithmetic grid; if the best lambda sits
    in the outer 20% of indices the grid is re-centered on it (step
    shrunk tenfold on a lower-edge hit) and rescored, up to
    ``max_refinements`` extra passes.
    """
    grid = np.sort(np.asarray(list(initial_grid), dtype=float))
    if grid.size < 2 or grid[0] <= 0.0:
        raise ValueError("initial grid must hold at least two positive values")

    trace = []
    prev_step = None
    n_passes = 0
    while True:
        n_passes += 1
        result = cv_score_grid(sample, r, config, grid, plan)
        trace.append((grid.copy(), result.scores.copy()))
        if not np.isfinite(result.scores).any():
            raise RuntimeError("every lambda on the grid failed")
        best = int(np.argmin(result.scores))
        size = grid.size
        edge_band = max(1, int(0.2 * size))
        at_lower = best < edge_band
        at_upper = best >= size - edge_band
        step = float(np.median(np.diff(grid)))
        stabilized = prev_step is None or step == prev_step

        if not (at_lower or at_upper) and stabilized:
            return GreedyCvResult(float(grid[best]), grid, result.scores,
                                  n_passes, False, trace)
        if n_passes > max_refinements:
            return GreedyCvResult(float(grid[best]), grid, result.scores,
                                  n_passes, at_lower or at_upper, trace)

        new_step = step / 10.0 if at_lower else step
        center = grid[best]
        offsets = (np.arange(size) - (size - 1) / 2.0) * new_step
        new_grid = center + offsets
        if new_grid[0] < new_step:
            new_grid = new_grid + (new_step - new_grid[0])
        prev_step = step
        grid = new_grid
