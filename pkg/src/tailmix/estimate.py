"""Penalized least-squares fitting of mixture models with a known column count.

The objective is the squared distance between the empirical and the
parametric stable tail dependence function over a fixed grid of
evaluation points, plus ``lam`` times a row-wise p-pseudo-norm of the
coefficient matrix.  Exponents p <= 1 make the penalty gradient blow up
as an entry approaches zero, which is what pins superfluous entries to
exactly zero under the box-constrained quasi-Newton engine.

Fitting alternates after a joint preliminary pass: update the
coefficient matrix with the dependence parameters held fixed,
standardize its rows to unit sums, then update the dependence
parameters, until the parameter change drops below a threshold.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import clustering
from .empirical import (
    empirical_stdf_grid,
    ranks,
    resolve_tail_count,
    unit_pareto_transform,
)
from .model import (
    HUSLER_REISS,
    LOGISTIC,
    MixtureParams,
    lex_order_columns,
    signatures,
    stdf_hr_grid,
    stdf_logistic_grid,
    stdf_mixture_grid,
    triu_pairs,
)
from .optimize import OptimOptions, minimize_box

__all__ = [
    "FitConfig",
    "FitReport",
    "StandardizedRows",
    "default_grid",
    "fit_from_stdf",
    "fit_known_r",
    "generate_grid",
    "kmeans_start",
    "ls_loss",
    "ls_loss_parts",
    "penalty",
    "pnpls_fit",
    "standardize_rows",
]

HR_GRID_VALUES = (1 / 8, 1 / 6, 1 / 4, 1 / 3, 2 / 3, 3 / 4, 1.0)
LOGISTIC_GRID_VALUES = (1 / 4, 1 / 3, 1 / 2, 3 / 4, 1.0)


@dataclass(frozen=True)
class FitConfig:
    """Everything a fit needs besides the sample and the column count.

    ``tail`` is either an integer tail count k or a fraction of n.
    ``lam`` and ``p`` parameterize the penalty; ``zero_tol`` is the
    threshold below which final coefficients are declared exact zeros.
    """

    grid: np.ndarray
    tail: int | float
    p: float = 0.4
    lam: float = 0.0
    family: str = LOGISTIC
    zero_tol: float = 1e-4
    stop_eps: float = 1e-4
    max_alt_iters: int = 5
    alpha_start: float = 0.5
    gamma_start: float = 1.0
    alpha_bounds: tuple[float, float] = (1e-3, 1.0 - 1e-3)
    gamma_bounds: tuple[float, float] = (1e-3, 50.0)
    random_dep_start: bool = False
    freeze_uncovered_gamma: bool = True
    seed: int = 0
    hr_points: int = 1024
    optim: OptimOptions = field(default_factory=OptimOptions)

    def __post_init__(self):
        grid = np.atleast_2d(np.asarray(self.grid, dtype=float))
        if grid.size == 0:
            raise ValueError("evaluation grid is empty")
        if np.any(grid < 0.0):
            raise ValueError("evaluation points must be nonnegative")
        object.__setattr__(self, "grid", grid)
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"penalization exponent must lie in (0, 1], got {self.p}")
        if self.lam < 0.0:
            raise ValueError("penalization parameter must be nonnegative")
        if self.family not in (LOGISTIC, HUSLER_REISS):
            raise ValueError(f"unknown family {self.family!r}")
        if self.stop_eps <= 0.0 or self.max_alt_iters < 1:
            raise ValueError("invalid stopping configuration")
        if self.zero_tol < 0.0:
            raise ValueError("zero_tol must be nonnegative")


def penalty(A, p: float) -> float:
    """Row-wise p-pseudo-norm sum_j (sum_s a_js^p)^(1/p).

    For p = 1 this is the total entry sum; for p < 1 one-hot rows are the
    unique minimizers among rows of fixed sum, so smaller values mean
    sparser matrices.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"penalization exponent must lie in (0, 1], got {p}")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if np.any(A < 0.0):
        raise ValueError("coefficients must be nonnegative")
    return float(np.power(np.power(A, p).sum(axis=1), 1.0 / p).sum())


def _model_grid(grid: np.ndarray, params: MixtureParams, seed: int,
                hr_points: int) -> np.ndarray:
    return stdf_mixture_grid(grid, params, seed=seed, hr_points=hr_points)


def ls_loss_parts(params: MixtureParams, ell_hat, grid, p: float,
                  seed: int = 0, hr_points: int = 2048) -> tuple[float, float]:
    """(data term, penalty value) of the objective at ``params``."""
    ell_hat = np.asarray(ell_hat, dtype=float)
    model = _model_grid(np.atleast_2d(np.asarray(grid, dtype=float)), params,
                        seed, hr_points)
    if model.shape != ell_hat.shape:
        raise ValueError("empirical values and grid length mismatch")
    resid = model - ell_hat
    return float(resid @ resid), penalty(params.A, p)


def ls_loss(params: MixtureParams, ell_hat, grid, p: float, lam: float,
            seed: int = 0, hr_points: int = 2048) -> float:
    """Penalized least-squares objective; ``lam = 0`` is the plain fit."""
    data, pen = ls_loss_parts(params, ell_hat, grid, p, seed, hr_points)
    return data + lam * pen


class StandardizedRows(NamedTuple):
    matrix: np.ndarray
    repaired_rows: list


def standardize_rows(A, zero_tol: float = 1e-4) -> StandardizedRows:
    """Divide each row by its sum so unit row sums hold.

    A row whose sum falls below ``zero_tol`` cannot be scaled; it is
    repaired by putting all mass on its largest pre-standardization entry
    (lowest column index on ties), which preserves sparsity, and the row
    index is reported back.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if np.any(A < 0.0):
        raise ValueError("coefficients must be nonnegative")
    out = A.copy()
    repaired = []
    sums = out.sum(axis=1)
    for j in np.flatnonzero(sums < zero_tol):
        winner = int(np.argmax(out[j]))
        out[j] = 0.0
        out[j, winner] = 1.0
        sums[j] = 1.0
        repaired.append(int(j))
    out /= sums[:, None]
    return StandardizedRows(out, repaired)


# ---------------------------------------------------------------------------
# Parameter vector packing for the optimizer stages


def _dep_bounds(config: FitConfig, d: int) -> tuple[np.ndarray, np.ndarray]:
    if config.family == LOGISTIC:
        lo, hi = config.alpha_bounds
        return np.array([lo]), np.array([hi])
    n_pairs = d * (d - 1) // 2
    lo, hi = config.gamma_bounds
    return np.full(n_pairs, lo), np.full(n_pairs, hi)


def _dep_start(config: FitConfig, d: int) -> np.ndarray:
    if config.random_dep_start:
        rng = np.random.default_rng(config.seed + 1_000_003)
        lo, hi = (config.alpha_bounds if config.family == LOGISTIC
                  else config.gamma_bounds)
        size = 1 if config.family == LOGISTIC else d * (d - 1) // 2
        return rng.uniform(lo, min(hi, 2.0 * max(1.0, lo)), size=size)
    if config.family == LOGISTIC:
        return np.array([config.alpha_start])
    return np.full(d * (d - 1) // 2, config.gamma_start)


def _params_from(config: FitConfig, A: np.ndarray, dep: np.ndarray) -> MixtureParams:
    if config.family == LOGISTIC:
        return MixtureParams(LOGISTIC, A, alpha=float(dep[0]))
    d = A.shape[0]
    gamma = np.zeros((d, d))
    for val, (i, j) in zip(dep, triu_pairs(d)):
        gamma[i, j] = gamma[j, i] = val
    return MixtureParams(HUSLER_REISS, A, gamma=gamma)


def _frozen_dep_mask(config: FitConfig, A: np.ndarray) -> np.ndarray:
    """Dependence coordinates with no effect on the loss for fixed ``A``.

    A variogram entry only enters the model through columns whose support
    contains both of its indices, so pairs never co-occurring in any
    signature are held at their current value instead of drifting.
    """
    d = A.shape[0]
    if config.family == LOGISTIC or not config.freeze_uncovered_gamma:
        return np.zeros(1 if config.family == LOGISTIC else d * (d - 1) // 2,
                        dtype=bool)
    sigs = signatures(A)
    return np.array([not any({i, j} <= sig for sig in sigs)
                     for i, j in triu_pairs(d)])


def _loss_of_arrays(config: FitConfig, ell_hat: np.ndarray,
                    A: np.ndarray, dep: np.ndarray) -> float:
    """Objective on raw arrays; the optimizer's box keeps inputs in range."""
    if config.family == LOGISTIC:
        model = stdf_logistic_grid(config.grid, A, float(dep[0]))
    else:
        d = A.shape[0]
        gamma = np.zeros((d, d))
        for val, (i, j) in zip(dep, triu_pairs(d)):
            gamma[i, j] = gamma[j, i] = val
        model = stdf_hr_grid(config.grid, A, gamma, seed=config.seed,
                             n_points=config.hr_points)
    resid = model - ell_hat
    val = float(resid @ resid)
    if config.lam > 0.0:
        val += config.lam * penalty(A, config.p)
    return val


def pnpls_fit(ell_hat, grid, theta0: MixtureParams,
              config: FitConfig) -> MixtureParams:
    """Joint penalized fit of (A, dependence); output rows not standardized.

    Minimizes the objective over all coefficient entries in [0, 1] and
    the family-specific dependence box simultaneously, starting from
    ``theta0``.
    """
    config = replace(config, grid=grid)
    ell_hat = np.asarray(ell_hat, dtype=float)
    if ell_hat.shape[0] != config.grid.shape[0]:
        raise ValueError("empirical values and grid length mismatch")
    d, r = theta0.d, theta0.r
    n_a = d * r

    dep_lo, dep_hi = _dep_bounds(config, d)
    dep0 = theta0.dep_vector()
    if np.any(dep0 < dep_lo - 1e-12) or np.any(dep0 > dep_hi + 1e-12):
        raise ValueError("dependence start lies outside its bounds")

    def objective(vec):
        return _loss_of_arrays(config, ell_hat, vec[:n_a].reshape(d, r),
                               vec[n_a:])

    x0 = np.concatenate([theta0.A.reshape(-1), dep0])
    lower = np.concatenate([np.zeros(n_a), dep_lo])
    upper = np.concatenate([np.ones(n_a), dep_hi])
    res = minimize_box(objective, x0, (lower, upper), config.optim)
    return _params_from(config, res.x[:n_a].reshape(d, r), res.x[n_a:])


@dataclass
class FitReport:
    """Outcome of one full fit: final estimate plus per-stage diagnostics."""

    theta: MixtureParams
    signatures: list
    loss_trace: list
    statuses: dict
    repaired_rows: list
    n_alternations: int
    stopped_early: bool
    k: int
    lam: float
    p: float
    final_loss: float
    final_data_term: float

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.to_dict(),
            "signatures": [sorted(s) for s in self.signatures],
            "loss_trace": [[stage, val] for stage, val in self.loss_trace],
            "statuses": dict(self.statuses),
            "repaired_rows": list(self.repaired_rows),
            "n_alternations": self.n_alternations,
            "stopped_early": self.stopped_early,
            "k": self.k,
            "lam": self.lam,
            "p": self.p,
            "final_loss": self.final_loss,
            "final_data_term": self.final_data_term,
        }


def fit_from_stdf(ell_hat, r: int, config: FitConfig,
                  theta0: MixtureParams, k: int = -1) -> FitReport:
    """Full alternating fit against precomputed empirical stdf values.

    Stages: joint preliminary fit, then up to ``max_alt_iters`` rounds of
    (coefficient update, row standardization, dependence update), stopped
    once the Euclidean parameter change drops below ``stop_eps``.  The
    final matrix is zero-thresholded, re-standardized, and its columns
    sorted decreasingly in lexicographic order.
    """
    ell_hat = np.asarray(ell_hat, dtype=float)
    d = config.grid.shape[1]
    if theta0.d != d or theta0.r != r:
        raise ValueError("starting parameters have the wrong shape")
    n_a = d * r

    statuses = {}
    trace = []
    repaired: list = []

    theta_pr = pnpls_fit(ell_hat, config.grid, theta0, config)
    statuses["pnpls"] = "done"
    trace.append(("pnpls", _loss_of_arrays(config, ell_hat, theta_pr.A,
                                           theta_pr.dep_vector())))

    dep_lo, dep_hi = _dep_bounds(config, d)
    A_old = np.asarray(theta_pr.A)
    dep_old = theta_pr.dep_vector()
    A_std = A_old
    stopped_early = False
    n_alt = 0

    for it in range(1, config.max_alt_iters + 1):
        n_alt = it

        def a_objective(vec):
            return _loss_of_arrays(config, ell_hat, vec.reshape(d, r), dep_old)

        res_a = minimize_box(a_objective, A_old.reshape(-1),
                             (np.zeros(n_a), np.ones(n_a)), config.optim)
        statuses[f"alt{it}_A"] = res_a.status
        trace.append((f"alt{it}_A", res_a.f))

        A_std, rep = standardize_rows(res_a.x.reshape(d, r), config.zero_tol)
        repaired.extend(rep)
        trace.append((f"alt{it}_std",
                      _loss_of_arrays(config, ell_hat, A_std, dep_old)))

        frozen = _frozen_dep_mask(config, A_std)
        free = ~frozen
        dep_new = dep_old.copy()
        if free.any():
            def z_objective(vec):
                dep = dep_old.copy()
                dep[free] = vec
                return _loss_of_arrays(config, ell_hat, A_std, dep)

            res_z = minimize_box(z_objective, dep_old[free],
                                 (dep_lo[free], dep_hi[free]), config.optim)
            dep_new[free] = res_z.x
            statuses[f"alt{it}_Z"] = res_z.status
            trace.append((f"alt{it}_Z", res_z.f))
        else:
            statuses[f"alt{it}_Z"] = "all_frozen"

        delta = np.sqrt(np.sum((A_std - A_old) ** 2)
                        + np.sum((dep_new - dep_old) ** 2))
        A_old, dep_old = A_std, dep_new
        if delta < config.stop_eps:
            stopped_early = True
            break

    # Zero-threshold, re-standardize, and order columns for identifiability.
    A_final = np.where(A_std <= config.zero_tol, 0.0, A_std)
    A_final, rep = standardize_rows(A_final, config.zero_tol)
    repaired.extend(rep)
    A_final = lex_order_columns(A_final)
    theta_hat = _params_from(config, A_final, dep_old)

    sigs = signatures(A_final)
    data_term, pen = ls_loss_parts(theta_hat, ell_hat, config.grid, config.p,
                                   seed=config.seed, hr_points=config.hr_points)
    final_loss = data_term + config.lam * pen
    trace.append(("final", final_loss))

    return FitReport(theta=theta_hat, signatures=sigs, loss_trace=trace,
                     statuses=statuses, repaired_rows=repaired,
                     n_alternations=n_alt, stopped_early=stopped_early,
                     k=int(k), lam=config.lam, p=config.p,
                     final_loss=final_loss, final_data_term=data_term)


def default_theta0(sample, r: int, config: FitConfig) -> MixtureParams:
    """Clustering-based coefficient start plus the configured dependence start."""
    A0 = kmeans_start(sample, r, seed=config.seed)
    return _params_from(config, A0, _dep_start(config, A0.shape[0]))


def fit_known_r(sample, r: int, config: FitConfig,
                theta0: MixtureParams | None = None) -> FitReport:
    """Fit a mixture model with ``r`` columns to a raw sample.

    Computes the empirical stdf at the configured grid and tail count,
    builds a starting point when none is given, and runs the alternating
    penalized fit.
    """
    if r < 1:
        raise ValueError("column count must be at least 1")
    sample = np.atleast_2d(np.asarray(sample, dtype=float))
    n, d = sample.shape
    if d != config.grid.shape[1]:
        raise ValueError("sample and grid dimension mismatch")
    k = resolve_tail_count(config.tail, n)
    ell_hat = empirical_stdf_grid(ranks(sample), k, config.grid)
    if theta0 is None:
        theta0 = default_theta0(sample, r, config)
    return fit_from_stdf(ell_hat, r, config, theta0, k=k)


def kmeans_start(sample, t: int, seed: int = 0) -> np.ndarray:
    """Starting coefficient matrix from clustering the transformed tail.

    The sample is mapped to the unit-Pareto scale by ranks, the top 10%
    of rows by total size are clustered into ``t`` groups, and cluster
    centers become (column-normalized, then row-standardized) columns.
    Falls back to the uniform matrix when fewer rows than clusters remain.
    """
    if t < 1:
        raise ValueError("column count must be at least 1")
    pareto = unit_pareto_transform(sample)
    n, d = pareto.shape
    n_keep = max(1, int(round(0.1 * n)))
    top = np.argsort(-pareto.sum(axis=1), kind="stable")[:n_keep]
    if n_keep < t:
        warnings.warn("fewer retained tail rows than clusters; "
                      "using the uniform starting matrix")
        return np.full((d, t), 1.0 / t)
    centers = clustering.kmeans(pareto[top], t, seed=seed).centers  # (t, d)
    A0 = centers.T.copy()
    A0 /= A0.sum(axis=0, keepdims=True)
    return standardize_rows(A0, zero_tol=1e-12).matrix


def generate_grid(d: int, values, nonzero_counts) -> np.ndarray:
    """All evaluation points with a given support-size profile.

    One point per (support, value assignment) pair: supports of each size
    in ``nonzero_counts`` in lexicographic order, nonzero coordinates
    running through ``values`` in the given order.
    """
    values = [float(v) for v in values]
    if len(set(values)) != len(values) or any(v <= 0.0 for v in values):
        raise ValueError("values must be positive and distinct")
    counts = sorted(set(int(c) for c in nonzero_counts))
    if not counts or counts[0] < 1 or counts[-1] > d:
        raise ValueError(f"support sizes must lie in [1, {d}]")

    points = []
    for c in counts:
        for support in itertools.combinations(range(d), c):
            for assignment in itertools.product(values, repeat=c):
                x = np.zeros(d)
                x[list(support)] = assignment
                points.append(x)
    if not points:
        raise ValueError("grid recipe produced no points")
    return np.array(points)


def default_grid(d: int, family: str = LOGISTIC) -> np.ndarray:
    """Standard grid recipes: sizes {2, 3} for logistic, pairs for HR."""
    if family == LOGISTIC:
        return generate_grid(d, LOGISTIC_GRID_VALUES, {2, 3})
    return generate_grid(d, HR_GRID_VALUES, {2})
