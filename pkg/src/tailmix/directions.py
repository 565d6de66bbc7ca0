"""Extreme-direction discovery when the number of directions is unknown.

Fit mixture models with t = 1, 2, ... columns until one column collapses
to all zeros: the empty signature signals that t - 1 columns already
covered every direction the data supports, and the non-empty signatures
of the final fit are returned as the discovered directions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .cv import greedy_lambda_grid, cv_score_grid, make_cv_plan
from .estimate import FitConfig, FitReport, fit_known_r
from .model import LOGISTIC, MixtureParams, stdf_mixture

__all__ = [
    "DirectionReport",
    "LambdaRule",
    "fitted_chi",
    "fitted_chi_matrix",
    "identify_directions",
    "logistic_weights",
]


@dataclass(frozen=True)
class LambdaRule:
    """How the penalization parameter is chosen during discovery.

    ``fixed`` uses ``FitConfig.lam`` as-is.  ``cv`` selects lambda by
    K-fold cross-validation over ``grid`` (greedy refinement optional),
    either once at a reference column count (default: the data dimension)
    or separately at every t when ``per_t`` is set.
    """

    mode: str = "fixed"
    n_folds: int = 10
    grid: tuple = (0.005, 0.01, 0.02, 0.05, 0.1, 0.2)
    greedy: bool = False
    per_t: bool = False
    reference_r: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("fixed", "cv"):
            raise ValueError(f"unknown lambda rule {self.mode!r}")


def _select_lambda(sample, r: int, config: FitConfig,
                   rule: LambdaRule) -> float:
    plan = make_cv_plan(sample.shape[0], rule.n_folds, seed=rule.seed)
    if rule.greedy:
        return greedy_lambda_grid(sample, r, config, rule.grid, plan).lam_star
    result = cv_score_grid(sample, r, config, rule.grid, plan)
    if not np.isfinite(result.scores).any():
        raise RuntimeError("every lambda on the grid failed")
    return float(result.lams[int(np.argmin(result.scores))])


@dataclass
class DirectionReport:
    """Discovered directions plus the per-t fits behind them."""

    directions: list
    weights: dict | None
    t_final: int
    fits: list
    cap_reached: bool
    duplicates_collapsed: bool
    lam_used: list

    def to_dict(self) -> dict:
        return {
            "directions": [sorted(d) for d in self.directions],
            "weights": (None if self.weights is None else
                        {",".join(map(str, sorted(k))): v
                         for k, v in self.weights.items()}),
            "t_final": self.t_final,
            "cap_reached": self.cap_reached,
            "duplicates_collapsed": self.duplicates_collapsed,
            "lam_used": self.lam_used,
            "fits": [f.to_dict() for f in self.fits],
        }


def identify_directions(sample, config: FitConfig, t_max: int | None = None,
                        lambda_rule: LambdaRule | None = None) -> DirectionReport:
    """Grow the column count until an empty signature appears.

    Each t gets an independent fit (no warm starting).  Stops at the
    first t whose fitted coefficient matrix contains an all-zero column,
    or at ``t_max`` (default ``2^d - 1``, the number of possible
    directions) with the cap flagged.
    """
    sample = np.atleast_2d(np.asarray(sample, dtype=float))
    d = sample.shape[1]
    if t_max is None:
        t_max = 2 ** d - 1
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    rule = lambda_rule or LambdaRule(mode="fixed")

    lam_once = None
    if rule.mode == "cv" and not rule.per_t:
        ref = rule.reference_r if rule.reference_r is not None else d
        lam_once = _select_lambda(sample, ref, config, rule)

    fits: list[FitReport] = []
    lams: list[float] = []
    cap_reached = False
    for t in range(1, t_max + 1):
        if rule.mode == "fixed":
            lam_t = config.lam
        elif lam_once is not None:
            lam_t = lam_once
        else:
            lam_t = _select_lambda(sample, t, config, rule)
        lams.append(float(lam_t))
        report = fit_known_r(sample, t, replace(config, lam=float(lam_t)))
        fits.append(report)
        if frozenset() in report.signatures:
            break
    else:
        cap_reached = True

    final = fits[-1]
    non_empty = [s for s in final.signatures if s]
    directions = sorted(set(non_empty), key=lambda s: (len(s), sorted(s)))
    duplicates_collapsed = len(directions) < len(non_empty)

    weights = None
    if config.family == LOGISTIC and directions:
        keep = [s for s, sig in enumerate(final.signatures) if sig]
        weights = logistic_weights(final.theta.A[:, keep], final.theta.alpha)

    return DirectionReport(directions=directions, weights=weights,
                           t_final=len(fits), fits=fits,
                           cap_reached=cap_reached,
                           duplicates_collapsed=duplicates_collapsed,
                           lam_used=lams)


def logistic_weights(A, alpha: float) -> dict:
    """Relative mass of each direction under the logistic family.

    Weight of column s is ``(sum_j a_js^(1/alpha))^alpha`` normalized to
    total 1.  Columns sharing a signature are merged by summing.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    from .model import signatures as column_signatures

    raw: dict = {}
    for s, sig in enumerate(column_signatures(A)):
        if not sig:
            raise ValueError(f"column {s} is empty")
        col = A[sorted(sig), s]
        top = col.max()
        mass = top * float(np.power(np.power(col / top, 1.0 / alpha).sum(),
                                    alpha))
        raw[sig] = raw.get(sig, 0.0) + mass
    total = sum(raw.values())
    return {sig: mass / total for sig, mass in raw.items()}


def fitted_chi(theta: MixtureParams, s: int, t: int,
               accuracy: float = 1e-6) -> float:
    """Model-implied extremal correlation of margins (s, t), in [0, 1].

    ``2 - l_st(1, 1)`` with ``l_st`` the bivariate margin of the fitted
    stdf; 1 under full tail dependence, 0 when the margins never share a
    direction.
    """
    if s == t:
        raise ValueError("extremal correlation needs two distinct margins")
    if not (0 <= s < theta.d and 0 <= t < theta.d):
        raise ValueError("margin index out of range")
    x = np.zeros(theta.d)
    x[s] = x[t] = 1.0
    return float(np.clip(2.0 - stdf_mixture(x, theta, accuracy=accuracy), 0.0, 1.0))


def fitted_chi_matrix(theta: MixtureParams, accuracy: float = 1e-6) -> np.ndarray:
    """All pairwise fitted extremal correlations; zero diagonal."""
    d = theta.d
    out = np.zeros((d, d))
    for s in range(d):
        for t in range(s + 1, d):
            out[s, t] = out[t, s] = fitted_chi(theta, s, t, accuracy=accuracy)
    return out
