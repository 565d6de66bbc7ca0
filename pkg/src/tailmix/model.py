"""Mixture-model parameters and exact stable tail dependence functions.

A mixture model takes componentwise maxima of r independent max-stable
factors after scaling factor s by column s of a (d x r) coefficient
matrix with entries in [0, 1].  The support of each column (its
"signature") is one extreme direction of the model.  Two factor families
are supported: logistic (one dependence parameter ``alpha``) and
Huesler-Reiss (a d x d variogram matrix).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import mvn

try:
    from numba import njit as _njit
except ImportError:  # numba is an optional accelerator
    _njit = None

__all__ = [
    "LOGISTIC",
    "HUSLER_REISS",
    "ALPHA_MARGIN",
    "MixtureParams",
    "VariogramCheck",
    "extremal_coefficient",
    "lex_order_columns",
    "signatures",
    "stdf_hr_factor",
    "stdf_hr_grid",
    "stdf_logistic_factor",
    "stdf_logistic_grid",
    "stdf_mixture",
    "stdf_mixture_grid",
    "triu_pairs",
    "validate_coefficient_matrix",
    "validate_variogram",
]

LOGISTIC = "logistic"
HUSLER_REISS = "hr"

# Dependence parameters are kept this far inside the open interval (0, 1);
# exactly degenerate values are rejected rather than silently moved.
ALPHA_MARGIN = 1e-3


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


def triu_pairs(d: int) -> list[tuple[int, int]]:
    """Index pairs (i, j), i < j, in row-major order.

    This fixes the coordinate order of the Huesler-Reiss dependence
    vector everywhere (optimization, reports, scoring).
    """
    return [(i, j) for i in range(d) for j in range(i + 1, d)]


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Full parameter set theta = (A, dependence) of a mixture model.

    Parameters
    ----------
    family : str
        ``"logistic"`` or ``"hr"``.
    A : (d, r) ndarray
        Coefficient matrix, entries in [0, 1].  Row standardization is a
        property of final estimates, not a construction requirement, so
        it is not enforced here.
    alpha : float, optional
        Logistic dependence parameter in (0, 1), shared across columns.
    gamma : (d, d) ndarray, optional
        Huesler-Reiss variogram matrix, shared across columns.
    """

    family: str
    A: np.ndarray
    alpha: float | None = None
    gamma: np.ndarray | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.ndim != 2 or A.size == 0:
            raise ValueError("coefficient matrix must be a nonempty 2-d array")
        if A.min() < -1e-12 or A.max() > 1.0 + 1e-12:
            raise ValueError("coefficient matrix entries must lie in [0, 1]")
        object.__setattr__(self, "A", _as_readonly(np.clip(A, 0.0, 1.0)))

        if self.family == LOGISTIC:
            if self.alpha is None or self.gamma is not None:
                raise ValueError("logistic family takes alpha and no variogram")
            a = float(self.alpha)
            if a <= 0.0 or a >= 1.0:
                raise ValueError(f"alpha must lie strictly in (0, 1), got {a}")
            object.__setattr__(
                self, "alpha", min(max(a, ALPHA_MARGIN), 1.0 - ALPHA_MARGIN))
        elif self.family == HUSLER_REISS:
            if self.gamma is None or self.alpha is not None:
                raise ValueError("hr family takes a variogram and no alpha")
            g = np.asarray(self.gamma, dtype=float)
            if g.shape != (self.d, self.d):
                raise ValueError("variogram shape must match the dimension of A")
            object.__setattr__(self, "gamma", _as_readonly(g))
        else:
            raise ValueError(f"unknown family {self.family!r}")

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> int:
        return self.A.shape[1]

    def dep_vector(self) -> np.ndarray:
        """Dependence parameters as a flat vector.

        ``[alpha]`` for the logistic family; the upper triangle of the
        variogram in :func:`triu_pairs` order for Huesler-Reiss.
        """
        if self.family == LOGISTIC:
            return np.array([self.alpha])
        return np.array([self.gamma[i, j] for i, j in triu_pairs(self.d)])

    def with_parts(self, A: np.ndarray | None = None,
                   dep: np.ndarray | None = None) -> "MixtureParams":
        """Copy with a new coefficient matrix and/or dependence vector."""
        new_A = self.A if A is None else A
        if dep is None:
            return replace(self, A=new_A)
        if self.family == LOGISTIC:
            return replace(self, A=new_A, alpha=float(dep[0]))
        g = np.zeros((self.d, self.d))
        for val, (i, j) in zip(dep, triu_pairs(self.d)):
            g[i, j] = g[j, i] = val
        return replace(self, A=new_A, gamma=g)

    def to_dict(self) -> dict:
        out = {
            "family": self.family,
            "d": self.d,
            "r": self.r,
            "A": self.A.tolist(),
        }
        if self.family == LOGISTIC:
            out["alpha"] = self.alpha
        else:
            out["gamma"] = self.gamma.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MixtureParams":
        A = np.asarray(data["A"], dtype=float)
        if A.ndim == 1:
            A = A.reshape(int(data["d"]), int(data["r"]))
        if data["family"] == LOGISTIC:
            return cls(LOGISTIC, A, alpha=float(data["alpha"]))
        return cls(HUSLER_REISS, A, gamma=np.asarray(data["gamma"], dtype=float))


def validate_coefficient_matrix(A, standardized: bool = True,
                                require_positive_columns: bool = True,
                                tol: float = 1e-9) -> list[str]:
    """Return the list of violated coefficient-matrix invariants (empty if valid)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    problems = []
    if A.min() < -tol or A.max() > 1.0 + tol:
        problems.append("entries outside [0, 1]")
    if standardized and not np.allclose(A.sum(axis=1), 1.0, atol=tol):
        problems.append("row sums differ from 1")
    if require_positive_columns and np.any(A.sum(axis=0) <= 0.0):
        problems.append("column with nonpositive sum")
    return problems


def signatures(A, zero_tol: float = 0.0) -> list[frozenset[int]]:
    """Support sets of the columns of ``A``, in column order.

    Entry (j, s) belongs to signature s when ``A[j, s] > zero_tol``.
    Empty sets are kept: an all-zero column is the stop sentinel of the
    direction-discovery loop and callers decide how to treat it.
    Indices are 0-based.
    """
    if zero_tol < 0.0:
        raise ValueError("zero_tol must be nonnegative")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return [frozenset(np.flatnonzero(A[:, s] > zero_tol).tolist())
            for s in range(A.shape[1])]


def lex_order_columns(A) -> np.ndarray:
    """Columns of ``A`` sorted decreasingly in lexicographic order.

    Lexicographic comparison reads each column top to bottom and decides
    on the first differing entry.  Identical columns keep their input
    order, so the operation is idempotent.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    order = sorted(range(A.shape[1]), key=lambda s: tuple(A[:, s]), reverse=True)
    return A[:, order].copy()


def stdf_logistic_factor(x, a, alpha: float) -> float:
    """Logistic factor stdf (sum_j (a_j x_j)^(1/alpha))^alpha.

    The largest term is factored out before exponentiation so that small
    ``alpha`` (strong dependence, exponent 1/alpha up to 1000) neither
    overflows nor underflows.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    y = np.asarray(x, dtype=float) * np.asarray(a, dtype=float)
    if np.any(y < 0.0):
        raise ValueError("inputs must be nonnegative")
    top = y.max() if y.size else 0.0
    if top == 0.0:
        return 0.0
    return float(top * np.power(np.power(y / top, 1.0 / alpha).sum(), alpha))


def stdf_hr_factor(x, a, gamma, accuracy: float = 1e-5, seed: int = 0) -> float:
    """Huesler-Reiss factor stdf for scaled coordinates y = a * x.

    Each positive coordinate j contributes ``y_j Phi_{m-1}(eta; Sigma_j)``
    where ``eta_t = log(y_j / y_t) + gamma_{jt} / 2`` and
    ``Sigma_j[t, t'] = (gamma_{jt} + gamma_{jt'} - gamma_{tt'}) / 2``.
    Coordinates with ``y_t = 0`` give ``eta_t = +inf`` and drop out of the
    Gaussian cdf; coordinates with ``y_j = 0`` contribute nothing.
    """
    y = np.asarray(x, dtype=float) * np.asarray(a, dtype=float)
    if np.any(y < 0.0):
        raise ValueError("inputs must be nonnegative")
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    m = y.shape[0]
    if gamma.shape != (m, m):
        raise ValueError("variogram shape must match the restricted index set")
    if m == 1:
        return float(y[0])

    total = 0.0
    with np.errstate(divide="ignore"):
        log_y = np.log(y)
    for j in range(m):
        if y[j] == 0.0:
            continue
        others = np.array([t for t in range(m) if t != j])
        eta = log_y[j] - log_y[others] + gamma[j, others] / 2.0
        sigma_j = 0.5 * (gamma[j, others][:, None] + gamma[j, others][None, :]
                         - gamma[np.ix_(others, others)])
        total += y[j] * mvn.mvn_cdf(eta, sigma_j, accuracy=accuracy,
                                    seed=seed + j).value
    return float(total)


def stdf_mixture(x, params: MixtureParams, accuracy: float = 1e-5,
                 seed: int = 0) -> float:
    """Mixture stdf: sum over columns of the factor stdf on its support."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.d,):
        raise ValueError(f"point must have length {params.d}")
    if np.any(x < 0.0) or not np.all(np.isfinite(x)):
        raise ValueError("evaluation points must be finite and nonnegative")

    total = 0.0
    for s, J in enumerate(signatures(params.A)):
        if not J:
            continue
        idx = sorted(J)
        if params.family == LOGISTIC:
            total += stdf_logistic_factor(x[idx], params.A[idx, s], params.alpha)
        else:
            total += stdf_hr_factor(x[idx], params.A[idx, s],
                                    params.gamma[np.ix_(idx, idx)],
                                    accuracy=accuracy, seed=seed + 101 * s)
    return total


def _logistic_grid_numpy(X: np.ndarray, A: np.ndarray, alpha: float) -> np.ndarray:
    scaled = X[:, :, None] * A[None, :, :]  # (q, d, r)
    top = scaled.max(axis=1)  # (q, r)
    denom = np.where(top > 0.0, top, 1.0)
    inner = np.power(scaled / denom[:, None, :], 1.0 / alpha).sum(axis=1)
    return np.where(top > 0.0, top * np.power(inner, alpha), 0.0).sum(axis=1)


if _njit is not None:

    @_njit(cache=True)
    def _logistic_grid_kernel(X, A, alpha, out):  # pragma: no cover - jitted
        q, d = X.shape
        r = A.shape[1]
        inv = 1.0 / alpha
        for i in range(q):
            acc = 0.0
            for s in range(r):
                m = 0.0
                for j in range(d):
                    v = X[i, j] * A[j, s]
                    if v > m:
                        m = v
                if m > 0.0:
                    t = 0.0
                    for j in range(d):
                        v = X[i, j] * A[j, s]
                        if v > 0.0:
                            t += (v / m) ** inv
                    acc += m * t ** alpha
            out[i] = acc

else:
    _logistic_grid_kernel = None


def stdf_logistic_grid(X: np.ndarray, A: np.ndarray, alpha: float) -> np.ndarray:
    """Logistic mixture stdf on a (q, d) array of points, fully vectorized.

    The largest term of each column is factored out before exponentiation
    (see :func:`stdf_logistic_factor`).  This is the hot path of the
    fitting objective; a jitted kernel is used when numba is available
    and falls back to pure numpy otherwise, with identical results.
    """
    if _logistic_grid_kernel is not None:
        X = np.ascontiguousarray(X, dtype=float)
        A = np.ascontiguousarray(A, dtype=float)
        out = np.empty(X.shape[0])
        _logistic_grid_kernel(X, A, float(alpha), out)
        return out
    return _logistic_grid_numpy(X, A, alpha)


def _hr_grid_factor(X: np.ndarray, col: np.ndarray, gamma: np.ndarray,
                    seed: int, n_points: int) -> np.ndarray:
    """One HR factor evaluated on all grid rows, batching shared-pattern cdfs."""
    idx = np.flatnonzero(col > 0.0)
    m = idx.size
    if m == 0:
        return np.zeros(X.shape[0])
    y = X[:, idx] * col[idx][None, :]  # (q, m)
    if m == 1:
        return y[:, 0]
    g = gamma[np.ix_(idx, idx)]
    with np.errstate(divide="ignore"):
        log_y = np.log(y)

    out = np.zeros(X.shape[0])
    for j in range(m):
        active = np.flatnonzero(y[:, j] > 0.0)
        if active.size == 0:
            continue
        others = np.array([t for t in range(m) if t != j])
        eta = (log_y[active, j][:, None] - log_y[np.ix_(active, others)]
               + g[j, others][None, :] / 2.0)
        sigma_j = 0.5 * (g[j, others][:, None] + g[j, others][None, :]
                         - g[np.ix_(others, others)])
        finite = np.isfinite(eta)
        patterns, inverse = np.unique(finite, axis=0, return_inverse=True)
        vals = np.empty(active.size)
        for p_idx, pattern in enumerate(patterns):
            rows = np.flatnonzero(inverse == p_idx)
            cols = np.flatnonzero(pattern)
            if cols.size == 0:
                vals[rows] = 1.0
                continue
            sub_vals, _ = mvn.mvn_cdf_batch(
                eta[np.ix_(rows, cols)], sigma_j[np.ix_(cols, cols)],
                seed=seed + 7 * j + p_idx, n_points=n_points)
            vals[rows] = sub_vals
        out[active] += y[active, j] * vals
    return out


def stdf_hr_grid(X: np.ndarray, A: np.ndarray, gamma: np.ndarray,
                 seed: int = 0, n_points: int = 2048) -> np.ndarray:
    """Huesler-Reiss mixture stdf on a (q, d) array of points.

    Batches the Gaussian cdf calls of each (column, coordinate) term
    across all grid rows sharing a zero pattern, with a fixed lattice
    budget ``n_points`` per batch.
    """
    out = np.zeros(X.shape[0])
    for s in range(A.shape[1]):
        out += _hr_grid_factor(X, A[:, s], gamma,
                               seed=seed + 101 * s, n_points=n_points)
    return out


def stdf_mixture_grid(X, params: MixtureParams, seed: int = 0,
                      hr_points: int = 2048) -> np.ndarray:
    """Mixture stdf on many evaluation points at once."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != params.d:
        raise ValueError(f"grid points must have length {params.d}")
    if params.family == LOGISTIC:
        return stdf_logistic_grid(X, params.A, params.alpha)
    return stdf_hr_grid(X, params.A, params.gamma, seed=seed,
                        n_points=hr_points)


def extremal_coefficient(J, params: MixtureParams, accuracy: float = 1e-5,
                         seed: int = 0) -> float:
    """Effective number of tail-independent variables among the set ``J``.

    The stdf evaluated at the indicator vector of ``J``; lies in
    [1, |J|] for a standardized coefficient matrix.
    """
    J = sorted(set(int(j) for j in J))
    if not J:
        raise ValueError("index set must be non-empty")
    if min(J) < 0 or max(J) >= params.d:
        raise ValueError("index set out of range")
    x = np.zeros(params.d)
    x[J] = 1.0
    return stdf_mixture(x, params, accuracy=accuracy, seed=seed)


class VariogramCheck(NamedTuple):
    ok: bool
    reason: str | None


def validate_variogram(gamma) -> VariogramCheck:
    """Check symmetry, zero diagonal, and conditional negative definiteness.

    The last condition is verified through positive definiteness of the
    induced covariance anchored at the first coordinate,
    ``Sigma[t, t'] = (gamma_{0t} + gamma_{0t'} - gamma_{tt'}) / 2``.
    """
    g = np.atleast_2d(np.asarray(gamma, dtype=float))
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        return VariogramCheck(False, "not a square matrix")
    if not np.all(np.isfinite(g)):
        return VariogramCheck(False, "non-finite entries")
    if np.any(g < 0.0):
        return VariogramCheck(False, "negative entries")
    if not np.allclose(g, g.T, atol=1e-10):
        return VariogramCheck(False, "not symmetric")
    if np.any(np.abs(np.diag(g)) > 1e-12):
        return VariogramCheck(False, "nonzero diagonal")
    d = g.shape[0]
    if d >= 2:
        rest = np.arange(1, d)
        sigma = 0.5 * (g[0, rest][:, None] + g[0, rest][None, :]
                       - g[np.ix_(rest, rest)])
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            return VariogramCheck(False, "induced covariance not positive definite")
    return VariogramCheck(True, None)
