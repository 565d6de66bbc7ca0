"""Shared generators and independent oracles for the test suite."""

import math

import numpy as np
from scipy.special import ndtr

from tailmix.model import HUSLER_REISS, LOGISTIC, MixtureParams

# Benchmark 4 x 4 coefficient matrix used across the fitting and study tests:
# supports {0,1}, {0,2,3}, {0,2}, {1,3} with unit row sums.
BENCHMARK_A = np.array([
    [1 / 3, 1 / 3, 1 / 3, 0.0],
    [1 / 2, 0.0, 0.0, 1 / 2],
    [0.0, 3 / 4, 1 / 4, 0.0],
    [0.0, 1 / 2, 0.0, 1 / 2],
])

BENCHMARK_SIGNATURES = {
    frozenset({0, 1}),
    frozenset({0, 2, 3}),
    frozenset({0, 2}),
    frozenset({1, 3}),
}


def random_coeff_matrix(rng, d, r):
    """Random standardized coefficient matrix with a random sparsity pattern.

    Every row and every column keeps at least one positive entry.
    """
    while True:
        mask = rng.random((d, r)) < 0.65
        if mask.any(axis=1).all() and mask.any(axis=0).all():
            break
    A = np.where(mask, rng.uniform(0.05, 1.0, size=(d, r)), 0.0)
    return A / A.sum(axis=1, keepdims=True)


def random_variogram(rng, d):
    """Random valid variogram via a random positive-definite covariance."""
    w = rng.normal(size=(d, d + 1))
    cov = w @ w.T + 0.3 * np.eye(d)
    diag = np.diag(cov)
    return diag[:, None] + diag[None, :] - 2.0 * cov


def random_params(rng, d, r, family):
    A = random_coeff_matrix(rng, d, r)
    if family == LOGISTIC:
        return MixtureParams(LOGISTIC, A, alpha=float(rng.uniform(0.05, 0.95)))
    return MixtureParams(HUSLER_REISS, A, gamma=random_variogram(rng, d))


def hr_bivariate_stdf(x, y, g12):
    """Closed-form bivariate Huesler-Reiss stdf, the two-term Phi expression."""
    if x == 0.0 and y == 0.0:
        return 0.0
    if x == 0.0:
        return y
    if y == 0.0:
        return x
    lam = math.sqrt(g12) / 2.0
    return (x * ndtr(lam + math.log(x / y) / (2.0 * lam))
            + y * ndtr(lam + math.log(y / x) / (2.0 * lam)))


def logistic_mixture_stdf_bruteforce(x, A, alpha):
    """Term-by-term enumeration of the logistic mixture stdf."""
    total = 0.0
    for s in range(A.shape[1]):
        inner = 0.0
        for j in range(A.shape[0]):
            if A[j, s] > 0.0 and x[j] > 0.0:
                inner += (A[j, s] * x[j]) ** (1.0 / alpha)
        total += inner ** alpha
    return total
