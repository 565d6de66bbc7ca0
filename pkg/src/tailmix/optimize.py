"""Box-constrained quasi-Newton minimization with finite-difference gradients.

Thin deterministic layer over the limited-memory BFGS-B algorithm
(``scipy.optimize``): it owns the gradient approximation, keeps every
evaluation inside the box (objectives here are undefined outside, e.g.
a dependence parameter at 1), enforces a raw evaluation budget, and maps
termination reasons onto a small stable vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

__all__ = ["OptimOptions", "MinimizeResult", "fd_gradient", "minimize_box"]

STATUS_CONVERGED = "converged"
STATUS_MAX_EVALS = "max_evals"
STATUS_STALLED = "stalled"


@dataclass(frozen=True)
class OptimOptions:
    """Tuning knobs of :func:`minimize_box`.

    ``memory`` is the number of curvature pairs kept, ``max_evals`` caps
    raw objective evaluations (finite-difference probes included),
    ``grad_step`` is the relative finite-difference step, and the two
    tolerances stop on the projected gradient norm and on the relative
    objective decrease.
    """

    memory: int = 10
    max_evals: int = 5000
    grad_step: float = 1e-7
    tol_grad: float = 1e-8
    tol_f: float = 1e-10

    def __post_init__(self):
        if (self.memory <= 0 or self.max_evals <= 0 or self.grad_step <= 0.0
                or self.tol_grad <= 0.0 or self.tol_f <= 0.0):
            raise ValueError("all optimizer options must be positive")


class MinimizeResult(NamedTuple):
    x: np.ndarray
    f: float
    status: str
    n_evals: int
    message: str


def _clean_bounds(bounds, n: int) -> tuple[np.ndarray, np.ndarray]:
    if bounds is None:
        return np.full(n, -np.inf), np.full(n, np.inf)
    lower, upper = bounds
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (n,)).copy()
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,)).copy()
    if np.any(lower > upper):
        raise ValueError("lower bound exceeds upper bound")
    return lower, upper


def fd_gradient(f: Callable[[np.ndarray], float], x, bounds=None,
                step: float = 1e-7) -> np.ndarray:
    """Finite-difference gradient that never evaluates outside the box.

    Central differences with relative step ``step * max(1, |x_j|)``;
    coordinates within one step of a bound fall back to the one-sided
    difference pointing inward.  A non-finite objective value on one side
    triggers the one-sided fallback on the other; if both sides fail the
    gradient is undefined and an error is raised.
    """
    x = np.asarray(x, dtype=float)
    lower, upper = _clean_bounds(bounds, x.size)
    if np.any(x < lower) or np.any(x > upper):
        raise ValueError("point must lie within bounds")

    grad = np.empty(x.size)
    f_center = None
    for j in range(x.size):
        h = step * max(1.0, abs(x[j]))
        room = upper[j] - lower[j]
        if room == 0.0:
            grad[j] = 0.0
            continue
        if room < 2.0 * h:
            h = room / 2.0
        up_ok = x[j] + h <= upper[j]
        dn_ok = x[j] - h >= lower[j]

        f_up = f_dn = None
        if up_ok:
            probe = x.copy()
            probe[j] += h
            f_up = float(f(probe))
        if dn_ok:
            probe = x.copy()
            probe[j] -= h
            f_dn = float(f(probe))

        if (f_up is not None and np.isfinite(f_up)
                and f_dn is not None and np.isfinite(f_dn)):
            grad[j] = (f_up - f_dn) / (2.0 * h)
            continue
        if f_center is None:
            f_center = float(f(x))
            if not np.isfinite(f_center):
                raise ValueError("objective is non-finite at the expansion point")
        if f_up is not None and np.isfinite(f_up):
            grad[j] = (f_up - f_center) / h
        elif f_dn is not None and np.isfinite(f_dn):
            grad[j] = (f_center - f_dn) / h
        else:
            raise ValueError(
                f"objective is non-finite on both sides of coordinate {j}")
    return grad


class _BudgetExceeded(Exception):
    pass


def minimize_box(f: Callable[[np.ndarray], float], x0, bounds=None,
                 opts: OptimOptions | None = None,
                 callback: Callable[[np.ndarray], None] | None = None) -> MinimizeResult:
    """Minimize ``f`` over a box, deterministically.

    The start point is projected onto the box and must give a finite
    value there.  Non-finite values met during the search are replaced by
    a large barrier so the line search backtracks past them.  Returns the
    best point seen, which never exceeds f(x0).  ``callback`` receives
    every accepted iterate.
    """
    opts = opts or OptimOptions()
    x0 = np.asarray(x0, dtype=float).copy()
    lower, upper = _clean_bounds(bounds, x0.size)
    x0 = np.clip(x0, lower, upper)

    f0 = float(f(x0))
    if not np.isfinite(f0):
        raise ValueError("objective is non-finite at the start point")

    barrier = 1e10 * max(1.0, abs(f0))
    state = {"count": 1, "best_f": f0, "best_x": x0.copy()}

    def wrapped(x: np.ndarray) -> float:
        if state["count"] >= opts.max_evals:
            raise _BudgetExceeded
        state["count"] += 1
        val = float(f(x))
        if not np.isfinite(val):
            return barrier
        if val < state["best_f"]:
            state["best_f"] = val
            state["best_x"] = np.asarray(x, dtype=float).copy()
        return val

    def jac(x: np.ndarray) -> np.ndarray:
        return fd_gradient(wrapped, x, (lower, upper), step=opts.grad_step)

    scipy_bounds = list(zip(lower, upper))
    try:
        res = _scipy_minimize(
            wrapped, x0, jac=jac, bounds=scipy_bounds, method="L-BFGS-B",
            callback=callback,
            options={
                "maxcor": opts.memory,
                "ftol": opts.tol_f,
                "gtol": opts.tol_grad,
                "maxfun": opts.max_evals,
                "maxiter": opts.max_evals,
            })
        if res.status == 0:
            status = STATUS_CONVERGED
        elif res.status == 1:
            status = STATUS_MAX_EVALS
        else:
            status = STATUS_STALLED
        message = str(res.message)
    except _BudgetExceeded:
        status = STATUS_MAX_EVALS
        message = "raw evaluation budget exhausted"

    return MinimizeResult(x=state["best_x"], f=state["best_f"], status=status,
                          n_evals=state["count"], message=message)
