"""Vectorised trapezoid rule on a log-scaled axis.

Every integral in this package is a 1-D integral over ``t = log(x)`` of an
integrand that decays exponentially (or faster) in both directions.  For such
integrands the plain trapezoid rule converges geometrically, so successive
halving of the step is both cheap (old nodes are reused) and a reliable error
estimate.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import EvalError


def trapezoid(
    integrand: Callable[[np.ndarray], np.ndarray],
    lo,
    hi,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-12,
    max_nodes: int = 1 << 16,
    max_step: float = 0.25,
    min_intervals: int = 32,
) -> np.ndarray:
    """Integrate ``integrand`` over ``[lo[i], hi[i]]`` for every row ``i``.

    ``integrand`` receives node positions of shape ``(P, K)`` and must return
    values of the same shape.  The step is halved until two successive
    estimates agree to ``max(abs_tol, rel_tol * |value|)`` in every row.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    lo, hi = np.broadcast_arrays(lo, hi)
    width = hi - lo
    n = max(min_intervals, int(math.ceil(float(np.max(width)) / max_step)))
    if n + 1 > max_nodes:
        raise EvalError(f"integration range needs {n + 1} nodes, budget is {max_nodes}")

    u = np.linspace(0.0, 1.0, n + 1)
    f = integrand(lo[:, None] + width[:, None] * u[None, :])
    acc = f.sum(axis=1) - 0.5 * (f[:, 0] + f[:, -1])
    estimate = acc * width / n
    while True:
        if 2 * n + 1 > max_nodes:
            raise EvalError(
                f"trapezoid rule did not reach rel_tol={rel_tol:g} within {max_nodes} nodes"
            )
        mid = (np.arange(n) + 0.5) / n
        acc = acc + integrand(lo[:, None] + width[:, None] * mid[None, :]).sum(axis=1)
        n *= 2
        refined = acc * width / n
        if not np.all(np.isfinite(refined)):
            raise EvalError("non-finite integrand encountered")
        if np.all(np.abs(refined - estimate) <= np.maximum(abs_tol, rel_tol * np.abs(refined))):
            return refined
        estimate = refined
