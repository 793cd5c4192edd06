"""Power iteration and small symmetric-matrix helpers."""

from __future__ import annotations

import warnings
from typing import Callable, Tuple, Union

import numpy as np

MatVec = Callable[[np.ndarray], np.ndarray]


def power_iteration(op: Union[np.ndarray, MatVec], d: int = None, v0=None,
                    tol: float = 1e-10, max_iter: int = 1000) -> Tuple[float, np.ndarray, int]:
    """Top eigenpair of a symmetric PSD operator.

    ``op`` is a dense matrix or a function computing ``M @ x``.  Iteration
    stops once the residual ``|M u - lam u|`` drops below ``tol * lam``.
    Returns ``(lam, u, iterations)``.
    """
    if callable(op):
        matvec = op
        if d is None:
            raise ValueError("d is required when op is a function")
    else:
        M = np.asarray(op, dtype=np.float64)
        d = M.shape[0]
        matvec = M.__matmul__
    if v0 is None:
        v0 = np.ones(d) + np.arange(d) / max(d, 1)
    u = np.asarray(v0, dtype=np.float64)
    nrm = np.linalg.norm(u)
    if nrm == 0:
        u = np.ones(d)
        nrm = np.sqrt(d)
    u = u / nrm
    w = matvec(u)
    lam = float(u @ w)
    for it in range(1, max_iter + 1):
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0, u, it
        u = w / nrm
        w = matvec(u)
        lam = float(u @ w)
        if np.linalg.norm(w - lam * u) <= tol * abs(lam):
            return lam, u, it
    warnings.warn("power iteration did not converge", RuntimeWarning)
    return lam, u, max_iter


def sym_inv_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root of a positive definite matrix."""
    w, q = np.linalg.eigh(M)
    if w[0] <= 0:
        raise ValueError("matrix is not positive definite")
    return (q / np.sqrt(w)) @ q.T


def weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    k = np.searchsorted(cw, 0.5 * cw[-1])
    return float(v[min(k, v.size - 1)])
