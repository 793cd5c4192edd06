"""Spot checks of the truncated fourth-moment concentration bound.

For a direction ``u`` with ``u^T Sigma u = 1`` the truncation set keeps
rows with ``<X, u>^2 <= 20/eps`` and ``|X|^2 <= 20 L d / eps^2``.  The
certificate passes when that set keeps at least ``(1 - eps^2) n`` rows and
the averaged matrix ``sum <X_i, u>^2 X_i X_i^T / |G|`` has operator norm at
most ``C_est * L``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .core import Dataset, LinearModelSpec, SeedLike, as_generator, random_unit_vector
from .linalg import power_iteration

C_EST = 50.0


@dataclass(frozen=True)
class CertificateReport:
    u: np.ndarray
    n: int
    frac_big_norm: float
    frac_big_proj: float
    g_u_size: int
    spectral_value: float
    bound_value: float
    passed: bool


def _masks(X: np.ndarray, u: np.ndarray, eps: float, L: float):
    if eps <= 0:
        raise ValueError("eps must be positive")
    d = X.shape[1]
    proj_ok = (X @ u) ** 2 <= 20.0 / eps
    norm_ok = np.einsum("ij,ij->i", X, X) <= 20.0 * L * d / eps ** 2
    return proj_ok, norm_ok


def build_truncation_set(data: Dataset, u, eps: float, L: float) -> np.ndarray:
    """Sorted indices of rows passing both truncation thresholds."""
    proj_ok, norm_ok = _masks(data.X, np.asarray(u, dtype=np.float64), eps, L)
    return np.flatnonzero(proj_ok & norm_ok)


def truncated_fourth_moment_norm(data: Dataset, u, G, tol: float = 1e-7,
                                 max_iter: int = 2000) -> float:
    """Operator norm of ``(1/|G|) sum_{i in G} <X_i, u>^2 X_i X_i^T``.

    Only matrix-vector products with the selected rows are used.
    """
    return _tfm_norm(np.ascontiguousarray(data.X), u, G, tol, max_iter)


def _tfm_norm(X: np.ndarray, u, G, tol: float = 1e-7, max_iter: int = 2000) -> float:
    G = np.asarray(G)
    if G.size == 0:
        raise ValueError("truncation set is empty")
    XG = X if G.size == X.shape[0] else X[G]
    u = np.asarray(u, dtype=np.float64)
    p2 = (XG @ u) ** 2 / G.size

    def matvec(x):
        return (p2 * (XG @ x)) @ XG

    lam, _, _ = power_iteration(matvec, d=XG.shape[1], v0=u, tol=tol, max_iter=max_iter)
    return lam


def sigma_normalize(u, model: LinearModelSpec) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if model.spike is not None:
        q = u @ model.spike.matvec(u)
    else:
        q = u @ model.covariance @ u
    return u / np.sqrt(q)


def certify_direction(data: Dataset, model: LinearModelSpec, eps: float, u,
                      c_est: float = C_EST, tol: float = 1e-7, _X=None) -> CertificateReport:
    X = np.ascontiguousarray(data.X) if _X is None else _X
    u = sigma_normalize(u, model)
    L = model.eig_hi
    proj_ok, norm_ok = _masks(X, u, eps, L)
    G = np.flatnonzero(proj_ok & norm_ok)
    val = _tfm_norm(X, u, G, tol) if G.size else float("inf")
    bound = c_est * L
    ok = G.size >= (1 - eps ** 2) * data.n and val <= bound
    return CertificateReport(u, data.n, float(1 - norm_ok.mean()), float(1 - proj_ok.mean()),
                             int(G.size), float(val), float(bound), bool(ok))


def certify(data: Dataset, model: LinearModelSpec, eps: float, trials: int,
            seed: SeedLike = None, c_est: float = C_EST, tol: float = 1e-7) -> List[CertificateReport]:
    """Certificate reports for ``trials`` random directions."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = as_generator(seed)
    X = np.ascontiguousarray(data.X)
    return [certify_direction(data, model, eps, random_unit_vector(data.d, rng), c_est, tol, X)
            for _ in range(trials)]


def certificate_sample_size(d: int, eps: float, cap: int = 10 ** 6) -> int:
    return int(min(np.ceil(d * np.log(d) / eps ** 4), cap))
