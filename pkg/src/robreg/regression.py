"""Zero, least-squares and filtered robust estimators for linear regression."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg as sla

from .core import Dataset, SeedLike, as_generator
from .linalg import power_iteration, sym_inv_sqrt, weighted_median

CHI2_1_MEDIAN = 0.454936


class FilterDiverged(RuntimeError):
    """The filter removed more weight than the corruption budget allows."""


class SingularGram(ValueError):
    pass


@dataclass(frozen=True)
class RegressorConfig:
    """Tunables of the filter.

    ``max_filter_rounds`` defaults to ``ceil(10 / eps)``.  ``wls_tol`` is
    the smallest accepted ratio of extreme Gram eigenvalues.
    """

    eps: float
    max_filter_rounds: Optional[int] = None
    stop_mult: float = 4.0
    wls_tol: float = 1e-12
    power_iter_tol: float = 1e-8
    power_iter_max: int = 1000
    budget_mult: float = 4.0

    def __post_init__(self):
        if not 0 <= self.eps < 0.5:
            raise ValueError("eps must lie in [0, 0.5)")
        if self.max_filter_rounds is None:
            rounds = math.ceil(10 / self.eps) if self.eps > 0 else 1
            object.__setattr__(self, "max_filter_rounds", rounds)
        if self.max_filter_rounds < 1:
            raise ValueError("max_filter_rounds must be >= 1")
        if min(self.wls_tol, self.power_iter_tol, self.stop_mult) <= 0 or self.power_iter_max < 1:
            raise ValueError("tolerances and multipliers must be positive")


@dataclass(frozen=True)
class RegressionReport:
    beta_hat: np.ndarray
    rounds_used: int = 0
    total_weight_removed: float = 0.0
    final_spectral_score: float = float("nan")
    converged: bool = True
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.beta_hat)):
            raise ValueError("beta_hat is not finite")


def fit_zero(data: Dataset) -> RegressionReport:
    return RegressionReport(np.zeros(data.d))


def _wls(X: np.ndarray, y: np.ndarray, w: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    Xw = X * w[:, None]
    G = Xw.T @ X
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= tol * ev[-1]:
        cond = ev[-1] / ev[0] if ev[0] > 0 else math.inf
        raise SingularGram(f"singular weighted Gram matrix (condition number {cond:.3g})")
    return sla.cho_solve(sla.cho_factor(G), Xw.T @ y)


def fit_ols(data: Dataset, tol: float = 1e-12) -> RegressionReport:
    """Weighted least squares by a Cholesky solve of the normal equations."""
    if data.n < data.d:
        raise ValueError("need n >= d")
    return RegressionReport(_wls(data.X, data.y, np.asarray(data.weights), tol))


def _top_cov_eig(Z: np.ndarray, w: np.ndarray, v0, cfg: RegressorConfig):
    mean = w @ Z
    C = Z - mean
    M = (C * w[:, None]).T @ C
    with warnings.catch_warnings():
        # near-degenerate spectra on clean data only slow the vector, not lambda
        warnings.simplefilter("ignore", RuntimeWarning)
        lam, u, _ = power_iteration(M, v0=v0, tol=cfg.power_iter_tol, max_iter=cfg.power_iter_max)
    return lam, u, C


def fit_robust(data: Dataset, cfg: RegressorConfig, seed: SeedLike = None) -> RegressionReport:
    """Filtered least squares.

    Each round fits weighted least squares, forms per-row gradients
    ``g_i = r_i X_i`` and finds the top direction ``u`` of their weighted
    covariance.  If its eigenvalue is below ``stop_mult * sigma^2 * L`` the
    fit is accepted; otherwise each weight shrinks by the factor
    ``1 - tau_i / max tau`` with ``tau_i = <g_i - g_bar, u>^2``.

    ``seed`` drives the random signs of the power-iteration start vector,
    which is built from the rows so the estimator commutes with rotations.
    Defaults to ``data.seed``.
    """
    if data.n < data.d:
        raise ValueError("need n >= d")
    rng = as_generator(data.seed if seed is None else seed)
    X, y = data.X, data.y
    w0 = np.asarray(data.weights, dtype=np.float64)
    w = w0.copy()
    budget = cfg.budget_mult * cfg.eps
    score = float("nan")
    for rnd in range(1, cfg.max_filter_rounds + 1):
        mass = w.sum()
        wn = w / mass
        beta = _wls(X, y, wn, cfg.wls_tol)
        r = y - X @ beta
        g = r[:, None] * X
        signs = np.where(rng.random(data.n) < 0.5, -1.0, 1.0)
        lam, u, Cg = _top_cov_eig(g, wn, (wn * signs) @ (g - wn @ g), cfg)
        sig2 = weighted_median(r * r, wn) / CHI2_1_MEDIAN
        lhat, _, _ = _top_cov_eig(X, wn, (wn * signs) @ X, cfg)
        score = lam / max(sig2 * lhat, np.finfo(float).tiny)
        if score <= cfg.stop_mult:
            return RegressionReport(beta, rnd - 1, max(0.0, 1.0 - mass), score, True, w)
        tau = (Cg @ u) ** 2
        tau_max = tau[w > 0].max()
        w = w * (1.0 - tau / tau_max)
        w[w < 0] = 0.0
        removed = 1.0 - w.sum()
        if removed > budget:
            raise FilterDiverged(f"filter diverged: removed weight {removed:.4g} exceeds {budget:.4g}")
    wn = w / w.sum()
    beta = _wls(X, y, wn, cfg.wls_tol)
    return RegressionReport(beta, cfg.max_filter_rounds, max(0.0, 1.0 - w.sum()), score, False, w)


def whiten(data: Dataset, sigma_hat):
    S = np.asarray(sigma_hat, dtype=np.float64)
    if S.shape != (data.d, data.d) or not np.allclose(S, S.T, atol=1e-12, rtol=0):
        raise ValueError("sigma_hat must be a symmetric d x d matrix")
    W = sym_inv_sqrt(S)
    return Dataset.from_xy(data.X @ W, data.y, data.weights, data.seed), W


def fit_preconditioned(data: Dataset, sigma_hat, cfg: RegressorConfig,
                       seed: SeedLike = None) -> RegressionReport:
    """Run :func:`fit_robust` on covariates whitened by ``sigma_hat``."""
    white, W = whiten(data, sigma_hat)
    rep = fit_robust(white, cfg, seed)
    return RegressionReport(W @ rep.beta_hat, rep.rounds_used, rep.total_weight_removed,
                            rep.final_spectral_score, rep.converged, rep.weights)
