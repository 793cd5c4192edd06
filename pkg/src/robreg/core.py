"""Shared domain types, covariance constructors and the seeding contract."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

SeedLike = Union[int, np.random.Generator, None]

_EIG_SLACK = 1e-9


def stream(root_seed: int, tag: str = "", index: int = 0) -> np.random.Generator:
    """Independent generator for ``(root_seed, tag, index)``.

    The tag is hashed so that different modules never share a stream even
    when they use the same trial index.
    """
    digest = hashlib.blake2b(tag.encode(), digest_size=8).digest()
    tag_key = int.from_bytes(digest, "little")
    ss = np.random.SeedSequence(entropy=int(root_seed) & (2**64 - 1),
                                spawn_key=(tag_key, int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SpikedCovariance:
    """``I_d - (1 - 1/kappa) v v^T``: identity with one shrunk direction."""

    v: np.ndarray
    kappa: float

    def __post_init__(self):
        v = _frozen(self.v)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("v must be a non-empty vector")
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError(f"v must be a unit vector, |v| = {np.linalg.norm(v)!r}")
        if not self.kappa >= 1.0:
            raise ValueError(f"kappa must be >= 1, got {self.kappa!r}")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def d(self) -> int:
        return self.v.size

    @property
    def shrink(self) -> float:
        return 1.0 - 1.0 / self.kappa

    def matvec(self, w: np.ndarray) -> np.ndarray:
        """Apply the matrix to a vector or to the rows of a 2-D array."""
        w = np.asarray(w, dtype=np.float64)
        return w - self.shrink * np.multiply.outer(w @ self.v, self.v)

    def sqrt_matvec(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        c = 1.0 - 1.0 / np.sqrt(self.kappa)
        return w - c * np.multiply.outer(w @ self.v, self.v)

    def dense(self) -> np.ndarray:
        return np.eye(self.d) - self.shrink * np.outer(self.v, self.v)


def build_spiked_covariance(v, kappa: float) -> SpikedCovariance:
    return SpikedCovariance(np.asarray(v, dtype=np.float64), kappa)


@dataclass(frozen=True)
class LinearModelSpec:
    """Gaussian linear model ``y = <X, beta> + eta`` with ``X ~ N(0, Sigma)``.

    Use :meth:`from_covariance` or :meth:`from_spike`; they fill in the
    derived spectral quantities.
    """

    covariance: np.ndarray
    beta: np.ndarray
    noise_var: float
    eig_lo: float
    eig_hi: float
    spike: Optional[SpikedCovariance] = field(default=None, compare=False)

    def __post_init__(self):
        cov = _frozen(self.covariance)
        beta = _frozen(self.beta)
        d = beta.size
        if cov.shape != (d, d):
            raise ValueError(f"covariance shape {cov.shape} does not match beta of length {d}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if self.noise_var < 0:
            raise ValueError("noise_var must be nonnegative")
        evals = np.linalg.eigvalsh(cov)
        if evals[0] <= 0:
            raise ValueError("covariance must be positive definite")
        if evals[0] < self.eig_lo * (1 - _EIG_SLACK) or evals[-1] > self.eig_hi * (1 + _EIG_SLACK):
            raise ValueError("eigenvalues of covariance fall outside [eig_lo, eig_hi]")
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "noise_var", float(self.noise_var))

    @classmethod
    def from_covariance(cls, covariance, beta, noise_var: float) -> "LinearModelSpec":
        cov = np.asarray(covariance, dtype=np.float64)
        evals = np.linalg.eigvalsh(cov)
        return cls(cov, beta, noise_var, float(evals[0]), float(evals[-1]))

    @classmethod
    def from_spike(cls, spike: SpikedCovariance, beta, noise_var: float) -> "LinearModelSpec":
        lo = 1.0 / spike.kappa if spike.d > 0 else 1.0
        hi = 1.0
        return cls(spike.dense(), beta, noise_var, lo, hi, spike=spike)

    @property
    def d(self) -> int:
        return self.beta.size

    @property
    def cond(self) -> float:
        return self.eig_hi / self.eig_lo

    @property
    def label_var(self) -> float:
        return float(self.beta @ self.covariance @ self.beta + self.noise_var)

    def sigma_sqrt(self) -> np.ndarray:
        w, q = np.linalg.eigh(self.covariance)
        return (q * np.sqrt(w)) @ q.T


@dataclass(frozen=True)
class Dataset:
    """Rows ``[X_i, y_i]`` with per-row weights summing to one."""

    rows: np.ndarray
    weights: np.ndarray = None
    seed: int = 0

    def __post_init__(self):
        rows = _frozen(self.rows)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 2:
            raise ValueError("rows must be an n x (d+1) array with n >= 1, d >= 1")
        if not np.all(np.isfinite(rows)):
            raise ValueError("rows contain non-finite entries")
        n = rows.shape[0]
        if self.weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (n,):
                raise ValueError("weights must have one entry per row")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def from_xy(cls, X, y, weights=None, seed: int = 0) -> "Dataset":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
        return cls(np.hstack([X, y]), weights, seed)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1] - 1

    @property
    def X(self) -> np.ndarray:
        return self.rows[:, :-1]

    @property
    def y(self) -> np.ndarray:
        return self.rows[:, -1]


def mahalanobis_error(beta_hat, beta, sigma) -> float:
    """``sqrt((beta_hat - beta)^T Sigma (beta_hat - beta))``.

    ``sigma`` may be a dense matrix or a :class:`SpikedCovariance`.
    """
    diff = np.asarray(beta_hat, dtype=np.float64) - np.asarray(beta, dtype=np.float64)
    if diff.ndim != 1:
        raise ValueError("beta_hat and beta must be vectors of equal length")
    if isinstance(sigma, SpikedCovariance):
        if sigma.d != diff.size:
            raise ValueError("dimension mismatch")
        q = diff @ sigma.matvec(diff)
    else:
        sigma = np.asarray(sigma, dtype=np.float64)
        if sigma.shape != (diff.size, diff.size):
            raise ValueError(f"dimension mismatch: Sigma {sigma.shape}, vector {diff.size}")
        q = diff @ sigma @ diff
    return float(np.sqrt(max(q, 0.0)))


def random_unit_vector(d: int, seed: SeedLike = None) -> np.ndarray:
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = as_generator(seed)
    while True:
        g = rng.standard_normal(d)
        nrm = np.linalg.norm(g)
        if nrm > 0:
            return g / nrm
