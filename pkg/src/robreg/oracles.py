"""Independent ground-truth computations used to check the constructions.

Nothing in here calls into the estimators or the closed-form instance
builders, so the checks stay independent of the paths they verify.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .core import SeedLike, as_generator


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    std_err: float
    n_samples: int

    def within(self, target: float, n_se: float = 4.0) -> bool:
        return abs(self.value - target) <= n_se * self.std_err + 1e-15


def quad_integral(f: Callable[[float], float], lo: float = -30.0, hi: float = 30.0,
                  tol: float = 1e-10, points: Sequence[float] = (),
                  limit: int = 2000, rtol: float = 0.0) -> float:
    """Adaptive Gauss-Kronrod integral of a scalar function over ``[lo, hi]``.

    ``points`` are extra breakpoints; put them at narrow peaks so the
    subdivision cannot step over them.  Each piece stops once it meets the
    absolute share ``tol / pieces`` or the relative tolerance ``rtol``.
    """
    brk = sorted({float(p) for p in points if lo < p < hi} | {lo, hi})
    total = 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        val, err, info = integrate.quad_vec(lambda x: np.atleast_1d(f(x)), a, b,
                                            epsabs=tol / len(brk), epsrel=rtol,
                                            limit=limit, full_output=True)
        if not info.success:
            raise RuntimeError(f"quadrature did not converge on [{a}, {b}] (err {err:.3g})")
        total += float(val[0])
    return total


def quad_moments(density: Callable, powers: Sequence[int], lo: float = -30.0,
                 hi: float = 30.0, tol: float = 1e-10, points: Sequence[float] = (),
                 limit: int = 2000) -> np.ndarray:
    """``[int x^p density(x) dx for p in powers]`` in one adaptive pass."""
    powers = np.asarray(powers)
    brk = sorted({float(p) for p in points if lo < p < hi} | {lo, hi})
    total = np.zeros(powers.size)
    for a, b in zip(brk[:-1], brk[1:]):
        val, err, info = integrate.quad_vec(lambda x: x ** powers * density(x), a, b,
                                            epsabs=tol / len(brk), epsrel=0.0,
                                            limit=limit, full_output=True)
        if not info.success:
            raise RuntimeError(f"quadrature did not converge on [{a}, {b}] (err {err:.3g})")
        total += val
    return total


def quad_moment(density: Callable, power: int, tol: float = 1e-10,
                points: Sequence[float] = ()) -> float:
    return float(quad_moments(density, [power], tol=tol, points=points)[0])


def mc_moment(sampler: Callable[[np.random.Generator, int], np.ndarray],
              statistic: Callable[[np.ndarray], np.ndarray], n: int,
              seed: SeedLike = None) -> MomentEstimate:
    """Sample mean and standard error of ``statistic`` over ``n`` draws."""
    if n < 100:
        raise ValueError("mc_moment needs at least 100 samples")
    rng = as_generator(seed)
    vals = np.asarray(statistic(sampler(rng, n)), dtype=np.float64)
    se = float(vals.std(ddof=1) / np.sqrt(n))
    return MomentEstimate(float(vals.mean()), se, n)


def dense_symmetric_eigen(M) -> tuple:
    """Full spectrum (ascending) and eigenvectors of a symmetric matrix."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(np.abs(M).max(), 1.0)
    if np.abs(M - M.T).max() > 1e-9 * scale:
        raise ValueError("matrix is not symmetric")
    w, q = np.linalg.eigh(0.5 * (M + M.T))
    return w, q


def gauss_hermite_expectation(f: Callable[[np.ndarray, np.ndarray], np.ndarray],
                              cov, n_nodes: int = 40) -> float:
    """``E f(x, y)`` for ``(x, y) ~ N(0, cov)`` by tensor Gauss-Hermite.

    Exact for polynomials of degree below ``2 * n_nodes``.
    """
    z, w = np.polynomial.hermite_e.hermegauss(n_nodes)
    w = w / np.sqrt(2 * np.pi)
    c = np.linalg.cholesky(np.asarray(cov, dtype=np.float64) + 0.0)
    Z1, Z2 = np.meshgrid(z, z, indexing="ij")
    W = np.outer(w, w)
    x = c[0, 0] * Z1
    y = c[1, 0] * Z1 + c[1, 1] * Z2
    return float(np.sum(W * f(x, y)))


def angular_mc_poly_products(px: np.ndarray, py: np.ndarray, cov, n: int,
                             seed: SeedLike = None, y_scale: float = 1.0,
                             chunk: int = 20000) -> tuple:
    """Monte Carlo ``E[p_k(x) q_l(y / y_scale)]`` for ``(x, y) ~ N(0, cov)``.

    ``px[k]`` and ``py[l]`` hold monomial coefficients (lowest first).  With
    ``z = r (cos t, sin t)`` the radius is Rayleigh and independent of the
    angle, so the radial integral is done exactly from
    ``E r^p = 2^(p/2) Gamma(1 + p/2)`` and only the uniform angle is sampled.
    The integrand is then a bounded trigonometric polynomial, which keeps the
    normal-theory standard error honest even for high degrees.

    Returns
    -------
    mean, std_err : ndarray
        Arrays of shape ``(len(px), len(py))``.
    """
    from scipy.special import gammaln

    rng = as_generator(seed)
    px, py = np.atleast_2d(px), np.atleast_2d(py)
    dx, dy = px.shape[1], py.shape[1]
    p = np.arange(dx + dy - 1)
    mu = np.exp(0.5 * p * np.log(2.0) + gammaln(1.0 + 0.5 * p))
    M = mu[np.add.outer(np.arange(dx), np.arange(dy))]
    L = np.linalg.cholesky(np.asarray(cov, dtype=np.float64))
    s = np.zeros((px.shape[0], py.shape[0]))
    s2 = np.zeros_like(s)
    for a in range(0, n, chunk):
        t = rng.uniform(0.0, 2 * np.pi, min(chunk, n - a))
        W = np.stack([np.cos(t), np.sin(t)], axis=1) @ L.T
        Px = W[:, :1] ** np.arange(dx)
        Py = (W[:, 1:] / y_scale) ** np.arange(dy)
        G = np.einsum("ki,ni,ij,nj,lj->nkl", px, Px, M, Py, py, optimize=True)
        s += G.sum(axis=0)
        s2 += (G * G).sum(axis=0)
    mean = s / n
    var = np.maximum(s2 / n - mean * mean, 0.0) * n / (n - 1)
    return mean, np.sqrt(var / n)


def gaussian_pdf(x, mean: float = 0.0, var: float = 1.0):
    return np.exp(-0.5 * (x - mean) ** 2 / var) / np.sqrt(2 * np.pi * var)


def frac_matrix(rows) -> list:
    return [[Fraction(x) for x in r] for r in rows]


def frac_outer(u, v) -> list:
    return [[Fraction(a) * Fraction(b) for b in v] for a in u]
