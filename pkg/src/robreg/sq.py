"""Moment-matched one-dimensional mixtures and the joint SQ hard instance.

For a signal Gaussian ``N(mu_s, sigma_s2)`` we build a mixture
``A = (1 - e) N(mu_s, sigma_s2) + e * B`` whose first three moments equal
those of ``N(0, 1)``.  Three constructions cover the range of ``mu_s``:

* ``P1_small`` (``|mu_s| < sqrt(eps)/1e4``): ``e = eps`` and ``B`` is a
  mixture of four unit-variance Gaussians.
* ``P2_mid`` (up to ``0.65``): ``B = (1/9) N(-2 mu_N, s_N^2) + (8/9) N(mu_N, 0.2)``
  with ``e`` solved from ``mu_s`` by bisection.
* ``P3_large``: ``e = 1 - 1/(9 mu_s^2)`` and ``B`` has two components.

The joint instance couples the mixture to a label ``y`` through
``mu_s(y) = c1 sqrt(eps) y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import integrate

from .core import Dataset, SeedLike, as_generator, random_unit_vector, _frozen
from .core import LinearModelSpec, SpikedCovariance

REGIMES = ("P1_small", "P2_mid", "P3_large")
P2_P3_SPLIT = 0.65
P2_EPS_MAX = 0.51
P3_EPS_MIN = 0.7
TAU2 = 0.2
K_P3 = 0.8
P1_SPREAD = 0.5
N_COMP = 5


@dataclass(frozen=True)
class GaussComponent:
    weight: float
    mean: float
    var: float

    def __post_init__(self):
        if not (0.0 <= self.weight <= 1.0 + 1e-12):
            raise ValueError(f"weight {self.weight!r} outside [0, 1]")
        if not self.var > 0:
            raise ValueError(f"variance must be positive, got {self.var!r}")


@dataclass(frozen=True)
class SqMixture:
    """Moment-matched mixture; the signal component is listed first."""

    regime: str
    components: Tuple[GaussComponent, ...]
    eps_mu: float
    mu_s: float
    sigma_s2: float

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if abs(sum(c.weight for c in self.components) - 1.0) > 1e-12:
            raise ValueError("component weights must sum to 1")

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    @property
    def variances(self) -> np.ndarray:
        return np.array([c.var for c in self.components])

    def moments(self, max_order: int = 4) -> np.ndarray:
        """Raw moments ``1..max_order`` from the Gaussian closed forms."""
        return mixture_raw_moments(self.weights, self.means, self.variances, max_order)

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)[..., None]
        w, m, v = self.weights, self.means, self.variances
        return np.sum(w * np.exp(-0.5 * (x - m) ** 2 / v) / np.sqrt(2 * np.pi * v), axis=-1)

    def sample(self, n: int, seed: SeedLike = None) -> np.ndarray:
        rng = as_generator(seed)
        idx = rng.choice(len(self.components), size=n, p=self.weights / self.weights.sum())
        return self.means[idx] + np.sqrt(self.variances[idx]) * rng.standard_normal(n)


def gaussian_raw_moment(mean, var, k: int):
    """``E X^k`` for ``X ~ N(mean, var)``, ``k <= 4``."""
    if k == 0:
        return np.ones_like(mean)
    if k == 1:
        return mean
    if k == 2:
        return mean ** 2 + var
    if k == 3:
        return mean ** 3 + 3 * mean * var
    if k == 4:
        return mean ** 4 + 6 * mean ** 2 * var + 3 * var ** 2
    raise ValueError("orders above 4 are not supported")


def mixture_raw_moments(w, m, v, max_order: int = 4) -> np.ndarray:
    return np.array([np.sum(w * gaussian_raw_moment(m, v, k)) for k in range(1, max_order + 1)])


# --- P2 ------------------------------------------------------------------

def _p2_den(e):
    return 5.0 * (17 * e * e - 45 * e + 27)


def p2_mu_s(eps_mu, sigma_s2):
    """Signal mean of the mid-range construction as a function of ``eps_mu``."""
    e = np.asarray(eps_mu, dtype=np.float64)
    num = 3 * e * (20 * e * sigma_s2 - 4 * e - 15 * sigma_s2 + 15)
    return np.sqrt(num / _p2_den(e))


def p2_sigma_n2(eps_mu, sigma_s2):
    e = np.asarray(eps_mu, dtype=np.float64)
    s = sigma_s2
    num = -315 * e * e * s + 80 * e * e + 720 * e * s - 225 * e - 405 * s + 108
    return num / _p2_den(e)


def p2_eps_from_mu(mu_abs, sigma_s2, tol: float = 1e-12, lo: float = 1e-12,
                   hi: float = P2_EPS_MAX) -> np.ndarray:
    """Invert ``p2_mu_s`` by bisection on ``(lo, hi]``; vectorized over ``mu_abs``.

    ``tol`` is a relative tolerance on the returned ``eps_mu``.
    """
    mu_abs = np.atleast_1d(np.asarray(mu_abs, dtype=np.float64))
    if np.any(mu_abs > p2_mu_s(hi, sigma_s2) * (1 + 1e-12)) or np.any(mu_abs < p2_mu_s(lo, sigma_s2)):
        raise ValueError("mu_s outside achievable range")
    # bisect on log(eps) so tiny eps_mu keep full relative accuracy
    a = np.full(mu_abs.shape, np.log(lo))
    b = np.full(mu_abs.shape, np.log(hi))
    while np.max(b - a) > tol:
        mid = 0.5 * (a + b)
        up = p2_mu_s(np.exp(mid), sigma_s2) < mu_abs
        a = np.where(up, mid, a)
        b = np.where(up, b, mid)
    return np.exp(0.5 * (a + b))


# --- P3 ------------------------------------------------------------------

def p3_eps_from_mu(mu_abs):
    return 1.0 - 1.0 / (9.0 * np.asarray(mu_abs, dtype=np.float64) ** 2)


def p3_variances(eps_mu, sigma_s2) -> Tuple[np.ndarray, np.ndarray]:
    e = np.asarray(eps_mu, dtype=np.float64)
    s = sigma_s2
    a, b = 9 * e - 5, 189 * e - 125
    v2 = (42525 * e ** 2 * s - 58554 * e * s + 20125 * s + 5157 * e - 3429) / (25 * a * b)
    v3 = 3.0 / (a * b ** 2) * (107163 * e ** 3 * s - 248913 * e ** 2 * s + 188625 * e * s
                               - 46875 * s + 36243 * e ** 2 - 48102 * e + 15955)
    return v2, v3


# --- P1 ------------------------------------------------------------------

def _p1_noise(mu, sigma_s2, eps):
    """Four unit-variance Gaussians matching the noise moments.

    The atom layout ``D`` has the raw moments the noise needs once a
    standard normal is added.  A two-point law carries mean, variance
    ``(1 - h^2) s^2`` and the third central moment; each atom is then split
    symmetrically by ``+-h s``, which adds ``h^2 s^2`` to the variance and
    leaves the third central moment alone.
    """
    m1 = -(1 - eps) * mu / eps
    q2 = (1 - (1 - eps) * (mu ** 2 + sigma_s2)) / eps
    q3 = -(1 - eps) * (mu ** 3 + 3 * mu * sigma_s2) / eps
    d2 = q2 - 1.0
    d3 = q3 - 3 * m1
    var = d2 - m1 ** 2
    if np.any(var <= 0):
        raise ValueError("noise variance not positive; eps too large for P1")
    c3 = d3 - 3 * m1 * d2 + 2 * m1 ** 3
    s = np.sqrt(var)
    h = P1_SPREAD
    s2p = np.sqrt(1 - h * h) * s
    g = c3 / s2p ** 3
    p = 0.5 * (1 - g / np.sqrt(g * g + 4))
    hi_atom = m1 + s2p * np.sqrt((1 - p) / p)
    lo_atom = m1 - s2p * np.sqrt(p / (1 - p))
    means = np.stack([hi_atom + h * s, hi_atom - h * s, lo_atom + h * s, lo_atom - h * s], axis=-1)
    w = np.stack([p / 2, p / 2, (1 - p) / 2, (1 - p) / 2], axis=-1)
    return w, means


# --- dispatch ------------------------------------------------------------

def _check_sigma(sigma_s2):
    if not 0.0 < sigma_s2 <= 0.1:
        raise ValueError(f"sigma_s2 must lie in (0, 0.1], got {sigma_s2!r}")


def classify(mu_s, eps) -> np.ndarray:
    """Regime index (0, 1, 2) per entry of ``mu_s``."""
    a = np.abs(np.asarray(mu_s, dtype=np.float64))
    return np.where(a < np.sqrt(eps) / 1e4, 0, np.where(a < P2_P3_SPLIT, 1, 2))


def mixture_arrays(mu_s, sigma_s2: float, eps: float, regime: Optional[np.ndarray] = None):
    """Vectorized mixture parameters.

    Returns ``(W, M, V, eps_mu, regime)`` with ``W, M, V`` of shape
    ``(n, 5)``; unused slots carry zero weight and unit variance.
    """
    _check_sigma(sigma_s2)
    mu = np.atleast_1d(np.asarray(mu_s, dtype=np.float64))
    reg = classify(mu, eps) if regime is None else np.broadcast_to(regime, mu.shape).copy()
    n = mu.size
    W = np.zeros((n, N_COMP))
    M = np.zeros((n, N_COMP))
    V = np.ones((n, N_COMP))
    e = np.zeros(n)
    sgn = np.where(mu < 0, -1.0, 1.0)
    a = np.abs(mu)

    i = reg == 0
    if np.any(i):
        if not 0 < eps < 0.5:
            raise ValueError("the small-mean construction needs eps in (0, 0.5)")
        e[i] = eps
        w, m = _p1_noise(mu[i], sigma_s2, eps)
        W[i, 1:] = eps * w
        M[i, 1:] = m

    i = reg == 1
    if np.any(i):
        ei = p2_eps_from_mu(a[i], sigma_s2)
        e[i] = ei
        mun = -3 * (1 - ei) * a[i] / (2 * ei)
        W[i, 1] = ei / 9
        M[i, 1] = -2 * mun * sgn[i]
        V[i, 1] = p2_sigma_n2(ei, sigma_s2)
        W[i, 2] = 8 * ei / 9
        M[i, 2] = mun * sgn[i]
        V[i, 2] = TAU2

    i = reg == 2
    if np.any(i):
        ei = p3_eps_from_mu(a[i])
        if np.any(ei < P3_EPS_MIN - 1e-9):
            raise ValueError("mu_s too small for the large-mean construction")
        e[i] = ei
        w2 = (1 / ei - 1) / K_P3 ** 3
        v2, v3 = p3_variances(ei, sigma_s2)
        W[i, 1] = ei * w2
        M[i, 1] = -K_P3 * a[i] * sgn[i]
        V[i, 1] = v2
        W[i, 2] = ei * (1 - w2)
        M[i, 2] = 36 * (1 - ei) * a[i] / (189 * ei - 125) * sgn[i]
        V[i, 2] = v3

    W[:, 0] = 1 - e
    M[:, 0] = mu
    V[:, 0] = sigma_s2
    return W, M, V, e, reg


def build_mixture(mu_s: float, sigma_s2: float, eps: float = 0.01,
                  regime: Optional[str] = None) -> SqMixture:
    """Moment-matched mixture for a signal ``N(mu_s, sigma_s2)``.

    ``regime`` forces a construction instead of dispatching on ``|mu_s|``;
    the large-mean one is valid from ``|mu_s| = 1/(3 sqrt(0.3))``.
    """
    code = None if regime is None else REGIMES.index(regime)
    W, M, V, e, reg = mixture_arrays(mu_s, sigma_s2, eps, code)
    # drop zero-weight padding; the signal slot always stays
    comps = (GaussComponent(float(W[0, 0]), float(M[0, 0]), float(V[0, 0])),) + tuple(
        GaussComponent(float(w), float(m), float(v))
        for w, m, v in zip(W[0, 1:], M[0, 1:], V[0, 1:]) if w > 0)
    return SqMixture(REGIMES[int(reg[0])], comps, float(e[0]), float(mu_s), float(sigma_s2))


def mixture_pdf_arrays(x, W, M, V) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)[:, None]
    return np.sum(W * np.exp(-0.5 * (x - M) ** 2 / V) / np.sqrt(2 * np.pi * V), axis=1)


# --- chi-square ----------------------------------------------------------

def chi2_gaussians(mu1: float, var1: float, mu2: float = 0.0, var2: float = 1.0) -> float:
    """``chi^2(N(mu1, var1) || N(mu2, var2))``."""
    den = 2 * var2 - var1
    if var1 <= 0 or var2 <= 0 or den <= 0:
        raise ValueError("variance >= 2 (divergence is infinite)")
    return float(var2 / np.sqrt(var1 * den) * np.exp((mu1 - mu2) ** 2 / den) - 1.0)


def chi2_pair_corr(mu1: float, var1: float, mu2: float, var2: float) -> float:
    """``int p1 p2 / phi - 1`` with ``phi`` the standard normal density."""
    den = var1 + var2 - var1 * var2
    if var1 <= 0 or var2 <= 0 or den <= 0:
        raise ValueError("variance >= 2 (correlation is infinite)")
    a = 1 / var1 + 1 / var2 - 1
    b = mu1 / var1 + mu2 / var2
    c = mu1 ** 2 / var1 + mu2 ** 2 / var2
    return float(np.exp(b * b / (2 * a) - c / 2) / np.sqrt(den) - 1.0)


def chi2_mixture(mix: SqMixture) -> float:
    """``chi^2(A || N(0, 1))`` from pairwise component correlations."""
    total = 0.0
    for ci in mix.components:
        for cj in mix.components:
            total += ci.weight * cj.weight * chi2_pair_corr(ci.mean, ci.var, cj.mean, cj.var)
    return total


# --- joint instance ------------------------------------------------------

def _eps_of_y(y, eps, c1, sigma_s2):
    return mixture_arrays(c1 * np.sqrt(eps) * np.asarray(y), sigma_s2, eps)[3]


def marginal_normalizer(eps: float, c1: float, kappa: float, tol: float = 1e-10) -> float:
    """``C = int G(y) / (1 - eps_mu(y)) dy`` over ``[-12, 12]``.

    Raises ``ValueError("c1 too large")`` when ``C`` exceeds ``1/(1 - eps)``.
    """
    if eps == 0:
        return 1.0
    sigma_s2 = 1.0 / kappa - c1 * c1 * eps
    _check_sigma(sigma_s2)
    step = c1 * np.sqrt(eps)
    brk = {0.0}
    for m in (np.sqrt(eps) / 1e4, P2_P3_SPLIT):
        y0 = m / step
        if y0 < 12:
            brk |= {y0, -y0}
    brk = sorted(brk | {-12.0, 12.0})

    def f(y):
        y = np.atleast_1d(y)
        return np.exp(-0.5 * y * y) / np.sqrt(2 * np.pi) / (1 - _eps_of_y(y, eps, c1, sigma_s2))

    C = 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        val, err = integrate.quad_vec(f, a, b, epsabs=tol / len(brk), epsrel=0.0, limit=2000)
        C += float(val[0])
    if C > 1.0 / (1.0 - eps) * (1 + 1e-6):
        raise ValueError(f"c1 too large: normalizer {C:.8g} exceeds 1/(1-eps)")
    return C


@dataclass(frozen=True)
class SqInstanceSpec:
    d: int
    kappa: float
    eps: float
    c1: float
    v: np.ndarray
    sigma_s2: float
    C: float

    def __post_init__(self):
        object.__setattr__(self, "v", _frozen(self.v))
        if self.v.size != self.d:
            raise ValueError("v has the wrong length")
        _check_sigma(self.sigma_s2)
        if not 1.0 - 1e-9 <= self.C <= 1.0 / (1.0 - self.eps) * (1 + 1e-6):
            raise ValueError("normalizer outside [1, 1/(1-eps)]")

    def clean_model(self) -> LinearModelSpec:
        """The Gaussian model whose corruption realizes the joint law."""
        spike = SpikedCovariance(self.v, self.kappa)
        beta = self.c1 * np.sqrt(self.eps) * self.kappa * self.v
        return LinearModelSpec.from_spike(spike, beta, 1.0 - self.c1 ** 2 * self.eps * self.kappa)


def build_sq_instance(d: int, kappa: float, eps: float, c1: float = 0.01,
                      v=None, seed: SeedLike = None) -> SqInstanceSpec:
    sigma_s2 = 1.0 / kappa - c1 * c1 * eps
    _check_sigma(sigma_s2)
    if v is None:
        v = random_unit_vector(d, seed)
    C = marginal_normalizer(eps, c1, kappa)
    return SqInstanceSpec(d, float(kappa), float(eps), float(c1), np.asarray(v, float), sigma_s2, C)


def _sample_y(spec: SqInstanceSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Rejection sampler for ``R(y)`` with envelope ``G(y)(a + b y^2)``."""
    a = 1.0 / (1.0 - spec.eps)
    b = 9.0 * spec.c1 ** 2 * spec.eps
    out = np.empty(0)
    tried = 0
    while out.size < n:
        m = max(2 * (n - out.size), 1024)
        heavy = rng.random(m) < b / (a + b)
        y = rng.standard_normal(m)
        k = int(heavy.sum())
        y[heavy] = np.sqrt(rng.chisquare(3, k)) * np.where(rng.random(k) < 0.5, -1.0, 1.0)
        e = _eps_of_y(y, spec.eps, spec.c1, spec.sigma_s2)
        acc = rng.random(m) * (a + b * y * y) * (1 - e) < 1.0
        out = np.concatenate([out, y[acc]])
        tried += m
        if tried >= 10_000 and out.size < 0.01 * tried:
            raise RuntimeError(f"rejection acceptance {out.size / tried:.3g} below 1%")
    return out[:n]


def _embed(spec: SqInstanceSpec, xv: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((xv.size, spec.d))
    return z + np.multiply.outer(xv - z @ spec.v, spec.v)


def _draw_joint(spec: SqInstanceSpec, n: int, rng: np.random.Generator):
    y = _sample_y(spec, n, rng)
    W, M, V, e, _ = mixture_arrays(spec.c1 * np.sqrt(spec.eps) * y, spec.sigma_s2, spec.eps)
    cw = np.cumsum(W, axis=1)
    u = rng.random(n)[:, None] * cw[:, -1:]
    idx = np.minimum((u > cw).sum(axis=1), N_COMP - 1)
    r = np.arange(n)
    xv = M[r, idx] + np.sqrt(V[r, idx]) * rng.standard_normal(n)
    return y, xv, W, M, V, e


def sample_sq_joint(spec: SqInstanceSpec, n: int, seed: SeedLike = None) -> Dataset:
    """``n`` rows ``[x, y]`` from the corrupted joint law."""
    rng = as_generator(seed)
    y, xv, *_ = _draw_joint(spec, n, rng)
    return Dataset(np.column_stack([_embed(spec, xv, rng), y]))


def sample_sq_corruption(spec: SqInstanceSpec, m: int, rng: np.random.Generator) -> np.ndarray:
    """Rows from the noise law ``E`` with ``Q' = (1 - eps) Q + eps E``.

    Thinning of joint draws: a draw is kept with probability
    ``1 - (1 - eps) q(x, y) / q'(x, y)``.
    """
    kept_x, kept_y = [], []
    got = 0
    while got < m:
        batch = max(int(2 * (m - got) / max(spec.eps, 1e-3)), 1024)
        y, xv, W, M, V, e = _draw_joint(spec, batch, rng)
        a = mixture_pdf_arrays(xv, W, M, V)
        sig = (1 - e) * np.exp(-0.5 * (xv - M[:, 0]) ** 2 / spec.sigma_s2) / np.sqrt(2 * np.pi * spec.sigma_s2)
        ratio = (1 - spec.eps) * spec.C * sig / a
        keep = rng.random(batch) >= ratio
        kept_x.append(xv[keep])
        kept_y.append(y[keep])
        got += int(keep.sum())
    xv = np.concatenate(kept_x)[:m]
    y = np.concatenate(kept_y)[:m]
    return np.column_stack([_embed(spec, xv, rng), y])
