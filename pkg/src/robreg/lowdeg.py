"""Two-component Gaussian testing instance and Hermite advantage bounds.

The alternative mixes an inlier Gaussian whose covariance is spiked along
a hidden direction ``v`` (with label correlated along ``v``) and a
corruption Gaussian that undoes the second moments, so both hypotheses
share their first three moments.  Only the 2-D block spanned by
``(<v, x>, y)`` differs from the null, which keeps sampling at ``O(nd)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp

from .core import Dataset, SeedLike, _frozen, as_generator

MAX_HERMITE_DEGREE = 60
MAX_COMB_P = 40


@dataclass(frozen=True)
class LowDegInstance:
    """Null ``N(0, diag(I_d, s))`` against ``(1-eps) N(0, S1) + eps N(0, SE)``.

    ``inlier_block`` and ``corrupt_block`` are the 2x2 covariances of
    ``(<v, x>, y)``; in directions orthogonal to ``v`` both components are
    standard.
    """

    d: int
    kappa: float
    eps: float
    delta: float
    sigma2: float
    v: np.ndarray
    inlier_block: np.ndarray
    corrupt_block: np.ndarray

    @property
    def alpha(self) -> float:
        return self.delta / math.sqrt(self.kappa)

    @property
    def sigma_y2(self) -> float:
        return self.delta ** 2 / self.kappa + self.sigma2

    def _dense(self, block: np.ndarray) -> np.ndarray:
        d, v = self.d, self.v
        M = np.zeros((d + 1, d + 1))
        M[:d, :d] = np.eye(d) + (block[0, 0] - 1.0) * np.outer(v, v)
        M[:d, d] = M[d, :d] = block[0, 1] * v
        M[d, d] = block[1, 1]
        return M

    def inlier_cov(self) -> np.ndarray:
        return self._dense(self.inlier_block)

    def corrupt_cov(self) -> np.ndarray:
        return self._dense(self.corrupt_block)


def psd_condition(eps: float, kappa: float) -> bool:
    """``eps * kappa >= 1 - eps`` evaluated exactly on the binary inputs."""
    e, k = Fraction(eps), Fraction(kappa)
    return e * k >= 1 - e


def active_blocks(kappa: float, eps: float, delta: float, sigma2: float):
    s = delta ** 2 / kappa + sigma2
    r = (1.0 - eps) / eps
    b1 = np.array([[1.0 / kappa, delta / kappa], [delta / kappa, s]])
    bE = np.array([[1.0 + r * (1.0 - 1.0 / kappa), -r * delta / kappa],
                   [-r * delta / kappa, s]])
    return b1, bE


def build_lowdeg_instance(d: int, kappa: float, eps: float, delta: float,
                          sigma2: float, v) -> LowDegInstance:
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    v = _frozen(v)
    if v.shape != (d,) or abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ValueError("v must be a unit vector of length d")
    if not psd_condition(eps, kappa):
        raise ValueError("corruption covariance not PSD (needs eps*kappa >= 1 - eps)")
    b1, bE = active_blocks(kappa, eps, delta, sigma2)
    if np.linalg.eigvalsh(bE)[0] < -1e-10 * max(1.0, np.abs(bE).max()):
        raise ValueError("corruption covariance not PSD")
    mix = (1 - eps) * b1 + eps * bE
    target = np.diag([1.0, b1[1, 1]])
    if np.abs(mix - target).max() > 1e-12 * max(1.0, np.abs(bE).max()):
        raise ValueError("moment matching failed")
    return LowDegInstance(int(d), float(kappa), float(eps), float(delta), float(sigma2),
                          v, _frozen(b1), _frozen(bE))


def exact_moment_check(d: int, kappa, eps, delta, sigma2, v) -> bool:
    """``(1-eps) S1 + eps SE == diag(I, s)`` in exact rational arithmetic.

    All inputs are converted with :class:`fractions.Fraction`; ``v`` must be
    exactly unit in rationals (for example ``(3/5, 4/5, 0)``).
    """
    k, e, dl, s2 = (Fraction(x) for x in (kappa, eps, delta, sigma2))
    v = [Fraction(x) for x in v]
    if sum(x * x for x in v) != 1 or len(v) != d:
        raise ValueError("v must be an exactly unit rational vector of length d")
    s = dl * dl / k + s2
    r = (1 - e) / e
    shrink = 1 - 1 / k
    n = d + 1
    S1 = [[Fraction(0)] * n for _ in range(n)]
    SE = [[Fraction(0)] * n for _ in range(n)]
    for i in range(d):
        for j in range(d):
            eye = Fraction(int(i == j))
            S1[i][j] = eye - shrink * v[i] * v[j]
            SE[i][j] = eye + r * shrink * v[i] * v[j]
        S1[i][d] = S1[d][i] = dl / k * v[i]
        SE[i][d] = SE[d][i] = -r * dl / k * v[i]
    S1[d][d] = SE[d][d] = s
    for i in range(n):
        for j in range(n):
            want = s if i == j == d else Fraction(int(i == j))
            if (1 - e) * S1[i][j] + e * SE[i][j] != want:
                return False
    return True


def _block_rows(block: np.ndarray, v: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    w, q = np.linalg.eigh(block)
    root = q * np.sqrt(np.clip(w, 0.0, None))
    ay = rng.standard_normal((m, 2)) @ root.T
    z = rng.standard_normal((m, v.size))
    x = z + np.multiply.outer(ay[:, 0] - z @ v, v)
    return np.column_stack([x, ay[:, 1]])


def sample_corruption_rows(inst: LowDegInstance, m: int, rng: np.random.Generator) -> np.ndarray:
    return _block_rows(inst.corrupt_block, inst.v, m, rng)


def sample_lowdeg(inst: LowDegInstance, n: int, which: str = "alt", seed: SeedLike = None,
                  return_inliers: bool = False):
    """Draw ``n`` rows under the null or the alternative.

    With ``return_inliers=True`` also returns the mask of rows drawn from
    the inlier component (all true under the null).
    """
    rng = as_generator(seed)
    if which == "null":
        x = rng.standard_normal((n, inst.d))
        y = rng.standard_normal(n) * math.sqrt(inst.sigma_y2)
        rows, inl = np.column_stack([x, y]), np.ones(n, dtype=bool)
    elif which == "alt":
        inl = rng.random(n) >= inst.eps
        rows = np.empty((n, inst.d + 1))
        rows[inl] = _block_rows(inst.inlier_block, inst.v, int(inl.sum()), rng)
        rows[~inl] = _block_rows(inst.corrupt_block, inst.v, int((~inl).sum()), rng)
    else:
        raise ValueError("which must be 'null' or 'alt'")
    data = Dataset(rows)
    return (data, inl) if return_inliers else data


# --- Hermite ------------------------------------------------------------

def hermite_poly(k: int, x):
    """Normalized probabilists' Hermite polynomial ``He_k(x) / sqrt(k!)``."""
    if k < 0 or k > MAX_HERMITE_DEGREE:
        raise ValueError(f"degree must lie in [0, {MAX_HERMITE_DEGREE}]")
    x = np.asarray(x, dtype=np.float64)
    h_prev, h = np.zeros_like(x), np.ones_like(x)
    for j in range(k):
        h_prev, h = h, (x * h - math.sqrt(j) * h_prev) / math.sqrt(j + 1)
    return h if h.ndim else float(h)


def cross_constant(k: int, l: int) -> float:
    if k < l or (k - l) % 2:
        return 0.0
    j = (k - l) // 2
    return math.exp(0.5 * (gammaln(k + 1) - gammaln(l + 1)) - gammaln(j + 1)) / 2.0 ** j


def hermite_cross_coeff(k: int, l: int, sx2: float, sxy: float, sy2: float) -> float:
    """``E[h_k(x) h_l(y / sigma_y)]`` for a centred bivariate Gaussian."""
    if sy2 <= 0:
        raise ValueError("sy2 must be positive")
    if k < l or (k - l) % 2:
        return 0.0
    j = (k - l) // 2
    return cross_constant(k, l) * (sx2 - 1.0) ** j * (sxy / math.sqrt(sy2)) ** l


def mixture_cross_coeff(inst: LowDegInstance, k: int, l: int) -> float:
    s = inst.sigma_y2
    b1, bE = inst.inlier_block, inst.corrupt_block
    return ((1 - inst.eps) * hermite_cross_coeff(k, l, b1[0, 0], b1[0, 1], s)
            + inst.eps * hermite_cross_coeff(k, l, bE[0, 0], bE[0, 1], s))


def hermite_coeff_table(inst: LowDegInstance, D: int) -> np.ndarray:
    """``T[k, l]`` = mixture coefficient for ``k, l <= D``."""
    T = np.zeros((D + 1, D + 1))
    for k in range(D + 1):
        for l in range(k + 1):
            T[k, l] = mixture_cross_coeff(inst, k, l)
    return T


# --- advantage bound ----------------------------------------------------

def advantage_terms(n: float, d: float, eps: float, kappa: float, D: int) -> Dict[int, float]:
    """Log of each even-``p`` block of the degree-``D`` advantage bound."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    ln, ld, le = math.log(n), math.log(d), math.log(eps)
    lr = 0.5 * ld - math.log(kappa)
    out = {}
    for p in range(4, D + 1, 2):
        h = p // 2
        ls = float(logsumexp(lr * np.arange(h + 1)))
        base = p * math.log(p) + h * math.log(4 * p / d) + ls
        m = np.arange(1, p // 4 + 1)
        out[p] = float(logsumexp(m * ln + (2 * m - p) * le + base))
    return out


def log_advantage_bound(n, d, eps, kappa, D) -> float:
    terms = advantage_terms(n, d, eps, kappa, D)
    if not terms:
        return -math.inf
    return float(logsumexp(list(terms.values())))


def advantage_bound(n, d, eps, kappa, D) -> float:
    """Upper bound on the squared degree-``D`` advantage minus one.

    Summed in log space; returns ``inf`` when the value overflows a double.
    """
    la = log_advantage_bound(n, d, eps, kappa, D)
    if la > 709.0:
        return math.inf
    return math.exp(la)


def sphere_moment_bound(q: int, d: int) -> float:
    """Bound on ``E <u, u'>^q`` for independent uniform unit vectors."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    if q % 2:
        return 0.0
    return (q / d) ** (q / 2)


def _compositions(total: int, min_part: int = 4):
    """Ordered compositions of ``total`` into even parts ``>= min_part``."""
    if total == 0:
        yield ()
        return
    for first in range(min_part, total + 1, 2):
        for rest in _compositions(total - first, min_part):
            yield (first,) + rest


def _coeff_sq(k: int, l: int) -> Fraction:
    j = (k - l) // 2
    return Fraction(math.factorial(k), math.factorial(l) * math.factorial(j) ** 2 * 4 ** j)


def combinatorial_coeff_check(p: int, return_count: bool = False):
    """Exhaustively check ``prod C_{k_i, l_i}^2 <= 2^p`` over degree splits.

    Enumerates every composition of ``p`` into even per-sample degrees
    ``k_i + l_i >= 4`` (so at most ``p/4`` samples) and every admissible
    ``(k_i, l_i)`` within each sample.
    """
    if p > MAX_COMB_P:
        raise ValueError(f"p must be <= {MAX_COMB_P}")
    if p < 0 or p % 2:
        raise ValueError("p must be a nonnegative even integer")
    bound = Fraction(2) ** p
    per_part = {}
    count, ok = 0, True

    def splits(q):
        if q not in per_part:
            per_part[q] = [_coeff_sq(q - l, l) for l in range(q // 2 + 1)]
        return per_part[q]

    def walk(parts, i, acc):
        nonlocal count, ok
        if i == len(parts):
            count += 1
            if acc > bound:
                ok = False
            return
        for c in splits(parts[i]):
            walk(parts, i + 1, acc * c)

    for parts in _compositions(p):
        walk(parts, 0, Fraction(1))
    return (ok, count) if return_count else ok
