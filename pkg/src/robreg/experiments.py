"""Reusable experiment drivers shared by the command line and the test suites."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .core import LinearModelSpec, SpikedCovariance, mahalanobis_error, random_unit_vector, stream
from .regression import RegressorConfig, fit_ols, fit_robust, fit_zero
from .sampling import ContaminationSpec, contaminate, sample_clean
from . import sq

ESTIMATORS = ("zero", "ols", "robust")


def parallel_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """``[fn(x) for x in items]`` in input order, optionally on a thread pool."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def regression_model(d: int, kappa: float, rng, sigma: float = 1.0, signal: float = 1.0):
    """Spiked-covariance model with ``|beta|_Sigma = signal`` and noise ``sigma^2``."""
    spike = SpikedCovariance(random_unit_vector(d, rng), kappa)
    b = random_unit_vector(d, rng)
    b = signal * b / math.sqrt(b @ spike.matvec(b))
    return LinearModelSpec.from_spike(spike, b, sigma ** 2)


def regression_trial(d: int, n: int, kappa: float, eps: float, trial: int, root_seed: int,
                     adversary: str = "targeted_labels", estimators: Iterable[str] = ("robust", "ols"),
                     sigma: float = 1.0, cfg: Optional[RegressorConfig] = None,
                     adversary_params: Optional[dict] = None) -> Dict[str, float]:
    """Mahalanobis errors of each estimator on one contaminated draw.

    The stream depends only on ``(root_seed, trial)``, so cells of a sweep
    that differ in ``kappa`` or ``eps`` share their underlying Gaussian draws.
    """
    rng = stream(root_seed, "regress", trial)
    model = regression_model(d, kappa, rng, sigma)
    clean = sample_clean(model, n, rng)
    params = {"sigma": sigma} if adversary == "targeted_labels" else {}
    params.update(adversary_params or {})
    data = contaminate(clean, ContaminationSpec(eps, adversary, params), rng)
    cfg = cfg or RegressorConfig(eps)
    out = {}
    for name in estimators:
        if name == "robust":
            rep = fit_robust(data, cfg, rng)
        elif name == "ols":
            rep = fit_ols(data)
        elif name == "zero":
            rep = fit_zero(data)
        else:
            raise ValueError(f"unknown estimator {name!r}")
        out[name] = mahalanobis_error(rep.beta_hat, model.beta, model.spike)
    return out


def bench(eps_list: Sequence[float], kappa_list: Sequence[float], d: int = 50, n: int = 20000,
          trials: int = 20, root_seed: int = 0, threads: int = 1, max_epskappa: float = 0.8,
          sigma: float = 1.0, estimators: Sequence[str] = ("robust", "ols")) -> List[dict]:
    """Error against ``(eps, kappa)``; cells with ``eps * kappa > max_epskappa`` are skipped."""
    cells = [(e, k) for e in eps_list for k in kappa_list if e * k <= max_epskappa + 1e-12]
    jobs = [(e, k, t) for e, k in cells for t in range(trials)]
    res = parallel_map(lambda j: regression_trial(d, n, j[1], j[0], j[2], root_seed,
                                                  estimators=estimators, sigma=sigma),
                       jobs, threads)
    rows = []
    for ci, (e, k) in enumerate(cells):
        block = res[ci * trials:(ci + 1) * trials]
        for name in estimators:
            errs = np.array([r[name] for r in block])
            se = float(errs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
            rows.append({"eps": e, "kappa": k, "n": n, "estimator": name,
                         "err_mean": float(errs.mean()), "err_se": se,
                         "err_over_sqrt_epskappa": float(errs.mean() / (sigma * math.sqrt(e * k)))})
    return rows


def moment_grid(n_first: int = 40, n_sigma: int = 20, eps: float = 0.01) -> List[sq.SqMixture]:
    """Mixtures over ``(first coordinate, sigma_s2)`` spanning the three regimes.

    The first coordinate is ``mu_s`` in the small regime and ``eps_mu`` in
    the other two; a quarter of the rows go to each end regime.
    """
    k1 = n_first // 4
    k3 = n_first // 4
    k2 = n_first - k1 - k3
    edge = math.sqrt(eps) / 1e4
    sig = np.linspace(0.1 / n_sigma, 0.1, n_sigma)
    out = []
    for s2 in sig:
        for mu in np.linspace(-edge, edge, k1 + 2)[1:-1]:
            out.append(sq.build_mixture(float(mu), float(s2), eps))
        for e in np.linspace(0.01, sq.P2_EPS_MAX, k2):
            mu = float(sq.p2_mu_s(e, s2))
            if mu < sq.P2_P3_SPLIT:
                out.append(sq.build_mixture(mu, float(s2), eps))
            else:
                out.append(sq.build_mixture(mu, float(s2), eps, regime="P2_mid"))
        for e in np.linspace(sq.P3_EPS_MIN, 0.99, k3):
            mu = 1.0 / (3.0 * math.sqrt(1.0 - e))
            out.append(sq.build_mixture(mu, float(s2), eps, regime="P3_large"))
    return out


def quadrature_moments(mix: sq.SqMixture, tol: float = 1e-11) -> np.ndarray:
    """Moments 1..3 of a mixture by adaptive quadrature of its density."""
    from .oracles import quad_moments
    m, s = mix.means, np.sqrt(mix.variances)
    lo, hi = float(np.min(m - 15 * s)), float(np.max(m + 15 * s))
    pts = np.concatenate([m, m - 3 * s, m + 3 * s, m - 8 * s, m + 8 * s])
    return quad_moments(mix.pdf, [1, 2, 3], lo=lo, hi=hi, tol=tol, points=pts)


ADV_SCALE_MIN = 4e6


def advantage_scale(d: float, eps: float, kappa: float) -> float:
    """``min(d eps^2 kappa^2, eps^2 d^2)``, the sample size where the bound turns."""
    return min(d * eps ** 2 * kappa ** 2, eps ** 2 * d ** 2)


def advantage_tuple(rng) -> tuple:
    """Random ``(d, eps, kappa, D)`` with ``d >= 1e4`` inside the crossing regime.

    ``kappa`` is drawn with ``eps * kappa >= 1 - eps`` so the planted
    instance exists.  Draws with ``eps^2 * scale < ADV_SCALE_MIN`` are
    rejected: there the ``p = 8, m = 1`` block alone, of order
    ``n / (eps^6 d^4)`` up to ``D``-dependent factors, already reaches one
    at the low end ``n = 1e-2 scale / D^6``.
    """
    while True:
        d = 10.0 ** rng.uniform(4, 8)
        eps = rng.uniform(0.05, 0.45)
        kappa = 10.0 ** rng.uniform(math.log10((1 - eps) / eps), 5)
        D = int(rng.choice([4, 8]))
        if eps ** 2 * advantage_scale(d, eps, kappa) >= ADV_SCALE_MIN:
            return d, eps, kappa, D
