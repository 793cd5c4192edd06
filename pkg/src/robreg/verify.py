"""The ``verify-all`` suite: every construction against an independent oracle.

Each check yields one record ``{check, value, threshold, passed}``.  Values
depend only on the root seed, so two runs produce identical records.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import List

import numpy as np

from . import certificate, lowdeg, oracles, reduction, sq
from .core import LinearModelSpec, SpikedCovariance, random_unit_vector, stream
from .experiments import moment_grid, parallel_map, quadrature_moments, regression_trial
from .sampling import sample_clean


def _rec(check: str, value: float, threshold: float, passed: bool) -> dict:
    return {"check": check, "value": float(value), "threshold": float(threshold), "passed": bool(passed)}


def check_sq_moments(n_first=20, n_sigma=10, quad_every=4) -> List[dict]:
    grid = moment_grid(n_first, n_sigma)
    ana = max(np.abs(m.moments(3) - [0, 1, 0]).max() for m in grid)
    quad = max(np.abs(quadrature_moments(m) - [0, 1, 0]).max() for m in grid[::quad_every])
    return [_rec("sq_moments_closed_form", ana, 1e-9, ana <= 1e-9),
            _rec("sq_moments_quadrature", quad, 1e-7, quad <= 1e-7)]


def check_sq_ranges(k: int = 100) -> List[dict]:
    e2 = np.linspace(0.51 / k, 0.51, k)
    s = np.linspace(0.1 / k, 0.1 * (1 - 1e-9), k)
    E, S = np.meshgrid(e2, s, indexing="ij")
    sn = sq.p2_sigma_n2(E, S)
    bad_p2 = int(np.sum((sn <= 0.01) | (sn >= 0.8)))
    e3 = np.linspace(0.7, 0.999, k)
    E3, S3 = np.meshgrid(e3, np.linspace(0.1 / k, 0.1, k), indexing="ij")
    v2, v3 = sq.p3_variances(E3, S3)
    bad_p3 = int(np.sum((v2 <= 0.2) | (v2 >= 1) | (v3 <= 0.7) | (v3 >= 1.9)))
    mu = sq.p2_mu_s(E, S)
    bad_ratio = int(np.sum(E / (1 - E) > 9 * mu ** 2 * (1 + 1e-12)))
    mu3 = 1 / (3 * np.sqrt(1 - E3))
    bad_ratio += int(np.sum(E3 / (1 - E3) > 9 * mu3 ** 2 * (1 + 1e-12)))
    eb = np.linspace(1e-6, 0.5, 400)
    mono = int(sum(np.sum(np.diff(sq.p2_mu_s(eb, s2)) <= 0) for s2 in s))
    return [_rec("p2_sigma_n2_range_violations", bad_p2, 0, bad_p2 == 0),
            _rec("p3_variance_range_violations", bad_p3, 0, bad_p3 == 0),
            _rec("ratio_bound_violations", bad_ratio, 0, bad_ratio == 0),
            _rec("p2_monotonicity_violations", mono, 0, mono == 0)]


def random_chi2_tuple(rng):
    """Parameters valid for both divergence formulas, kept away from the poles."""
    while True:
        t = (rng.uniform(-1.5, 1.5), rng.uniform(0.1, 1.9), rng.uniform(-1.5, 1.5), rng.uniform(0.1, 1.9))
        if 2 * t[3] - t[1] >= 0.5 and t[1] + t[3] - t[1] * t[3] >= 0.3:
            return t


def _logpdf(x, m, v):
    return -0.5 * (x - m) ** 2 / v - 0.5 * math.log(2 * math.pi * v)


def chi2_quadrature(m1, v1, m2, v2):
    """Reference values of both divergences by direct integration."""
    pts = (m1, m2, 0.0)
    div = oracles.quad_integral(lambda x: np.exp(2 * _logpdf(x, m1, v1) - _logpdf(x, m2, v2)),
                                -100, 100, 1e-12, pts, rtol=1e-11) - 1
    corr = oracles.quad_integral(lambda x: np.exp(_logpdf(x, m1, v1) + _logpdf(x, m2, v2) - _logpdf(x, 0, 1)),
                                 -100, 100, 1e-12, pts, rtol=1e-11) - 1
    return div, corr


def check_chi2(seed: int, n: int = 20) -> List[dict]:
    rng = stream(seed, "verify-chi2", 0)
    worst = 0.0
    for _ in range(n):
        t = random_chi2_tuple(rng)
        div, corr = chi2_quadrature(*t)
        worst = max(worst, abs(sq.chi2_gaussians(*t) - div) / max(abs(div), 1e-3),
                    abs(sq.chi2_pair_corr(*t) - corr) / max(abs(corr), 1e-3))
    return [_rec("chi2_closed_form_rel_err", worst, 1e-6, worst <= 1e-6)]


def check_normalizer() -> List[dict]:
    worst_lo, worst_hi = math.inf, -math.inf
    for eps in (0.005, 0.01, 0.02):
        for kappa in (20, 50, 100):
            C = sq.marginal_normalizer(eps, 0.01, kappa)
            worst_lo = min(worst_lo, C - 1)
            worst_hi = max(worst_hi, C - 1 / (1 - eps))
    return [_rec("normalizer_lower_slack", worst_lo, 0, worst_lo >= -1e-9),
            _rec("normalizer_upper_slack", worst_hi, 0, worst_hi <= 1e-9)]


RATIONAL_CASES = [
    (2, Fraction(10), Fraction(1, 10), Fraction(1), Fraction(1), (Fraction(3, 5), Fraction(4, 5))),
    (3, Fraction(9), Fraction(1, 10), Fraction(2), Fraction(0), (Fraction(1), 0, 0)),
    (3, Fraction(20), Fraction(1, 5), Fraction(1, 3), Fraction(1, 2), (0, Fraction(5, 13), Fraction(12, 13))),
    (4, Fraction(7, 2), Fraction(1, 4), Fraction(3), Fraction(2), (Fraction(1, 2),) * 4),
    (5, Fraction(100), Fraction(1, 20), Fraction(5, 7), Fraction(1, 9), (0, 0, Fraction(8, 17), Fraction(15, 17), 0)),
    (2, Fraction(3), Fraction(1, 3), Fraction(1), Fraction(0), (Fraction(-3, 5), Fraction(4, 5))),
    (6, Fraction(50), Fraction(1, 10), Fraction(7), Fraction(3), (Fraction(2, 7), Fraction(3, 7), Fraction(6, 7), 0, 0, 0)),
    (4, Fraction(12), Fraction(1, 12), Fraction(1, 2), Fraction(1), (Fraction(2, 3), Fraction(2, 3), Fraction(1, 3), 0)),
    (3, Fraction(5), Fraction(1, 6), Fraction(4), Fraction(1, 4), (Fraction(2, 3), Fraction(-1, 3), Fraction(2, 3))),
    (1, Fraction(30), Fraction(1, 30), Fraction(1), Fraction(1), (Fraction(1),)),
]


def check_lowdeg_structure() -> List[dict]:
    exact = sum(lowdeg.exact_moment_check(*c) for c in RATIONAL_CASES)
    flips = 0
    worst_boundary = 0.0
    for eps in (0.1, 0.2, 0.25, 0.4, 1 / 3):
        kb = (1 - eps) / eps
        ok_at = lowdeg.psd_condition(eps, kb * (1 + 1e-12))
        bad_below = not lowdeg.psd_condition(eps, kb * (1 - 1e-12))
        flips += ok_at and bad_below
        _, bE = lowdeg.active_blocks(kb, eps, 1.0, 0.0)
        worst_boundary = max(worst_boundary, abs(np.linalg.eigvalsh(bE)[0]))
    return [_rec("lowdeg_exact_moment_cases", exact, len(RATIONAL_CASES), exact == len(RATIONAL_CASES)),
            _rec("lowdeg_psd_flips", flips, 5, flips == 5),
            _rec("lowdeg_boundary_min_eig", worst_boundary, 1e-9, worst_boundary <= 1e-9)]


def random_cov_tuple(rng):
    """Bivariate ``(sx2, sxy, sy2)`` with correlation below 0.95."""
    sx2 = rng.uniform(0.05, 3.0)
    sy2 = rng.uniform(0.2, 3.0)
    sxy = rng.uniform(-0.95, 0.95) * math.sqrt(sx2 * sy2)
    return sx2, sxy, sy2


def check_hermite(seed: int, n_tuples: int = 5, kmax: int = 10) -> List[dict]:
    rng = stream(seed, "verify-hermite", 0)
    worst = 0.0
    for _ in range(n_tuples):
        sx2, sxy, sy2 = random_cov_tuple(rng)
        cov = [[sx2, sxy], [sxy, sy2]]
        for k in range(kmax + 1):
            for l in range(kmax + 1):
                ref = oracles.gauss_hermite_expectation(
                    lambda x, y: lowdeg.hermite_poly(k, x) * lowdeg.hermite_poly(l, y / math.sqrt(sy2)), cov)
                worst = max(worst, abs(ref - lowdeg.hermite_cross_coeff(k, l, sx2, sxy, sy2)))
    comb = all(lowdeg.combinatorial_coeff_check(p) for p in range(4, 13, 2))
    return [_rec("hermite_vs_gauss_hermite", worst, 1e-8, worst <= 1e-8),
            _rec("combinatorial_bound_p_le_12", int(comb), 1, comb)]


def check_advantage() -> List[dict]:
    bad = 0
    ns, ds, ks = [1e2, 1e3, 1e4, 1e5], [1e4, 1e5, 1e6], [10.0, 100.0, 1000.0]
    for D in (4, 8):
        for d in ds:
            for k in ks:
                vals = [lowdeg.log_advantage_bound(n, d, 0.1, k, D) for n in ns]
                bad += int(np.any(np.diff(vals) < 0))
        for n in ns:
            for k in ks:
                vals = [lowdeg.log_advantage_bound(n, d, 0.1, k, D) for d in ds]
                bad += int(np.any(np.diff(vals) > 0))
            for d in ds:
                vals = [lowdeg.log_advantage_bound(n, d, 0.1, k, D) for k in ks]
                bad += int(np.any(np.diff(vals) > 0))
    empty = lowdeg.advantage_bound(10, 100, 0.1, 10, 2) == 0
    return [_rec("advantage_monotonicity_violations", bad, 0, bad == 0),
            _rec("advantage_empty_sum", int(empty), 1, empty)]


def check_regression(seed: int, threads: int = 1, trials: int = 3) -> List[dict]:
    d, n, eps, kappa = 20, 5000, 0.05, 4.0
    res = parallel_map(lambda t: regression_trial(d, n, kappa, eps, t, seed), list(range(trials)), threads)
    rob = float(np.mean([r["robust"] for r in res]))
    ols = float(np.mean([r["ols"] for r in res]))
    bound = 5 * math.sqrt(eps * kappa)
    return [_rec("robust_error_over_bound", rob / bound, 1, rob <= bound),
            _rec("ols_over_robust_error", ols / rob, 5, ols >= 5 * rob)]


def check_certificate(seed: int) -> List[dict]:
    rng = stream(seed, "verify-cert", 0)
    d = 10
    model = LinearModelSpec.from_spike(SpikedCovariance(random_unit_vector(d, rng), 8.0), np.zeros(d), 1.0)
    data = sample_clean(model, 100_000, rng)
    reps = certificate.certify(data, model, 0.1, 10, rng)
    passed = sum(r.passed for r in reps)
    return [_rec("certificate_pass_count", passed, 10, passed == 10)]


def check_reduction(seed: int, trials: int = 10) -> List[dict]:
    out = []
    for name, (d, kappa, eps, n) in {"small": (100, 9.0, 0.1, 5000), "large": (16, 8.0, 0.2, 2000)}.items():
        v = random_unit_vector(d, stream(seed, "verify-red-v", 0))
        inst = reduction.reduction_instance(d, kappa, eps, 1.0, v)
        correct = 0
        for which in ("null", "alt"):
            for t in range(trials):
                r = reduction.run_reduction(inst, n, "oracle", which, stream(seed, f"verify-red-{which}", t))
                correct += r.decide_alternative == (which == "alt")
        out.append(_rec(f"reduction_{name}_correct", correct, 2 * trials * 0.9, correct >= 2 * trials * 0.9))
    return out


def check_serialization(seed: int) -> List[dict]:
    from .cli import render_records
    rng = stream(seed, "verify-ser", 0)
    vals = np.concatenate([rng.standard_normal(50) * 10.0 ** rng.integers(-300, 300, 50), [0.1, 1 / 3]])
    text = render_records([{"x": float(v)} for v in vals], "csv")
    back = np.array([float(s) for s in text.splitlines()[1:]])
    ok = bool(np.array_equal(back.view(np.int64), vals.view(np.int64)))
    return [_rec("float_round_trip", int(ok), 1, ok)]


def run_suite(seed: int = 0, threads: int = 1) -> List[dict]:
    rows: List[dict] = []
    rows += check_sq_moments()
    rows += check_sq_ranges()
    rows += check_chi2(seed)
    rows += check_normalizer()
    rows += check_lowdeg_structure()
    rows += check_hermite(seed)
    rows += check_advantage()
    rows += check_regression(seed, threads)
    rows += check_certificate(seed)
    rows += check_reduction(seed)
    rows += check_serialization(seed)
    return rows
