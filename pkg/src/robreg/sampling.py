"""Clean draws from the Gaussian linear model and epsilon-contamination."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .core import Dataset, LinearModelSpec, SeedLike, as_generator

ADVERSARY_KINDS = ("none", "huber_mixture", "targeted_labels", "lowdeg_gaussian", "sq_instance")


@dataclass(frozen=True)
class ContaminationSpec:
    """Corruption rate plus the adversary that fills the corrupted rows.

    ``adversary_params`` by kind:

    * ``huber_mixture``: ``x_scale`` (default 1), ``label_mean`` (0),
      ``label_std`` (0).  Replacement rows are ``X ~ N(0, x_scale^2 I)``
      with independent label ``N(label_mean, label_std^2)``.
    * ``targeted_labels``: ``sigma`` (noise level the attacker assumes,
      default 1) and optional ``scale`` overriding the default shift.
    * ``lowdeg_gaussian``: ``instance``, a :class:`~robreg.lowdeg.LowDegInstance`.
    * ``sq_instance``: ``spec``, a :class:`~robreg.sq.SqInstanceSpec`.
    """

    eps: float
    adversary_kind: str = "none"
    adversary_params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.eps < 0.5:
            raise ValueError(f"eps must lie in [0, 0.5), got {self.eps!r}")
        if self.adversary_kind not in ADVERSARY_KINDS:
            raise ValueError(f"unknown adversary kind {self.adversary_kind!r}")


def sample_gaussian_rows(model: LinearModelSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    d = model.d
    Z = rng.standard_normal((n, d))
    if model.spike is not None:
        X = model.spike.sqrt_matvec(Z)
    else:
        X = Z @ model.sigma_sqrt()
    eta = rng.standard_normal(n) * np.sqrt(model.noise_var)
    y = X @ model.beta + eta
    return np.column_stack([X, y])


def sample_clean(model: LinearModelSpec, n: int, seed: SeedLike = None) -> Dataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(seed)
    rows = sample_gaussian_rows(model, n, rng)
    return Dataset(rows, seed=seed if isinstance(seed, int) else 0)


def targeted_shift_scale(sigma: float, n: int, eps: float) -> float:
    return float(np.clip(10.0 * sigma * np.sqrt(n) / (eps * n), 10.0, 1e3))


def contaminate(clean: Dataset, spec: ContaminationSpec, seed: SeedLike = None,
                return_mask: bool = False):
    """Corrupt ``clean`` according to ``spec``.

    Rows that are not corrupted are copied bitwise.  With
    ``return_mask=True`` also returns the boolean mask of corrupted rows.
    """
    rows = np.array(clean.rows)
    mask = np.zeros(clean.n, dtype=bool)
    kind = spec.adversary_kind
    if spec.eps == 0 or kind == "none":
        out = clean
    else:
        rng = as_generator(seed)
        p = dict(spec.adversary_params)
        n, d = clean.n, clean.d
        if kind == "targeted_labels":
            X = clean.X
            k = int(np.floor(spec.eps * n))
            cov = X.T @ X / n
            u = np.linalg.eigh(cov)[1][:, -1]
            proj = X @ u
            # largest-leverage rows along u move OLS the most per corrupted row
            idx = np.argsort(-np.abs(proj), kind="stable")[:k]
            s = p.get("scale")
            if s is None:
                s = targeted_shift_scale(p.get("sigma", 1.0), n, spec.eps)
            rows[idx, -1] += s * proj[idx]
            mask[idx] = True
        else:
            mask = rng.random(n) < spec.eps
            m = int(mask.sum())
            if kind == "huber_mixture":
                Xb = rng.standard_normal((m, d)) * p.get("x_scale", 1.0)
                yb = p.get("label_mean", 0.0) + p.get("label_std", 0.0) * rng.standard_normal(m)
                rows[mask] = np.column_stack([Xb, yb])
            elif kind == "lowdeg_gaussian":
                from .lowdeg import sample_corruption_rows
                rows[mask] = sample_corruption_rows(p["instance"], m, rng)
            elif kind == "sq_instance":
                from .sq import sample_sq_corruption
                rows[mask] = sample_sq_corruption(p["spec"], m, rng)
        out = Dataset(rows, clean.weights, clean.seed)
    return (out, mask) if return_mask else out
