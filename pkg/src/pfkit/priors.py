"""Closed-form sensitivity bounds for structured adversary priors."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_SYM_TOL = 1e-10


@dataclass(frozen=True)
class GaussianPrior:
    """i.i.d. records, each N(mean, cov) over the attribute vector."""

    mean: tuple[float, ...]
    cov: tuple[tuple[float, ...], ...]
    n_records: int
    n_attributes: int

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (self.n_attributes, self.n_attributes):
            raise ValueError("cov must be n_attributes x n_attributes")
        if len(self.mean) != self.n_attributes:
            raise ValueError("mean must have one entry per attribute")
        if self.n_records <= 0:
            raise ValueError("n_records must be positive")
        if not np.allclose(cov, cov.T, atol=_SYM_TOL):
            raise ValueError("cov must be symmetric")
        if np.linalg.eigvalsh(cov)[0] < -_SYM_TOL:
            raise ValueError("cov must be positive semidefinite")
        object.__setattr__(self, "mean", tuple(float(c) for c in self.mean))
        object.__setattr__(self, "cov", tuple(tuple(float(c) for c in row) for row in cov))

    def cov_array(self) -> np.ndarray:
        return np.asarray(self.cov, dtype=float)


def gaussian_attribute_sensitivity(prior: GaussianPrior,
                                   release_map: Sequence[Sequence[float]],
                                   secret_map: Sequence[Sequence[float]],
                                   secret_diam: float) -> float:
    """Worst shift of the released conditional when the protected linear
    statistic moves across its range: ||M Sigma N^T (N Sigma N^T)^{-1}||_op
    times the diameter of the secret set.

    The conditional Gaussians differ by a pure translation, so this operator
    norm bounds the infinity-Wasserstein sensitivity of the release.
    """
    if secret_diam < 0:
        raise ValueError("secret diameter must be nonnegative")
    sigma = prior.cov_array()
    M = np.atleast_2d(np.asarray(release_map, dtype=float))
    N = np.atleast_2d(np.asarray(secret_map, dtype=float))
    if M.shape[1] != sigma.shape[0] or N.shape[1] != sigma.shape[0]:
        raise ValueError("maps must act on the attribute vector")
    gram = N @ sigma @ N.T
    cond = np.linalg.cond(gram)
    if not math.isfinite(cond) or cond > 1e12:
        raise ValueError("N Sigma N^T is singular or too ill-conditioned")
    transfer = M @ sigma @ N.T @ np.linalg.inv(gram)
    return float(np.linalg.norm(transfer, ord=2)) * secret_diam


def diffusion_sensitivity(L: float, diam_k: float, convexity_c: float,
                          timestamps: Sequence[float]) -> float:
    """Sensitivity of an L-Lipschitz query on snapshots of a contracting
    Langevin diffusion started in a set of diameter diam_k:
    L * diam_k * sum_i exp(-2 C t_i) (l1 norm)."""
    if L <= 0 or diam_k <= 0 or convexity_c <= 0:
        raise ValueError("L, diam_k, convexity_c must be positive")
    if len(timestamps) == 0:
        raise ValueError("need at least one timestamp")
    if any(t < 0 for t in timestamps):
        raise ValueError("timestamps must be nonnegative")
    return L * diam_k * math.fsum(math.exp(-2 * convexity_c * t) for t in timestamps)


def weak_dependence_bound(lambda_dep: float, delta_classical: float) -> float:
    """Sensitivity bound 2 lambda + Delta when every conditional is within
    infinity-Wasserstein distance lambda of its independent-product version."""
    if lambda_dep < 0 or delta_classical < 0:
        raise ValueError("arguments must be nonnegative")
    return 2 * lambda_dep + delta_classical
