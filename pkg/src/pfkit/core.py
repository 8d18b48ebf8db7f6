"""Shared value types: discrete distributions, noise specs, privacy guarantees.

All values are immutable after construction and safe to share across threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

# Inputs whose weights already claim to sum to 1 are renormalized when the
# deviation is below this gate and rejected otherwise (tolerates CSV rounding
# without masking bugs).
WEIGHT_SUM_GATE = 1e-9

Point = tuple[float, ...]


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finitely supported probability distribution on R^d.

    Atoms are stored in canonical form: points with exactly equal coordinates
    are merged, atoms are sorted lexicographically by point, and weights sum
    to 1. Two distributions built from permutations of the same atom list
    compare equal.
    """

    atoms: tuple[tuple[Point, float], ...]
    dim: int

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("distribution needs at least one atom")
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        merged: dict[Point, float] = {}
        for point, weight in self.atoms:
            point = tuple(float(c) for c in point)
            if len(point) != self.dim:
                raise ValueError(f"point {point} has length {len(point)}, expected {self.dim}")
            if any(not math.isfinite(c) for c in point):
                raise ValueError("points must be finite")
            weight = float(weight)
            if not math.isfinite(weight) or weight <= 0:
                raise ValueError("weights must be finite and strictly positive")
            merged[point] = merged.get(point, 0.0) + weight
        total = math.fsum(merged.values())
        if abs(total - 1.0) > WEIGHT_SUM_GATE:
            raise ValueError(f"weights sum to {total!r}, expected 1 within {WEIGHT_SUM_GATE}")
        canonical = tuple(sorted((p, w / total) for p, w in merged.items()))
        object.__setattr__(self, "atoms", canonical)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def points_array(self) -> np.ndarray:
        return np.array([p for p, _ in self.atoms], dtype=float)

    def weights_array(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms], dtype=float)


def make_distribution(points: Sequence[Sequence[float]],
                      weights: Sequence[float] | None = None) -> DiscreteDistribution:
    """Build a canonical DiscreteDistribution from raw points and weights.

    Missing weights mean uniform mass 1/n. Given weights may have any positive
    finite sum; they are normalized. Duplicate points are merged.
    """
    points = [tuple(float(c) for c in p) for p in points]
    if not points:
        raise ValueError("no points given")
    dim = len(points[0])
    if dim == 0:
        raise ValueError("points must be non-empty vectors")
    if any(len(p) != dim for p in points):
        raise ValueError("all points must have the same length")
    if weights is None:
        weights = [1.0 / len(points)] * len(points)
    else:
        if len(weights) != len(points):
            raise ValueError("weights and points must have the same length")
        weights = [float(w) for w in weights]
        if any(not math.isfinite(w) or w <= 0 for w in weights):
            raise ValueError("weights must be finite and strictly positive")
        total = math.fsum(weights)
        if not math.isfinite(total) or total <= 0:
            raise ValueError("weights are not normalizable")
        weights = [w / total for w in weights]
    return DiscreteDistribution(tuple(zip(points, weights)), dim)


GAUSSIAN = "gaussian"
LAPLACE = "laplace"
GEN_CAUCHY = "gcauchy"

_FAMILY_NORM = {GAUSSIAN: "l2", LAPLACE: "l1", GEN_CAUCHY: "l2"}


@dataclass(frozen=True)
class NoiseSpec:
    """Product noise ζ^{⊗d}: i.i.d. coordinates from one symmetric family.

    Each family is hard-wired to the norm its shift analysis is exact for:
    Gaussian and generalized Cauchy pair with l2, Laplace with l1.
    """

    family: str
    dim: int
    sigma: float | None = None   # gaussian
    scale: float | None = None   # laplace
    k: float | None = None       # gcauchy tail exponent
    lam: float | None = None     # gcauchy inverse scale

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.family == GAUSSIAN:
            if self.sigma is None or self.sigma <= 0:
                raise ValueError("gaussian noise needs sigma > 0")
        elif self.family == LAPLACE:
            if self.scale is None or self.scale <= 0:
                raise ValueError("laplace noise needs scale > 0")
        elif self.family == GEN_CAUCHY:
            if self.k is None or self.k < 2:
                raise ValueError("generalized cauchy needs k >= 2")
            if self.lam is None or self.lam <= 0:
                raise ValueError("generalized cauchy needs lambda > 0")
        else:
            raise ValueError(f"unknown noise family {self.family!r}")

    @property
    def norm(self) -> str:
        return _FAMILY_NORM[self.family]


def gaussian_noise(sigma: float, dim: int = 1) -> NoiseSpec:
    return NoiseSpec(GAUSSIAN, dim, sigma=float(sigma))


def laplace_noise(scale: float, dim: int = 1) -> NoiseSpec:
    return NoiseSpec(LAPLACE, dim, scale=float(scale))


def gen_cauchy_noise(k: float, lam: float, dim: int = 1) -> NoiseSpec:
    return NoiseSpec(GEN_CAUCHY, dim, k=float(k), lam=float(lam))


@dataclass(frozen=True)
class Guarantee:
    """An (alpha, epsilon) or (alpha, epsilon, delta) privacy statement.

    alpha = math.inf with delta absent is a pure epsilon statement; a present
    delta marks the approximate variant.
    """

    alpha: float
    epsilon: float
    delta: float | None = None

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError("alpha must lie in (1, +inf]")
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError("epsilon must be finite and >= 0")
        if self.delta is not None and not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")


@dataclass(frozen=True)
class SecretPair:
    """Conditional output laws of one protected pair of secrets."""

    left: DiscreteDistribution
    right: DiscreteDistribution
    label: str = ""

    def __post_init__(self):
        if self.left.dim != self.right.dim:
            raise ValueError("secret pair sides must share the dimension")

    @property
    def dim(self) -> int:
        return self.left.dim


@dataclass(frozen=True)
class Framework:
    """The finite family of secret-pair conditionals a mechanism must protect."""

    pairs: tuple[SecretPair, ...]

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("framework needs at least one secret pair")
        dims = {p.dim for p in self.pairs}
        if len(dims) != 1:
            raise ValueError(f"secret pairs disagree on dimension: {sorted(dims)}")

    @property
    def dim(self) -> int:
        return self.pairs[0].dim


def conditioned_query_distribution(outcomes: Iterable,
                                   weights: Sequence[float],
                                   secret: Callable[[object], bool],
                                   query: Callable[[object], Sequence[float]]) -> DiscreteDistribution:
    """Brute-force conditioning: law of query(X) given secret(X), X ~ prior.

    `outcomes`/`weights` enumerate the prior; the conditional renormalizes the
    mass of the outcomes satisfying the secret. Query values may be scalars or
    vectors.
    """
    points, masses = [], []
    for x, w in zip(outcomes, weights):
        if secret(x):
            v = query(x)
            v = (float(v),) if np.isscalar(v) else tuple(float(c) for c in v)
            points.append(v)
            masses.append(float(w))
    if not points:
        raise ValueError("secret has zero prior mass")
    return make_distribution(points, masses)
