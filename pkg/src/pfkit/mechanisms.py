"""Noise calibration and application for the Wasserstein-type mechanisms.

Calibration is pure algebra over the closed forms in `divergences`; sampling
is counter-based (Philox) so every (seed, draw index) pair is reproducible
and concurrent use can partition the seed space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (GAUSSIAN, GEN_CAUCHY, LAPLACE, Guarantee, NoiseSpec,
                   gaussian_noise, laplace_noise)
from .divergences import (clipped_legendre, _legendre_index,
                          gen_cauchy_normalizer, laplace_shift_divergence)

KIND_GWM = "gwm"
KIND_GAWM = "gawm"
KIND_DAGWM = "dagwm"


class InfeasibleCalibration(ValueError):
    """The requested (epsilon, delta) target cannot be met by any noise scale."""


@dataclass(frozen=True)
class CalibratedMechanism:
    """An additive mechanism: query value plus one draw of the noise.

    Zero-sensitivity calibrations are legitimate (identical conditionals) and
    yield a degenerate mechanism with no noise rather than an error.
    """

    kind: str
    noise: NoiseSpec | None
    guarantee: Guarantee
    sensitivity_used: float
    degenerate: bool = False

    def __post_init__(self):
        if self.kind not in (KIND_GWM, KIND_GAWM, KIND_DAGWM):
            raise ValueError(f"unknown mechanism kind {self.kind!r}")
        if self.degenerate != (self.noise is None):
            raise ValueError("degenerate mechanisms carry no noise spec (and only they do)")
        if self.kind == KIND_GAWM and self.guarantee.delta is None:
            raise ValueError("approximate mechanisms carry a delta")
        if self.kind != KIND_GAWM and self.guarantee.delta is not None:
            raise ValueError("only approximate mechanisms carry a delta")

    @property
    def dim(self) -> int:
        return 1 if self.noise is None else self.noise.dim


def gaussian_mechanism(delta_g: float, alpha: float, epsilon: float,
                       dim: int = 1) -> CalibratedMechanism:
    """Gaussian noise with variance alpha * delta_g^2 / (2 epsilon); the
    sensitivity must be an l2 infinity-Wasserstein value."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if delta_g < 0:
        raise ValueError("sensitivity must be nonnegative")
    if not (alpha > 1 and math.isfinite(alpha)):
        raise ValueError("alpha must be finite and exceed 1")
    guarantee = Guarantee(alpha=alpha, epsilon=epsilon)
    if delta_g == 0:
        return CalibratedMechanism(KIND_GWM, None, guarantee, 0.0, degenerate=True)
    sigma = math.sqrt(alpha * delta_g ** 2 / (2 * epsilon))
    return CalibratedMechanism(KIND_GWM, gaussian_noise(sigma, dim), guarantee, delta_g)


def laplace_mechanism(delta_g: float, dim: int = 1, *,
                      epsilon_pp: float | None = None,
                      alpha: float | None = None,
                      scale: float | None = None) -> CalibratedMechanism:
    """Laplace noise for an l1 sensitivity.

    Either target a pure-epsilon guarantee (scale = delta_g / epsilon) or fix
    (alpha, scale) and report the implied finite-order epsilon.
    """
    if delta_g < 0:
        raise ValueError("sensitivity must be nonnegative")
    if epsilon_pp is not None:
        if alpha is not None or scale is not None:
            raise ValueError("give either epsilon_pp or (alpha, scale), not both")
        if epsilon_pp <= 0:
            raise ValueError("epsilon must be positive")
        if delta_g == 0:
            return CalibratedMechanism(KIND_GWM, None,
                                       Guarantee(math.inf, epsilon_pp), 0.0, degenerate=True)
        return CalibratedMechanism(KIND_GWM, laplace_noise(delta_g / epsilon_pp, dim),
                                   Guarantee(math.inf, epsilon_pp), delta_g)
    if alpha is None or scale is None:
        raise ValueError("need epsilon_pp or both alpha and scale")
    # scale is caller-fixed here, so zero sensitivity just means epsilon = 0
    eps = laplace_shift_divergence(scale, delta_g, alpha)
    return CalibratedMechanism(KIND_GWM, laplace_noise(scale, dim),
                               Guarantee(alpha, eps), delta_g)


def approx_gaussian_mechanism(delta_g_delta: float, alpha: float, epsilon: float,
                              delta: float, dim: int = 1) -> CalibratedMechanism:
    """Gaussian noise for the delta-relaxed sensitivity: variance
    alpha * sens^2 / (2 (epsilon + alpha/(alpha-1) log(1-delta)))."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not (alpha > 1 and math.isfinite(alpha)):
        raise ValueError("alpha must be finite and exceed 1")
    if delta_g_delta < 0:
        raise ValueError("sensitivity must be nonnegative")
    denom = epsilon + alpha / (alpha - 1) * math.log1p(-delta)
    if denom <= 0:
        raise InfeasibleCalibration(
            f"epsilon + alpha/(alpha-1) log(1-delta) = {denom} <= 0: delta too large "
            "for the requested epsilon")
    guarantee = Guarantee(alpha=alpha, epsilon=epsilon, delta=delta)
    if delta_g_delta == 0:
        return CalibratedMechanism(KIND_GAWM, None, guarantee, 0.0, degenerate=True)
    sigma = math.sqrt(alpha * delta_g_delta ** 2 / (2 * denom))
    return CalibratedMechanism(KIND_GAWM, gaussian_noise(sigma, dim), guarantee, delta_g_delta)


def approx_laplace_mechanism(delta_g_delta: float, epsilon_pp: float, delta: float,
                             dim: int = 1) -> CalibratedMechanism:
    """Laplace noise with scale sens / (epsilon + log(1-delta)) for an
    (epsilon, delta) pure statement."""
    if epsilon_pp <= 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if delta_g_delta < 0:
        raise ValueError("sensitivity must be nonnegative")
    denom = epsilon_pp + math.log1p(-delta)
    if denom <= 0:
        raise InfeasibleCalibration(
            f"epsilon + log(1-delta) = {denom} <= 0: delta too large for the requested epsilon")
    guarantee = Guarantee(alpha=math.inf, epsilon=epsilon_pp, delta=delta)
    if delta_g_delta == 0:
        return CalibratedMechanism(KIND_GAWM, None, guarantee, 0.0, degenerate=True)
    return CalibratedMechanism(KIND_GAWM, laplace_noise(delta_g_delta / denom, dim),
                               guarantee, delta_g_delta)


def cauchy_mechanism_epsilon(delta_wp: float, dim: int, k: float, lam: float,
                             q: float, alpha: float) -> float:
    """Privacy budget of i.i.d. generalized Cauchy noise calibrated to a
    W_{d k q (alpha-1)} sensitivity (l2).

    Requires k q (alpha-1) / 2 to be a positive integer; the clipped Legendre
    polynomial keeps the moment expansion monotone. lam is the inverse scale
    and the concavity split spreads the squared sensitivity over the
    coordinates, so it enters as (lam * delta)^2 / d.
    """
    if delta_wp < 0:
        raise ValueError("sensitivity must be nonnegative")
    if dim <= 0:
        raise ValueError("dim must be positive")
    if q < 1:
        raise ValueError("q must be >= 1")
    if not (alpha > 1 and math.isfinite(alpha)):
        raise ValueError("alpha must be finite and exceed 1")
    idx = _legendre_index(k, alpha, q)
    if idx < 1:
        raise ValueError("k q (alpha-1)/2 must be a positive integer")
    const = gen_cauchy_normalizer(k, lam) * math.pi / lam
    arg = 1.0 + (lam * delta_wp) ** 2 / dim
    return dim * math.log(const * clipped_legendre(idx, arg)) / (q * (alpha - 1))


def sample(noise: NoiseSpec, seed: int, n: int) -> np.ndarray:
    """n i.i.d. draws of the product noise, shape (n, dim).

    Deterministic given the seed: one Philox stream keyed by the seed emits
    the draws in index order, so draw i is the i-th row for every n >= i.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.Generator(np.random.Philox(key=seed))
    shape = (n, noise.dim)
    if noise.family == GAUSSIAN:
        return rng.normal(0.0, noise.sigma, size=shape)
    if noise.family == LAPLACE:
        return rng.laplace(0.0, noise.scale, size=shape)
    if noise.family == GEN_CAUCHY:
        nu = noise.k - 1
        return rng.standard_t(nu, size=shape) / (noise.lam * math.sqrt(nu))
    raise ValueError(f"unknown noise family {noise.family!r}")


def apply(mech: CalibratedMechanism, query_value, seed: int) -> np.ndarray:
    """Release query_value + one noise draw (the identity for degenerate
    mechanisms); deterministic given the seed."""
    value = np.atleast_1d(np.asarray(query_value, dtype=float))
    if mech.noise is None:
        return value.copy()
    if value.size != mech.noise.dim:
        raise ValueError(f"value has dimension {value.size}, mechanism expects {mech.noise.dim}")
    return value + sample(mech.noise, seed, 1)[0]
