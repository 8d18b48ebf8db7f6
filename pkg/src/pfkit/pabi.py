"""Dataset-dependent privacy amplification by iteration.

Accounts for contractive noisy iterations by tracking per-step shifts s_t and
allocations a_t: as long as every prefix keeps z_t = sum(s) - sum(a) >= 0, the
output divergence at residual shift z_T is bounded by the summed noise shift
envelopes at the allocations. The accountant works on shift sequences only;
Wasserstein shifts between data priors come from `transport` or from the
Gaussian-prior closed form below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .core import NoiseSpec
from .divergences import shift_envelope

_FEAS_TOL = 1e-12
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class PabiSchedule:
    """Per-step shifts, allocations and noises of one contractive iteration."""

    shifts: tuple[float, ...]
    allocations: tuple[float, ...]
    noises: tuple[NoiseSpec, ...]
    alpha: float

    def __post_init__(self):
        shifts = tuple(float(s) for s in self.shifts)
        allocations = tuple(float(a) for a in self.allocations)
        if not shifts:
            raise ValueError("schedule needs at least one step")
        if len(allocations) != len(shifts):
            raise ValueError("shifts and allocations must have equal length")
        noises = self.noises
        if isinstance(noises, NoiseSpec):
            noises = (noises,) * len(shifts)
        noises = tuple(noises)
        if len(noises) == 1:
            noises = noises * len(shifts)
        if len(noises) != len(shifts):
            raise ValueError("need one noise spec, or one per step")
        if any(s < 0 for s in shifts):
            raise ValueError("shifts must be nonnegative")
        if not self.alpha > 1:
            raise ValueError("alpha must exceed 1")
        z = 0.0
        for t, (s, a) in enumerate(zip(shifts, allocations), start=1):
            z += s - a
            if z < -_FEAS_TOL:
                raise ValueError(f"infeasible allocation: residual shift z_{t} = {z} < 0")
        object.__setattr__(self, "shifts", shifts)
        object.__setattr__(self, "allocations", allocations)
        object.__setattr__(self, "noises", noises)

    @property
    def steps(self) -> int:
        return len(self.shifts)

    @property
    def residual_shift(self) -> float:
        """z_T: the bound holds for the divergence shifted by this amount
        (the plain divergence only when it is zero)."""
        return max(0.0, math.fsum(self.shifts) - math.fsum(self.allocations))


def allocation_naive(shifts: Sequence[float]) -> tuple[float, ...]:
    """Pay each shift where it happens (a_t = s_t)."""
    return tuple(float(s) for s in shifts)


def allocation_tail_uniform(shifts: Sequence[float], i: int) -> tuple[float, ...]:
    """Spread the single shift at step i (1-based) evenly over steps i..T."""
    T = len(shifts)
    if not 1 <= i <= T:
        raise ValueError("i must lie in [1, T]")
    per = float(shifts[i - 1]) / (T - i + 1)
    return tuple(per if t >= i else 0.0 for t in range(1, T + 1))


def allocation_global_uniform(shifts: Sequence[float]) -> tuple[float, ...]:
    """Spread the total shift evenly; feasible whenever shifts are nonincreasing."""
    T = len(shifts)
    mean = math.fsum(float(s) for s in shifts) / T
    return (mean,) * T


def pabi_bound(schedule: PabiSchedule) -> float:
    """Sum of per-step shift envelopes: bounds the order-alpha divergence of
    the two iterates at residual shift schedule.residual_shift."""
    return math.fsum(shift_envelope(noise, a, schedule.alpha)
                     for noise, a in zip(schedule.noises, schedule.allocations))


def independent_prior_bound(L: float, sigma: float, alpha: float,
                            T: int, i: int, eta: float) -> float:
    """Bound for an independence prior where only step i sees a shift.

    Builds the tail-uniform schedule with shift 2 L eta at step i and Gaussian
    noise of scale eta sigma, evaluates the accountant, and cross-checks the
    closed form 2 alpha L^2 / (sigma^2 (T - i + 1)) before returning it.
    """
    if T < 1 or not 1 <= i <= T:
        raise ValueError("need T >= 1 and 1 <= i <= T")
    if min(L, sigma, eta) <= 0:
        raise ValueError("L, sigma, eta must be positive")
    shifts = tuple(2 * L * eta if t == i else 0.0 for t in range(1, T + 1))
    schedule = PabiSchedule(shifts, allocation_tail_uniform(shifts, i),
                            (NoiseSpec("gaussian", 1, sigma=eta * sigma),), alpha)
    bound = pabi_bound(schedule)
    closed = 2 * alpha * L ** 2 / (sigma ** 2 * (T - i + 1))
    if abs(bound - closed) > 1e-12 * max(1.0, closed):
        raise AssertionError(f"accountant {bound} disagrees with closed form {closed}")
    return closed


def uniform_allocation_bound(shifts: Sequence[float], noise: NoiseSpec,
                             alpha: float) -> float:
    """T times the envelope at the mean shift; valid for nonincreasing shift
    sequences (feasibility of the global-uniform allocation needs that)."""
    shifts = [float(s) for s in shifts]
    if any(s < 0 for s in shifts):
        raise ValueError("shifts must be nonnegative")
    if any(b > a + 1e-12 for a, b in zip(shifts, shifts[1:])):
        raise ValueError("shifts must be nonincreasing")
    T = len(shifts)
    return T * shift_envelope(noise, math.fsum(shifts) / T, alpha)


@dataclass(frozen=True)
class SgdParams:
    """Constants of a projected noisy gradient descent on a convex objective."""

    L: float            # Lipschitz constant in the weights
    eta: float          # step size
    sigma: float        # per-step Gaussian noise scale
    beta_smooth: float
    c_sup: float        # sup over the projection set of the data-Lipschitz constant
    diff_ab: tuple[float, ...]

    def __post_init__(self):
        if min(self.L, self.eta, self.sigma, self.beta_smooth, self.c_sup) <= 0:
            raise ValueError("all constants must be positive")
        if self.eta >= 2 / self.beta_smooth:
            raise ValueError("step size must satisfy eta < 2/beta for contractivity")
        object.__setattr__(self, "diff_ab", tuple(float(c) for c in self.diff_ab))

    @property
    def diff_norm(self) -> float:
        return math.sqrt(math.fsum(c * c for c in self.diff_ab))


def sgd_shift_sequence(params: SgdParams,
                       w_inf_per_step: Sequence[float]) -> tuple[float, ...]:
    """Per-step shifts eta * min(2L, c_sup * W_inf(X_t, X_t'))."""
    if any(w < 0 for w in w_inf_per_step):
        raise ValueError("Wasserstein shifts must be nonnegative")
    return tuple(params.eta * min(2 * params.L, params.c_sup * float(w))
                 for w in w_inf_per_step)


def gaussian_prior_shifts(cov_blocks: Sequence[np.ndarray], cov_ii: np.ndarray,
                          diff_ab: Sequence[float], params: SgdParams) -> tuple[float, ...]:
    """Clamped shifts min(2L, c_sup ||Cov(X_t, X_i) Cov(X_i)^{-1} (a-b)||)
    for a Gaussian data prior; the step t = i reduces to ||a-b|| by the
    identity block.

    Uses a symmetric positive-definite solve and rejects ill-conditioned
    covariances outright (no pseudo-inverse).
    """
    cov_ii = np.asarray(cov_ii, dtype=float)
    diff = np.asarray(diff_ab, dtype=float)
    if cov_ii.shape[0] != cov_ii.shape[1] or cov_ii.shape[0] != diff.size:
        raise ValueError("Cov(X_i) must be square and match the secret difference")
    if not np.allclose(cov_ii, cov_ii.T, atol=1e-10):
        raise ValueError("Cov(X_i) must be symmetric")
    eigs = np.linalg.eigvalsh(cov_ii)
    if eigs[0] <= 0 or eigs[-1] / eigs[0] > _COND_LIMIT:
        raise ValueError("Cov(X_i) is singular or too ill-conditioned to invert")
    solved = linalg.cho_solve(linalg.cho_factor(cov_ii, lower=True), diff)
    shifts = []
    for block in cov_blocks:
        block = np.asarray(block, dtype=float)
        if block.shape != cov_ii.shape:
            raise ValueError("each Cov(X_t, X_i) block must match Cov(X_i) in shape")
        moved = float(np.linalg.norm(block @ solved))
        shifts.append(min(2 * params.L, params.c_sup * moved))
    return tuple(shifts)


def privacy_loss_curve(rho_schedule: Sequence[float], params: SgdParams,
                       alpha: float, mode: str = "per_step") -> list[tuple[int, float]]:
    """Cumulative divergence bound after each prefix of correlation schedule.

    per_step pays every shift where it occurs:
        alpha eta^2 / (2 sigma^2) * sum of min(2L, c |rho_t| ||a-b||)^2.
    improved spreads the prefix total uniformly (|rho_t| must be
    nonincreasing):
        alpha eta^2 / (2 T sigma^2) * (sum of min(2L, c |rho_t| ||a-b||))^2.
    """
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    rho = [abs(float(r)) for r in rho_schedule]
    if any(r > 1 for r in rho):
        raise ValueError("correlations must lie in [-1, 1]")
    if mode not in ("per_step", "improved"):
        raise ValueError("mode must be per_step or improved")
    if mode == "improved" and any(b > a + 1e-12 for a, b in zip(rho, rho[1:])):
        raise ValueError("improved mode needs nonincreasing |rho_t|")
    clamps = [min(2 * params.L, params.c_sup * r * params.diff_norm) for r in rho]
    scale = alpha * params.eta ** 2 / (2 * params.sigma ** 2)
    curve = []
    running_sq, running = 0.0, 0.0
    for T, c in enumerate(clamps, start=1):
        running_sq += c * c
        running += c
        loss = scale * running_sq if mode == "per_step" else scale * running ** 2 / T
        curve.append((T, loss))
    return curve
