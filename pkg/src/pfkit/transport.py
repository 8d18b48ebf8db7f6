"""Exact Wasserstein-type sensitivities of discrete distributions.

The infinity-Wasserstein distance and its delta-relaxation are computed by a
threshold search over the pairwise-distance grid with integer max-flow
feasibility checks; p-Wasserstein and the noise-aware transport functional by
integer-scaled network simplex. Masses are quantized to a common denominator
(1e-15) so feasibility decisions never hinge on floating-point round-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import networkx as nx
import numpy as np

from .core import DiscreteDistribution, Framework, NoiseSpec
from .divergences import _legendre_index, shifted_noise_divergence

DEFAULT_ATOM_CAP = 400
_MASS_SCALE = 10 ** 15


class AtomCapExceeded(RuntimeError):
    """Instance larger than the exact-transport cap; use the 1-d route or subsample."""


@dataclass(frozen=True)
class SensitivityReport:
    """The sensitivity family of one secret-pair framework.

    delta_g is the worst infinity-Wasserstein distance; delta_g_delta the
    (delta, threshold) relaxation; delta_g_zeta the (q, alpha, value) of the
    noise-aware transport functional; w_p a list of (p, value); delta_group an
    externally supplied classical/group sensitivity.
    """

    delta_g: float
    delta_group: float | None = None
    delta_g_delta: tuple[float, float] | None = None
    delta_g_zeta: tuple[float, float, float] | None = None
    w_p: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.delta_g < 0:
            raise ValueError("delta_g must be nonnegative")
        if self.delta_group is not None and self.delta_group < 0:
            raise ValueError("delta_group must be nonnegative")
        if self.delta_g_delta is not None:
            _, value = self.delta_g_delta
            if value < 0 or value > self.delta_g + 1e-9:
                raise ValueError("delta-relaxed sensitivity must lie in [0, delta_g]")
        if self.delta_g_zeta is not None and self.delta_g_zeta[2] < 1 - 1e-9:
            raise ValueError("noise-aware transport value must be >= 1")
        if self.w_p is not None and any(v < 0 for _, v in self.w_p):
            raise ValueError("w_p values must be nonnegative")


def _check_dims(mu: DiscreteDistribution, nu: DiscreteDistribution):
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")


def _distance_matrix(mu: DiscreteDistribution, nu: DiscreteDistribution, norm: str) -> np.ndarray:
    diff = mu.points_array()[:, None, :] - nu.points_array()[None, :, :]
    if norm == "l1":
        return np.abs(diff).sum(axis=2)
    if norm == "l2":
        return np.sqrt((diff ** 2).sum(axis=2))
    raise ValueError(f"unknown norm {norm!r}")


def _quantize(weights: np.ndarray) -> list[int]:
    units = [int(round(w * _MASS_SCALE)) for w in weights]
    units[int(np.argmax(weights))] += _MASS_SCALE - sum(units)
    return units


def _close_mass_units(dist: np.ndarray, w_units: list[int], v_units: list[int], z: float) -> int:
    """Max transportable mass (integer units) along pairs within distance z.

    Capacities are Python ints, so the flow value is exact at the common
    denominator; no floating feasibility ambiguity."""
    n, m = dist.shape
    graph = nx.DiGraph()
    for i in range(n):
        graph.add_edge("s", ("a", i), capacity=w_units[i])
    for j in range(m):
        graph.add_edge(("b", j), "t", capacity=v_units[j])
    ii, jj = np.nonzero(dist <= z)
    for i, j in zip(ii.tolist(), jj.tolist()):
        graph.add_edge(("a", i), ("b", j), capacity=w_units[i])
    value, _ = nx.maximum_flow(graph, "s", "t")
    return int(value)


def _threshold_search(mu: DiscreteDistribution, nu: DiscreteDistribution,
                      delta: float, norm: str) -> float:
    """Smallest pairwise-distance grid value z whose within-z coupling mass
    reaches 1 - delta (up to the mass-quantization slack)."""
    dist = _distance_matrix(mu, nu, norm)
    w_units = _quantize(mu.weights_array())
    v_units = _quantize(nu.weights_array())
    slack = mu.n_atoms + nu.n_atoms + 1
    required = (1.0 - delta) * _MASS_SCALE - slack
    grid = np.unique(np.concatenate(([0.0], dist.ravel())))

    def feasible(z: float) -> bool:
        return _close_mass_units(dist, w_units, v_units, z) >= required

    lo, hi = 0, len(grid) - 1
    if not feasible(grid[hi]):
        raise RuntimeError("full coupling infeasible; weights inconsistent")
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(grid[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(grid[lo])


def _comonotone_inf(mu: DiscreteDistribution, nu: DiscreteDistribution) -> float:
    x = np.sort(mu.points_array().ravel())
    y = np.sort(nu.points_array().ravel())
    return float(np.max(np.abs(x - y)))


def _uniform_weights(d: DiscreteDistribution) -> bool:
    w = d.weights_array()
    return bool(np.allclose(w, 1.0 / len(w), rtol=0, atol=1e-12))


def wasserstein_inf(mu: DiscreteDistribution, nu: DiscreteDistribution,
                    norm: str = "l2") -> float:
    """Exact infinity-Wasserstein distance.

    In one dimension with equal atom counts and uniform weights the
    comonotone matching max_i |x_(i) - y_(i)| is used directly; otherwise the
    optimum is found by binary search over the pairwise distances with a
    max-flow feasibility check at each threshold.
    """
    _check_dims(mu, nu)
    if (mu.dim == 1 and mu.n_atoms == nu.n_atoms
            and _uniform_weights(mu) and _uniform_weights(nu)):
        return _comonotone_inf(mu, nu)
    return _threshold_search(mu, nu, 0.0, norm)


def proximity_threshold(mu: DiscreteDistribution, nu: DiscreteDistribution,
                        delta: float, norm: str = "l2") -> float:
    """Smallest z such that some coupling puts mass >= 1 - delta on pairs
    within distance z. delta = 0 degenerates to the infinity-Wasserstein
    distance."""
    _check_dims(mu, nu)
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    return _threshold_search(mu, nu, delta, norm)


def wasserstein_p_1d(mu: DiscreteDistribution, nu: DiscreteDistribution, p: float) -> float:
    """Exact W_p in one dimension via the quantile coupling.

    Integrates |F_mu^{-1}(u) - F_nu^{-1}(u)|^p exactly over the
    piecewise-constant breakpoints of the two quantile functions.
    """
    _check_dims(mu, nu)
    if mu.dim != 1:
        raise ValueError("quantile route requires dimension 1")
    if p < 1:
        raise ValueError("p must be >= 1")
    x, wx = mu.points_array().ravel(), mu.weights_array()
    y, wy = nu.points_array().ravel(), nu.weights_array()
    cx, cy = np.cumsum(wx), np.cumsum(wy)
    cx[-1] = cy[-1] = 1.0
    breaks = np.unique(np.concatenate(([0.0], cx, cy)))
    total = 0.0
    for u0, u1 in zip(breaks[:-1], breaks[1:]):
        mid = 0.5 * (u0 + u1)
        xm = x[np.searchsorted(cx, mid, side="left")]
        ym = y[np.searchsorted(cy, mid, side="left")]
        total += (u1 - u0) * abs(xm - ym) ** p
    return total ** (1.0 / p)


def _min_cost_transport(mu: DiscreteDistribution, nu: DiscreteDistribution,
                        cost: np.ndarray) -> float:
    """Exact minimum of sum pi_ij c_ij over couplings, by network simplex.

    Masses are quantized to the common denominator; costs are converted to
    integers *exactly* (a float is a dyadic rational, so a single power-of-two
    rescaling loses nothing even when the cost matrix spans hundreds of orders
    of magnitude). All arithmetic is arbitrary-precision integer.
    """
    if not np.isfinite(cost).all():
        raise ValueError("transport cost overflowed; reduce the order or shifts")
    if float(cost.max()) <= 0.0:
        return 0.0
    w_units = _quantize(mu.weights_array())
    v_units = _quantize(nu.weights_array())
    fracs = [Fraction(float(c)) for c in cost.ravel()]
    denom = max(f.denominator for f in fracs)  # powers of two, so max = lcm
    cost_units = [f.numerator * (denom // f.denominator) for f in fracs]
    graph = nx.DiGraph()
    n, m = cost.shape
    for i in range(n):
        graph.add_node(("a", i), demand=-w_units[i])
    for j in range(m):
        graph.add_node(("b", j), demand=v_units[j])
    for i in range(n):
        base = i * m
        for j in range(m):
            graph.add_edge(("a", i), ("b", j), weight=cost_units[base + j])
    objective, _ = nx.network_simplex(graph)
    return float(Fraction(objective, denom * _MASS_SCALE))


def _check_cap(mu: DiscreteDistribution, nu: DiscreteDistribution, cap: int | None):
    cap = DEFAULT_ATOM_CAP if cap is None else cap
    if mu.n_atoms > cap or nu.n_atoms > cap:
        raise AtomCapExceeded(
            f"instance has {mu.n_atoms}x{nu.n_atoms} atoms, cap is {cap} per side; "
            "use the 1-d quantile route or subsample")


def wasserstein_p(mu: DiscreteDistribution, nu: DiscreteDistribution, p: float,
                  norm: str = "l2", cap: int | None = None) -> float:
    """Exact p-Wasserstein distance by minimum-cost transport with cost
    ||x - y||^p; returns the objective to the power 1/p."""
    _check_dims(mu, nu)
    if p < 1:
        raise ValueError("p must be >= 1")
    _check_cap(mu, nu, cap)
    cost = _distance_matrix(mu, nu, norm) ** p
    return _min_cost_transport(mu, nu, cost) ** (1.0 / p)


def noise_aware_cost(mu: DiscreteDistribution, nu: DiscreteDistribution,
                     noise: NoiseSpec, q: float, alpha: float,
                     cap: int | None = None) -> float:
    """Minimum over couplings of E[exp(q(alpha-1) D(noise, noise shifted by
    X-Y))] at divergence order q(alpha-1)+1. Always >= 1; the log divided by
    q(alpha-1) is a privacy budget."""
    _check_dims(mu, nu)
    if q < 1:
        raise ValueError("q must be >= 1")
    if not (alpha > 1 and math.isfinite(alpha)):
        raise ValueError("alpha must be finite and exceed 1")
    if noise.dim != mu.dim:
        raise ValueError(f"noise dimension {noise.dim} does not match atoms ({mu.dim})")
    _check_cap(mu, nu, cap)
    order = q * (alpha - 1) + 1
    if noise.family == "gcauchy":
        _legendre_index(noise.k, order)  # integrality of the bound index
    xs, ys = mu.points_array(), nu.points_array()
    cost = np.empty((mu.n_atoms, nu.n_atoms))
    for i in range(mu.n_atoms):
        for j in range(nu.n_atoms):
            div = shifted_noise_divergence(noise, xs[i] - ys[j], order)
            cost[i, j] = math.exp(q * (alpha - 1) * div) if div < 700 else math.inf
    if not np.isfinite(cost).all():
        raise ValueError("transport cost overflowed; reduce the order or shifts")
    return _min_cost_transport(mu, nu, cost)


def framework_sensitivity(fw: Framework, *,
                          norm: str = "l2",
                          delta: float | None = None,
                          p_list: Sequence[float] | None = None,
                          noise_aware: tuple[NoiseSpec, float, float] | None = None,
                          delta_group: float | None = None,
                          cap: int | None = None) -> SensitivityReport:
    """Maximize each requested per-pair sensitivity over the secret pairs.

    The evaluation order never affects the returned maxima. W_p uses the
    exact quantile route in one dimension and min-cost transport otherwise.
    """
    delta_g = max(wasserstein_inf(p.left, p.right, norm) for p in fw.pairs)
    delta_g_delta = None
    if delta is not None:
        value = max(proximity_threshold(p.left, p.right, delta, norm) for p in fw.pairs)
        delta_g_delta = (delta, value)
    w_p = None
    if p_list:
        w_p = tuple(
            (p, max((wasserstein_p_1d(sp.left, sp.right, p) if fw.dim == 1
                     else wasserstein_p(sp.left, sp.right, p, norm, cap))
                    for sp in fw.pairs))
            for p in p_list)
    delta_g_zeta = None
    if noise_aware is not None:
        noise, q, alpha = noise_aware
        value = max(noise_aware_cost(p.left, p.right, noise, q, alpha, cap) for p in fw.pairs)
        delta_g_zeta = (q, alpha, value)
    return SensitivityReport(delta_g=delta_g, delta_group=delta_group,
                             delta_g_delta=delta_g_delta, delta_g_zeta=delta_g_zeta,
                             w_p=w_p)
