import math

import numpy as np
import pytest

from pfkit.core import DiscreteDistribution, conditioned_query_distribution


def gaussian_density(mu: float, sigma: float):
    c = 1.0 / (sigma * math.sqrt(2 * math.pi))
    return lambda x: c * math.exp(-((x - mu) ** 2) / (2 * sigma * sigma))


def laplace_density(mu: float, scale: float):
    return lambda x: math.exp(-abs(x - mu) / scale) / (2 * scale)


def gen_cauchy_density(k: float, lam: float, shift: float = 0.0):
    from pfkit.divergences import gen_cauchy_normalizer
    beta = gen_cauchy_normalizer(k, lam)
    return lambda x: beta * (1.0 + (lam * (x - shift)) ** 2) ** (-k / 2)


def binary_pair_conditionals(p: float, rho: float) -> tuple[DiscreteDistribution, ...]:
    """Counting-query conditionals for two correlated binary records.

    Joint of (X1, X2) with equal marginals p and correlation rho; query
    X1 + X2; returns the four conditionals given X1=1, X1=0, X2=1, X2=0.
    """
    cov = rho * p * (1 - p)
    joint = {(1, 1): p * p + cov,
             (1, 0): p * (1 - p) - cov,
             (0, 1): p * (1 - p) - cov,
             (0, 0): (1 - p) ** 2 + cov}
    assert all(v >= -1e-15 for v in joint.values())
    outcomes = [xy for xy, w in joint.items() if w > 0]
    weights = [joint[xy] for xy in outcomes]
    query = lambda xy: xy[0] + xy[1]
    return tuple(
        conditioned_query_distribution(outcomes, weights,
                                       lambda xy, i=i, a=a: xy[i] == a, query)
        for i, a in ((0, 1), (0, 0), (1, 1), (1, 0)))


def salary_conditionals(query) -> dict[float, DiscreteDistribution]:
    """Sum/average-query conditionals for the two-record salary prior with
    marginal {1: 0.5, 2: 0.499, 100: 0.001}, records independent."""
    marginal = {1.0: 0.5, 2.0: 0.499, 100.0: 0.001}
    outcomes = [(a, b) for a in marginal for b in marginal]
    weights = [marginal[a] * marginal[b] for a, b in outcomes]
    return {a: conditioned_query_distribution(outcomes, weights,
                                              lambda xy, a=a: xy[0] == a, query)
            for a in marginal}


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        print(f"\n[{'PASS' if report.passed else 'FAIL'}] {name}", flush=True)
    elif report.when == "setup" and report.skipped:
        print(f"\n[SKIP] {name}", flush=True)
