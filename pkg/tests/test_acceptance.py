"""Acceptance gate: one test per criterion, each at its stated tolerance.

The conftest hook prints a [PASS]/[FAIL]/[SKIP] line per criterion. The
Table-1 reproduction needs user-fetched UCI CSVs (see scripts/prepare_uci.py
and the README recipe) and is skipped with a notice when they are absent.
"""
import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

import _oracles as oracles
from conftest import (binary_pair_conditionals, gaussian_density,
                      gen_cauchy_density, laplace_density, salary_conditionals)
from pfkit.cli import AnalysisConfig, run_analysis
from pfkit.core import (Framework, SecretPair, conditioned_query_distribution,
                        gaussian_noise, gen_cauchy_noise, laplace_noise,
                        make_distribution)
from pfkit.divergences import (gaussian_shift_divergence,
                               gen_cauchy_shift_bound,
                               laplace_shift_divergence,
                               numeric_renyi_divergence, shift_envelope)
from pfkit.mechanisms import (approx_gaussian_mechanism, gaussian_mechanism,
                              laplace_mechanism, sample)
from pfkit.pabi import (PabiSchedule, SgdParams, allocation_naive,
                        independent_prior_bound, privacy_loss_curve,
                        uniform_allocation_bound)
from pfkit.transport import (framework_sensitivity, noise_aware_cost,
                             proximity_threshold, wasserstein_inf,
                             wasserstein_p, wasserstein_p_1d)

SEED = 987654321


def elapsed_under(t0: float, budget: float, label: str):
    dt = time.monotonic() - t0
    assert dt < budget, f"{label} took {dt:.1f}s, budget {budget}s"


def test_criterion_01_closed_forms_match_quadrature():
    t0 = time.monotonic()
    rng = np.random.default_rng(SEED)
    for _ in range(50):
        scale = float(rng.uniform(0.3, 2.5))
        z = float(rng.uniform(0.0, 2.5 * scale))
        alpha = float(rng.uniform(1.2, 6.0))
        half = 50 * scale + 4 * alpha * z
        got = numeric_renyi_divergence(gaussian_density(z, scale), gaussian_density(0, scale),
                                       alpha, (-half, half), breakpoints=[0, z, alpha * z])
        assert got == pytest.approx(gaussian_shift_divergence(scale, z, alpha), abs=1e-6)
        got = numeric_renyi_divergence(laplace_density(z, scale), laplace_density(0, scale),
                                       alpha, (-half, half), breakpoints=[0, z])
        assert got == pytest.approx(laplace_shift_divergence(scale, z, alpha), abs=1e-6)
    elapsed_under(t0, 5.0, "criterion 1")


def test_criterion_02_cauchy_bound_validity_and_small_shift_gap():
    t0 = time.monotonic()
    rng = np.random.default_rng(SEED + 1)
    for _ in range(50):
        k = float(rng.choice([2.0, 4.0, 6.0]))
        j = int(rng.integers(1, 6))
        alpha = 1.0 + 2 * j / k
        lam = float(rng.uniform(0.5, 2.0))
        z = float(rng.uniform(0.0, 3.0 / lam))
        bound = gen_cauchy_shift_bound(k, lam, z, alpha)
        numeric = numeric_renyi_divergence(gen_cauchy_density(k, lam, shift=z),
                                           gen_cauchy_density(k, lam), alpha,
                                           (-np.inf, np.inf), breakpoints=[0, z])
        assert numeric <= bound + 1e-9
    # tightness near zero shift: checked at k=2 where the bound's constant is
    # exactly 1 (for k > 2 the intrinsic factor beta*pi/lam > 1 makes a 0.05
    # gap unreachable at small alpha; see the decisions ledger)
    for _ in range(15):
        j = int(rng.integers(1, 5))
        alpha = 1.0 + j
        lam = float(rng.uniform(0.5, 2.0))
        z = float(rng.uniform(0.01, 0.1)) / lam     # dimensionless shift <= 0.1
        bound = gen_cauchy_shift_bound(2.0, lam, z, alpha)
        numeric = numeric_renyi_divergence(gen_cauchy_density(2.0, lam, shift=z),
                                           gen_cauchy_density(2.0, lam), alpha,
                                           (-np.inf, np.inf), breakpoints=[0, z])
        assert numeric <= bound + 1e-9
        assert bound - numeric < 0.05
    elapsed_under(t0, 10.0, "criterion 2")


def test_criterion_03_transport_matches_exhaustive_oracles():
    t0 = time.monotonic()
    rng = np.random.default_rng(SEED + 2)
    for case in range(200):
        mu = oracles.random_distribution(rng, max_atoms=10, scale=1.5)
        nu = oracles.random_distribution(rng, max_atoms=10, scale=1.5)
        norm = "l2"
        assert wasserstein_inf(mu, nu, norm) == pytest.approx(
            oracles.threshold_scan(mu, nu, 0.0, norm), rel=1e-9, abs=1e-12)
        delta = float(rng.uniform(0.02, 0.4))
        assert proximity_threshold(mu, nu, delta, norm) == pytest.approx(
            oracles.threshold_scan(mu, nu, delta, norm), rel=1e-9, abs=1e-12)
        p = float(rng.uniform(1.0, 4.0))
        assert wasserstein_p(mu, nu, p, norm) == pytest.approx(
            oracles.lp_wasserstein_p(mu, nu, p, norm), rel=1e-9, abs=1e-12)
        if case % 2 == 0:
            noise = gaussian_noise(float(rng.uniform(1.0, 2.0)))
            q, alpha = 1.0, float(rng.uniform(1.5, 2.0))
        else:
            noise = laplace_noise(float(rng.uniform(1.0, 2.0)))
            q, alpha = float(rng.uniform(1.0, 1.2)), float(rng.uniform(1.5, 2.0))
        cost = _noise_cost_matrix(mu, nu, noise, q, alpha)
        assert noise_aware_cost(mu, nu, noise, q, alpha) == pytest.approx(
            oracles.lp_min_cost(mu, nu, cost), rel=1e-9)
    elapsed_under(t0, 30.0, "criterion 3")


def _noise_cost_matrix(mu, nu, noise, q, alpha):
    from pfkit.divergences import shifted_noise_divergence
    order = q * (alpha - 1) + 1
    return np.array([[math.exp(q * (alpha - 1)
                               * shifted_noise_divergence(noise, x - y, order))
                      for y in nu.points_array()] for x in mu.points_array()])


def test_criterion_04_correlated_count_example():
    flags = []
    for rho in (0.0, 0.25, 0.5, 1.0):
        conds = binary_pair_conditionals(0.5, rho)
        pairs = tuple(SecretPair(a, b) for i, a in enumerate(conds)
                      for b in conds[i + 1:])
        report = framework_sensitivity(Framework(pairs), p_list=[2])
        w2 = report.w_p[0][1]
        assert w2 == pytest.approx(math.sqrt(1 + 3 * rho), abs=1e-9), \
            f"W_2 identity fails at rho={rho}"
        if rho > 0:
            assert report.delta_g == 2.0
        else:
            # exact boundary case: at rho = 0 the conditionals are unit
            # translates and the worst-case distance is provably 1, not 2
            assert report.delta_g == 1.0
            flags.append(f"rho={rho}: delta_g={report.delta_g} (headline value 2 "
                         "holds only for rho > 0)")
    for line in flags:
        print(f"  flagged: {line}")


def test_criterion_05_salary_example_sum_query():
    cond = salary_conditionals(lambda xy: xy[0] + xy[1])
    # worst-case distance of the (2, 100) secret pair under the sum query
    assert wasserstein_inf(cond[2.0], cond[100.0]) == 98.0
    # the delta relaxation hides the rare atom for the adjacent (1, 2) pair
    assert proximity_threshold(cond[1.0], cond[2.0], 3e-3) == 1.0
    # documented discrepancy: the full pair family peaks at 99 via (1, 100),
    # and the average query halves every value
    assert wasserstein_inf(cond[1.0], cond[100.0]) == 99.0
    avg = salary_conditionals(lambda xy: (xy[0] + xy[1]) / 2)
    assert wasserstein_inf(avg[2.0], avg[100.0]) == 49.0
    print("  flagged: framework max is 99 via the (1,100) pair; 98 is the "
          "(2,100) pair; average query gives 49")


UCI_ENV = "PFKIT_UCI_DIR"
UCI_FILES = {"student": "student.csv", "heart": "heart.csv", "adult": "adult.csv"}


def _uci_path(name: str) -> str:
    root = os.environ.get(UCI_ENV)
    if not root:
        pytest.skip(f"Table-1 reproduction skipped: set {UCI_ENV} to a directory "
                    "holding the prepared UCI CSVs (see scripts/prepare_uci.py "
                    "and README for the exact recipe)")
    path = Path(root) / UCI_FILES[name]
    if not path.exists():
        pytest.skip(f"Table-1 reproduction skipped: {path} missing "
                    "(run scripts/prepare_uci.py on the raw UCI downloads)")
    return str(path)


def test_criterion_06_table1_reproduction():
    t0 = time.monotonic()
    student = run_analysis(AnalysisConfig(
        input_path=_uci_path("student"), value_column="G3", secret_column="paid",
        p_list=(2.0,), value_min=0.0, value_max=20.0))
    s = student["sensitivities"]
    assert s["delta"] == 20.0 and s["delta_qualifier"] == "exact"
    assert s["delta_g"] == 8.0
    assert s["wp"][0]["value"] == pytest.approx(2.76, abs=0.01)

    heart = run_analysis(AnalysisConfig(
        input_path=_uci_path("heart"), value_column="age", secret_column="num",
        p_list=(2.0,)))
    h = heart["sensitivities"]
    # the printed DP sensitivity ">=100" is a prior-domain declaration; the
    # observed age range is far smaller, so only the open-ended qualifier is
    # reproducible from the data (documented residual gap)
    assert h["delta_qualifier"] == "at-least"
    assert h["delta_g"] == 8.0
    assert h["wp"][0]["value"] == pytest.approx(7.80, abs=0.01)

    adult = run_analysis(AnalysisConfig(
        input_path=_uci_path("adult"), value_column="salary", secret_column="race",
        p_list=(2.0,), value_min=0.0, value_max=1.0))
    a = adult["sensitivities"]
    assert a["delta"] == 1.0
    assert a["delta_g"] == 1.0
    assert a["wp"][0]["value"] == pytest.approx(0.42, abs=0.01)
    elapsed_under(t0, 60.0, "criterion 6")


def test_criterion_07_iteration_closed_forms():
    t0 = time.monotonic()
    # closed form on the full (T, i) grid
    for T in range(1, 51):
        for i in range(1, T + 1):
            got = independent_prior_bound(1.0, 1.0, 2.0, T=T, i=i, eta=0.1)
            assert got == 2 * 2 * 1 / (1 * (T - i + 1))
    # uniform allocation dominates the naive one on nonincreasing schedules
    rng = np.random.default_rng(SEED + 7)
    noise = gaussian_noise(1.0)
    for _ in range(100):
        T = int(rng.integers(1, 15))
        shifts = tuple(np.sort(rng.uniform(0, 2, size=T))[::-1])
        uniform = uniform_allocation_bound(shifts, noise, 2.0)
        naive = PabiSchedule(shifts, allocation_naive(shifts), (noise,), 2.0)
        assert uniform <= pabi_bound_of(naive) + 1e-12
    # unit-parameter curves
    params = SgdParams(L=1, eta=1, sigma=1, beta_smooth=1, c_sup=1, diff_ab=(1.0,))
    curve = privacy_loss_curve([1.0] * 100, params, 2.0, mode="improved")
    assert all(loss == float(T) for T, loss in curve)
    rho = [1.0 / t ** 2 for t in range(1, 101)]
    curve = privacy_loss_curve(rho, params, 2.0, mode="improved")
    direct = math.fsum(rho) ** 2 / 100
    assert curve[-1][1] == pytest.approx(direct, abs=1e-6)
    assert direct == pytest.approx(0.02673, abs=5e-5)
    elapsed_under(t0, 5.0, "criterion 7")


def pabi_bound_of(schedule):
    from pfkit.pabi import pabi_bound
    return pabi_bound(schedule)


def _random_product_prior_framework(rng):
    """Two-record product prior, secrets on each record's value, query given
    by an enumerated table; returns (framework, group sensitivity)."""
    sizes = rng.integers(2, 4, size=2)
    supports = [np.sort(rng.uniform(-2, 2, size=n)).tolist() for n in sizes]
    marginals = [rng.random(n) + 0.1 for n in sizes]
    marginals = [m / m.sum() for m in marginals]
    table = {(x, y): float(rng.normal())
             for x in supports[0] for y in supports[1]}
    query = lambda xy: table[xy]
    outcomes = [(x, y) for x in supports[0] for y in supports[1]]
    weights = [marginals[0][i] * marginals[1][j]
               for i in range(sizes[0]) for j in range(sizes[1])]
    pairs = []
    for idx, support in enumerate(supports):
        conds = [conditioned_query_distribution(outcomes, weights,
                                                lambda xy, idx=idx, a=a: xy[idx] == a,
                                                query)
                 for a in support]
        pairs += [SecretPair(conds[i], conds[j])
                  for i in range(len(conds)) for j in range(i + 1, len(conds))]
    group = oracles.enumerate_group_sensitivity(supports, query)
    return Framework(tuple(pairs)), group


def test_criterion_08_utility_ordering_suites():
    t0 = time.monotonic()
    rng = np.random.default_rng(SEED + 8)
    # (a) the delta relaxation never exceeds the worst-case distance
    for _ in range(50):
        mu = oracles.random_distribution(rng, 8)
        nu = oracles.random_distribution(rng, 8)
        delta = float(rng.uniform(0.0, 0.5))
        assert (proximity_threshold(mu, nu, delta)
                <= wasserstein_inf(mu, nu) + 1e-12)
    # (b) the noise-aware budget never exceeds the envelope at the worst-case
    # distance (q = 1)
    for trial in range(50):
        mu = oracles.random_distribution(rng, 6, scale=0.6)
        nu = oracles.random_distribution(rng, 6, scale=0.6)
        alpha = float(rng.uniform(1.3, 2.5))
        noise = (gaussian_noise(float(rng.uniform(0.8, 2.0))) if trial % 2 == 0
                 else laplace_noise(float(rng.uniform(0.8, 2.0))))
        cost = noise_aware_cost(mu, nu, noise, 1.0, alpha)
        lhs = math.log(cost) / (alpha - 1)
        rhs = shift_envelope(noise, wasserstein_inf(mu, nu, noise.norm), alpha)
        assert lhs <= rhs + 1e-9
    # (c) product priors: framework sensitivity within the enumerated group
    # sensitivity, and the envelope chain orders the three budgets
    for _ in range(50):
        fw, group = _random_product_prior_framework(rng)
        report = framework_sensitivity(fw, delta=0.05, delta_group=group)
        assert report.delta_g <= group + 1e-9
        noise = gaussian_noise(1.0)
        chain = (shift_envelope(noise, report.delta_g_delta[1], 2.0),
                 shift_envelope(noise, report.delta_g, 2.0),
                 shift_envelope(noise, group, 2.0))
        assert chain[0] <= chain[1] + 1e-12 <= chain[2] + 1e-12
    elapsed_under(t0, 20.0, "criterion 8")


def test_criterion_09_calibration_round_trips():
    rng = np.random.default_rng(SEED + 9)
    for _ in range(50):
        delta_g = float(rng.uniform(0.05, 5))
        alpha = float(rng.uniform(1.2, 8))
        eps = float(rng.uniform(0.05, 4))
        gauss = gaussian_mechanism(delta_g, alpha, eps, 2)
        assert shift_envelope(gauss.noise, delta_g, alpha) == pytest.approx(
            eps, abs=1e-12, rel=1e-12)
        lap = laplace_mechanism(delta_g, 2, epsilon_pp=eps)
        assert shift_envelope(lap.noise, delta_g, math.inf) == pytest.approx(
            eps, abs=1e-12, rel=1e-12)
    # continuity: the approximate calibration converges to the exact one
    exact = gaussian_mechanism(1.7, 2.0, 0.9, 1)
    approx = approx_gaussian_mechanism(1.7, 2.0, 0.9, 1e-12, 1)
    assert approx.noise.sigma ** 2 == pytest.approx(exact.noise.sigma ** 2, abs=1e-9)


def test_criterion_10_sampler_statistics():
    t0 = time.monotonic()
    n = 100_000
    gauss = sample(gaussian_noise(1.0, 1), seed=101, n=n).ravel()
    assert abs(gauss.mean()) < 4 / math.sqrt(n)
    assert gauss.var() == pytest.approx(1.0, rel=0.05)
    b = 1.8
    lap = sample(laplace_noise(b, 1), seed=103, n=n).ravel()
    assert np.abs(lap).mean() == pytest.approx(b, rel=0.05)
    heavy = sample(gen_cauchy_noise(2, 1.0, 1), seed=107, n=n).ravel()
    assert abs(np.median(heavy)) < 0.02
    elapsed_under(t0, 10.0, "criterion 10")
