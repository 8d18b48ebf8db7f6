import math

import numpy as np
import pytest

from pfkit.core import SecretPair, conditioned_query_distribution, make_distribution
from pfkit.priors import (GaussianPrior, diffusion_sensitivity,
                          gaussian_attribute_sensitivity,
                          weak_dependence_bound)
from pfkit.transport import wasserstein_inf


def _prior(cov):
    cov = np.asarray(cov, dtype=float)
    m = cov.shape[0]
    return GaussianPrior(mean=(0.0,) * m, cov=tuple(map(tuple, cov)),
                         n_records=10, n_attributes=m)


class TestGaussianAttribute:
    def test_uncorrelated_attributes(self):
        prior = _prior(np.eye(3))
        assert gaussian_attribute_sensitivity(prior, [[1, 0, 0]], [[0, 1, 0]], 1.0) == 0.0

    def test_scalar_correlation(self):
        rho = -0.35
        prior = _prior([[1.0, rho], [rho, 1.0]])
        got = gaussian_attribute_sensitivity(prior, [[1, 0]], [[0, 1]], 1.0)
        assert got == pytest.approx(abs(rho), rel=1e-12)

    def test_linear_in_diameter(self, rng):
        a = rng.normal(size=(3, 3))
        prior = _prior(a @ a.T + np.eye(3))
        M, N = [[1.0, 0, 0]], [[0, 0, 1.0]]
        one = gaussian_attribute_sensitivity(prior, M, N, 1.0)
        assert gaussian_attribute_sensitivity(prior, M, N, 2.5) == pytest.approx(2.5 * one)

    def test_rotation_invariance(self, rng):
        a = rng.normal(size=(3, 3))
        cov = a @ a.T + np.eye(3)
        M = rng.normal(size=(1, 3))
        N = rng.normal(size=(2, 3))
        base = gaussian_attribute_sensitivity(_prior(cov), M, N, 1.0)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        rotated = gaussian_attribute_sensitivity(_prior(q @ cov @ q.T), M @ q.T, N @ q.T, 1.0)
        assert rotated == pytest.approx(base, rel=1e-9)

    def test_bound_covers_discretized_conditionals(self, rng):
        # scalar release/secret: the two conditional laws are translates, so a
        # shared quantile grid reproduces their distance exactly
        from scipy.stats import norm
        for _ in range(5):
            a = rng.normal(size=(3, 3))
            cov = a @ a.T + 0.5 * np.eye(3)
            i, j = 2, 0
            a_val, b_val = rng.normal(size=2)
            mean_shift = cov[j, i] / cov[i, i] * (b_val - a_val)
            cond_var = cov[j, j] - cov[j, i] ** 2 / cov[i, i]
            grid = np.linspace(0.001, 0.999, 400)
            atoms_a = norm.ppf(grid, loc=0.0, scale=math.sqrt(cond_var))
            atoms_b = atoms_a + mean_shift
            w = wasserstein_inf(make_distribution([[x] for x in atoms_a]),
                                make_distribution([[x] for x in atoms_b]))
            M = [[0.0] * 3]
            M[0][j] = 1.0
            N = [[0.0] * 3]
            N[0][i] = 1.0
            bound = gaussian_attribute_sensitivity(_prior(cov), M, N, abs(b_val - a_val))
            assert bound >= w * 0.95

    def test_singular_secret_map(self):
        prior = _prior(np.eye(2))
        with pytest.raises(ValueError):
            gaussian_attribute_sensitivity(prior, [[1, 0]], [[0, 0]], 1.0)


class TestDiffusion:
    def test_single_timestamp(self):
        assert diffusion_sensitivity(1, 1, 0.5, [1]) == pytest.approx(math.exp(-1))

    def test_time_zero(self):
        assert diffusion_sensitivity(2, 3, 0.5, [0]) == pytest.approx(6.0)

    def test_forgets_initial_point(self):
        assert diffusion_sensitivity(1, 1, 1, [50, 60]) == pytest.approx(0.0, abs=1e-40)

    def test_monotone_and_additive(self, rng):
        for _ in range(20):
            c1, c2 = sorted(rng.uniform(0.1, 2, size=2))
            ts = rng.uniform(0, 3, size=4).tolist()
            assert (diffusion_sensitivity(1, 1, c2, ts)
                    <= diffusion_sensitivity(1, 1, c1, ts) + 1e-12)
            split = (diffusion_sensitivity(1, 1, c1, ts[:2])
                     + diffusion_sensitivity(1, 1, c1, ts[2:]))
            assert diffusion_sensitivity(1, 1, c1, ts) == pytest.approx(split, rel=1e-12)
            bumped = [t + 0.5 for t in ts]
            assert (diffusion_sensitivity(1, 1, c1, bumped)
                    <= diffusion_sensitivity(1, 1, c1, ts))


class TestWeakDependence:
    def test_independent_data(self):
        assert weak_dependence_bound(0, 1) == 1.0

    def test_substitution(self):
        assert weak_dependence_bound(0.5, 1) == 2.0

    def test_bound_on_enumerated_frameworks(self, rng):
        # correlated two-record priors: lambda measured against the product of
        # marginals, Delta enumerated, exact worst distance within the bound
        for _ in range(25):
            xs = ys = [0.0, 1.0, 2.5]
            joint = rng.random((3, 3)) + 0.05
            joint /= joint.sum()
            outcomes = [(x, y) for x in xs for y in ys]
            weights = [joint[i, j] for i in range(3) for j in range(3)]
            query = lambda xy: xy[0] + xy[1]
            marg_x = joint.sum(axis=1)
            marg_y = joint.sum(axis=0)
            product_weights = [marg_x[i] * marg_y[j] for i in range(3) for j in range(3)]

            def conds(ws):
                out = []
                for idx, vals in ((0, xs), (1, ys)):
                    for a in vals:
                        out.append(conditioned_query_distribution(
                            outcomes, ws, lambda xy, idx=idx, a=a: xy[idx] == a, query))
                return out

            correlated = conds(weights)
            independent = conds(product_weights)
            lam = max(wasserstein_inf(c, i) for c, i in zip(correlated, independent))
            delta_classical = max(xs) - min(xs)  # one-coordinate change of the sum
            exact = max(wasserstein_inf(a, b)
                        for a in correlated for b in correlated)
            assert exact <= weak_dependence_bound(lam, delta_classical) + 1e-9
