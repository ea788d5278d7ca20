import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from quenched_clt.clt import (EmpiricalDistribution, covariance_by_polarization, direct_covariance,
                              gaussian_scale_distance, kolmogorov_distance, polarization_rate_check,
                              triangle_report, wasserstein_distance, wbar_distribution, wbar_path)
from quenched_clt.errors import ContractError
from quenched_clt.maps import Ensemble, MapSystem, OmegaSequence
from quenched_clt.observables import Constant, Cosine, Sine, Stacked
from quenched_clt.quenched import quenched_variance
from quenched_clt.selection import SelectionProcess, sample_omega

f = Cosine(1)
T23 = MapSystem.beta((2.0, 3.0))
CHAIN = SelectionProcess.markov(((0.9, 0.1), (0.1, 0.9)))


def test_wbar_is_centered_and_constant_is_point_mass():
    om = sample_omega(CHAIN, 20, 1)
    ens = Ensemble.sample(3000, 1)
    law = wbar_distribution(T23, om, f, ens, 20)
    assert abs(law.mean()) < 1e-12
    point = wbar_distribution(T23, om, Constant(1.5), ens, 20)
    assert np.allclose(point.values, 0.0, atol=1e-12) and kolmogorov_distance(point, 0.0) == 0.0


def test_wbar_n1_grid_is_cosine_law():
    ens = Ensemble.grid(1024)
    law = wbar_distribution(MapSystem.doubling(), OmegaSequence(np.zeros(1, dtype=int)), f, ens, 1)
    c = np.cos(2 * np.pi * ens.points)
    expanded = np.repeat(law.values, np.rint(law.weights * 1024).astype(int))
    assert np.allclose(expanded, np.sort(c - c.mean()), atol=1e-12)


def test_wbar_path_matches_single_horizons():
    om = sample_omega(CHAIN, 30, 2)
    ens = Ensemble.sample(500, 2)
    path = wbar_path(T23, om, f, ens, [3, 17, 30])
    for n in (3, 17, 30):
        single = wbar_distribution(T23, om, f, ens, n)
        assert np.allclose(path[n].values, single.values, atol=1e-13)


def test_kolmogorov_matches_scipy():
    x = np.random.default_rng(1).normal(size=10000)
    d = kolmogorov_distance(EmpiricalDistribution.from_samples(x), 1.0)
    assert d == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-12)
    assert d <= 0.02


def test_kolmogorov_quantile_grid():
    m = 2000
    x = stats.norm.ppf((np.arange(m) + 0.5) / m)
    assert kolmogorov_distance(EmpiricalDistribution.from_samples(x), 1.0) <= 1 / (2 * m) + 1e-12


def test_wasserstein_matches_scipy_on_fine_normal_grid():
    x = np.random.default_rng(2).normal(0.3, 1.2, size=400)
    d = wasserstein_distance(EmpiricalDistribution.from_samples(x), 1.0)
    ref = stats.norm.ppf((np.arange(200000) + 0.5) / 200000)
    assert d == pytest.approx(stats.wasserstein_distance(x, ref), abs=2e-4)
    assert wasserstein_distance(EmpiricalDistribution.from_samples([0.0, 0.0]), 0.0) == 0.0


def test_gaussian_scale_distance():
    assert gaussian_scale_distance(1.3, 1.3).distance == 0.0
    sd = gaussian_scale_distance(1.0, 2.0)
    xs = np.linspace(0, 10, 200001)
    brute = np.max(np.abs(stats.norm.cdf(xs) - stats.norm.cdf(xs / 2)))
    assert sd.distance == pytest.approx(brute, abs=1e-6)
    assert sd.distance == pytest.approx(0.161337, abs=1e-6)
    with pytest.raises(ContractError):
        gaussian_scale_distance(0.0, 1.0)


@given(a=st.floats(0.5, 2.0), step=st.floats(-0.099, 0.099))
@settings(max_examples=50, deadline=None)
def test_scale_distance_locally_lipschitz(a, step):
    b = a + step
    if b <= 0 or b == a:
        return
    sd = gaussian_scale_distance(a, b)
    assert math.isfinite(sd.lipschitz_ratio) and sd.lipschitz_ratio < 1.0


def test_triangle_report_doubling():
    rep = triangle_report(MapSystem.doubling(2), SelectionProcess.iid((0.5, 0.5)), f,
                          Ensemble.grid(2 ** 16), [2, 4, 8, 12], 0.5, seed=1)
    assert rep.min_residual >= -1e-12
    d = [r.d_total for r in rep.rows]
    assert all(b < a for a, b in zip(d, d[1:]))
    assert triangle_report(T23, CHAIN, Constant(1.0), Ensemble.sample(100, 0), [2, 4], 0.0, 0).degenerate


def test_polarization_identities():
    om = sample_omega(CHAIN, 10, 3)
    ens = Ensemble.sample(2000, 3)
    vec = Stacked((Cosine(1), Sine(1)))
    pol = covariance_by_polarization(T23, om, vec, ens, 10)
    assert np.max(np.abs(pol.matrix - direct_covariance(T23, om, vec, ens, 10))) < 1e-9
    assert np.array_equal(pol.matrix, pol.matrix.T) and pol.is_psd()
    one = covariance_by_polarization(T23, om, Cosine(1), ens, 10)
    assert one.matrix[0, 0] == pytest.approx(quenched_variance(T23, om, f, ens, 10), abs=1e-12)
    dup = covariance_by_polarization(T23, om, Stacked((Cosine(1), Cosine(1))), ens, 10).matrix
    assert np.allclose(dup, dup[0, 0], atol=1e-12)


def test_polarization_on_doubling_grid():
    om = sample_omega(SelectionProcess.iid((0.5, 0.5)), 8, 0)
    cov = covariance_by_polarization(MapSystem.doubling(2), om, Stacked((Cosine(1), Sine(1))),
                                     Ensemble.grid(2 ** 16), 8).matrix
    assert np.allclose(cov, 0.5 * np.eye(2), atol=1e-10)


def test_polarization_rate_check_runs():
    chk = polarization_rate_check(T23, CHAIN, Stacked((Cosine(1), Sine(1))), Ensemble.sample(2000, 4),
                                  [16, 32, 64, 128], 8, seed=4)
    assert chk.matrix_error.shape == (4,) and len(chk.pair_exponents) == 3
