import numpy as np
import pytest

from quenched_clt.errors import ContractError, DataError, UnsupportedError
from quenched_clt.limit_variance import (DoubledEnsemble, classical_green_kubo_split,
                                         compare_routes, estimate_Vk, green_kubo_doubled,
                                         growth_data, past_pushforward_diagnostic,
                                         positivity_check, sigma_sq_series, uniformity_distance,
                                         z_variance)
from quenched_clt.maps import Ensemble, MapSystem, OmegaSequence, push_ensemble
from quenched_clt.observables import Coboundary, Constant, Cosine
from quenched_clt.rates import PowerLaw
from quenched_clt.selection import SelectionProcess, sample_omega

f = Cosine(1)
DOUBLING = MapSystem.doubling(2)
COIN = SelectionProcess.iid((0.5, 0.5))
GRID = Ensemble.grid(2 ** 16)


def test_vk_terms_on_doubling_grid():
    assert estimate_Vk(DOUBLING, COIN, f, GRID, 0, 6, 4, seed=1).value == pytest.approx(0.5, abs=1e-12)
    v3 = estimate_Vk(DOUBLING, COIN, f, GRID, 3, 6, 4, seed=1)
    assert v3.value == pytest.approx(0.0, abs=1e-12)
    assert v3.value_half_burn_in == pytest.approx(0.0, abs=1e-12)


def test_constant_observable_gives_zero_everywhere():
    c = Constant(2.0)
    assert estimate_Vk(DOUBLING, COIN, c, GRID, 2, 4, 3, seed=0).value == 0.0
    assert sigma_sq_series(DOUBLING, COIN, c, GRID, 3, seed=0, K=3, burn_in_i=4).sigma_sq == 0.0
    paired = DoubledEnsemble.product(Ensemble.grid(2 ** 10))
    assert green_kubo_doubled(DOUBLING, COIN, c, paired, 2, 4, 3, seed=0).sigma_sq == 0.0
    assert z_variance(DOUBLING, sample_omega(COIN, 4, 0), c, paired, 4) == 0.0


def test_series_doubling_with_tail_bound():
    est = sigma_sq_series(DOUBLING, COIN, f, GRID, 4, seed=2, K=4, burn_in_i=8,
                          eta=PowerLaw(0.5, 2.0))
    assert est.sigma_sq == pytest.approx(0.5, abs=1e-12)
    assert est.tail_bound == pytest.approx(2 * 0.5 * sum(k ** -2.0 for k in range(5, 10 ** 6)), rel=1e-5)
    assert est.bound_violations == ()


def test_series_chooses_K_from_n():
    est = sigma_sq_series(DOUBLING, COIN, f, GRID, 2, seed=2, n_for_K=16, psi=2, zeta=2)
    assert est.truncation_K == 4 and est.burn_in_i == 8


def test_doubled_route_and_swap_symmetry():
    paired = DoubledEnsemble.product(Ensemble.grid(2 ** 10))
    a = green_kubo_doubled(DOUBLING, COIN, f, paired, 2, 4, 4, seed=3)
    b = green_kubo_doubled(DOUBLING, COIN, f, paired.swapped(), 2, 4, 4, seed=3)
    assert a.sigma_sq == pytest.approx(0.5, abs=1e-12)
    assert a.sigma_sq == b.sigma_sq
    assert abs(a.mean_F) < 1e-12


def test_z_variance_identity():
    T = MapSystem.beta((2.0, 3.0))
    base = Ensemble.sample(200, 4)
    paired = DoubledEnsemble.product(base)
    om = sample_omega(SelectionProcess.markov(((0.9, 0.1), (0.1, 0.9))), 8, 4)
    from quenched_clt.quenched import quenched_variance
    for n in (1, 2, 4, 8):
        assert abs(z_variance(T, om, f, paired, n) - 2 * n * quenched_variance(T, om, f, base, n)) < 1e-9
    grid_pair = DoubledEnsemble.product(Ensemble.grid(2 ** 10))
    assert z_variance(DOUBLING, sample_omega(COIN, 1, 0), f, grid_pair, 1) == pytest.approx(1.0, abs=1e-8)
    coupled = DoubledEnsemble.coupled(Ensemble.sample(50, 1), Ensemble.sample(50, 1, 1))
    with pytest.raises(ContractError):
        z_variance(T, om, f, coupled, 2)


def test_classical_split_measure_preserving():
    split = classical_green_kubo_split(MapSystem.beta((2.0, 3.0)), SelectionProcess.iid((0.5, 0.5)),
                                       f, Ensemble.grid(2 ** 12), 2, 2, 4, seed=5)
    assert split.centering == pytest.approx(0.0, abs=1e-12)
    assert split.joint == pytest.approx(0.5, abs=1e-12)
    one = classical_green_kubo_split(DOUBLING, SelectionProcess.constant(2, 0), f, GRID, 2, 4, 3, seed=5)
    assert one.centering == 0.0


def test_classical_split_rejects_nonstationary():
    ams = SelectionProcess.ams_markov(((0.9, 0.1), (0.2, 0.8)), (1.0, 0.0))
    with pytest.raises(UnsupportedError):
        classical_green_kubo_split(DOUBLING, ams, f, GRID, 2, 2, 3, seed=0)


def test_routes_agree_on_beta_family():
    T = MapSystem.beta((2.0, 3.0))
    proc = SelectionProcess.iid((0.5, 0.5))
    ens = Ensemble.sample(4096, 9)
    vk = sigma_sq_series(T, proc, f, ens, 24, seed=9, K=4, burn_in_i=8)
    # standard errors only see the driving sequence, so the pair sample must be large
    pairs = DoubledEnsemble.coupled(Ensemble.sample(2 ** 17, 9, 1), Ensemble.sample(2 ** 17, 9, 2))
    gk = green_kubo_doubled(T, proc, f, pairs, 4, 8, 24, seed=9)
    split = classical_green_kubo_split(T, proc, f, ens, 4, 8, 24, seed=9).as_estimate()
    cmp = compare_routes([vk, gk, split])
    assert cmp.consistent, cmp.pairs


def test_positivity_verdicts():
    ens = Ensemble.sample(4096, 1)
    sched = [16, 32, 64, 128, 256]
    g = growth_data(DOUBLING, COIN, f, ens, sched, 6, seed=1)
    v = positivity_check(g.n, g.mean_var_sn, psi=2)
    assert v.verdict == "positive" and abs(v.exponent - 1) < 0.1 and abs(v.c - 0.5) < 0.05
    cob = Coboundary(f, MapSystem.doubling(), 0)
    g2 = growth_data(MapSystem.doubling(), SelectionProcess.constant(1, 0), cob, ens, sched, 1, seed=1)
    assert positivity_check(g2.n, g2.mean_var_sn, psi=2).verdict == "degenerate"
    flat = positivity_check([4, 8, 16, 32], [0.0] * 4, psi=2)
    assert flat.verdict == "degenerate"
    with pytest.raises(DataError):
        positivity_check([4, 8, 16], [1, 2, 3], psi=2)


def test_past_pushforward_lebesgue_invariance_and_trend():
    grid = Ensemble.grid(2 ** 20)
    hist = OmegaSequence(np.array([0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 1, 1]))
    pushed = push_ensemble(MapSystem.beta((2.0, 3.0)), hist, 1, grid)
    assert uniformity_distance(pushed) < 1e-5
    T = MapSystem.beta((2.5, 3.0))
    skewed = Ensemble.grid(2 ** 20, density=lambda x: 2 * x)
    diag = past_pushforward_diagnostic(T, hist, skewed, range(0, 11))
    d = diag.consecutive_distance[1:]
    assert d[-1] < d[0] / 100
    assert np.all(np.diff(np.log(d)) < 0.5)
