import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quenched_clt.errors import (ContractError, DomainError, InsufficientRandomnessError,
                                 PrecisionError)
from quenched_clt.maps import (MODULUS, Branch, Ensemble, MapSystem, OmegaSequence, apply_map,
                               cocycle_apply, doubled_cocycle_apply, horizon_cap, orbit,
                               past_pushforward, push_ensemble)

unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)


def test_beta_map_values():
    T = MapSystem.beta((2.0, 3.0))
    assert apply_map(T, 0, 0.75) == 0.5
    assert apply_map(T, 1, 0.5) == 0.5
    assert apply_map(T, 1, 0.25) == 0.75


def test_tent_keeps_half_inside_interval():
    T = MapSystem.tent()
    assert apply_map(T, 0, 0.5) == 0.0
    assert apply_map(T, 0, 0.25) == 0.5
    assert apply_map(T, 0, 0.75) == 0.5


def test_points_outside_interval_rejected():
    with pytest.raises(DomainError):
        apply_map(MapSystem.doubling(), 0, 1.0)
    with pytest.raises(DomainError):
        apply_map(MapSystem.doubling(), 0, -0.1)


def test_table_family_checks_tiling():
    ok = MapSystem.table([[Branch(0, 0.5, 0, 1), Branch(0.5, 1, 1, 0)]])
    assert apply_map(ok, 0, 0.25) == 0.5
    with pytest.raises(ContractError):
        MapSystem.table([[Branch(0, 0.4, 0, 1), Branch(0.5, 1, 0, 1)]])


@given(x=unit, n=st.integers(0, 6), m=st.integers(0, 6))
@settings(max_examples=60, deadline=None)
def test_cocycle_property(x, n, m):
    T = MapSystem.beta((2.0, 3.0, 2.5))
    omega = OmegaSequence(np.array([0, 2, 1, 1, 0, 2, 2, 1, 0, 1, 2, 0]))
    lhs = cocycle_apply(T, omega, n + m, x)
    rhs = cocycle_apply(T, omega.shift(m), n, cocycle_apply(T, omega, m, x))
    assert lhs == rhs


def test_doubled_cocycle_is_coordinatewise():
    T = MapSystem.beta((2.0, 3.0))
    omega = OmegaSequence(np.array([1, 0, 1]))
    assert doubled_cocycle_apply(T, omega, 3, 0.1, 0.7) == (cocycle_apply(T, omega, 3, 0.1),
                                                             cocycle_apply(T, omega, 3, 0.7))


def test_identity_at_zero_and_short_sequence():
    T = MapSystem.doubling()
    omega = OmegaSequence(np.zeros(3, dtype=int))
    assert cocycle_apply(T, omega, 0, 0.3) == 0.3
    with pytest.raises(InsufficientRandomnessError):
        cocycle_apply(T, omega, 4, 0.3)


def test_grid_cap_value_and_error_names_cap():
    T = MapSystem.doubling(2)
    ens = Ensemble.grid(2 ** 20)
    assert horizon_cap(T, ens) == 18
    omega = OmegaSequence(np.zeros(40, dtype=int))
    with pytest.raises(PrecisionError) as err:
        push_ensemble(T, omega, 19, ens)
    assert err.value.cap == 18 and "at most 18" in str(err.value)
    assert horizon_cap(T, Ensemble.sample(10, 0)) is None


def test_grid_is_exact_before_cap():
    T = MapSystem.doubling()
    ens = Ensemble.grid(2 ** 10)
    omega = OmegaSequence(np.zeros(8, dtype=int))
    pushed = push_ensemble(T, omega, 8, ens)
    assert np.array_equal(pushed.points, np.mod(ens.points * 256, 1.0))


def test_residue_orbits_do_not_collapse():
    # 2x mod 1 in binary floating point reaches 0 within ~53 steps; residues do not
    T = MapSystem.doubling()
    ens = Ensemble.sample(1000, seed=5)
    omega = OmegaSequence(np.zeros(400, dtype=int))
    pts = list(orbit(T, omega, ens, 400))[-1]
    assert np.mean(pts == 0.0) == 0.0
    assert abs(np.mean(pts) - 0.5) < 0.05


def test_residue_doubling_has_no_short_period():
    a = 1234567
    for k in range(1, 200):
        assert pow(2, k, MODULUS) * a % MODULUS != a


def test_residue_and_float_agree_for_a_few_steps():
    T = MapSystem.beta((2.0, 3.0))
    ens = Ensemble.sample(500, seed=2)
    omega = OmegaSequence(np.array([0, 1, 1, 0, 1]))
    exact = push_ensemble(T, omega, 5, ens).points
    approx = cocycle_apply(T, omega, 5, ens.points)
    assert np.max(np.abs(exact - approx)) < 1e-12


def test_noninteger_slopes_use_float_path():
    T = MapSystem.beta((2.5, 3.0))
    assert not T.integer_slopes
    ens = Ensemble.sample(50, seed=1)
    omega = OmegaSequence(np.array([0, 1]))
    assert np.array_equal(push_ensemble(T, omega, 2, ens).points, cocycle_apply(T, omega, 2, ens.points))


def test_ensemble_contracts():
    with pytest.raises(ContractError):
        Ensemble(np.array([0.1, 0.2]), np.array([0.5, 0.6]))
    e = Ensemble.grid(4, density=lambda x: 1 + x)
    assert math.isclose(e.weights.sum(), 1.0)
    assert e.weights[3] > e.weights[0]


def test_sample_is_keyed():
    a, b = Ensemble.sample(64, 3, 0), Ensemble.sample(64, 3, 0)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, Ensemble.sample(64, 3, 1).points)


def test_orbit_first_element_is_start():
    ens = Ensemble.grid(16)
    first = next(orbit(MapSystem.doubling(), OmegaSequence(np.zeros(2, dtype=int)), ens, 2))
    assert np.array_equal(first, ens.points)


def test_past_pushforward_uses_latest_letters():
    T = MapSystem.beta((2.0, 3.0))
    hist = OmegaSequence(np.array([1, 1, 0]))
    ens = Ensemble.grid(2 ** 12)
    a = past_pushforward(T, hist, ens, 1).points
    assert np.array_equal(a, np.mod(2 * ens.points, 1.0))
