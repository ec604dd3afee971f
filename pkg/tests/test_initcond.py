"""Initial-data family: profile values, solenoidality, calibration."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsblowup.diagnostics import total_energy_enstrophy
from nsblowup.errors import ConfigError
from nsblowup.grid import make_grid
from nsblowup.initcond import (
    InitialDataSpec,
    base_profile,
    build_initial_field,
    calibrate_amplitude,
)
from nsblowup.solver import max_divergence


def test_profile_value_frozen():
    # at k = (1, 0, 20) with a = 20 the displacement is unit length, so the
    # envelope is e^{-1/2} (2 pi)^{-3/2} = 0.038510836890748947 and the
    # components are envelope * (1, 0, -1/20)
    out = base_profile(np.array([1.0, 0.0, 20.0]), a=20.0, r=17.0)
    np.testing.assert_allclose(out[0], 0.038510836890748947, rtol=1e-15)
    assert out[1] == 0.0
    np.testing.assert_allclose(out[2], -0.0019255418445374474, rtol=1e-15)


def test_profile_zero_outside_support():
    out = base_profile(np.array([0.0, 0.0, 2.0]), a=20.0, r=17.0)
    np.testing.assert_array_equal(out, 0.0)
    # boundary node is included
    out = base_profile(np.array([0.0, 0.0, 3.0]), a=20.0, r=17.0)
    assert out[2] == 0.0 and out[0] == 0.0  # k_perp = 0 there anyway


def test_profile_orthogonal_to_k():
    # <v0(k), k> = k1^2 + k2^2 - (k1^2 + k2^2) = 0 identically
    ks = np.array(
        [[1.0, 2.0, 19.0], [-3.0, 0.5, 21.0], [4.0, -4.0, 24.0], [0.0, 0.0, 5.0]]
    )
    out = base_profile(ks, a=20.0, r=17.0)
    dots = np.sum(out * ks, axis=-1)
    np.testing.assert_allclose(dots, 0.0, atol=1e-14)


def test_spec_validation():
    with pytest.raises(ConfigError):
        InitialDataSpec(a=5.0, r=5.0, sign=1, target_energy=1.0)  # r == a
    with pytest.raises(ConfigError):
        InitialDataSpec(a=5.0, r=-1.0, sign=1, target_energy=1.0)
    with pytest.raises(ConfigError):
        InitialDataSpec(a=5.0, r=4.0, sign=2, target_energy=1.0)
    with pytest.raises(ConfigError):
        InitialDataSpec(a=5.0, r=4.0, sign=1, target_energy=0.0)
    assert InitialDataSpec(a=5.0, r=4.0, sign=-1, target_energy=1.0).sol_type == "I"
    assert InitialDataSpec(a=5.0, r=4.0, sign=1, target_energy=1.0).sol_type == "II"


@pytest.fixture(scope="module")
def small_grid():
    return make_grid(((-6, 6), (-6, 6), (-6, 10)))


def test_calibration_hits_target(small_grid):
    spec = InitialDataSpec(a=3.0, r=2.0, sign=1, target_energy=7.5)
    field = build_initial_field(spec, small_grid)
    energy, _ = total_energy_enstrophy(field)
    np.testing.assert_allclose(energy, 7.5, rtol=1e-12)


@given(target=st.floats(min_value=1e-3, max_value=1e6))
@settings(max_examples=20, deadline=None)
def test_calibration_scaling_property(target):
    grid = make_grid(((-6, 6), (-6, 6), (-6, 10)))
    spec = InitialDataSpec(a=3.0, r=2.0, sign=1, target_energy=target)
    amp = calibrate_amplitude(spec, grid)
    base = calibrate_amplitude(
        InitialDataSpec(a=3.0, r=2.0, sign=1, target_energy=1.0), grid
    )
    np.testing.assert_allclose(amp, base * np.sqrt(target), rtol=1e-12)


def test_sign_flip_negates_field(small_grid):
    plus = build_initial_field(
        InitialDataSpec(a=3.0, r=2.0, sign=1, target_energy=2.0), small_grid
    )
    minus = build_initial_field(
        InitialDataSpec(a=3.0, r=2.0, sign=-1, target_energy=2.0), small_grid
    )
    np.testing.assert_array_equal(plus.data, -minus.data)


def test_initial_field_is_solenoidal(small_grid):
    spec = InitialDataSpec(a=3.0, r=2.0, sign=-1, target_energy=4.0)
    field = build_initial_field(spec, small_grid)
    assert max_divergence(field) <= 1e-14


def test_initial_field_zero_mode_and_reality(small_grid):
    field = build_initial_field(
        InitialDataSpec(a=3.0, r=2.0, sign=1, target_energy=4.0), small_grid
    )
    np.testing.assert_array_equal(field.zero_mode(), 0.0)
    assert field.is_real
    assert field.t == 0.0


def test_support_confined_to_ball(small_grid):
    spec = InitialDataSpec(a=3.0, r=2.0, sign=1, target_energy=4.0)
    field = build_initial_field(spec, small_grid)
    k1, k2, k3 = small_grid.broadcast_axes()
    dsq = k1**2 + k2**2 + (k3 - spec.a) ** 2
    outside = dsq > spec.r**2
    assert np.all(field.data[:, outside] == 0.0)
    assert np.any(field.data != 0.0)


def test_support_missing_mesh_rejected():
    grid = make_grid(((-2, 2), (-2, 2), (-2, 2)))
    spec = InitialDataSpec(a=30.0, r=2.0, sign=1, target_energy=1.0)
    with pytest.raises(ConfigError):
        build_initial_field(spec, grid)


def test_desk_grid_profile_spans_expected_nodes():
    grid = make_grid(((-31, 31), (-31, 31), (-15, 511)))
    spec = InitialDataSpec(a=5.0, r=4.0, sign=-1, target_energy=1.0)
    field = build_initial_field(spec, grid)
    live = np.any(field.data != 0.0, axis=0)
    i1, i2, i3 = np.nonzero(live)
    # support ball |k - (0,0,5)| <= 4 on integer nodes; the k-perp = 0 line
    # carries no data (every component has a transverse factor), so the
    # extreme nodes (0, 0, 1) and (0, 0, 9) are dark
    assert grid.axis(2)[i3.min()] == 2.0
    assert grid.axis(2)[i3.max()] == 8.0
    assert grid.axis(0)[i1.min()] == -4.0  # (-4, 0, 5) sits on the boundary
    assert grid.axis(0)[i1.max()] == 4.0
