import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import ndtr

from sesans_grating import (CODATA, EchoPattern, GridError, InstrumentConfig, ResolutionParams,
                            ValidationError, background, convolve_resolution, find_peaks,
                            fit_background, lambda_of_xi, normalize_peaks, resolution_sigma,
                            spin_echo_constant, tof_pattern, xi_of_lambda)
from sesans_grating.config import DEFAULT_ARM_LENGTH_M


@pytest.fixture(scope="module")
def inst2():
    return InstrumentConfig.from_geometry(2e6, DEFAULT_ARM_LENGTH_M)


@pytest.fixture(scope="module")
def ideal2(inst2):
    from sesans_grating import SILICON_GRATING

    return tof_pattern(SILICON_GRATING, inst2, np.linspace(1400.0, 24600.0, 9281))


def test_constants_are_codata():
    assert CODATA.neutron_mass_kg == pytest.approx(1.67492750056e-27, rel=1e-9)
    assert CODATA.planck_constant_Js == 6.62607015e-34


def test_spin_echo_constant():
    xi0 = spin_echo_constant(2e6, 1.0, math.pi / 4)
    assert xi0 == pytest.approx(1.011e4, rel=1e-3)
    assert spin_echo_constant(4e6, 1.0, math.pi / 4) == pytest.approx(2 * xi0)
    expected = 2 * CODATA.neutron_mass_kg * 2e6 * 1.0 / CODATA.planck_constant_Js * 1e-9
    assert xi0 == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        spin_echo_constant(2e6, 1.0, 0.0)


def test_xi_lambda_conversion():
    inst = InstrumentConfig(10110.0)
    assert xi_of_lambda(inst, 1.0) == pytest.approx(10110.0)
    assert xi_of_lambda(inst, 0.0) == 0
    lam = np.random.default_rng(3).uniform(0.01, 3.0, 100)
    np.testing.assert_allclose(lambda_of_xi(inst, xi_of_lambda(inst, lam)), lam, rtol=1e-12)


def test_instrument_validation_lists_all_problems():
    with pytest.raises(ValidationError) as info:
        InstrumentConfig(-1.0, field_angle_rad=2.0, lambda_band_nm=(1.0, 0.5), tof_bin_nm=0.0)
    assert len(info.value.problems) == 4


def test_resolution_sigma_examples():
    inst = InstrumentConfig(10110.0)
    assert resolution_sigma(inst, ResolutionParams.zero(), 2000.0) == 0
    assert resolution_sigma(inst, ResolutionParams(), 2000.0) == pytest.approx(14.2, abs=0.05)
    only_j = ResolutionParams(0, 10.0, 0, 0, 0)
    np.testing.assert_allclose(resolution_sigma(inst, only_j, [10.0, 1e3, 1e5]), 10.0)


def test_resolution_sigma_limits():
    inst = InstrumentConfig(10110.0)
    res = ResolutionParams()
    xi = np.geomspace(1e-2, 1e7, 400)
    s = resolution_sigma(inst, res, xi)
    assert np.all(s > 0)
    assert s[0] == pytest.approx(res.delta_J_nm, rel=1e-3)
    angular = xi[-1] * 2 * res.delta_theta_rad / math.sin(2 * inst.field_angle_rad)
    assert s[-1] == pytest.approx(angular, rel=0.05)
    assert np.max(np.abs(np.diff(s) / s[1:])) < 0.1  # continuous on a fine log grid


def test_convolution_with_zero_resolution_is_identity(ideal2, inst2):
    out = convolve_resolution(ideal2, inst2, ResolutionParams.zero())
    np.testing.assert_array_equal(out.polarization, ideal2.polarization)


def test_convolution_keeps_constants(inst2):
    pat = EchoPattern(np.linspace(1400, 20000, 9301), np.full(9301, 0.37))
    out = convolve_resolution(pat, inst2, ResolutionParams())
    np.testing.assert_allclose(out.polarization, 0.37, atol=1e-12)


def test_convolution_contracts_extrema(ideal2, inst2):
    out = convolve_resolution(ideal2, inst2, ResolutionParams())
    assert out.polarization.min() >= ideal2.polarization.min()
    assert out.polarization.max() <= ideal2.polarization.max()


def test_convolution_rejects_coarse_grid(inst2):
    pat = EchoPattern(np.linspace(1400, 20000, 200), np.ones(200))
    with pytest.raises(GridError, match="need <="):
        convolve_resolution(pat, inst2, ResolutionParams())


def _triangle_smeared_height(w, s):
    # (triangle of half-width w) * N(0, s) at the apex
    z = w / s
    return (2 * ndtr(z) - 1) - 2 * s / (w * math.sqrt(2 * math.pi)) * (1 - math.exp(-0.5 * z * z))


@pytest.mark.parametrize("w,s", [(300.0, 10.0), (300.0, 40.0), (100.0, 30.0)])
def test_peak_height_of_smeared_triangle(w, s):
    inst = InstrumentConfig(10000.0, lambda_band_nm=(0.01, 10.0))
    x = np.arange(1000.0, 3000.0 + 0.25, 0.25)
    pat = EchoPattern(x, np.maximum(0.0, 1 - np.abs(x - 2000.0) / w))
    out = convolve_resolution(pat, inst, ResolutionParams(0, s, 0, 0, 0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        peaks = find_peaks(out, 2000.0)
    assert peaks[0].xi_peak_nm == 2000.0
    assert peaks[0].height == pytest.approx(_triangle_smeared_height(w, s), abs=1e-6)


def test_ideal_peaks_are_unity(ideal2):
    peaks = find_peaks(ideal2, 2000.0)
    assert [p.order for p in peaks] == list(range(1, 13))
    np.testing.assert_allclose([p.height for p in peaks], 1.0, atol=1e-9)
    np.testing.assert_allclose([p.xi_peak_nm for p in peaks], 2000.0 * np.arange(1, 13))


def test_smeared_peaks_decrease_with_order(ideal2, inst2):
    peaks = find_peaks(convolve_resolution(ideal2, inst2, ResolutionParams()), 2000.0)
    heights = np.array([p.height for p in peaks])
    assert np.all(np.diff(heights) < 0)
    assert all(abs(p.xi_peak_nm - 2000.0 * p.order) <= 1000.0 for p in peaks)


@pytest.fixture(scope="module")
def fine2(inst2):
    from sesans_grating import SILICON_GRATING

    return tof_pattern(SILICON_GRATING, inst2, np.arange(1400.0, 6600.0 + 0.1, 0.25))


def test_narrow_resolution_leaves_peaks_near_one(fine2, inst2):
    peaks = find_peaks(convolve_resolution(fine2, inst2, ResolutionParams().scaled(0.1)), 2000.0)
    np.testing.assert_allclose([p.height for p in peaks], 1.0, atol=2e-3)


def test_first_peak_height_falls_as_resolution_broadens(fine2, inst2):
    heights = [find_peaks(convolve_resolution(fine2, inst2, ResolutionParams().scaled(s)), 2000.0)[0].height
               for s in (0.0, 0.5, 1.0, 2.0)]
    assert all(b <= a for a, b in zip(heights, heights[1:]))


def test_empty_window_is_skipped_with_warning():
    x = np.concatenate([np.linspace(0, 2600, 300), np.linspace(7400, 9000, 300)])
    pat = EchoPattern(x, np.cos(2 * np.pi * x / 2000.0))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        peaks = find_peaks(pat, 2000.0)
    assert sorted(str(w.message).split(":")[0] for w in caught) == ["echo order 2", "echo order 3"]
    assert [p.order for p in peaks] == [1, 4]


def test_fit_background_matches_closed_form(ideal2, inst2):
    from sesans_grating import SILICON_GRATING

    bg = fit_background(ideal2, 2000.0)
    xi = ideal2.xi_nm
    err = np.abs(bg(xi) - background(SILICON_GRATING, inst2, xi))
    assert err.max() < 1e-3


def test_fit_background_of_flat_pattern():
    pat = EchoPattern(np.linspace(0, 10000, 1001), np.ones(1001))
    bg = fit_background(pat, 2000.0)
    np.testing.assert_allclose(bg(np.linspace(0, 10000, 50)), 1.0)


def test_fit_background_needs_two_minima():
    with pytest.raises(ValueError):
        fit_background(EchoPattern([0.0, 1000.0], [1.0, 1.0]), 2000.0)


def test_normalized_peaks_sit_on_flat_baseline(ideal2):
    norm = normalize_peaks(ideal2, fit_background(ideal2, 2000.0))
    peaks = find_peaks(norm, 2000.0)
    np.testing.assert_allclose([p.height for p in peaks], 1.0, atol=1e-6)
    plateau = (np.mod(norm.xi_nm, 2000.0) > 700) & (np.mod(norm.xi_nm, 2000.0) < 1300)
    np.testing.assert_allclose(norm.polarization[plateau], 0.0, atol=2e-3)


@given(st.floats(0.0, 5.0))
def test_scaled_resolution_is_nonnegative(s):
    r = ResolutionParams().scaled(s)
    assert r.problems() == []
    assert r.is_zero == (s == 0)
