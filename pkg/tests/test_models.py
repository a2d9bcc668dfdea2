import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sesans_grating import (PLANE_WAVE, BandError, EchoPattern, GratingSpec, InstrumentConfig,
                            WavePacketSpec, background, damping, fourier_series_polarization,
                            plane_wave_polarization, semiclassical_polarization, tof_pattern,
                            tof_phase)


@pytest.fixture
def inst_half_nm_at_4um():
    # lambda(xi = 4000 nm) = 0.5 nm
    return InstrumentConfig(16000.0, lambda_band_nm=(0.2, 1.3))


def test_plane_wave_examples(grating):
    assert plane_wave_polarization(grating, 2.1, 0.0) == 1
    assert plane_wave_polarization(grating, math.pi, 280.0) == pytest.approx(0.44, abs=1e-12)
    assert plane_wave_polarization(grating, math.pi, 1000.0) == pytest.approx(-0.12, abs=1e-12)
    assert plane_wave_polarization(grating, math.pi, 2000.0) == pytest.approx(1.0, abs=1e-12)


def test_plane_wave_branches_when_channel_is_wider():
    g = GratingSpec(200.0, 1800.0)  # wall 400, channel 1600
    assert plane_wave_polarization(g, math.pi, 300.0) == pytest.approx(1 - 4 * 300 / 2000)
    assert plane_wave_polarization(g, math.pi, 1000.0) == pytest.approx(1 - 4 * 400 / 2000)
    assert plane_wave_polarization(g, math.pi, 1900.0) == pytest.approx(1 - 4 * 100 / 2000)


def test_plateau_is_flat(grating):
    xi = np.linspace(600.0, 1400.0, 101)
    h = 1e-3
    deriv = (plane_wave_polarization(grating, 1.7, xi + h) - plane_wave_polarization(grating, 1.7, xi - h)) / (2 * h)
    assert np.max(np.abs(deriv)) < 1e-10


def test_plane_wave_is_even_and_periodic(grating):
    xi = np.linspace(-7000, 7000, 333)
    p = plane_wave_polarization(grating, 2.0, xi)
    np.testing.assert_allclose(p, plane_wave_polarization(grating, 2.0, -xi), atol=1e-12)
    np.testing.assert_allclose(p, plane_wave_polarization(grating, 2.0, xi + 2000), atol=1e-12)


def test_damping_examples():
    assert damping(0.0, WavePacketSpec(1234.0)) == 1
    assert damping(1234.0, WavePacketSpec(1234.0)) == pytest.approx(math.exp(-0.5))
    assert damping(20000.0, WavePacketSpec(60000.0)) == pytest.approx(0.9460, abs=5e-5)
    assert damping(1e9, WavePacketSpec(PLANE_WAVE)) == 1.0


def test_semiclassical_examples(grating, packet_5um):
    assert semiclassical_polarization(grating, math.pi, 560.0, packet_5um) == pytest.approx(-0.11925, abs=5e-6)
    xi = np.linspace(0, 9000, 77)
    np.testing.assert_array_equal(semiclassical_polarization(grating, 1.1, xi, WavePacketSpec()),
                                  plane_wave_polarization(grating, 1.1, xi))
    np.testing.assert_allclose(semiclassical_polarization(grating, 0.0, xi, packet_5um),
                               damping(xi, packet_5um))


@given(st.floats(1.0, 3e4), st.floats(10.0, 1e5), st.floats(1.0, 10.0), st.floats(0, 2 * math.pi))
def test_semiclassical_magnitude_grows_with_delta(xi, delta, factor, phi):
    g = GratingSpec(720.0, 1280.0)
    small = semiclassical_polarization(g, phi, xi, WavePacketSpec(delta))
    large = semiclassical_polarization(g, phi, xi, WavePacketSpec(delta * factor))
    assert abs(large) >= abs(small) - 1e-15


def test_fourier_series_examples(grating):
    assert fourier_series_polarization(grating, 0.0, 1234.0, 3) == pytest.approx(1.0)
    assert fourier_series_polarization(grating, math.pi, 280.0, 2000) == pytest.approx(0.44, abs=1e-6)
    # at a full period every order is in phase: the deficit is the truncated Parseval tail
    from sesans_grating import fourier_coefficient

    n = np.arange(-2000, 2001)
    tail = 1.0 - np.sum(np.abs(fourier_coefficient(grating, 1.9, n)) ** 2)
    assert fourier_series_polarization(grating, 1.9, 2000.0, 2000) == pytest.approx(1.0, abs=tail + 1e-12)
    assert tail < 2e-4


def test_fourier_series_requires_positive_order(grating):
    with pytest.raises(ValueError):
        fourier_series_polarization(grating, 1.0, 100.0, 0)


def test_tof_phase(grating):
    assert tof_phase(grating, 0.5) == pytest.approx(1.03)
    assert tof_phase(grating, 1.0) == pytest.approx(2.06)
    assert tof_phase(grating, 0.0) == 0


def test_tof_pattern_peaks_return_to_one(grating, inst_half_nm_at_4um):
    xi = 2000.0 * np.arange(1, 12)
    pat = tof_pattern(grating, inst_half_nm_at_4um, xi)
    np.testing.assert_allclose(pat.polarization, 1.0, atol=1e-12)
    np.testing.assert_allclose(pat.lambda_nm, np.sqrt(xi / 16000.0))


def test_tof_pattern_transparent_grating(inst_half_nm_at_4um):
    g = GratingSpec(720.0, 1280.0, sld_per_nm2=0.0)
    pat = tof_pattern(g, inst_half_nm_at_4um, np.linspace(700, 20000, 500))
    np.testing.assert_array_equal(pat.polarization, 1.0)


def test_tof_pattern_plateau_at_local_phase(grating, inst_half_nm_at_4um):
    phi = tof_phase(grating, math.sqrt(3000.0 / 16000.0))
    got = tof_pattern(grating, inst_half_nm_at_4um, [3000.0]).polarization[0]
    assert got == pytest.approx(1 - 0.56 * (1 - math.cos(phi)), abs=1e-12)


def test_tof_pattern_rejects_out_of_band(grating, inst_half_nm_at_4um):
    with pytest.raises(BandError) as info:
        tof_pattern(grating, inst_half_nm_at_4um, [100.0, 1000.0])
    lo, hi = info.value.interval
    assert lo == pytest.approx(640.0) and hi == pytest.approx(27040.0)
    assert "640" in str(info.value)


def test_background_examples(grating, inst_half_nm_at_4um):
    assert background(grating, inst_half_nm_at_4um, 4000.0) == pytest.approx(0.7283, abs=5e-5)
    tiny = InstrumentConfig(16000.0, lambda_band_nm=(1e-6, 1.3))
    assert background(grating, tiny, 1e-8) == pytest.approx(1.0, abs=1e-12)
    xi = 2000.0 * np.arange(1, 13)
    assert np.all(background(grating, inst_half_nm_at_4um, xi) < 1)


def test_background_is_the_window_minimum(grating, inst_half_nm_at_4um):
    xi = np.arange(1000.0, 26000.0, 0.5)
    pat = tof_pattern(grating, inst_half_nm_at_4um, xi)
    for centre in (3000.0, 9000.0, 19000.0):
        sel = np.abs(xi - centre) <= 1000.0
        i = np.argmin(pat.polarization[sel])
        assert pat.polarization[sel][i] == pytest.approx(
            background(grating, inst_half_nm_at_4um, xi[sel][i]), abs=1e-12)


def test_background_matches_minimum_when_phase_is_nearly_constant(grating):
    inst = InstrumentConfig(1e10, lambda_band_nm=(1e-6, 1e-2))
    xi = np.arange(2000.0, 10000.0, 0.5)
    pat = tof_pattern(grating, inst, xi)
    sel = np.abs(xi - 5000.0) <= 1000.0
    assert pat.polarization[sel].min() == pytest.approx(background(grating, inst, 5000.0), abs=1e-6)


def test_echo_pattern_validation():
    with pytest.raises(ValueError, match="increasing"):
        EchoPattern([1.0, 1.0], [0.0, 0.0])
    with pytest.raises(ValueError, match="outside"):
        EchoPattern([1.0, 2.0], [0.0, 1.5])


def test_packet_validation():
    from sesans_grating import ValidationError

    with pytest.raises(ValidationError) as info:
        WavePacketSpec(-1.0, (0.0, 1.0, -2.0))
    assert len(info.value.problems) == 3
    assert WavePacketSpec().is_plane_wave
