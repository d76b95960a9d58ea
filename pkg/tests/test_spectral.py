"""Joint spectral intensity model and wavelength conversions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import c as C_LIGHT

from qoct.errors import ValidationError
from qoct.spectral import (
    GAUSSIAN,
    RECTANGULAR,
    SpectralModel,
    antidiagonal_weight,
    from_wavelengths,
    fwhm_nm_to_angular,
    jsi,
    pump_nm_to_omega0,
)

OMEGA0 = 4.66e15
OMEGA_A = 9.78e13
OMEGA_D = 1e12


def gaussian_model(**kw):
    base = dict(omega0=OMEGA0, omega_a=OMEGA_A, omega_d=OMEGA_D)
    base.update(kw)
    return SpectralModel(**base)


class TestSpectralModel:
    def test_tau_accessors(self):
        m = gaussian_model()
        assert m.tau_a == pytest.approx(4.0 / OMEGA_A)
        assert m.tau_d == pytest.approx(4.0 / OMEGA_D)

    @pytest.mark.parametrize("field", ["omega0", "omega_a", "omega_d"])
    def test_rejects_nonpositive(self, field):
        with pytest.raises(ValidationError):
            gaussian_model(**{field: 0.0})

    def test_rejects_unknown_profile(self):
        with pytest.raises(ValidationError):
            gaussian_model(antidiagonal_profile="lorentzian")

    def test_monotone_bandwidth(self):
        widths = [1e13, 5e13, 2e14]
        taus = [gaussian_model(omega_a=w).tau_a for w in widths]
        assert taus == sorted(taus, reverse=True)


class TestJsi:
    def test_peak_value(self):
        m = gaussian_model()
        assert jsi(m, OMEGA0, OMEGA0) == pytest.approx(4.0 / (math.pi * OMEGA_A * OMEGA_D))

    def test_unit_argument_antidiagonal(self):
        m = gaussian_model()
        w1 = OMEGA0 + OMEGA_A / 2.0
        w2 = OMEGA0 - OMEGA_A / 2.0
        expected = 4.0 / (math.pi * OMEGA_A * OMEGA_D) * math.exp(-2.0)
        assert jsi(m, w1, w2) == pytest.approx(expected)

    @pytest.mark.parametrize("profile", [GAUSSIAN, RECTANGULAR])
    def test_symmetry(self, profile):
        m = gaussian_model(antidiagonal_profile=profile)
        rng = np.random.default_rng(5)
        for _ in range(50):
            a, b = OMEGA0 + rng.normal(0, OMEGA_A, 2)
            assert jsi(m, a, b) == jsi(m, b, a)

    @pytest.mark.parametrize("profile", [GAUSSIAN, RECTANGULAR])
    def test_normalization(self, profile):
        m = gaussian_model(antidiagonal_profile=profile)
        # integrate on a rotated grid: u = w1 - w2, v = w1 + w2 - 2 w0;
        # the Jacobian of (w1, w2) -> (u, v)/1 is 1/2.  The top hat needs its
        # exact support as integration limits or the edges dominate the error.
        if profile == RECTANGULAR:
            u = np.linspace(-OMEGA_A / 2, OMEGA_A / 2, 4001)
        else:
            u = np.linspace(-5 * OMEGA_A, 5 * OMEGA_A, 4001)
        v = np.linspace(-5 * OMEGA_D, 5 * OMEGA_D, 1001)
        uu, vv = np.meshgrid(u, v, indexing="ij")
        w1 = OMEGA0 + (vv + uu) / 2.0
        w2 = OMEGA0 + (vv - uu) / 2.0
        vals = jsi(m, w1, w2)
        total = np.trapezoid(np.trapezoid(vals, v, axis=1), u) / 2.0
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_rectangular_support(self):
        m = gaussian_model(antidiagonal_profile=RECTANGULAR)
        inside = jsi(m, OMEGA0 + 0.49 * OMEGA_A / 2, OMEGA0 - 0.49 * OMEGA_A / 2)
        outside = jsi(m, OMEGA0 + 0.51 * OMEGA_A, OMEGA0 - 0.51 * OMEGA_A)
        assert inside > 0
        assert outside == 0.0

    def test_antidiagonal_weight_profiles(self):
        mg = gaussian_model()
        mr = gaussian_model(antidiagonal_profile=RECTANGULAR)
        assert antidiagonal_weight(mg, 0.0) == 1.0
        assert antidiagonal_weight(mg, OMEGA_A) == pytest.approx(math.exp(-2.0))
        assert antidiagonal_weight(mr, 0.49 * OMEGA_A / 2) == 1.0
        assert antidiagonal_weight(mr, 0.51 * OMEGA_A) == 0.0


class TestFromWavelengths:
    def test_omega0_definition(self):
        assert pump_nm_to_omega0(404.5) == pytest.approx(math.pi * C_LIGHT / 404.5e-9)

    def test_doubling_filter_halves_tau_a(self):
        m1 = from_wavelengths(404.5, 809.0, 40.0, 1e6)
        m2 = from_wavelengths(404.5, 809.0, 80.0, 1e6)
        assert m1.tau_a == pytest.approx(2.0 * m2.tau_a, rel=1e-12)

    def test_gaussian_fwhm_convention(self):
        m = from_wavelengths(404.5, 809.0, 40.0, 1e6)
        fwhm_omega = fwhm_nm_to_angular(40.0, 809.0)
        assert m.omega_a * math.sqrt(2 * math.log(2)) == pytest.approx(fwhm_omega)

    def test_rectangular_uses_full_width(self):
        m = from_wavelengths(404.5, 809.0, 40.0, 1e6, profile=RECTANGULAR)
        assert m.omega_a == pytest.approx(fwhm_nm_to_angular(40.0, 809.0))

    def test_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            from_wavelengths(-1.0, 809.0, 40.0, 1e6)
        with pytest.raises(ValidationError):
            from_wavelengths(404.5, 809.0, 0.0, 1e6)

    @given(st.floats(100.0, 2000.0), st.floats(1.0, 100.0))
    @settings(max_examples=100, deadline=None)
    def test_bandwidths_always_positive(self, pump_nm, filter_nm):
        m = from_wavelengths(pump_nm, 2 * pump_nm, filter_nm, 1e6)
        assert m.omega_a > 0 and m.omega_d > 0 and m.omega0 > 0
