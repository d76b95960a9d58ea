"""Biphoton joint spectral intensity model.

The photon-pair spectrum is a normalized product of a diagonal profile in
omega1 + omega2 (set by the pump linewidth) and an antidiagonal profile in
omega1 - omega2 (set by the bandpass filter on the pair).  The diagonal
profile is always Gaussian; the antidiagonal one may be Gaussian or a
rectangular top hat, the latter reproducing the sinc-type oscillations a
hard-edged bandpass filter imprints on the interferogram.

Width convention: a Gaussian profile exp[-2 (x / Omega)**2] has
FWHM = Omega * sqrt(2 ln 2); conversions from filter/pump FWHM values use
this relation throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT

from .errors import ValidationError

GAUSSIAN = "gaussian"
RECTANGULAR = "rectangular"
_PROFILES = (GAUSSIAN, RECTANGULAR)

# FWHM of exp[-2 (x/Omega)^2] in units of Omega.
FWHM_PER_OMEGA = math.sqrt(2.0 * math.log(2.0))

# Height of the normalized top hat replacing the antidiagonal Gaussian.
_RECT_HEIGHT = math.sqrt(math.pi / 2.0)


@dataclass(frozen=True)
class SpectralModel:
    """Joint spectral intensity parameters.

    omega0 is the degenerate center frequency (half the pump frequency),
    omega_a / omega_d the antidiagonal and diagonal bandwidths in rad/s.
    """

    omega0: float
    omega_a: float
    omega_d: float
    antidiagonal_profile: str = GAUSSIAN

    def __post_init__(self):
        for name in ("omega0", "omega_a", "omega_d"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0.0:
                raise ValidationError(f"{name} must be > 0, got {v!r}")
        if self.antidiagonal_profile not in _PROFILES:
            raise ValidationError(
                f"profile must be one of {_PROFILES}, got {self.antidiagonal_profile!r}"
            )

    @property
    def tau_a(self) -> float:
        """Antidiagonal coherence width 4 / Omega_a, seconds."""
        return 4.0 / self.omega_a

    @property
    def tau_d(self) -> float:
        """Diagonal coherence width 4 / Omega_d, seconds."""
        return 4.0 / self.omega_d


def jsi(model: SpectralModel, omega1, omega2):
    """Joint spectral intensity S(omega1, omega2), normalized to unit integral."""
    omega1 = np.asarray(omega1, dtype=float)
    omega2 = np.asarray(omega2, dtype=float)
    prefactor = 4.0 / (math.pi * model.omega_a * model.omega_d)
    diag = np.exp(-2.0 * ((omega1 + omega2 - 2.0 * model.omega0) / model.omega_d) ** 2)
    u = omega1 - omega2
    if model.antidiagonal_profile == GAUSSIAN:
        anti = np.exp(-2.0 * (u / model.omega_a) ** 2)
    else:
        anti = _RECT_HEIGHT * (np.abs(u) <= model.omega_a / 2.0)
    out = prefactor * diag * anti
    return out if out.shape else float(out)


def antidiagonal_weight(model: SpectralModel, u):
    """Unnormalized antidiagonal profile evaluated at u = omega1 - omega2."""
    u = np.asarray(u, dtype=float)
    if model.antidiagonal_profile == GAUSSIAN:
        return np.exp(-2.0 * (u / model.omega_a) ** 2)
    return (np.abs(u) <= model.omega_a / 2.0).astype(float)


def pump_nm_to_omega0(pump_nm: float) -> float:
    """Degenerate center frequency for a given pump wavelength in nm."""
    if pump_nm <= 0:
        raise ValidationError(f"pump wavelength must be > 0 nm, got {pump_nm!r}")
    return math.pi * C_LIGHT / (pump_nm * 1e-9)


def fwhm_nm_to_angular(fwhm_nm: float, center_nm: float) -> float:
    """Convert a wavelength FWHM at a given center into an angular-frequency FWHM."""
    return 2.0 * math.pi * C_LIGHT * (fwhm_nm * 1e-9) / (center_nm * 1e-9) ** 2


def from_wavelengths(
    pump_nm: float,
    center_nm: float,
    filter_fwhm_nm: float,
    pump_linewidth_hz: float,
    profile: str = GAUSSIAN,
) -> SpectralModel:
    """Build a SpectralModel from laboratory settings.

    pump_nm: pump wavelength; center_nm: pair center wavelength;
    filter_fwhm_nm: bandpass filter width (FWHM for gaussian, full width for
    rectangular); pump_linewidth_hz: pump FWHM linewidth in Hz.
    """
    for name, v in (
        ("pump_nm", pump_nm),
        ("center_nm", center_nm),
        ("filter_fwhm_nm", filter_fwhm_nm),
        ("pump_linewidth_hz", pump_linewidth_hz),
    ):
        if not np.isfinite(v) or v <= 0:
            raise ValidationError(f"{name} must be > 0, got {v!r}")
    omega0 = pump_nm_to_omega0(pump_nm)
    filter_width = fwhm_nm_to_angular(filter_fwhm_nm, center_nm)
    if profile == RECTANGULAR:
        omega_a = filter_width
    else:
        omega_a = filter_width / FWHM_PER_OMEGA
    omega_d = 2.0 * math.pi * pump_linewidth_hz / FWHM_PER_OMEGA
    return SpectralModel(
        omega0=omega0,
        omega_a=omega_a,
        omega_d=omega_d,
        antidiagonal_profile=profile,
    )
