"""Multilayer stack model: 2x2 wave-transfer matrices and reflection paths.

A sample is an ordered list of partially reflective interfaces separated by
transmissive segments.  Light is described by forward/backward amplitudes;
each interface contributes a boundary matrix and each segment a propagation
matrix times a loss matrix.  The stack reflection transfer function is read
off the composed matrix as H(omega) = -C/D.

Conventions:
  * Interfaces follow the real Stokes relations: r_bwd = -r_fwd and
    t_fwd = t_bwd = sqrt(1 - r_fwd**2).  With these, the boundary matrix
    reduces to [[1, -r], [-r, 1]] / t and has unit determinant.
  * Segments are non-dispersive; the propagation phase is omega * tau
    with tau the one-way optical thickness in time units.
  * The metallic film sitting on an interface is modeled by a loss
    exponent applied to the segment that follows it (light crosses the
    film right after crossing the boundary).  The film on the last
    interface never enters a reflection measurement and is ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.constants import c as C_LIGHT

from .errors import (
    GainNotSupportedError,
    InvalidInterfaceError,
    SingularStackError,
    ValidationError,
)

# |D| below this is treated as a nonphysical resonance rather than inverted.
SINGULAR_D_THRESHOLD = 1e-100

# Truncation defaults for path enumeration; the floor keeps feature lists
# readable while retaining every echo visible in a realistic trace.
DEFAULT_MAX_ORDER = 6
DEFAULT_AMPLITUDE_FLOOR = 1e-4


def um_to_seconds(path_um: float) -> float:
    """Optical path in micrometers -> propagation delay in seconds."""
    return path_um * 1e-6 / C_LIGHT


def seconds_to_um(delay_s: float) -> float:
    """Propagation delay in seconds -> optical path in micrometers."""
    return delay_s * C_LIGHT * 1e6


@dataclass(frozen=True)
class Matrix2:
    """Complex 2x2 matrix with entries [[a, b], [c, d]]."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __matmul__(self, other: "Matrix2") -> "Matrix2":
        return Matrix2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    @staticmethod
    def identity() -> "Matrix2":
        return Matrix2(1.0, 0.0, 0.0, 1.0)


@dataclass(frozen=True)
class Interface:
    """Partially reflective boundary.

    r_fwd is the signed amplitude reflectivity for light arriving from the
    front; film_kappa is the loss exponent of the metallic film deposited on
    the interface.
    """

    r_fwd: float
    film_kappa: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.r_fwd) or abs(self.r_fwd) >= 1.0:
            raise InvalidInterfaceError(
                f"amplitude reflectivity must lie in (-1, 1), got {self.r_fwd!r}"
            )
        if not np.isfinite(self.film_kappa) or self.film_kappa < 0.0:
            raise GainNotSupportedError(
                f"film loss exponent must be >= 0, got {self.film_kappa!r}"
            )

    @property
    def r_bwd(self) -> float:
        return -self.r_fwd

    @property
    def t_fwd(self) -> float:
        return float(np.sqrt(1.0 - self.r_fwd**2))

    t_bwd = t_fwd

    @property
    def reflectance(self) -> float:
        """Intensity reflectivity R = r_fwd**2."""
        return self.r_fwd**2


@dataclass(frozen=True)
class Segment:
    """Transmissive gap between two interfaces.

    optical_delay is the one-way optical thickness in seconds; bulk_kappa is
    the loss exponent for a single pass through the segment material.
    """

    optical_delay: float
    bulk_kappa: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.optical_delay) or self.optical_delay <= 0.0:
            raise InvalidInterfaceError(
                f"segment optical delay must be > 0, got {self.optical_delay!r}"
            )
        if not np.isfinite(self.bulk_kappa) or self.bulk_kappa < 0.0:
            raise GainNotSupportedError(
                f"bulk loss exponent must be >= 0, got {self.bulk_kappa!r}"
            )

    @property
    def optical_path_um(self) -> float:
        return seconds_to_um(self.optical_delay)


@dataclass(frozen=True)
class Sample:
    """Ordered stack of n interfaces and n - 1 segments."""

    interfaces: tuple
    segments: tuple

    def __post_init__(self):
        object.__setattr__(self, "interfaces", tuple(self.interfaces))
        object.__setattr__(self, "segments", tuple(self.segments))
        if len(self.interfaces) < 1:
            raise InvalidInterfaceError("a sample needs at least one interface")
        if len(self.segments) != len(self.interfaces) - 1:
            raise InvalidInterfaceError(
                f"{len(self.interfaces)} interfaces require "
                f"{len(self.interfaces) - 1} segments, got {len(self.segments)}"
            )

    @property
    def n_interfaces(self) -> int:
        return len(self.interfaces)

    @property
    def total_round_trip(self) -> float:
        """Round-trip delay front interface -> back interface -> front, seconds."""
        return 2.0 * sum(s.optical_delay for s in self.segments)

    @classmethod
    def from_optical_paths(
        cls,
        r_amplitudes: Sequence[float],
        optical_paths_um: Sequence[float],
        film_kappas: Sequence[float] | None = None,
        bulk_kappas: Sequence[float] | None = None,
    ) -> "Sample":
        """Build a sample from amplitudes and one-way optical paths in um."""
        n = len(r_amplitudes)
        film = film_kappas if film_kappas is not None else [0.0] * n
        bulk = bulk_kappas if bulk_kappas is not None else [0.0] * len(optical_paths_um)
        interfaces = [Interface(r, k) for r, k in zip(r_amplitudes, film, strict=True)]
        segments = [
            Segment(um_to_seconds(p), k)
            for p, k in zip(optical_paths_um, bulk, strict=True)
        ]
        return cls(tuple(interfaces), tuple(segments))


@dataclass(frozen=True)
class PathFeature:
    """One reflection path: a real interface or an internal echo.

    delay is the total round-trip optical delay back to the front surface,
    amplitude the signed product of every reflection, transmission, and loss
    factor along the path, and order the number of segment round trips.
    """

    delay: float
    amplitude: float
    kind: str  # "interface" or "echo"
    order: int

    @property
    def delay_um(self) -> float:
        return seconds_to_um(self.delay)


def boundary_matrix(iface: Interface) -> Matrix2:
    """Wave-transfer matrix of a single boundary under the Stokes convention."""
    t = iface.t_fwd
    r = iface.r_fwd
    return Matrix2(1.0 / t, -r / t, -r / t, 1.0 / t)


def propagation_matrix(phase: float) -> Matrix2:
    """diag(exp(-i*phase), exp(+i*phase)) for one pass through a segment."""
    if not np.isfinite(phase):
        raise InvalidInterfaceError(f"propagation phase must be finite, got {phase!r}")
    return Matrix2(np.exp(-1j * phase), 0.0, 0.0, np.exp(1j * phase))


def loss_matrix(kappa: float) -> Matrix2:
    """diag(exp(-kappa), exp(+kappa)); kappa < 0 would model gain and is rejected."""
    if not np.isfinite(kappa) or kappa < 0.0:
        raise GainNotSupportedError(f"loss exponent must be >= 0, got {kappa!r}")
    return Matrix2(np.exp(-kappa), 0.0, 0.0, np.exp(kappa))


def _segment_kappa(sample: Sample, j: int) -> float:
    """Total one-pass loss exponent of segment j (bulk + film on interface j)."""
    return sample.segments[j].bulk_kappa + sample.interfaces[j].film_kappa


def sample_matrix(sample: Sample, omega: float) -> Matrix2:
    """Overall wave-transfer matrix; the front boundary is applied first."""
    m = boundary_matrix(sample.interfaces[0])
    for j, seg in enumerate(sample.segments):
        phase = omega * seg.optical_delay
        kappa = _segment_kappa(sample, j)
        m = boundary_matrix(sample.interfaces[j + 1]) @ propagation_matrix(phase) @ loss_matrix(kappa) @ m
    return m


def transfer_function(sample: Sample, omega: float) -> complex:
    """Effective reflection coefficient H(omega) = -C/D of the stack."""
    m = sample_matrix(sample, omega)
    if abs(m.d) < SINGULAR_D_THRESHOLD:
        raise SingularStackError(f"stack matrix is singular at omega={omega!r}")
    return -m.c / m.d


def scattering_amplitudes(sample: Sample, omega: float) -> tuple:
    """(r_sample, t_sample) read off the scattering matrix."""
    m = sample_matrix(sample, omega)
    if abs(m.d) < SINGULAR_D_THRESHOLD:
        raise SingularStackError(f"stack matrix is singular at omega={omega!r}")
    return -m.c / m.d, m.det / m.d


def transfer_function_spectrum(sample: Sample, omegas: np.ndarray) -> np.ndarray:
    """Vectorized H(omega) over an array of angular frequencies."""
    omegas = np.asarray(omegas, dtype=float)
    iface0 = sample.interfaces[0]
    t0 = iface0.t_fwd
    r0 = iface0.r_fwd
    shape = omegas.shape
    a = np.full(shape, 1.0 / t0, dtype=complex)
    b = np.full(shape, -r0 / t0, dtype=complex)
    cc = b.copy()
    d = a.copy()
    for j, seg in enumerate(sample.segments):
        kappa = _segment_kappa(sample, j)
        fwd = np.exp(-(kappa + 1j * omegas * seg.optical_delay))
        bwd = 1.0 / fwd
        a *= fwd
        b *= fwd
        cc *= bwd
        d *= bwd
        iface = sample.interfaces[j + 1]
        t = iface.t_fwd
        r = iface.r_fwd
        a, b, cc, d = (a - r * cc) / t, (b - r * d) / t, (cc - r * a) / t, (d - r * b) / t
    if np.min(np.abs(d)) < SINGULAR_D_THRESHOLD:
        raise SingularStackError("stack matrix is singular at a probe frequency")
    return -cc / d


def enumerate_paths(
    sample: Sample,
    max_order: int = DEFAULT_MAX_ORDER,
    amplitude_floor: float = DEFAULT_AMPLITUDE_FLOOR,
) -> list:
    """Enumerate reflection paths up to max_order segment round trips.

    Every path that exits the front of the stack is recorded as a
    (delay, amplitude) feature.  Paths sharing a delay are kept separate so
    artifact bookkeeping can attribute individual contributions.  A path
    whose amplitude drops below amplitude_floor is pruned (all remaining
    factors have magnitude <= 1, so pruning is safe).
    """
    if max_order < 0:
        raise ValidationError(f"max_order must be >= 0, got {max_order}")
    if amplitude_floor < 0:
        raise ValidationError(f"amplitude_floor must be >= 0, got {amplitude_floor}")
    n = sample.n_interfaces
    r = [i.r_fwd for i in sample.interfaces]
    t = [i.t_fwd for i in sample.interfaces]
    seg_tau = [s.optical_delay for s in sample.segments]
    seg_loss = [np.exp(-_segment_kappa(sample, j)) for j in range(n - 1)]

    features = []
    # State: (interface index, side, amplitude, delay, traversals, reflections)
    # side "L": incident from the left (traveling right); "R": incident from
    # the right (traveling left).
    stack = [(0, "L", 1.0, 0.0, 0, 0)]
    while stack:
        i, side, amp, delay, trav, refl = stack.pop()
        if abs(amp) < amplitude_floor:
            continue
        # A photon at interface i needs >= i more traversals to exit.
        if (trav + i) / 2 > max_order:
            continue
        if side == "L":
            # Reflect off the front face of interface i.
            a2 = amp * r[i]
            if i == 0:
                _record(features, delay, a2, refl + 1, trav, amplitude_floor)
            else:
                stack.append(
                    (i - 1, "R", a2 * seg_loss[i - 1], delay + seg_tau[i - 1], trav + 1, refl + 1)
                )
            # Transmit into the next segment.
            if i < n - 1:
                stack.append(
                    (i + 1, "L", amp * t[i] * seg_loss[i], delay + seg_tau[i], trav + 1, refl)
                )
        else:
            # Transmit leftward through interface i.
            a2 = amp * t[i]
            if i == 0:
                _record(features, delay, a2, refl, trav, amplitude_floor)
            else:
                stack.append(
                    (i - 1, "R", a2 * seg_loss[i - 1], delay + seg_tau[i - 1], trav + 1, refl)
                )
            # Bounce back to the right off the rear face of interface i.
            if i < n - 1:
                stack.append(
                    (i + 1, "L", amp * (-r[i]) * seg_loss[i], delay + seg_tau[i], trav + 1, refl + 1)
                )
    features.sort(key=lambda f: (f.delay, f.order, -abs(f.amplitude)))
    return features


def _record(features, delay, amplitude, reflections, traversals, floor):
    if abs(amplitude) < floor:
        return
    kind = "interface" if reflections == 1 else "echo"
    features.append(PathFeature(delay=delay, amplitude=amplitude, kind=kind, order=traversals // 2))


def count_effective_parameters(n_interfaces: int) -> int:
    """Independent real parameters of an n-interface lossy stack seen in reflection."""
    if n_interfaces < 1:
        raise ValidationError(f"need at least one interface, got {n_interfaces}")
    return 6 * n_interfaces - 5
