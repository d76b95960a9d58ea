"""Coincidence-interferogram engines and artifact bookkeeping.

Three trace generators are provided:

  * coincidence_trace_numeric -- quadrature of the two-photon coincidence
    integrals over the joint spectral intensity (JSI), valid for any stack.
    A monochromatic pump collapses the JSI onto the antidiagonal, so the
    engine switches to an exact 1-D reduction whenever the diagonal
    coherence width dwarfs the scan span.
  * closed_form_single_layer -- the analytic Gaussian-JSI expression in
    terms of effective reflectivities and pairwise cross visibilities.
  * pulsed_limit_trace -- the broadband-pump limit in which every cross
    (artifact) term is damped away and only real features survive.

All traces are normalized to the large-delay background, C(tau)/Gamma0.

The oscillatory delay sums are evaluated on uniform frequency nodes with a
chirp-z transform, which keeps the cost quasi-linear in the node count even
for stacks with long echo ringdowns.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import CZT

from . import spectral
from .errors import (
    DegeneratePairError,
    NumericalError,
    QuadratureResolutionError,
    UnsupportedProfileError,
    ValidationError,
)
from .spectral import SpectralModel, antidiagonal_weight
from .stack import (
    PathFeature,
    Sample,
    enumerate_paths,
    seconds_to_um,
    transfer_function_spectrum,
    um_to_seconds,
)

C_LIGHT = 299792458.0


@dataclass(frozen=True)
class QuadratureSettings:
    """Node-placement policy for the numeric engine.

    oversample: frequency samples per cycle of the fastest delay phase.
    tail_amplitude: echo amplitudes below this need not be resolved.
    envelope_sigmas: half-extent of Gaussian profiles in standard deviations.
    n_antidiagonal / n_diagonal: fixed node counts (None = automatic).
    max_nodes: cap on antidiagonal nodes; max_nodes_2d caps the tensor grid.
    cw_span_ratio: switch to the 1-D reduction when tau_d exceeds the scan
    span by this factor.
    """

    oversample: float = 8.0
    tail_amplitude: float = 1e-5
    envelope_sigmas: float = 5.0
    n_antidiagonal: int | None = None
    n_diagonal: int | None = None
    max_nodes: int = 1 << 19
    max_nodes_2d: int = 1 << 25
    cw_span_ratio: float = 100.0
    # When False, an unresolvable phase degrades accuracy at the node cap
    # instead of raising; used by the fitting preset so deep-ringdown
    # candidates stay comparable rather than falling off a cliff.
    strict: bool = True


DEFAULT_QUAD = QuadratureSettings()

# Faster preset for inner-loop fitting; accuracy ~1e-5 on normalized traces.
FIT_QUAD = QuadratureSettings(
    oversample=2.5,
    tail_amplitude=1e-3,
    envelope_sigmas=4.0,
    max_nodes=1 << 15,
    strict=False,
)

_DAMPING_NEGLIGIBLE = 1e-30


@dataclass
class Interferogram:
    """Normalized coincidence trace C(tau)/Gamma0 on a uniform delay grid."""

    delays: np.ndarray  # seconds, strictly increasing, uniform
    counts: np.ndarray  # dimensionless, >= 0
    gamma0: float  # background rate over N0
    meta: dict = field(default_factory=dict)
    # Exact um values from a trace file, kept so re-serialization is lossless
    # (um <-> seconds conversions are not bit-exact inverses).
    delays_um_cache: np.ndarray | None = None

    def __post_init__(self):
        self.delays = np.asarray(self.delays, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.delays.ndim != 1 or self.delays.size < 2:
            raise ValidationError("delay grid must be 1-D with at least two points")
        if self.counts.shape != self.delays.shape:
            raise ValidationError("counts and delays must have matching shapes")
        steps = np.diff(self.delays)
        if steps.min() <= 0:
            raise ValidationError("delay grid must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
            raise ValidationError("delay grid must be uniform")
        if self.counts.min() < 0:
            raise ValidationError("coincidence counts must be non-negative")

    @property
    def step(self) -> float:
        return float(self.delays[1] - self.delays[0])

    @property
    def delays_um(self) -> np.ndarray:
        if self.delays_um_cache is not None and self.delays_um_cache.size == self.delays.size:
            return self.delays_um_cache
        return self.delays * C_LIGHT * 1e6


@dataclass(frozen=True)
class ArtifactRecord:
    """Cross-interference term between two reflection features."""

    source_pair: tuple
    position: float  # delay midpoint, seconds
    visibility: float  # signed, normalized to the background
    damping: float  # diagonal-width Gaussian factor

    @property
    def position_um(self) -> float:
        return seconds_to_um(self.position)


def delay_grid_um(start_um: float, stop_um: float, step_um: float = 1.0) -> np.ndarray:
    """Uniform delay grid in seconds from path-length endpoints in um."""
    if step_um <= 0:
        raise ValidationError(f"grid step must be > 0 um, got {step_um!r}")
    n = int(round((stop_um - start_um) / step_um)) + 1
    if n < 2:
        raise ValidationError("delay grid must contain at least two points")
    return um_to_seconds(start_um + step_um * np.arange(n))


def default_delay_grid(sample: Sample, model: SpectralModel, step_um: float = 1.0) -> np.ndarray:
    """Grid covering every first-order echo plus the background margin."""
    span = 2.2 * seconds_to_um(sample.total_round_trip) + 8.0 * seconds_to_um(model.tau_a) + 20.0
    return delay_grid_um(-50.0, max(span, 100.0), step_um)


def _sample_fingerprint(sample: Sample) -> str:
    parts = []
    for iface in sample.interfaces:
        parts.append(f"i:{iface.r_fwd!r}:{iface.film_kappa!r}")
    for seg in sample.segments:
        parts.append(f"s:{seg.optical_delay!r}:{seg.bulk_kappa!r}")
    return hashlib.sha1("|".join(parts).encode()).hexdigest()[:12]


def _simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights for n uniformly spaced nodes (n odd)."""
    if n < 3 or n % 2 == 0:
        raise ValueError(f"Simpson rule needs an odd node count >= 3, got {n}")
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


def _echo_depth(sample: Sample, tail_amplitude: float) -> int:
    """Round trips after which internal echoes drop below tail_amplitude."""
    if sample.n_interfaces < 2:
        return 0
    fwd = [abs(i.r_fwd) for i in sample.interfaces]
    rho = max(fwd[:-1]) * max(fwd[1:])
    if rho <= 0.0:
        return 0
    if rho >= 1.0:
        return 600
    depth = math.ceil(math.log(max(tail_amplitude, 1e-12)) / math.log(rho))
    return int(min(max(depth, 1), 600))


def _delay_content(sample: Sample, delays: np.ndarray, model: SpectralModel, quad) -> float:
    """Longest delay the frequency grid must resolve."""
    scan = float(np.max(np.abs(delays)))
    ring = (1 + _echo_depth(sample, quad.tail_amplitude)) * sample.total_round_trip
    return scan + ring + 4.0 * model.tau_a


def _antidiagonal_axis(model: SpectralModel, tau_content: float, quad) -> tuple:
    """(u nodes, profile-times-Simpson weights) for the antidiagonal axis."""
    if model.antidiagonal_profile == spectral.RECTANGULAR:
        half = model.omega_a / 2.0
    else:
        half = quad.envelope_sigmas * model.omega_a / 2.0
    if quad.n_antidiagonal is not None:
        n = quad.n_antidiagonal
        if n < 3 or n % 2 == 0:
            raise ValidationError("n_antidiagonal must be odd and >= 3")
        du = 2.0 * half / (n - 1)
        if quad.strict and du * tau_content > math.pi:
            raise QuadratureResolutionError(
                f"{n} antidiagonal nodes cannot resolve the fastest phase "
                f"(step * delay = {du * tau_content:.2f} rad > pi)"
            )
    else:
        du_req = 2.0 * math.pi / (quad.oversample * tau_content)
        n = 2 * math.ceil(half / du_req) + 1
        if n > quad.max_nodes:
            n = quad.max_nodes | 1
            du = 2.0 * half / (n - 1)
            if quad.strict and du * tau_content > math.pi:
                raise QuadratureResolutionError(
                    f"resolving the fastest phase needs more than "
                    f"{quad.max_nodes} antidiagonal nodes"
                )
        n = max(n, 33) | 1
    u = np.linspace(-half, half, n)
    w = _simpson_weights(n, u[1] - u[0]) * antidiagonal_weight(model, u)
    return u, w


#: Memoized chirp-z plans and phase ramps; GA fitness loops reuse the same
#: node grid thousands of times, and plan construction dominates small czt
#: calls.  A uniform delay grid is fully determined by (size, first, last).
_CZT_CACHE: dict = {}


def _czt_plan(n: int, m: int, w: complex):
    key = ("plan", n, m, w)
    plan = _CZT_CACHE.get(key)
    if plan is None:
        if len(_CZT_CACHE) > 64:
            _CZT_CACHE.clear()
        plan = CZT(n, m=m, w=w, a=1.0)
        _CZT_CACHE[key] = plan
    return plan


def _phase_ramp(kind: str, key_floats: tuple, builder):
    key = (kind, *key_floats)
    ramp = _CZT_CACHE.get(key)
    if ramp is None:
        if len(_CZT_CACHE) > 64:
            _CZT_CACHE.clear()
        ramp = builder()
        _CZT_CACHE[key] = ramp
    return ramp


def _czt_delay_sum(K: np.ndarray, u0: float, du: float, delays: np.ndarray) -> np.ndarray:
    """sum_j K_j exp(-i u_j tau_m) over a uniform delay grid, via chirp-z."""
    tau0 = float(delays[0])
    dt = float(delays[1] - delays[0])
    n, m = K.size, delays.size
    pre = _phase_ramp(
        "pre", (n, du * tau0), lambda: np.exp(-1j * du * tau0 * np.arange(n))
    )
    post = _phase_ramp(
        "post",
        (m, u0, tau0, float(delays[-1])),
        lambda: np.exp(-1j * u0 * delays),
    )
    g = _czt_plan(n, m, complex(np.exp(-1j * du * dt)))(K * pre)
    return g * post


def _finalize_counts(counts: np.ndarray) -> np.ndarray:
    low = counts.min()
    if low < -5e-3:
        raise NumericalError(
            f"quadrature produced a strongly negative coincidence rate ({low:.2e}); "
            "increase the node budget"
        )
    return np.clip(counts, 0.0, None)


def _trace_cw(sample, model, delays, quad):
    tau_content = _delay_content(sample, delays, model, quad)
    u, w = _antidiagonal_axis(model, tau_content, quad)
    h1 = transfer_function_spectrum(sample, model.omega0 + u / 2.0)
    h2 = h1[::-1]  # the node grid is symmetric about omega0
    power = np.abs(h1) ** 2 + np.abs(h2) ** 2
    gamma0_rel = float((w * power).sum()) / 2.0
    if gamma0_rel <= 0.0:
        raise NumericalError("background rate vanished (sample reflects nothing)")
    K = w * h2 * np.conj(h1)
    # counts = 1 - 2 Re(Gamma)/Gamma0; both carry the same 1/4 prefactor, and
    # gamma0_rel holds half the power sum, so the ratio is Re(sum)/gamma0_rel.
    interference = _czt_delay_sum(K, float(u[0]), float(u[1] - u[0]), delays)
    counts = 1.0 - np.real(interference) / gamma0_rel
    gamma0 = 0.25 * float((w * power).sum()) / float(w.sum())
    return counts, gamma0, {"mode": "cw-1d", "n_antidiagonal": int(u.size)}


def _trace_2d(sample, model, delays, quad):
    tau_content = _delay_content(sample, delays, model, quad)
    u, wu = _antidiagonal_axis(model, tau_content, quad)
    du = float(u[1] - u[0])
    ju = (u.size - 1) // 2

    # Diagonal axis: no scan phase lives here, and the diagonal frequency
    # enters every path phase at half rate, so its Nyquist requirement is
    # twice as loose as the antidiagonal one.
    ring = tau_content - float(np.max(np.abs(delays)))
    half_v = quad.envelope_sigmas * model.omega_d / 2.0
    if quad.n_diagonal is not None:
        nv = quad.n_diagonal
        if nv < 3 or nv % 2 == 0:
            raise ValidationError("n_diagonal must be odd and >= 3")
        mv = max(1, math.ceil(2.0 * half_v / ((nv - 1) * du)))
    else:
        dv_req = 4.0 * math.pi / (quad.oversample * ring)
        mv = max(1, math.floor(dv_req / du))
        nv = 2 * math.ceil(half_v / (mv * du)) + 1
        nv = max(nv, 9) | 1
    dv = mv * du
    jv = (nv - 1) // 2
    if nv * u.size > quad.max_nodes_2d:
        raise QuadratureResolutionError(
            f"pulsed-pump quadrature needs {nv} x {u.size} nodes, above the "
            f"{quad.max_nodes_2d} tensor-grid cap"
        )
    v = dv * np.arange(-jv, jv + 1)
    wv = _simpson_weights(nv, dv) * np.exp(-2.0 * (v / model.omega_d) ** 2)

    # Both omega1 = omega0 + (v+u)/2 and omega2 = omega0 + (v-u)/2 land on a
    # master grid of step du/2, so H is evaluated once; row i of the tensor
    # grid is the contiguous window starting at mv*i (forward for omega1,
    # reversed for omega2), which keeps the reduction allocation-light.
    m_half = ju + jv * mv
    master = model.omega0 + (du / 2.0) * np.arange(-m_half, m_half + 1)
    h_master = transfer_function_spectrum(sample, master)
    p_master = np.abs(h_master) ** 2
    n_u = 2 * ju + 1
    h_windows = np.lib.stride_tricks.sliding_window_view(h_master, n_u)
    p_windows = np.lib.stride_tricks.sliding_window_view(p_master, n_u)
    starts = mv * np.arange(nv)
    K = np.zeros(n_u, dtype=complex)
    power_u = np.zeros(n_u)
    chunk = max(1, (1 << 22) // n_u)
    for lo in range(0, nv, chunk):
        sel = starts[lo : lo + chunk]
        w = wv[lo : lo + chunk]
        rows = h_windows[sel]
        K += np.einsum("i,ij->j", w, rows[:, ::-1] * np.conj(rows))
        p_rows = p_windows[sel]
        power_u += w @ (p_rows + p_rows[:, ::-1])

    weight_sum = float(wv.sum()) * float(wu.sum())
    gamma0_quarter = float(power_u @ wu) / 4.0
    gamma0_rel = 2.0 * gamma0_quarter  # = (1/2) * integral of S * (|H1|^2+|H2|^2)
    if gamma0_rel <= 0.0:
        raise NumericalError("background rate vanished (sample reflects nothing)")
    K = K * wu
    interference = _czt_delay_sum(K, float(u[0]), du, delays)
    counts = 1.0 - np.real(interference) / gamma0_rel
    gamma0 = gamma0_quarter / weight_sum
    return counts, gamma0, {
        "mode": "tensor-2d",
        "n_antidiagonal": int(u.size),
        "n_diagonal": int(nv),
    }


def coincidence_trace_numeric(
    sample: Sample,
    model: SpectralModel,
    delays: np.ndarray,
    quad: QuadratureSettings = DEFAULT_QUAD,
) -> Interferogram:
    """Normalized coincidence trace by direct quadrature of the JSI integrals."""
    delays = np.asarray(delays, dtype=float)
    if delays.ndim != 1 or delays.size < 2:
        raise ValidationError("delay grid must be 1-D with at least two points")
    span = float(delays[-1] - delays[0])
    if span <= 0:
        raise ValidationError("delay grid must be increasing")
    if model.tau_d > quad.cw_span_ratio * span:
        counts, gamma0, info = _trace_cw(sample, model, delays, quad)
    else:
        counts, gamma0, info = _trace_2d(sample, model, delays, quad)
    meta = {
        "engine": "numeric",
        "sample": _sample_fingerprint(sample),
        "omega0": model.omega0,
        "omega_a": model.omega_a,
        "omega_d": model.omega_d,
        "profile": model.antidiagonal_profile,
        **info,
    }
    return Interferogram(delays=delays, counts=_finalize_counts(counts), gamma0=gamma0, meta=meta)


def effective_reflectivities(
    r01: float,
    r12: float,
    kappa: float = 0.0,
    tol: float = 1e-12,
    max_terms: int = 4000,
) -> np.ndarray:
    """Geometric-series coefficients of a single layer's transfer function.

    Term k sits at round-trip delay k*T; the film loss at the front interface
    enters as exp(-2*kappa) per round trip.
    """
    t_sq = 1.0 - r01**2
    ratio = -r01 * r12 * math.exp(-2.0 * kappa)
    out = [r01]
    term = r12 * t_sq * math.exp(-2.0 * kappa)
    while abs(term) >= tol and len(out) < max_terms:
        out.append(term)
        term *= ratio
    return np.array(out)


def _cross_terms(delays_f: np.ndarray, amps: np.ndarray, model: SpectralModel):
    """Pairwise artifact quantities for arbitrary feature delays.

    Returns (k, l, separation, midpoint, raw visibility a_k a_l damp cos,
    damping) for every ordered pair k < l.
    """
    n = amps.size
    k, l = np.triu_indices(n, 1)
    sep = delays_f[l] - delays_f[k]
    mid = (delays_f[k] + delays_f[l]) / 2.0
    damp = np.exp(-0.5 * (sep / model.tau_d) ** 2)
    raw = amps[k] * amps[l] * damp * np.cos(model.omega0 * sep)
    return k, l, sep, mid, raw, damp


def background_level(delays_f: np.ndarray, amps: np.ndarray, model: SpectralModel) -> float:
    """Gamma0/N0 for a set of reflection features under a Gaussian JSI."""
    delays_f = np.asarray(delays_f, dtype=float)
    amps = np.asarray(amps, dtype=float)
    g0 = 0.5 * float((amps**2).sum())
    if amps.size > 1:
        _, _, sep, _, raw, _ = _cross_terms(delays_f, amps, model)
        coherence = np.exp(-0.5 * (sep / model.tau_a) ** 2)
        keep = coherence > _DAMPING_NEGLIGIBLE
        g0 += float((raw[keep] * coherence[keep]).sum())
    return g0


def visibilities(features, model: SpectralModel):
    """Per-feature dip visibilities and pairwise artifact records.

    features: sequence of PathFeature or (delay, amplitude) pairs.
    """
    if model.antidiagonal_profile != spectral.GAUSSIAN:
        raise UnsupportedProfileError("visibility formulas assume a Gaussian JSI")
    delays_f, amps = _feature_arrays(features)
    if amps.size == 0:
        raise ValidationError("feature list is empty")
    g0 = background_level(delays_f, amps, model)
    if g0 <= 0:
        raise NumericalError("background level vanished")
    v_dips = 0.5 * amps**2 / g0
    records = []
    if amps.size > 1:
        k, l, sep, mid, raw, damp = _cross_terms(delays_f, amps, model)
        vis = raw / g0
        for i in range(k.size):
            records.append(
                ArtifactRecord(
                    source_pair=(int(k[i]), int(l[i])),
                    position=float(mid[i]),
                    visibility=float(vis[i]),
                    damping=float(damp[i]),
                )
            )
    return v_dips, records


def _feature_arrays(features):
    delays_f = []
    amps = []
    for f in features:
        if isinstance(f, PathFeature):
            delays_f.append(f.delay)
            amps.append(f.amplitude)
        else:
            d, a = f
            delays_f.append(float(d))
            amps.append(float(a))
    return np.array(delays_f, dtype=float), np.array(amps, dtype=float)


def _gaussian_dip_sum(delays, centers, heights, tau_a):
    counts = np.ones_like(delays)
    lo = delays[0] - 6.0 * tau_a
    hi = delays[-1] + 6.0 * tau_a
    for c, h in zip(centers, heights):
        if lo <= c <= hi and h != 0.0:
            counts -= h * np.exp(-2.0 * ((delays - c) / tau_a) ** 2)
    return counts


def closed_form_single_layer(
    r_tilde,
    T: float,
    model: SpectralModel,
    delays: np.ndarray,
    n_terms: int | None = None,
) -> Interferogram:
    """Analytic single-layer interferogram from effective reflectivities.

    Feature k sits at delay k*T with amplitude r_tilde[k]; the trace is the
    background minus a Gaussian dip per feature and per feature pair.
    """
    if model.antidiagonal_profile != spectral.GAUSSIAN:
        raise UnsupportedProfileError(
            "closed form assumes a Gaussian JSI; use the numeric engine for "
            "rectangular filters"
        )
    amps = np.asarray(r_tilde, dtype=float)
    if n_terms is not None:
        if n_terms < 1:
            raise ValidationError(f"n_terms must be >= 1, got {n_terms}")
        amps = amps[:n_terms]
    if amps.size == 0:
        raise ValidationError("need at least one effective reflectivity")
    delays = np.asarray(delays, dtype=float)
    delays_f = T * np.arange(amps.size)
    g0 = background_level(delays_f, amps, model)
    centers = list(delays_f)
    heights = list(0.5 * amps**2 / g0)
    if amps.size > 1:
        _, _, _, mid, raw, _ = _cross_terms(delays_f, amps, model)
        centers.extend(mid)
        heights.extend(raw / g0)
    counts = _gaussian_dip_sum(delays, centers, heights, model.tau_a)
    meta = {"engine": "closed-form", "round_trip": T, "n_terms": int(amps.size)}
    return Interferogram(delays=delays, counts=_finalize_counts(counts), gamma0=g0, meta=meta)


def _merge_taps(features) -> tuple:
    """Collapse enumerated paths sharing a delay into single taps."""
    delays_f, amps = _feature_arrays(features)
    if delays_f.size == 0:
        return delays_f, amps
    order = np.argsort(delays_f)
    d, a = delays_f[order], amps[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(d) > 1e-18) + 1])
    return d[starts], np.add.reduceat(a, starts)


def _power_integral(sample: Sample, model: SpectralModel, tail_amplitude: float = 1e-4) -> float:
    """Mean of |H|^2 over the signal marginal spectrum (exact background power).

    The marginal of either photon's frequency is Gaussian with variance
    (omega_a^2 + omega_d^2)/16; |H|^2 oscillates at the echo-ringdown rate,
    which sets the node count.
    """
    sigma = math.sqrt(model.omega_a**2 + model.omega_d**2) / 4.0
    ring = (1 + _echo_depth(sample, tail_amplitude)) * sample.total_round_trip
    half = 5.0 * sigma
    if ring > 0.0:
        n = 2 * math.ceil(half * 4.0 * ring / (2.0 * math.pi)) + 1
    else:
        n = 201
    n = min(max(n, 201), 1 << 18) | 1
    nodes = np.linspace(-half, half, n)
    weights = _simpson_weights(n, nodes[1] - nodes[0]) * np.exp(-0.5 * (nodes / sigma) ** 2)
    h = transfer_function_spectrum(sample, model.omega0 + nodes)
    return float((weights * np.abs(h) ** 2).sum() / weights.sum())


def _dip_sum(delays: np.ndarray, centers: np.ndarray, heights: np.ndarray, tau_a: float) -> np.ndarray:
    """1 - sum of Gaussian dips, vectorized over many centers."""
    counts = np.ones_like(delays)
    lo = delays[0] - 6.0 * tau_a
    hi = delays[-1] + 6.0 * tau_a
    keep = (centers >= lo) & (centers <= hi) & (np.abs(heights) > 1e-12)
    centers, heights = centers[keep], heights[keep]
    chunk = max(1, (1 << 21) // max(delays.size, 1))
    for i in range(0, centers.size, chunk):
        c = centers[i : i + chunk, None]
        h = heights[i : i + chunk, None]
        counts -= (h * np.exp(-2.0 * ((delays[None, :] - c) / tau_a) ** 2)).sum(axis=0)
    return counts


def closed_form_trace(
    sample: Sample,
    model: SpectralModel,
    delays: np.ndarray,
    max_order: int = 10,
    amplitude_floor: float = 1e-3,
) -> Interferogram:
    """Analytic Gaussian-JSI interferogram of an arbitrary stack.

    The stack's reflection response is decomposed into discrete delay taps
    (interfaces and echoes); for a Gaussian JSI every tap contributes an
    exact Gaussian dip and every tap pair an exact cross (artifact) term
    with pump-bandwidth damping.  The background power is computed
    spectrally, so the normalization is exact even where the tap series is
    truncated.  Much faster than the quadrature engine.
    """
    if model.antidiagonal_profile != spectral.GAUSSIAN:
        raise UnsupportedProfileError(
            "the analytic trace assumes a Gaussian JSI; use the numeric "
            "engine for rectangular filters"
        )
    features = enumerate_paths(sample, max_order=max_order, amplitude_floor=amplitude_floor)
    delays_f, amps = _merge_taps(features)
    delays = np.asarray(delays, dtype=float)
    power = _power_integral(sample, model, tail_amplitude=min(amplitude_floor, 1e-4))
    g0 = 0.5 * power
    if amps.size > 1:
        _, _, sep, _, raw, _ = _cross_terms(delays_f, amps, model)
        coherence = np.exp(-0.5 * (sep / model.tau_a) ** 2)
        keep = coherence > _DAMPING_NEGLIGIBLE
        g0 += float((raw[keep] * coherence[keep]).sum())
    if g0 <= 0:
        raise NumericalError("background level vanished")
    centers = delays_f
    heights = 0.5 * amps**2 / g0
    if amps.size > 1:
        _, _, _, mid, raw, _ = _cross_terms(delays_f, amps, model)
        centers = np.concatenate([centers, mid])
        heights = np.concatenate([heights, raw / g0])
    counts = _dip_sum(delays, centers, heights, model.tau_a)
    meta = {"engine": "closed-form", "n_taps": int(amps.size)}
    return Interferogram(delays=delays, counts=_finalize_counts(counts), gamma0=g0, meta=meta)


def pulsed_limit_trace(features, model: SpectralModel, delays: np.ndarray) -> Interferogram:
    """Broadband-pump limit: artifacts vanish, features keep V_k = a_k^2 / sum a^2."""
    delays_f, amps = _feature_arrays(features)
    if amps.size == 0:
        raise ValidationError("feature list is empty")
    delays = np.asarray(delays, dtype=float)
    total = float((amps**2).sum())
    if total <= 0:
        raise NumericalError("all feature amplitudes vanish")
    heights = amps**2 / total
    counts = _gaussian_dip_sum(delays, delays_f, heights, model.tau_a)
    meta = {"engine": "pulsed-limit", "n_features": int(amps.size)}
    return Interferogram(delays=delays, counts=_finalize_counts(counts), gamma0=total / 2.0, meta=meta)


def artifact_tuning_curve(
    sample: Sample,
    pair: tuple,
    pump_nm: np.ndarray,
    max_order: int = 6,
    amplitude_floor: float = 1e-4,
) -> np.ndarray:
    """cos(omega0(lambda_p) * dT) for the artifact made by two features.

    Returns an (n, 2) array of (pump wavelength nm, cosine value).  Zero
    crossings mark suppression wavelengths; extrema maximal dip/peak
    artifacts.
    """
    features = enumerate_paths(sample, max_order=max_order, amplitude_floor=amplitude_floor)
    k, l = pair
    try:
        sep = abs(features[l].delay - features[k].delay)
    except IndexError as exc:
        raise ValidationError(
            f"pair {pair!r} out of range for {len(features)} enumerated features"
        ) from exc
    if sep <= 0.0:
        raise DegeneratePairError(
            f"features {pair!r} share the same delay; no tuning curve exists"
        )
    pump_nm = np.asarray(pump_nm, dtype=float)
    cosine = np.cos(math.pi * C_LIGHT * sep / (pump_nm * 1e-9))
    return np.column_stack([pump_nm, cosine])


def feature_separation(sample: Sample, pair: tuple, **kwargs) -> float:
    """Delay separation of two enumerated features, seconds."""
    features = enumerate_paths(sample, **kwargs)
    k, l = pair
    try:
        sep = abs(features[l].delay - features[k].delay)
    except IndexError as exc:
        raise ValidationError(
            f"pair {pair!r} out of range for {len(features)} enumerated features"
        ) from exc
    if sep <= 0.0:
        raise DegeneratePairError(f"features {pair!r} share the same delay")
    return sep


def tuning_markers(separation: float, pump_nm_lo: float, pump_nm_hi: float):
    """Suppression and extremum pump wavelengths for a given feature separation.

    The cosine argument is pi * c * separation / lambda, so zeros sit at
    lambda = c * separation / (m + 1/2) and extrema at lambda = c * separation / m.
    """
    if separation <= 0:
        raise DegeneratePairError("separation must be positive")
    a = C_LIGHT * separation  # meters
    lo = pump_nm_lo * 1e-9
    hi = pump_nm_hi * 1e-9

    def _roots(offset):
        m_hi = a / lo - offset
        m_lo = a / hi - offset
        ms = np.arange(math.ceil(m_lo), math.floor(m_hi) + 1)
        ms = ms[ms > 0]
        return np.sort(a / (ms + offset)) * 1e9

    return _roots(0.5), _roots(0.0)


@dataclass(frozen=True)
class Contribution:
    """One process feeding a trace position: a feature dip or an artifact."""

    kind: str  # "interface", "echo", or "artifact"
    indices: tuple  # feature index, or (k, l) for artifacts
    visibility: float


@dataclass
class LabeledPosition:
    """All processes contributing near a single trace position."""

    position: float  # seconds
    contributions: list
    net_visibility: float
    cancels: bool

    @property
    def position_um(self) -> float:
        return seconds_to_um(self.position)


def label_trace(
    sample: Sample,
    model: SpectralModel,
    max_order: int = 6,
    amplitude_floor: float = 1e-4,
    visibility_floor: float = 1e-6,
) -> list:
    """Group every dip, echo, and artifact by trace position.

    Contributions closer than half a dip width (tau_a / 2) are merged into
    one position; positions whose signed visibilities nearly cancel are
    flagged.
    """
    features = enumerate_paths(sample, max_order=max_order, amplitude_floor=amplitude_floor)
    v_dips, artifacts = visibilities(features, model)
    entries = []
    for i, f in enumerate(features):
        entries.append((f.delay, Contribution(f.kind, (i,), float(v_dips[i]))))
    for rec in artifacts:
        if abs(rec.visibility) >= visibility_floor:
            entries.append((rec.position, Contribution("artifact", rec.source_pair, rec.visibility)))
    entries.sort(key=lambda e: e[0])
    groups = []
    tol = model.tau_a / 2.0
    for pos, contrib in entries:
        if groups and pos - groups[-1][0][0] <= tol:
            groups[-1].append((pos, contrib))
        else:
            groups.append([(pos, contrib)])
    out = []
    for grp in groups:
        contribs = [c for _, c in grp]
        weights = np.array([abs(c.visibility) for c in contribs])
        positions = np.array([p for p, _ in grp])
        center = float((weights * positions).sum() / weights.sum()) if weights.sum() else float(positions.mean())
        net = float(sum(c.visibility for c in contribs))
        gross = float(sum(abs(c.visibility) for c in contribs))
        out.append(
            LabeledPosition(
                position=center,
                contributions=contribs,
                net_visibility=net,
                cancels=bool(gross > 0 and abs(net) < 0.1 * gross),
            )
        )
    return out


def add_shot_noise(trace: Interferogram, mean_counts_at_background: float, seed: int) -> Interferogram:
    """Replace each point with a Poisson draw at that rate, renormalized.

    mean_counts_at_background sets the expected raw counts where
    C/Gamma0 = 1; larger values mean relatively quieter traces.
    """
    if not np.isfinite(mean_counts_at_background) or mean_counts_at_background <= 0:
        raise ValidationError(
            f"mean counts must be > 0, got {mean_counts_at_background!r}"
        )
    rng = np.random.default_rng(seed)
    lam = trace.counts * mean_counts_at_background
    noisy = rng.poisson(lam).astype(float) / mean_counts_at_background
    meta = dict(trace.meta)
    meta.update({"noise_mean_counts": float(mean_counts_at_background), "noise_seed": int(seed)})
    return Interferogram(delays=trace.delays.copy(), counts=noisy, gamma0=trace.gamma0, meta=meta)
