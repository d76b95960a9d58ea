"""Genetic-algorithm inversion of coincidence interferograms.

Candidate samples are encoded as Gray-coded binary chromosomes, scored by
the mean absolute error between the measured trace and a numeric forward
simulation, and evolved with tournament selection, single-point crossover,
per-bit mutation, and elitism.  Layer-count selection reruns the search for
each candidate interface count and keeps the most parsimonious model whose
fitness is within a small factor of the best found.

All randomness flows through a single numpy Generator seeded from the
configuration, so identical inputs reproduce identical results bit for bit.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
import scipy.optimize

from .engine import (
    FIT_QUAD,
    Interferogram,
    QuadratureSettings,
    closed_form_trace,
    coincidence_trace_numeric,
)
from .errors import QoctError, ValidationError
from .spectral import GAUSSIAN, SpectralModel
from .stack import Sample, count_effective_parameters, seconds_to_um

#: Sentinel fitness for chromosomes that decode to unusable samples; keeps
#: the population totally ordered without special cases in selection.
WORST_FITNESS = float("inf")


@dataclass(frozen=True)
class Parameter:
    """One scalar search dimension, or a pinned constant when fixed is set."""

    name: str
    lower: float
    upper: float
    fixed: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValidationError(f"bounds for {self.name!r} must be finite")
        if self.fixed is None:
            if not self.lower < self.upper:
                raise ValidationError(
                    f"free parameter {self.name!r} needs lower < upper, "
                    f"got [{self.lower}, {self.upper}]"
                )
        elif not (self.lower <= self.fixed <= self.upper):
            raise ValidationError(
                f"fixed value {self.fixed} for {self.name!r} lies outside "
                f"[{self.lower}, {self.upper}]"
            )

    @property
    def is_free(self) -> bool:
        return self.fixed is None


@dataclass(frozen=True)
class SearchSpace:
    """Ordered parameter list describing candidate samples.

    Parameter order is reflectivities R1..RN (intensity), one-way optical
    paths d1..d(N-1) in um, then optionally film and bulk loss exponents.
    Free parameters are quantized to bits_per_parameter bits each.
    """

    n_interfaces: int
    parameters: tuple
    bits_per_parameter: int = 16

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))
        if self.n_interfaces < 1:
            raise ValidationError("need at least one interface")
        if not 1 <= self.bits_per_parameter <= 32:
            raise ValidationError("bits_per_parameter must be in [1, 32]")
        n_free = len(self.free_parameters)
        if n_free == 0:
            raise ValidationError("search space has no free parameters")
        cap = count_effective_parameters(self.n_interfaces)
        if n_free > cap:
            raise ValidationError(
                f"{n_free} free parameters exceed the {cap} effective "
                f"degrees of freedom of {self.n_interfaces} interfaces"
            )

    @property
    def free_parameters(self) -> tuple:
        return tuple(p for p in self.parameters if p.is_free)

    @property
    def n_bits(self) -> int:
        return self.bits_per_parameter * len(self.free_parameters)

    def sample_from_values(self, values: np.ndarray) -> Sample:
        """Build a Sample from a free-parameter vector (fixed values merged)."""
        full = {p.name: p.fixed for p in self.parameters}
        for p, v in zip(self.free_parameters, values, strict=True):
            full[p.name] = float(v)
        n = self.n_interfaces
        amplitudes = [math.sqrt(full[f"R{i}"]) for i in range(1, n + 1)]
        paths = [full[f"d{j}"] for j in range(1, n)]
        film = [full.get(f"film_kappa{i}", 0.0) or 0.0 for i in range(1, n + 1)]
        bulk = [full.get(f"bulk_kappa{j}", 0.0) or 0.0 for j in range(1, n)]
        return Sample.from_optical_paths(amplitudes, paths, film, bulk)


def default_search_space(
    n_interfaces: int,
    fixed: dict | None = None,
    r_bounds: tuple = (0.0, 0.98),
    d_bounds: tuple = (10.0, 400.0),
    fit_losses: bool = False,
    kappa_bounds: tuple = (0.0, 0.5),
    bounds: dict | None = None,
    bits_per_parameter: int = 16,
) -> SearchSpace:
    """Search space over reflectivities and layer distances.

    fixed maps parameter names (R1, d2, ...) to pinned values; bounds
    overrides the default range per parameter name.  Loss exponents are
    pinned to zero unless fit_losses is set.
    """
    fixed = dict(fixed or {})
    bounds = dict(bounds or {})
    params = []

    def add(name, default_bounds, pinned_default=None):
        lo, hi = bounds.pop(name, default_bounds)
        if name in fixed:
            params.append(Parameter(name, lo, hi, fixed=float(fixed.pop(name))))
        elif pinned_default is not None:
            params.append(Parameter(name, lo, hi, fixed=pinned_default))
        else:
            params.append(Parameter(name, lo, hi))

    for i in range(1, n_interfaces + 1):
        add(f"R{i}", r_bounds)
    for j in range(1, n_interfaces):
        add(f"d{j}", d_bounds)
    for i in range(1, n_interfaces + 1):
        add(f"film_kappa{i}", kappa_bounds, pinned_default=None if fit_losses else 0.0)
    for j in range(1, n_interfaces):
        add(f"bulk_kappa{j}", kappa_bounds, pinned_default=None if fit_losses else 0.0)
    if fixed:
        raise ValidationError(f"fixed values for unknown parameters: {sorted(fixed)}")
    if bounds:
        raise ValidationError(f"bounds for unknown parameters: {sorted(bounds)}")
    return SearchSpace(
        n_interfaces=n_interfaces,
        parameters=tuple(params),
        bits_per_parameter=bits_per_parameter,
    )


def known_front_space(
    n_interfaces: int,
    known_reflectivities: Sequence[float],
    **kwargs,
) -> SearchSpace:
    """Pin the leading interface reflectivities, as when the front coatings
    are independently characterized; the last reflectivity and every
    distance stay free."""
    known = list(known_reflectivities)
    if len(known) >= n_interfaces:
        raise ValidationError(
            "at least the last reflectivity must remain free; got "
            f"{len(known)} known values for {n_interfaces} interfaces"
        )
    fixed = dict(kwargs.pop("fixed", {}) or {})
    for i, r in enumerate(known, start=1):
        fixed[f"R{i}"] = float(r)
    return default_search_space(n_interfaces, fixed=fixed, **kwargs)


def _quant_max(bits: int) -> int:
    return (1 << bits) - 1


def encode(values: np.ndarray, space: SearchSpace) -> np.ndarray:
    """Free-parameter vector -> Gray-coded bit array (uint8 of 0/1)."""
    values = np.asarray(values, dtype=float)
    free = space.free_parameters
    if values.shape != (len(free),):
        raise ValidationError(
            f"expected {len(free)} free parameters, got shape {values.shape}"
        )
    bits = space.bits_per_parameter
    qmax = _quant_max(bits)
    out = np.empty((len(free), bits), dtype=np.uint8)
    for i, (p, x) in enumerate(zip(free, values)):
        if not (p.lower <= x <= p.upper):
            raise ValidationError(
                f"{p.name} = {x} outside bounds [{p.lower}, {p.upper}]"
            )
        q = int(round((x - p.lower) / (p.upper - p.lower) * qmax))
        g = q ^ (q >> 1)
        out[i] = [(g >> (bits - 1 - b)) & 1 for b in range(bits)]
    return out.reshape(-1)


def decode(chromosome: np.ndarray, space: SearchSpace) -> np.ndarray:
    """Gray-coded bit array -> free-parameter vector."""
    chromosome = np.asarray(chromosome, dtype=np.uint8)
    if chromosome.shape != (space.n_bits,):
        raise ValidationError(
            f"chromosome must have {space.n_bits} bits, got {chromosome.shape}"
        )
    bits = space.bits_per_parameter
    gray = chromosome.reshape(-1, bits)
    binary = np.bitwise_xor.accumulate(gray, axis=1)
    weights = 1 << np.arange(bits - 1, -1, -1, dtype=np.int64)
    q = binary.astype(np.int64) @ weights
    lo = np.array([p.lower for p in space.free_parameters])
    hi = np.array([p.upper for p in space.free_parameters])
    return lo + q / _quant_max(bits) * (hi - lo)


@dataclass(frozen=True)
class GAConfig:
    """Evolution-loop settings; defaults follow the retrieval protocol."""

    population_size: int = 300
    max_generations: int = 50
    mutation_rate: float | None = None  # None -> one expected flip per child
    elitism: int = 2
    tournament_size: int = 3
    fitness_threshold: float = 0.0
    rng_seed: int = 0
    #: Greedy quantized-lattice polish sweeps applied to the final best
    #: candidate; 0 disables refinement.
    refine_sweeps: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValidationError("population_size must be >= 2")
        if self.refine_sweeps < 0:
            raise ValidationError("refine_sweeps must be >= 0")
        if self.max_generations < 1:
            raise ValidationError("max_generations must be >= 1")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ValidationError("mutation_rate must be in [0, 1]")
        if not 0 <= self.elitism < self.population_size:
            raise ValidationError("elitism must be in [0, population_size)")
        if self.tournament_size < 1:
            raise ValidationError("tournament_size must be >= 1")


@dataclass
class RetrievalResult:
    """Outcome of one evolutionary retrieval."""

    best_parameters: dict  # name -> value, fixed parameters included
    best_fitness: float
    fitness_history: list  # best fitness after each generation
    n_interfaces: int
    reconstruction: Interferogram | None
    fitness_by_n: list = field(default_factory=list)  # (n, best fitness) pairs
    generations_run: int = 0


def fitness(
    chromosome: np.ndarray,
    target: Interferogram,
    space: SearchSpace,
    model: SpectralModel,
    quad: QuadratureSettings = FIT_QUAD,
) -> float:
    """Mean absolute error between the target and the decoded candidate's
    simulated trace; unusable candidates score WORST_FITNESS."""
    values = decode(chromosome, space)
    return _fitness_of_values(values, target, space, model, quad)


def _forward(sample, model, delays, quad) -> Interferogram:
    """Candidate forward model: analytic tap expansion where the pump is
    broadband and the JSI Gaussian (the 2-D quadrature would be far too
    slow there), numeric quadrature otherwise."""
    span = float(delays[-1] - delays[0])
    if model.antidiagonal_profile == GAUSSIAN and model.tau_d <= quad.cw_span_ratio * span:
        floor = min(max(quad.tail_amplitude, 1e-5), 1e-3)
        return closed_form_trace(sample, model, delays, amplitude_floor=floor)
    return coincidence_trace_numeric(sample, model, delays, quad)


def _fitness_of_values(values, target, space, model, quad) -> float:
    try:
        sample = space.sample_from_values(values)
        trace = _forward(sample, model, target.delays, quad)
    except QoctError:
        return WORST_FITNESS
    return float(np.mean(np.abs(target.counts - trace.counts)))


def dip_positions(
    target: Interferogram,
    model: SpectralModel,
    max_positions: int = 12,
    depth_floor: float = 0.01,
) -> tuple:
    """Estimate round-trip feature positions from a trace's local minima.

    The trace is smoothed over roughly a quarter dip width (which also
    suppresses shot noise), interior minima at least depth_floor below the
    background are kept, and each position is sharpened by a parabolic fit
    through its three nearest samples.  Returns (positions in seconds,
    depths), sorted by position.
    """
    counts = target.counts
    step = target.step
    sigma = model.tau_a / 4.0
    half = max(1, int(round(3.0 * sigma / step)))
    x = np.arange(-half, half + 1) * step
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    kernel /= kernel.sum()
    smooth = np.convolve(counts, kernel, mode="same")
    interior = (smooth[1:-1] < smooth[:-2]) & (smooth[1:-1] <= smooth[2:])
    idx = np.flatnonzero(interior) + 1
    # zero padding biases the smoothed trace near the ends
    idx = idx[(idx > half) & (idx < counts.size - half - 1)]
    depths = 1.0 - smooth[idx]
    keep = depths >= depth_floor
    idx, depths = idx[keep], depths[keep]
    order = np.argsort(depths)[::-1][:max_positions]
    idx, depths = idx[order], depths[order]
    positions = []
    for i in idx:
        y0, y1, y2 = smooth[i - 1], smooth[i], smooth[i + 1]
        denom = y0 - 2.0 * y1 + y2
        offset = 0.5 * (y0 - y2) / denom if denom > 0 else 0.0
        positions.append(target.delays[i] + float(np.clip(offset, -1.0, 1.0)) * step)
    by_position = np.argsort(positions)
    return np.asarray(positions)[by_position], np.asarray(depths)[by_position]


def seed_candidates(
    target: Interferogram,
    space: SearchSpace,
    model: SpectralModel,
    max_candidates: int = 200,
    depth_floor: float = 0.01,
    amplitude_scales: Sequence[float] = (0.9, 0.5, 0.25),
) -> list:
    """Initial candidates read off the target's dip structure.

    Every dip is a potential interface; candidates assign the earliest dip
    to the front interface and choose the remaining interfaces from the
    other dips (deepest combinations first), converting position gaps to
    one-way distances and dip depths to reflectivity guesses at several
    overall scales.  Wrong assignments (echoes, artifacts) score poorly and
    die out; a near-correct one puts the search in the right basin.
    """
    n = space.n_interfaces
    positions, depths = dip_positions(target, model, depth_floor=depth_floor)
    if positions.size < n:
        return []
    pos_um = np.array([seconds_to_um(p) for p in positions])
    need = n - 1
    combos = list(combinations(range(1, pos_um.size), need))
    combos.sort(key=lambda c: -float(depths[list(c)].sum()))
    out = []
    for combo in combos:
        sel = [0, *combo]
        gaps = np.diff(pos_um[sel]) / 2.0  # round-trip gap -> one-way path
        dip = depths[sel]
        for scale in amplitude_scales:
            guess = {}
            r = scale * dip / float(dip.max())
            for i in range(1, n + 1):
                guess[f"R{i}"] = float(r[i - 1])
            for j in range(1, n):
                guess[f"d{j}"] = float(gaps[j - 1])
            vec = np.array(
                [
                    min(max(guess.get(p.name, 0.0), p.lower), p.upper)
                    for p in space.free_parameters
                ]
            )
            out.append(vec)
            if len(out) >= max_candidates:
                return out
    return out


def local_refine(
    values: np.ndarray,
    target: Interferogram,
    space: SearchSpace,
    model: SpectralModel,
    quad: QuadratureSettings = FIT_QUAD,
    sweeps: int = 3,
    step_sizes: Sequence[int] = (4096, 1024, 256, 64, 16, 4, 1),
) -> tuple:
    """Greedy coordinate descent on the quantized parameter lattice.

    Deterministic polish of a candidate: each free parameter is nudged by
    decreasing quantization-step multiples in both directions, keeping any
    improvement, until a sweep changes nothing.  Returns (values, fitness).
    """
    free = space.free_parameters
    qmax = _quant_max(space.bits_per_parameter)
    lo = np.array([p.lower for p in free])
    hi = np.array([p.upper for p in free])
    clipped = np.clip(np.asarray(values, dtype=float), lo, hi)
    q = np.round((clipped - lo) / (hi - lo) * qmax).astype(np.int64)

    def as_values(qv):
        return lo + qv / qmax * (hi - lo)

    best = _fitness_of_values(as_values(q), target, space, model, quad)
    for _ in range(max(sweeps, 0)):
        improved = False
        for i in range(q.size):
            for step in step_sizes:
                for sign in (1, -1):
                    trial = q.copy()
                    trial[i] = min(max(trial[i] + sign * step, 0), qmax)
                    if trial[i] == q[i]:
                        continue
                    f = _fitness_of_values(as_values(trial), target, space, model, quad)
                    if f < best:
                        best, q, improved = f, trial, True
        if not improved:
            break
    return as_values(q), best


def fine_polish(
    values: np.ndarray,
    target: Interferogram,
    space: SearchSpace,
    model: SpectralModel,
    quad: QuadratureSettings = FIT_QUAD,
    maxfev: int = 1500,
) -> tuple:
    """Continuous simplex descent from a near-solution.

    Runs Nelder-Mead in box-normalized coordinates against a
    finer-tolerance forward model than the evolution loop uses, removing
    the small parameter bias left by the fast fitness approximation.
    Returns (values, fitness) under that finer objective.
    """
    free = space.free_parameters
    lo = np.array([p.lower for p in free])
    hi = np.array([p.upper for p in free])
    fine_quad = dataclasses.replace(quad, tail_amplitude=min(quad.tail_amplitude, 1e-4))

    def objective(z):
        x = lo + np.clip(z, 0.0, 1.0) * (hi - lo)
        return _fitness_of_values(x, target, space, model, fine_quad)

    z0 = (np.clip(np.asarray(values, dtype=float), lo, hi) - lo) / (hi - lo)
    res = scipy.optimize.minimize(
        objective,
        z0,
        method="Nelder-Mead",
        options={"maxfev": maxfev, "xatol": 1e-7, "fatol": 1e-10},
    )
    z_best, f_best = (res.x, float(res.fun)) if res.fun <= objective(z0) else (z0, float(objective(z0)))
    return lo + np.clip(z_best, 0.0, 1.0) * (hi - lo), f_best


def _nm_descend(objective_z, z0, span, maxfev):
    """Nelder-Mead from z0 (unit box) with a fringe-scale initial simplex.

    The default simplex spans a few percent of each box side, which for a
    distance bounded over hundreds of microns means initial steps of many
    microns -- far beyond one interference fringe, so the descent hops to
    an arbitrary fringe.  Seeding the simplex at ~0.04 um per distance
    (and 0.02 per reflectivity) keeps it inside the fringe the start is
    aligned to; the simplex can still expand to fix envelope-scale error.
    """
    step = np.where(span <= 1.0, 0.02, 0.04 / span)
    simplex = z0[None, :] + np.vstack([np.zeros_like(z0), np.diag(step)])
    res = scipy.optimize.minimize(
        objective_z,
        z0,
        method="Nelder-Mead",
        options={
            "maxfev": maxfev,
            "xatol": 1e-7,
            "fatol": 1e-12,
            "initial_simplex": simplex,
        },
    )
    return float(res.fun), np.clip(res.x, 0.0, 1.0)


def thin_gap_scan(
    values: np.ndarray,
    target: Interferogram,
    space: SearchSpace,
    model: SpectralModel,
    gap_name: str,
    quad: QuadratureSettings = FIT_QUAD,
    asym_span_um: float = 0.75,
    top_k: int = 60,
    stage_budget: int = 120,
    final_k: int = 6,
    final_budget: int = 1200,
    max_starts: int = 10000,
) -> tuple:
    """Fringe-resolved search for a sub-resolution gap distance.

    A gap much thinner than the dip width shows up only through the phase
    of the cross-interference between the dips it separates, so the error
    surface is quasi-periodic in that distance with period pi*c/omega0
    (half the pump wavelength of optical path) and local descent locks
    onto an arbitrary fringe.  With both neighboring distances free,
    three phase combinations stay live -- the gap g itself,
    g + d_next - d_prev, and d_prev + g - d_next -- and only two of them
    are independent, so the scan enumerates quarter-fringe grids in the
    two coordinates (g, d_next - d_prev) while holding
    d_prev + g + d_next at the incoming value: the envelope pins the
    stack total far better than it pins the split between the neighbors.
    Starts are ranked by direct objective value, the top_k get a short
    fringe-local simplex descent, the final_k best outcomes of that stage
    are driven to convergence, and the winner is returned as
    (values, fitness) under the fine_polish objective.
    """
    free = space.free_parameters
    names = [p.name for p in free]
    if gap_name not in names:
        raise ValidationError(f"{gap_name!r} is not a free parameter of this space")
    if not gap_name.startswith("d"):
        raise ValidationError(f"{gap_name!r} is not a distance parameter")
    i = names.index(gap_name)
    gap = free[i]
    idx = int(gap_name[1:])
    i_next = names.index(f"d{idx + 1}") if f"d{idx + 1}" in names else None
    i_prev = names.index(f"d{idx - 1}") if f"d{idx - 1}" in names else None
    lo = np.array([p.lower for p in free])
    hi = np.array([p.upper for p in free])
    span = hi - lo
    fine_quad = dataclasses.replace(quad, tail_amplitude=min(quad.tail_amplitude, 1e-4))

    def objective_x(x):
        return _fitness_of_values(x, target, space, model, fine_quad)

    def objective_z(z):
        return objective_x(lo + np.clip(z, 0.0, 1.0) * span)

    values = np.clip(np.asarray(values, dtype=float), lo, hi)
    fringe_um = seconds_to_um(math.pi / model.omega0)
    gaps = np.arange(gap.lower, gap.upper + 1e-12, fringe_um / 4.0)
    if i_prev is not None and i_next is not None:
        asym0 = values[i_next] - values[i_prev]
        asyms = np.arange(asym0 - asym_span_um, asym0 + asym_span_um + 1e-12, fringe_um / 4.0)
    else:
        asyms = np.array([np.nan])
    n_starts = gaps.size * asyms.size
    if n_starts > max_starts:
        raise ValidationError(
            f"{n_starts} fringe starts exceed max_starts={max_starts}; "
            f"tighten the bounds of {gap_name!r} or asym_span_um"
        )
    total = values[i]
    if i_prev is not None:
        total += values[i_prev]
    if i_next is not None:
        total += values[i_next]
    ranked = []
    for g in gaps:
        for asym in asyms:
            x0 = values.copy()
            x0[i] = g
            if i_prev is not None and i_next is not None:
                x0[i_prev] = np.clip((total - g - asym) / 2.0, lo[i_prev], hi[i_prev])
                x0[i_next] = np.clip(x0[i_prev] + asym, lo[i_next], hi[i_next])
            elif i_prev is not None:
                x0[i_prev] = np.clip(total - g, lo[i_prev], hi[i_prev])
            elif i_next is not None:
                x0[i_next] = np.clip(total - g, lo[i_next], hi[i_next])
            ranked.append((objective_x(x0), x0))
    ranked.sort(key=lambda pair: pair[0])
    stage = []
    for _, x0 in ranked[: max(top_k, 1)]:
        stage.append(_nm_descend(objective_z, (x0 - lo) / span, span, stage_budget))
    stage.sort(key=lambda pair: pair[0])
    best_f = np.inf
    best_z = (values - lo) / span
    for _, z0 in stage[: max(final_k, 1)]:
        f_val, z_val = _nm_descend(objective_z, z0, span, final_budget)
        if f_val < best_f:
            best_f, best_z = f_val, z_val
    return lo + best_z * span, best_f


def _mutation_rate(config: GAConfig, n_bits: int) -> float:
    if config.mutation_rate is not None:
        return config.mutation_rate
    return 1.0 / n_bits


def _evaluate(pop, cache, target, space, model, quad):
    scores = np.empty(pop.shape[0])
    for i, row in enumerate(pop):
        key = row.tobytes()
        val = cache.get(key)
        if val is None:
            val = _fitness_of_values(decode(row, space), target, space, model, quad)
            cache[key] = val
        scores[i] = val
    return scores


def _tournament(rng, scores, k) -> int:
    contenders = rng.integers(0, scores.size, size=k)
    return int(contenders[np.argmin(scores[contenders])])


def evolve(
    target: Interferogram,
    space: SearchSpace,
    config: GAConfig,
    model: SpectralModel,
    quad: QuadratureSettings = FIT_QUAD,
    initial_values: Sequence[np.ndarray] | None = None,
) -> RetrievalResult:
    """Run the full evolutionary loop and return the best candidate found.

    The loop is: random initialization within bounds, fitness evaluation,
    tournament selection, single-point crossover producing complementary
    children, per-bit mutation, and replacement with elitism.  Terminates
    at the fitness threshold or the generation cap.

    initial_values injects known starting candidates (e.g. from
    seed_candidates) at the front of the otherwise-random first population.
    """
    rng = np.random.default_rng(config.rng_seed)
    n_bits = space.n_bits
    pop = rng.integers(0, 2, size=(config.population_size, n_bits), dtype=np.uint8)
    if initial_values:
        lo = np.array([p.lower for p in space.free_parameters])
        hi = np.array([p.upper for p in space.free_parameters])
        for row, vec in enumerate(initial_values[: config.population_size]):
            clipped = np.clip(np.asarray(vec, dtype=float), lo, hi)
            pop[row] = encode(clipped, space)
    rate = _mutation_rate(config, n_bits)
    cache: dict = {}
    history = []
    best_row = None
    best_score = WORST_FITNESS
    generations = 0

    for gen in range(config.max_generations):
        scores = _evaluate(pop, cache, target, space, model, quad)
        order = np.argsort(scores, kind="stable")
        if scores[order[0]] <= best_score:
            best_score = float(scores[order[0]])
            best_row = pop[order[0]].copy()
        history.append(best_score)
        generations = gen + 1
        if best_score <= config.fitness_threshold:
            break
        if gen == config.max_generations - 1:
            break
        children = [pop[i].copy() for i in order[: config.elitism]]
        while len(children) < config.population_size:
            pa = pop[_tournament(rng, scores, config.tournament_size)]
            pb = pop[_tournament(rng, scores, config.tournament_size)]
            cut = int(rng.integers(1, n_bits))
            c1 = np.concatenate([pa[:cut], pb[cut:]])
            c2 = np.concatenate([pb[:cut], pa[cut:]])
            for child in (c1, c2):
                mask = rng.random(n_bits) < rate
                child[mask] ^= 1
                if len(children) < config.population_size:
                    children.append(child)
        pop = np.array(children, dtype=np.uint8)

    if best_row is None:
        raise QoctError("evolution produced no evaluable candidate")

    values = decode(best_row, space)
    best_fitness = _fitness_of_values(values, target, space, model, quad)
    if config.refine_sweeps > 0:
        values, best_fitness = local_refine(
            values, target, space, model, quad, sweeps=config.refine_sweeps
        )
    try:
        sample = space.sample_from_values(values)
        reconstruction = _forward(sample, model, target.delays, quad)
    except QoctError:
        reconstruction = None
    full = {p.name: p.fixed for p in space.parameters}
    for p, v in zip(space.free_parameters, values, strict=True):
        full[p.name] = float(v)
    return RetrievalResult(
        best_parameters=full,
        best_fitness=best_fitness,
        fitness_history=history,
        n_interfaces=space.n_interfaces,
        reconstruction=reconstruction,
        generations_run=generations,
    )


#: Model selection prefers the smallest interface count whose fitness is
#: within this relative factor of the global minimum; richer models can
#: always embed a simpler one with near-zero extra reflectivity, so a raw
#: argmin systematically over-fits.
MODEL_SELECT_SLACK = 0.05


def model_select(
    target: Interferogram,
    n_range: Sequence[int],
    space_builder,
    config: GAConfig,
    model: SpectralModel,
    quad: QuadratureSettings = FIT_QUAD,
    seed_initial: bool = False,
    polish_final: bool = False,
) -> RetrievalResult:
    """Repeat the retrieval for each candidate interface count.

    space_builder(n) must return the SearchSpace for n interfaces.  With
    seed_initial, each count's first population starts from dip-derived
    candidates (seed_candidates).  With polish_final, the winning
    candidate gets a continuous fine_polish pass.  The returned result
    carries the whole fitness-vs-n curve.
    """
    n_values = list(n_range)
    if not n_values:
        raise ValidationError("n_range must be nonempty")
    results = []
    for n in n_values:
        space = space_builder(n)
        if space.n_interfaces != n:
            raise ValidationError(
                f"space_builder({n}) returned a space for {space.n_interfaces} interfaces"
            )
        seeds = seed_candidates(target, space, model) if seed_initial else None
        results.append(evolve(target, space, config, model, quad, initial_values=seeds))
    curve = [(n, res.best_fitness) for n, res in zip(n_values, results)]
    finite = [f for _, f in curve if np.isfinite(f)]
    if not finite:
        raise QoctError("no interface count produced an evaluable fit")
    floor = min(finite)
    cutoff = floor * (1.0 + MODEL_SELECT_SLACK) + 1e-9
    chosen = min(
        (res for res in results if res.best_fitness <= cutoff),
        key=lambda res: res.n_interfaces,
    )
    chosen.fitness_by_n = curve
    if polish_final:
        space = space_builder(chosen.n_interfaces)
        values = np.array([chosen.best_parameters[p.name] for p in space.free_parameters])
        values, chosen.best_fitness = fine_polish(values, target, space, model, quad)
        for p, v in zip(space.free_parameters, values, strict=True):
            chosen.best_parameters[p.name] = float(v)
        try:
            sample = space.sample_from_values(values)
            chosen.reconstruction = _forward(sample, model, target.delays, quad)
        except QoctError:
            pass
    return chosen
