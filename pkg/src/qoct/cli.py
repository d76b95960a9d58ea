"""Command-line front end: simulate, fit, label, artifact-map, count-params.

Every run records its full configuration in the output metadata so results
can be reproduced exactly (including noise, via the stored seed).  Exit
codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import engine, fileio, ga
from .engine import (
    DEFAULT_QUAD,
    add_shot_noise,
    closed_form_single_layer,
    coincidence_trace_numeric,
    default_delay_grid,
    delay_grid_um,
    effective_reflectivities,
    feature_separation,
    label_trace,
    pulsed_limit_trace,
    tuning_markers,
)
from .errors import NumericalError, QoctError, ValidationError
from .spectral import SpectralModel, from_wavelengths
from .stack import count_effective_parameters, enumerate_paths, seconds_to_um

#: Trace is treated as featureless if no point dips below 1 by this much.
NO_FEATURE_DEPTH = 0.02


def _add_spectral_flags(p: argparse.ArgumentParser):
    p.add_argument("--pump-nm", type=float, default=404.5, help="pump wavelength (nm)")
    p.add_argument("--center-nm", type=float, default=None,
                   help="pair center wavelength (nm); default 2x pump")
    p.add_argument("--filter-nm", type=float, default=40.0,
                   help="bandpass width (FWHM nm, or full width when rectangular)")
    p.add_argument("--filter-shape", choices=["gaussian", "rectangular"],
                   default="gaussian")
    p.add_argument("--pump-linewidth-hz", type=float, default=1e6,
                   help="pump FWHM linewidth (Hz); small values mean CW")


def _spectral_model(args) -> SpectralModel:
    center = args.center_nm if args.center_nm is not None else 2.0 * args.pump_nm
    return from_wavelengths(
        pump_nm=args.pump_nm,
        center_nm=center,
        filter_fwhm_nm=args.filter_nm,
        pump_linewidth_hz=args.pump_linewidth_hz,
        profile=args.filter_shape,
    )


def _spectral_meta(args) -> dict:
    return {
        "pump_nm": args.pump_nm,
        "center_nm": args.center_nm if args.center_nm is not None else 2.0 * args.pump_nm,
        "filter_nm": args.filter_nm,
        "filter_shape": args.filter_shape,
        "pump_linewidth_hz": args.pump_linewidth_hz,
    }


def _add_grid_flags(p: argparse.ArgumentParser):
    p.add_argument("--tau-step-um", type=float, default=1.0, help="delay grid step (um)")
    p.add_argument("--tau-span-um", type=str, default=None,
                   help="delay range as lo:hi in um (default: automatic)")


def _delay_grid(args, sample, model) -> np.ndarray:
    if args.tau_span_um is None:
        return default_delay_grid(sample, model, step_um=args.tau_step_um)
    parts = args.tau_span_um.split(":")
    try:
        if len(parts) == 2:
            lo, hi = float(parts[0]), float(parts[1])
        elif len(parts) == 1:
            lo, hi = -50.0, float(parts[0])
        else:
            raise ValueError
    except ValueError:
        raise ValidationError(
            f"--tau-span-um expects 'lo:hi' or 'hi', got {args.tau_span_um!r}"
        ) from None
    return delay_grid_um(lo, hi, args.tau_step_um)


def _parse_keyvals(pairs, flag):
    out = {}
    for item in pairs or []:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise ValidationError(f"{flag} expects name=value, got {item!r}")
        out[name] = value
    return out


def _labels_payload(sample, model, model_meta) -> dict:
    positions = label_trace(sample, model)
    return {
        "spectral": model_meta,
        "positions": [
            {
                "position_um": pos.position_um,
                "net_visibility": pos.net_visibility,
                "cancels": pos.cancels,
                "contributions": [
                    {"kind": c.kind, "indices": list(c.indices), "visibility": c.visibility}
                    for c in pos.contributions
                ],
            }
            for pos in positions
        ],
    }


def cmd_simulate(args) -> int:
    sample = fileio.resolve_sample(args.sample)
    model = _spectral_model(args)
    grid = _delay_grid(args, sample, model)
    if args.engine == "numeric":
        trace = coincidence_trace_numeric(sample, model, grid)
    elif args.engine == "closed-form":
        if sample.n_interfaces > 2:
            raise ValidationError(
                "the closed-form engine covers single-layer (two-interface) "
                "samples only; use --engine numeric for this sample"
            )
        if sample.n_interfaces == 1:
            r_tilde = np.array([sample.interfaces[0].r_fwd])
            round_trip = 1.0  # unused with a single term
        else:
            r_tilde = effective_reflectivities(
                sample.interfaces[0].r_fwd,
                sample.interfaces[1].r_fwd,
                kappa=sample.segments[0].bulk_kappa + sample.interfaces[0].film_kappa,
            )
            round_trip = sample.total_round_trip
        trace = closed_form_single_layer(r_tilde, round_trip, model, grid)
    else:
        features = enumerate_paths(sample)
        trace = pulsed_limit_trace(features, model, grid)
    if args.noise_counts is not None:
        trace = add_shot_noise(trace, args.noise_counts, args.seed)
    trace.meta.update(_spectral_meta(args))
    trace.meta.update({
        "sample_file": str(args.sample),
        "engine_flag": args.engine,
        "tau_step_um": args.tau_step_um,
        "tau_span_um": args.tau_span_um,
    })
    out = Path(args.out)
    fileio.save_trace(trace, out)
    labels_path = out.with_suffix(out.suffix + ".labels.json")
    labels_path.write_text(
        json.dumps(_labels_payload(sample, model, _spectral_meta(args)), indent=2) + "\n"
    )
    print(f"wrote {out} and {labels_path}")
    return 0


def _parse_n_range(text, fallback):
    if text is None:
        return fallback
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [int(parts[0])]
        lo, hi = int(parts[0]), int(parts[1])
        if lo > hi:
            raise ValueError
        return list(range(lo, hi + 1))
    except ValueError:
        raise ValidationError(f"--n-range expects n or lo:hi, got {text!r}") from None


def _model_from_trace_meta(meta) -> SpectralModel | None:
    keys = ("omega0", "omega_a", "omega_d", "profile")
    if all(k in meta for k in keys):
        return SpectralModel(
            omega0=meta["omega0"],
            omega_a=meta["omega_a"],
            omega_d=meta["omega_d"],
            antidiagonal_profile=meta["profile"],
        )
    return None


def cmd_fit(args) -> int:
    target = fileio.load_trace(args.trace)
    model = _model_from_trace_meta(target.meta)
    if model is None:
        model = _spectral_model(args)
    fixed = {k: float(v) for k, v in _parse_keyvals(args.fix, "--fix").items()}
    bounds = {}
    for name, value in _parse_keyvals(args.bounds, "--bounds").items():
        lo, sep, hi = value.partition(":")
        if not sep:
            raise ValidationError(f"--bounds expects name=lo:hi, got {name}={value}")
        bounds[name] = (float(lo), float(hi))

    out = Path(args.out)
    report = {
        "trace_file": str(args.trace),
        "fixed": fixed,
        "bounds": {k: list(v) for k, v in bounds.items()},
        "seed": args.seed,
        "population": args.pop,
        "generations": args.gens,
    }

    if float(np.max(1.0 - target.counts)) < NO_FEATURE_DEPTH:
        n = min(_parse_n_range(args.n_range, [1]))
        report.update({
            "no_features_detected": True,
            "n_interfaces": n,
            "best_parameters": {f"R{i}": 0.0 for i in range(1, n + 1)},
            "best_fitness": float(np.mean(np.abs(target.counts - 1.0))),
            "fitness_history": [],
            "fitness_by_n": [],
        })
        out.write_text(json.dumps(report, indent=2) + "\n")
        print(f"wrote {out} (no features detected)")
        return 0

    config = ga.GAConfig(
        population_size=args.pop,
        max_generations=args.gens,
        mutation_rate=args.mutation_rate,
        rng_seed=args.seed,
        refine_sweeps=args.refine_sweeps,
    )

    def builder(n):
        return ga.default_search_space(
            n,
            fixed={k: v for k, v in fixed.items()},
            bounds=dict(bounds),
            fit_losses=args.fit_losses,
        )

    n_values = _parse_n_range(args.n_range, [2])
    result = ga.model_select(
        target, n_values, builder, config, model,
        seed_initial=not args.no_informed_init,
    )
    report.update({
        "no_features_detected": False,
        "n_interfaces": result.n_interfaces,
        "best_parameters": result.best_parameters,
        "best_fitness": result.best_fitness,
        "fitness_history": result.fitness_history,
        "fitness_by_n": [[n, f] for n, f in result.fitness_by_n],
        "generations_run": result.generations_run,
    })
    recon_path = out.with_suffix(out.suffix + ".reconstruction.csv")
    if result.reconstruction is not None:
        fileio.save_trace(result.reconstruction, recon_path)
        report["reconstruction_file"] = str(recon_path)
    out.write_text(json.dumps(report, indent=2) + "\n")
    print(f"wrote {out}")
    return 0


def cmd_label(args) -> int:
    sample = fileio.resolve_sample(args.sample)
    model = _spectral_model(args)
    payload = _labels_payload(sample, model, _spectral_meta(args))
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
        print(f"wrote {args.out}")
    else:
        json.dump(payload, sys.stdout, indent=2)
        print()
    return 0


def cmd_artifact_map(args) -> int:
    sample = fileio.resolve_sample(args.sample)
    try:
        k, l = (int(x) for x in args.pair.split(","))
    except ValueError:
        raise ValidationError(f"--pair expects two indices k,l; got {args.pair!r}") from None
    sep = feature_separation(sample, (k, l))
    pump = np.linspace(args.pump_min, args.pump_max, args.points)
    curve = engine.artifact_tuning_curve(sample, (k, l), pump)
    zeros, extrema = tuning_markers(sep, args.pump_min, args.pump_max)
    meta = {
        "pair": [k, l],
        "separation_um": seconds_to_um(sep),
        "suppression_nm": [float(z) for z in zeros],
        "extremum_nm": [float(e) for e in extrema],
    }
    lines = ["# meta: " + json.dumps(meta, sort_keys=True), "pump_nm,cosine"]
    for lam, cosv in curve:
        lines.append(f"{float(lam)!r},{float(cosv)!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_count_params(args) -> int:
    print(count_effective_parameters(args.n))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qoct",
        description="Quantum optical coherence tomography: simulate coincidence "
        "interferograms of layered samples and retrieve sample morphology.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a coincidence trace")
    p.add_argument("--sample", required=True,
                   help="sample spec path or bundled name "
                   f"({', '.join(fileio.BUNDLED_SAMPLES)})")
    _add_spectral_flags(p)
    _add_grid_flags(p)
    p.add_argument("--engine", choices=["numeric", "closed-form", "pulsed"],
                   default="numeric")
    p.add_argument("--noise-counts", type=float, default=None,
                   help="Poisson mean counts at background level; omit for noiseless")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="trace.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="retrieve sample morphology from a trace")
    p.add_argument("--trace", required=True)
    _add_spectral_flags(p)
    p.add_argument("--n-range", default=None, help="interface counts to try: n or lo:hi")
    p.add_argument("--fix", action="append", metavar="NAME=VALUE",
                   help="pin a parameter, e.g. R1=0.31 (repeatable)")
    p.add_argument("--bounds", action="append", metavar="NAME=LO:HI",
                   help="override a search range, e.g. d1=50:300 (repeatable)")
    p.add_argument("--fit-losses", action="store_true",
                   help="also search loss exponents (default: pinned to 0)")
    p.add_argument("--pop", type=int, default=300)
    p.add_argument("--gens", type=int, default=50)
    p.add_argument("--mutation-rate", type=float, default=None)
    p.add_argument("--refine-sweeps", type=int, default=2,
                   help="greedy polish sweeps on the final candidate (0 disables)")
    p.add_argument("--no-informed-init", action="store_true",
                   help="start from a fully random population instead of "
                   "dip-derived candidates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="fit.json")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("label", help="list dip/echo/artifact positions for a sample")
    p.add_argument("--sample", required=True)
    _add_spectral_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("artifact-map", help="pump-wavelength tuning curve of an artifact")
    p.add_argument("--sample", required=True)
    p.add_argument("--pair", default="0,1", help="feature indices k,l (default 0,1)")
    p.add_argument("--pump-min", type=float, default=404.0)
    p.add_argument("--pump-max", type=float, default=405.0)
    p.add_argument("--points", type=int, default=501)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_artifact_map)

    p = sub.add_parser("count-params", help="effective parameter count for n interfaces")
    p.add_argument("n", type=int)
    p.set_defaults(func=cmd_count_params)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except QoctError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
