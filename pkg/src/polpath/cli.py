"""Command-line pipeline: state generation, bench simulation, reconstruction.

All angles are radians. Phase lists accept plain floats plus the tokens
``pi``, ``pi/<x>`` and ``pi*<x>``. Outputs are byte-stable for fixed
inputs and seeds.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import experiment, optics, qstate, stokes, tomography

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

FRINGE_CSV_HEADER = "phi,s0f_p0,s1f_p0,s2f_p0,s3f_p0,s0f_p1,s1f_p1,s2f_p1,s3f_p1"


def parse_phase(token: str) -> float:
    text = token.strip().lower()
    sign = 1.0
    if text.startswith("-"):
        sign, text = -1.0, text[1:]
    if text.startswith("pi"):
        rest = text[2:]
        if not rest:
            return sign * math.pi
        if rest.startswith("/"):
            return sign * math.pi / float(rest[1:])
        if rest.startswith("*"):
            return sign * math.pi * float(rest[1:])
        raise ValueError(f"cannot parse phase {token!r}")
    return sign * float(text)


def _parse_phase_list(text: str) -> list:
    return [parse_phase(token) for token in text.split(",") if token.strip()]


def _write_json(path: str, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValueError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed JSON in {path}: {exc}") from None


def _load_state(path: str) -> qstate.DensityMatrix:
    rho = qstate.DensityMatrix.from_dict(_read_json(path))
    return qstate.ensure_physical(rho)


def cmd_gen_state(args) -> int:
    if args.kind == "bell":
        rho = qstate.bell_pbs_state()
    elif args.kind == "h0":
        rho = qstate.pure_state([1.0, 0.0, 0.0, 0.0])
    elif args.kind == "mixed":
        rho = qstate.maximally_mixed()
    else:
        rho = qstate.random_density(args.seed, args.rank)
    _write_json(args.out, rho.to_dict())
    return EXIT_OK


def cmd_simulate(args) -> int:
    rho = _load_state(args.state)
    phases = _parse_phase_list(args.phases) if args.phases else list(experiment.DEFAULT_PHASES)
    cfg = experiment.ExperimentConfig(
        n_photons_total=args.photons,
        seed=0 if args.exact else args.seed,
        phases=tuple(phases),
        angle_jitter_sigma=args.jitter,
    )
    data = experiment.exact_counts(rho, cfg) if args.exact else experiment.simulate(rho, cfg)
    _write_json(args.out, data.to_dict())
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    data = experiment.CountData.from_dict(_read_json(args.counts))
    estimate = tomography.estimate_stokes(data)
    rho_linear = tomography.linear_inversion(estimate, renormalize=True)
    if args.mle == "on":
        result = tomography.mle_fit(data, rho_linear)
    else:
        result = tomography.ReconstructionResult(rho_linear=rho_linear)
    if args.reference:
        reference = _load_state(args.reference)
        tomography.report(reference, result)
    _write_json(args.out, result.to_dict())
    return EXIT_OK


def cmd_fringe(args) -> int:
    if args.points < 2:
        raise ValueError(f"--points must be at least 2, got {args.points}")
    rho = _load_state(args.state)
    params = stokes.stokes_set(rho)
    lines = [FRINGE_CSV_HEADER]
    for phi in np.linspace(0.0, 2.0 * math.pi, args.points, endpoint=False):
        row = [float(phi)]
        for out_path in (0, 1):
            row.extend(float(v) for v in stokes.predicted_fringe(params, out_path, phi).s)
        lines.append(",".join(repr(value) for value in row))
    Path(args.out).write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_report(args) -> int:
    result = tomography.ReconstructionResult.from_dict(_read_json(args.result))
    reference = _load_state(args.reference)
    metrics = tomography.report(reference, result)
    for key in sorted(metrics):
        print(f"{key}: {metrics[key]:.6f}")
    if args.out:
        _write_json(args.out, result.to_dict())
    return EXIT_OK


def _selftest_checks():
    grid = np.linspace(0.0, 2.0 * math.pi, 16, endpoint=False)

    def reconstruction_round_trip():
        worst = 0.0
        for seed in range(200):
            rho = qstate.random_density(seed, 4)
            rebuilt = stokes.reconstruct(stokes.stokes_set(rho))
            worst = max(worst, float(np.max(np.abs(rebuilt.matrix - rho.matrix))))
        return worst, 1e-12

    def fringe_law():
        worst = 0.0
        for seed in range(20):
            rho = qstate.random_density(seed, 4)
            params = stokes.stokes_set(rho)
            for phi in grid:
                evolved = optics.evolve(optics.interferometer(phi), rho)
                for path in (0, 1):
                    predicted = stokes.predicted_fringe(params, path, phi).s
                    measured = stokes.opsp(evolved, path).s
                    worst = max(worst, float(np.max(np.abs(predicted - measured))))
        return worst, 1e-12

    def complementarity():
        worst = 0.0
        for seed in range(20):
            rho = qstate.random_density(seed, 4)
            params = stokes.stokes_set(rho)
            for phi in grid:
                defect = stokes.complementarity_defect(
                    params,
                    stokes.predicted_fringe(params, 0, phi),
                    stokes.predicted_fringe(params, 1, phi),
                )
                worst = max(worst, float(np.max(defect)))
        return worst, 1e-12

    def tpsp_extraction():
        worst = 0.0
        for seed in range(200):
            rho = qstate.random_density(seed, 4)
            params = stokes.stokes_set(rho)
            sums = params.path0.s + params.path1.s
            truth = stokes.tpsp(rho).S
            for out_path in (0, 1):
                extracted = stokes.extract_tpsp(
                    sums,
                    stokes.predicted_fringe(params, out_path, 0.0),
                    stokes.predicted_fringe(params, out_path, math.pi / 2.0),
                    out_path,
                ).S
                worst = max(worst, float(np.max(np.abs(extracted - truth))))
        return worst, 1e-12

    def wave_plates():
        half = optics.hwp(math.pi / 8.0).matrix
        quarter = optics.qwp(math.pi / 4.0).matrix
        d = qstate.PolarizationState.diagonal().amplitudes
        a = qstate.PolarizationState.antidiagonal().amplitudes
        r = qstate.PolarizationState.right_circular().amplitudes
        left = qstate.PolarizationState.left_circular().amplitudes
        worst = max(
            float(np.max(np.abs(half @ d - np.array([1.0, 0.0])))),
            float(np.max(np.abs(half @ a - np.array([0.0, 1.0])))),
            abs(1.0 - abs((quarter @ r)[0])),
            abs(1.0 - abs((quarter @ left)[1])),
        )
        return worst, 1e-12

    def count_pipeline():
        worst = 0.0
        for seed in range(20):
            rho = qstate.random_density(seed, 4)
            cfg = experiment.ExperimentConfig(n_photons_total=24 * 10**12, seed=0)
            data = experiment.exact_counts(rho, cfg)
            rebuilt = tomography.linear_inversion(tomography.estimate_stokes(data))
            worst = max(worst, float(np.max(np.abs(rebuilt.matrix - rho.matrix))))
        return worst, 1e-10

    return (
        ("reconstruction round trip (200 states)", reconstruction_round_trip),
        ("fringe law (20 states x 16 phases)", fringe_law),
        ("complementarity (20 states x 16 phases)", complementarity),
        ("tpsp extraction (200 states)", tpsp_extraction),
        ("wave plate actions", wave_plates),
        ("noiseless count pipeline (20 states)", count_pipeline),
    )


def cmd_selftest(args) -> int:
    started = time.monotonic()
    failures = 0
    for name, check in _selftest_checks():
        worst, bound = check()
        passed = worst <= bound
        failures += 0 if passed else 1
        print(f"{'PASS' if passed else 'FAIL'} {name}: max defect {worst:.3e} (bound {bound:.0e})")
    print(f"selftest finished in {time.monotonic() - started:.1f}s: "
          f"{'all checks passed' if failures == 0 else f'{failures} check(s) failed'}")
    return EXIT_OK if failures == 0 else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polpath",
        description=(
            "Simulate the polarization-path tomography bench and reconstruct "
            "two-qubit states from photon counts. All angles are in radians."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-state", help="write a density-matrix JSON file")
    gen.add_argument("--kind", required=True, choices=("bell", "h0", "mixed", "random"))
    gen.add_argument("--seed", type=int, help="required for --kind random")
    gen.add_argument("--rank", type=int, default=4, help="rank of the random state (1..4)")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen_state)

    sim = sub.add_parser("simulate", help="simulate counts for a state file")
    sim.add_argument("--state", required=True)
    sim.add_argument("--photons", type=int, required=True, help="total photon budget")
    sim.add_argument("--phases", default=None,
                     help="comma-separated phases in radians (default: 0,pi/2)")
    sim.add_argument("--jitter", type=float, default=0.0,
                     help="plate-angle jitter sigma in radians")
    sim.add_argument("--seed", type=int, help="required unless --exact")
    sim.add_argument("--exact", action="store_true",
                     help="deterministic counts round(n*p) at nominal angles")
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    rec = sub.add_parser("reconstruct", help="estimate the state from a counts file")
    rec.add_argument("--counts", required=True)
    rec.add_argument("--mle", choices=("on", "off"), default="on")
    rec.add_argument("--reference", default=None,
                     help="optional reference state for quality metrics")
    rec.add_argument("--out", required=True)
    rec.set_defaults(func=cmd_reconstruct)

    fri = sub.add_parser("fringe", help="emit predicted fringe CSV for a state")
    fri.add_argument("--state", required=True)
    fri.add_argument("--points", type=int, default=64, help="phase samples over [0, 2pi)")
    fri.add_argument("--out", required=True)
    fri.set_defaults(func=cmd_fringe)

    rep = sub.add_parser("report", help="fill quality metrics for a result file")
    rep.add_argument("--result", required=True)
    rep.add_argument("--reference", required=True)
    rep.add_argument("--out", default=None, help="optionally rewrite the result with metrics")
    rep.set_defaults(func=cmd_report)

    selftest = sub.add_parser("selftest", help="run the exact identity suite")
    selftest.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen-state" and args.kind == "random" and args.seed is None:
        parser.error("--kind random requires --seed")
    if args.command == "simulate" and not args.exact and args.seed is None:
        parser.error("simulate requires --seed unless --exact is given")
    try:
        return args.func(args)
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
