"""Command line front end: ``pipest simulate|estimate|validate|diagnose|compare``.

Exit codes: 0 success, 2 invalid flags or parameters, 3 workspace violation,
4 input ingestion errors, 5 solver errors.
"""

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import build_system, physical_consistency
from .diagnose import (
    ComparisonRow,
    build_comparison,
    comparison_row,
    error_report,
    excitation_diagnostics,
)
from .errors import (
    InvalidParams,
    InvalidWindow,
    MissingKnownParams,
    PipestError,
    SolverError,
    TooFewSamples,
    WorkspaceViolation,
)
from .estimators import EstimationMode, GridSpec, Method, estimate
from .io import (
    Report,
    atomic_write,
    format_params,
    read_params,
    read_recording,
    read_report,
    write_recording,
    write_report,
)
from .pipeline import CONTROLLER_QUANTIZATION, SENSOR_NOISE, prepare, scenario_recordings, validation_recording
from .signal import NoiseSpec, SavGolSpec, inject_noise
from .synth import ScenarioKind, make_scenario, simulate

EXIT_FLAGS = 2
EXIT_WORKSPACE = 3
EXIT_INGEST = 4
EXIT_SOLVER = 5

log = logging.getLogger("pipest")


class CommandError(Exception):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


def _kind(value):
    aliases = {"pick-place": "pickplace", "pick_place": "pickplace", "free-motion": "free"}
    try:
        return ScenarioKind(aliases.get(value, value))
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown scenario kind {value!r}") from None


def _smoothing(args):
    return SavGolSpec(order=args.sg_order, window=args.sg_window, accel_window=args.accel_window)


def _add_signal_flags(p, trim=True):
    if trim:
        p.add_argument("--trim", type=float, default=0.1, help="fraction dropped at each end")
    p.add_argument("--sg-order", type=int, default=3)
    p.add_argument("--sg-window", type=int, default=11)
    p.add_argument("--accel-window", type=int, default=None,
                   help="optional second smoothing pass on accelerations (off by default)")


def _load_recording(path):
    try:
        return read_recording(path)
    except PipestError as exc:
        raise CommandError(EXIT_INGEST, f"{path}: {exc}") from None


def _load_params(path):
    try:
        return read_params(path)
    except InvalidParams as exc:
        raise CommandError(EXIT_FLAGS, f"{path}: {exc}") from None


def _prepare(rec, args):
    try:
        return prepare(rec, _smoothing(args), args.trim)
    except (InvalidWindow, TooFewSamples) as exc:
        raise CommandError(EXIT_FLAGS, str(exc)) from None
    except PipestError as exc:
        raise CommandError(EXIT_INGEST, str(exc)) from None


# -- simulate -----------------------------------------------------------------

def cmd_simulate(args):
    truth = _load_params(args.truth) if args.truth else None
    scenario = make_scenario(args.kind, truth=truth, seed=args.seed, duration=args.duration, rate=args.rate)
    if args.amplitude_scale != 1.0:
        spec = scenario.spec
        scaled = [[(a * args.amplitude_scale, f, p) for a, f, p in axis] for axis in spec.translation]
        scenario = replace(scenario, spec=replace(spec, translation=scaled))
    try:
        run = simulate(scenario)
    except WorkspaceViolation as exc:
        raise CommandError(EXIT_WORKSPACE, str(exc)) from None
    rec = run.recording
    if args.noise:
        pose_noise = NoiseSpec(position_step=args.position_step, quat_step=args.quat_step)
        rec = inject_noise(rec, pose_noise, args.seed)
        if not args.clean_wrench:
            wrench_noise = NoiseSpec(sigma_force=args.sigma_force, sigma_torque=args.sigma_torque)
            rec = inject_noise(rec, wrench_noise, args.seed + 1)
    truth_out = args.truth_out or Path(args.out).with_suffix(".truth.json")
    write_recording(args.out, rec)
    atomic_write(truth_out, format_params(scenario.truth))
    print(f"wrote {len(rec)} samples to {args.out} and ground truth to {truth_out}")


# -- estimate -----------------------------------------------------------------

def _run_estimate(rec, args, known):
    kin, wrench = _prepare(rec, args)
    grid = GridSpec(span=args.grid_span, points=args.grid_points)
    try:
        result = estimate(kin, wrench, args.method, args.mode, known,
                          tls_svd=args.tls_svd, tls_stride=args.tls_stride, grid=grid)
    except MissingKnownParams as exc:
        raise CommandError(EXIT_FLAGS, str(exc)) from None
    except SolverError as exc:
        raise CommandError(EXIT_SOLVER, f"{args.method} solver failed: {exc}") from None
    diag = excitation_diagnostics(build_system(kin, wrench), kin)
    return result, diag


def _report(result, diag, truth, data_kind, input_digest, timing=True):
    errors = {"mass": None, "com": None, "inertia": None}
    if truth is not None:
        rep = error_report(result, truth)
        for g in result.mode.groups:
            errors[g] = getattr(rep, g)
    p = result.params
    return Report(
        method=result.method.value,
        mode=result.mode.value,
        data_kind=data_kind,
        estimated={"mass": p.mass, "com": p.com.tolist(), "inertia": p.inertia.tolist(),
                   "phi": result.phi.tolist()},
        errors=errors,
        condition_number=result.condition_number,
        rank_flags={
            "rankDeficient": result.rank_deficient,
            "rank": result.rank,
            "nonPhysical": not physical_consistency(result.params).consistent,
            "inertiaIdentifiable": diag.inertia_identifiable,
        },
        runtime_ms=result.runtime * 1e3 if timing else None,
        iterations=result.iterations,
        converged=bool(result.converged),
        input_digest=input_digest,
        extras={k: v for k, v in result.extras.items() if isinstance(v, (int, float, str))},
    )


def _summary(report):
    parts = [f"{report.method} {report.mode}: m={report.estimated['mass']:.6g} kg"]
    for g, label in (("mass", "e_m"), ("com", "e_c"), ("inertia", "e_I")):
        if report.errors.get(g) is not None:
            parts.append(f"{label}={report.errors[g]:.3g}")
    parts.append(f"cond={report.condition_number:.4g}")
    if report.rank_flags["rankDeficient"]:
        parts.append("RANK-DEFICIENT")
    if not report.rank_flags["inertiaIdentifiable"]:
        parts.append("inertia-unidentifiable")
    if report.rank_flags["nonPhysical"]:
        parts.append("non-physical")
    if report.runtime_ms is not None:
        parts.append(f"{report.runtime_ms:.1f} ms")
    return " ".join(parts)


def cmd_estimate(args):
    mode = EstimationMode(args.mode)
    if mode is not EstimationMode.FULL_PIP and not args.gt and args.method != "brute":
        raise CommandError(EXIT_FLAGS, f"--gt is required for --mode {args.mode}")
    if args.method == "brute" and mode is EstimationMode.FULL_PIP:
        raise CommandError(EXIT_SOLVER, "brute force does not support --mode full (unsupported mode)")
    if args.method == "brute" and not args.gt:
        raise CommandError(EXIT_FLAGS, "--gt is required to center the brute-force grid")
    truth = _load_params(args.gt) if args.gt else None
    rec, input_digest = _load_recording(args.input)
    result, diag = _run_estimate(rec, args, truth)
    report = _report(result, diag, truth, args.data_kind, input_digest, timing=not args.no_timing)
    if args.out:
        write_report(args.out, report)
    print(_summary(report))


# -- validate -----------------------------------------------------------------

def cmd_validate(args):
    params = _load_params(args.params)
    rec, _ = _load_recording(args.input)
    try:
        out = validation_recording(rec, params, _smoothing(args))
    except (InvalidWindow, TooFewSamples) as exc:
        raise CommandError(EXIT_FLAGS, str(exc)) from None
    write_recording(args.out, out)
    print(f"wrote validation wrenches for {len(out)} samples to {args.out}")


# -- diagnose -----------------------------------------------------------------

def cmd_diagnose(args):
    rec, input_digest = _load_recording(args.input)
    kin, wrench = _prepare(rec, args)
    diag = excitation_diagnostics(build_system(kin, wrench), kin)
    data = dict(diag.as_dict(), inputDigest=input_digest, samples=len(kin))
    if args.format == "json":
        text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    else:
        text = "".join(f"{k:22s} {v}\n" for k, v in data.items())
    if args.out:
        atomic_write(args.out, text)
    sys.stdout.write(text)


# -- compare ------------------------------------------------------------------

def _row_from_report(rep, label):
    return ComparisonRow(
        method=rep.method, mode=rep.mode, data_kind=rep.data_kind,
        errors={g: v for g, v in rep.errors.items() if v is not None},
        runtime_ms=rep.runtime_ms, condition_number=rep.condition_number,
        rank_deficient=bool(rep.rank_flags.get("rankDeficient", False)),
        non_physical=bool(rep.rank_flags.get("nonPhysical", False)),
        label=label,
    )


def _sweep_rows(args):
    scenario, recordings = scenario_recordings(args.kind, seed=args.seed)
    rows = []
    for data_kind in ("validation", "measured"):
        kin, wrench = prepare(recordings[data_kind], _smoothing(args), args.trim)
        for method in args.methods:
            for mode in args.modes:
                if method == "brute" and mode == "full":
                    continue
                result = estimate(kin, wrench, method, mode, scenario.truth)
                row = comparison_row(result, scenario.truth, data_kind, label=scenario.kind.value)
                rows.append(replace(row, runtime_ms=None) if args.no_timing else row)
    return rows


def _plot_csv(table, data_kind):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "mode", "group", "error"])
    for method, mode, kind, group, err in table.plot_series():
        if kind == data_kind:
            writer.writerow([method, mode, group, repr(err)])
    return buf.getvalue()


def cmd_compare(args):
    rows = []
    for path in args.reports:
        try:
            rep = read_report(path)
        except PipestError as exc:
            raise CommandError(EXIT_INGEST, f"{path}: {exc}") from None
        row = _row_from_report(rep, Path(path).stem)
        rows.append(replace(row, runtime_ms=None) if args.no_timing else row)
    if args.sweep:
        try:
            rows.extend(_sweep_rows(args))
        except SolverError as exc:
            raise CommandError(EXIT_SOLVER, str(exc)) from None
    table = build_comparison(rows)
    if args.out:
        atomic_write(args.out, table.to_json())
    if args.emit_plot_data:
        outdir = Path(args.emit_plot_data)
        outdir.mkdir(parents=True, exist_ok=True)
        for data_kind in sorted({r.data_kind for r in table.rows}):
            atomic_write(outdir / f"errors_{data_kind}.csv", _plot_csv(table, data_kind))
    sys.stdout.write(table.to_text())


# -- parser -------------------------------------------------------------------

def _csv_list(choices):
    def parse(value):
        items = [v.strip() for v in value.split(",") if v.strip()]
        bad = [v for v in items if v not in choices]
        if bad:
            raise argparse.ArgumentTypeError(f"invalid choice(s): {', '.join(bad)}")
        return items
    return parse


def build_parser():
    parser = argparse.ArgumentParser(prog="pipest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pipest {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic recording and its ground truth")
    p.add_argument("--kind", type=_kind, default=ScenarioKind.PREDEFINED,
                   help="predefined | pickplace | free")
    p.add_argument("--duration", type=float, default=None, help="[s], default 20 or 10 by kind")
    p.add_argument("--rate", type=float, default=1000.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", help="ground-truth parameter file (default: built-in payload)")
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", help="where to write the ground truth (default: <out>.truth.json)")
    p.add_argument("--noise", action="store_true",
                   help="quantize poses and add force/torque noise")
    p.add_argument("--clean-wrench", action="store_true",
                   help="keep model wrenches even with --noise (validation data)")
    p.add_argument("--sigma-force", type=float, default=SENSOR_NOISE.sigma_force)
    p.add_argument("--sigma-torque", type=float, default=SENSOR_NOISE.sigma_torque)
    p.add_argument("--position-step", type=float, default=CONTROLLER_QUANTIZATION.position_step)
    p.add_argument("--quat-step", type=float, default=CONTROLLER_QUANTIZATION.quat_step)
    p.add_argument("--amplitude-scale", type=float, default=1.0,
                   help="scale translation amplitudes (workspace is checked)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate payload parameters from a recording")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=[m.value for m in Method], default="ls")
    p.add_argument("--mode", choices=[m.value for m in EstimationMode], default="full")
    p.add_argument("--gt", help="known/ground-truth parameters; required unless --mode full")
    p.add_argument("--data-kind", choices=["validation", "measured"], default="measured")
    p.add_argument("--tls-svd", choices=["fast", "exact"], default="fast")
    p.add_argument("--tls-stride", type=int, default=10)
    p.add_argument("--grid-span", type=float, default=0.2)
    p.add_argument("--grid-points", type=int, default=None)
    p.add_argument("--out", help="report file")
    p.add_argument("--no-timing", action="store_true",
                   help="write runtimes as null so output files are byte-reproducible")
    _add_signal_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("validate", help="replace wrenches by model predictions from the poses")
    p.add_argument("--input", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    _add_signal_flags(p, trim=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("diagnose", help="excitation and identifiability diagnostics")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["json", "table"], default="table")
    p.add_argument("--out")
    _add_signal_flags(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("compare", help="tabulate reports or run a scenario sweep")
    p.add_argument("reports", nargs="*", help="report files")
    p.add_argument("--sweep", action="store_true",
                   help="simulate validation and measured data and estimate with --methods x --modes")
    p.add_argument("--kind", type=_kind, default=ScenarioKind.PREDEFINED)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", type=_csv_list([m.value for m in Method]), default=["ls", "lm"])
    p.add_argument("--modes", type=_csv_list([m.value for m in EstimationMode]), default=["full"])
    p.add_argument("--out", help="comparison JSON")
    p.add_argument("--emit-plot-data", metavar="DIR", help="write per-figure error CSVs")
    p.add_argument("--no-timing", action="store_true",
                   help="write runtimes as null so output files are byte-reproducible")
    _add_signal_flags(p)
    p.set_defaults(func=cmd_compare)
    return parser


def _validate_flags(args):
    if hasattr(args, "trim") and not 0.0 <= args.trim < 0.5:
        raise CommandError(EXIT_FLAGS, "--trim must be in [0, 0.5)")
    if getattr(args, "tls_stride", 1) < 1:
        raise CommandError(EXIT_FLAGS, "--tls-stride must be >= 1")
    duration = getattr(args, "duration", None)
    if getattr(args, "rate", 1.0) <= 0 or (duration is not None and duration <= 0):
        raise CommandError(EXIT_FLAGS, "--rate and --duration must be positive")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    np.seterr(all="ignore")
    try:
        _validate_flags(args)
        args.func(args)
    except CommandError as exc:
        print(f"pipest {args.command}: {exc}", file=sys.stderr)
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
