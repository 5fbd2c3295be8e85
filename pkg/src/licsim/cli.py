"""Command-line front end.

Exit codes: 0 success, 1 a check ran and failed (gillespie-check),
2 validation/configuration error, 3 runtime or data error.

Every subcommand accepts ``--config FILE.json``; keys are the long option
names with dashes replaced by underscores. Explicit flags override the file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from licsim import analysis, pipeline, volumetry
from licsim.config import (load_environment, load_json, load_params, log_range,
                           read_curve_with_sidecar, resolve_path)
from licsim.curves import GrowthCurve, read_table, parse_float, write_table
from licsim.errors import (InfeasibleSpecError, InvalidInputError, InvalidStateError, LicError,
                           MalformedDataError)
from licsim.fitting import FitSpec, fit
from licsim.kinetics import DEFAULT_DT, Environment, LicState, simulate
from licsim.stochastic import compare_with_deterministic

EXIT_OK, EXIT_CHECK_FAILED, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3

REFERENCE_P_O2 = 4.6e-3  # mbar, fastest observed growth
TRAJECTORY_HEADER = ["t_s", "volume", "N_S", "fluorescence_Mcts_s"]

DEFAULTS = {
    "simulate": {"params": "supp-heuristic", "p_o2": REFERENCE_P_O2, "laser_power": 1.48,
                 "t_end": 12_000.0, "dt": DEFAULT_DT, "v0": 0.0},
    "sweep": {"params": "supp-heuristic", "log_range": [1e-8, 10.0, 25], "include_reference": True,
              "t_ref": analysis.REFERENCE_TIME, "dt": DEFAULT_DT, "v0": 0.0, "laser_power": 1.48,
              "marker_spacing": pipeline.MARKER_SPACING, "onset_threshold_min": 20.0,
              "rate_tolerance": 0.30, "etch_threshold": 0.0, "etch_noise_fraction": 0.10},
    "analyze": {"marker_spacing": pipeline.MARKER_SPACING, "t_ref": analysis.REFERENCE_TIME,
                "onset_threshold_min": 20.0, "rate_tolerance": 0.30, "etch_threshold": 0.0,
                "etch_noise_fraction": 0.10, "smooth": 1},
    "fit": {"kind": "fluorescence"},
    "volume": {"power": 0.092, "min_volume": 0.0},
    "gillespie-check": {"params": "ssa-check", "p_o2": 1.0, "v0": 27.0, "t_end": 100.0, "dt": 1.0,
                        "runs": 1000, "samples": 10, "tolerance": 0.05, "seed": 0, "workers": 1},
}


class UsageError(Exception):
    pass


def _out(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def _merge(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from --config, then from built-in defaults."""
    merged = dict(DEFAULTS.get(args.command, {}))
    if getattr(args, "config", None):
        cfg = load_json(resolve_path(args.config))
        unknown = set(cfg) - set(vars(args))
        if unknown:
            raise UsageError(f"{args.config}: unknown key(s) {sorted(unknown)}")
        merged.update(cfg)
    for key, value in vars(args).items():
        if value is not None:
            merged[key] = value
    for key in vars(args):
        merged.setdefault(key, None)
    return argparse.Namespace(**merged)


def _positive(name: str, value, allow_zero: bool = False) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        raise UsageError(f"--{name.replace('_', '-')} must be {'>= 0' if allow_zero else '> 0'}, got {value}")
    return value


def _thresholds(a) -> analysis.Thresholds:
    return analysis.Thresholds(
        onset_threshold=float(a.onset_threshold_min) * 60.0,
        rate_tolerance=float(a.rate_tolerance),
        etch_threshold=float(a.etch_threshold),
        etch_noise_fraction=float(a.etch_noise_fraction),
    )


# ---- simulate ------------------------------------------------------------

def cmd_simulate(a) -> int:
    params = load_params(a.params)
    dt = _positive("dt", a.dt)
    t_end = _positive("t_end", a.t_end)
    if a.env:
        env = load_environment(a.env)
    else:
        env = Environment(P_O2=_positive("p_o2", a.p_o2, allow_zero=True),
                          laser_power=_positive("laser_power", a.laser_power))
    n_s0 = params.N_laser if a.n_s0 is None else _positive("n_s0", a.n_s0, allow_zero=True)
    initial = LicState(volume=_positive("v0", a.v0, allow_zero=True), surface_sites=n_s0)
    traj = simulate(params, env, initial, t_end, dt)
    text = write_table(None, TRAJECTORY_HEADER,
                       zip(traj.t, traj.volume, traj.surface_sites, traj.fluorescence))
    _out(a.output, text)
    return EXIT_OK


# ---- sweep ---------------------------------------------------------------

def sweep_pressures(a) -> np.ndarray:
    if a.pressures:
        ps = np.array([float(p) for p in a.pressures])
    else:
        lo, hi, n = a.log_range
        ps = log_range(float(lo), float(hi), int(n))
        if a.include_reference and lo <= REFERENCE_P_O2 <= hi:
            ps = np.union1d(ps, [REFERENCE_P_O2])
    if ps.size == 0:
        raise UsageError("empty pressure set")
    if np.any(ps < 0) or not np.all(np.isfinite(ps)):
        raise UsageError("pressures must be finite and >= 0")
    return np.sort(ps)


def run_sweep(params, pressures, t_ref, dt, v0, laser_power, spacing, thresholds):
    """Simulate each pressure, report at marker times, classify if >= 3 points."""
    rows = []
    points = []
    for p in pressures:
        env = Environment(P_O2=float(p), laser_power=laser_power)
        traj = simulate(params, env, LicState.fresh(params, v0), t_ref, dt)
        markers = np.arange(0.0, t_ref + 1e-9, spacing)
        curve = GrowthCurve(markers, np.interp(markers, traj.t, traj.volume), kind="volume", P_O2=float(p))
        rep = analysis.report(curve, t_ref) if len(curve) >= 4 else analysis.RegimeReport(
            0.0, 0.0, analysis.delta_at(curve, t_ref), reference_time=t_ref)
        d_f = float(traj.fluorescence[-1] - traj.fluorescence[0])
        points.append((float(p), rep))
        rows.append(d_f)
    classification = None
    if len(points) >= 3:
        classification = analysis.classify_sweep(points, thresholds)
        reports = classification.reports
    else:
        reports = [r for _, r in points]
    return points, reports, rows, classification


def cmd_sweep(a) -> int:
    params = load_params(a.params)
    pressures = sweep_pressures(a)
    t_ref = _positive("t_ref", a.t_ref)
    dt = _positive("dt", a.dt)
    spacing = _positive("marker_spacing", a.marker_spacing)
    points, reports, d_f, classification = run_sweep(
        params, pressures, t_ref, dt, _positive("v0", a.v0, allow_zero=True),
        _positive("laser_power", a.laser_power), spacing, _thresholds(a))
    header = analysis.SUMMARY_HEADER + ["delta_fluorescence_Mcts_s"]
    rows = [[p, r.onset_time / 60.0, r.post_onset_rate * 60.0, r.delta_at_reference, r.regime, f]
            for (p, _), r, f in zip(points, reports, d_f)]
    _out(a.output, write_table(None, header, rows))
    if a.json and classification is not None:
        _out(a.json, analysis.reports_json(classification))
    return EXIT_OK


# ---- analyze -------------------------------------------------------------

def _collect_inputs(paths) -> list[Path]:
    files = []
    for p in paths or []:
        p = Path(p)
        if p.is_dir():
            files.extend(sorted(p.glob("*.csv")))
        elif p.exists():
            files.append(p)
        else:
            raise FileNotFoundError(f"input not found: {p}")
    return files


def _mean_curve(curves: list[pipeline.ReducedCurve]) -> GrowthCurve:
    n = min(len(c.marker_times) for c in curves)
    t = curves[0].marker_times[:n]
    vals = np.mean([c.values[:n] for c in curves], axis=0)
    return GrowthCurve(t, vals, kind="fluorescence", P_O2=curves[0].P_O2)


def cmd_analyze(a) -> int:
    files = _collect_inputs(a.inputs)
    if not files:
        raise UsageError("no raw records given")
    spacing = _positive("marker_spacing", a.marker_spacing)
    t_ref = _positive("t_ref", a.t_ref)
    out_dir = Path(a.out_dir)
    (out_dir / "reduced").mkdir(parents=True, exist_ok=True)

    reduced = []
    for f in files:
        rec = pipeline.read_raw_record(f)
        if int(a.smooth) > 1:
            rec.counts_rate = pipeline.moving_average(rec.counts_rate, int(a.smooth))
        red = pipeline.reduce(rec, spacing)
        pipeline.write_reduced(out_dir / "reduced" / f"{f.stem}.csv", red)
        reduced.append(red)

    per_curve = []
    covering = []
    for red in reduced:
        curve = red.to_curve()
        fit_ = analysis.fit_onset(curve) if len(curve) >= 4 else None
        covered = red.marker_times[0] <= t_ref <= red.marker_times[-1]
        if covered:
            covering.append(red)
        else:
            print(f"warning: {red.pillar_id} does not reach t_ref={t_ref:g} s; excluded from averages",
                  file=sys.stderr)
        per_curve.append([red.pillar_id, red.P_O2,
                          fit_.onset_time / 60.0 if fit_ else None,
                          fit_.post_onset_rate * 60.0 if fit_ else None,
                          red.value_at(t_ref) if covered else None])
    write_table(out_dir / "curves.csv",
                ["pillar_id", "P_O2", "onset_min", "rate", "delta_200min"], per_curve)

    if not covering:
        raise InvalidInputError(f"no record covers t_ref={t_ref:g} s")
    averaged = pipeline.average_by_pressure(covering, t_ref)
    pipeline.write_averaged(out_dir / "averaged.csv", averaged)

    groups: dict[float, list] = {}
    for red in covering:
        groups.setdefault(red.P_O2, []).append(red)
    points = []
    for p in sorted(groups):
        mean_curve = _mean_curve(groups[p])
        if len(mean_curve) < 4:
            continue
        points.append((p, analysis.report(mean_curve, t_ref)))
    if len(points) >= 3:
        classification = analysis.classify_sweep(points, _thresholds(a))
        analysis.write_summary(out_dir / "regimes.csv", classification)
        (out_dir / "regimes.json").write_text(analysis.reports_json(classification), encoding="utf-8")
    else:
        print("note: fewer than 3 pressures; regime classification skipped", file=sys.stderr)
    return EXIT_OK


# ---- fit -----------------------------------------------------------------

def cmd_fit(a) -> int:
    if not a.spec:
        raise UsageError("--spec is required")
    spec_data = load_json(resolve_path(a.spec))
    if a.seed is not None:
        spec_data["seed"] = int(a.seed)
    spec = FitSpec.from_dict(spec_data)
    files = _collect_inputs(a.curves)
    if not files:
        raise UsageError("no curves given")
    curves = [read_curve_with_sidecar(f, kind=a.kind) for f in files]
    result = fit(curves, spec)
    _out(a.output, result.to_json())
    if a.residuals:
        result.residual_table(a.residuals)
    return EXIT_OK


# ---- volume --------------------------------------------------------------

DIMS_COLUMNS = ["pillar_id", "h_um", "w_um", "d_um", "fluorescence_Mcts_s"]
VOLUME_HEADER = ["pillar_id", "spherical_cap_um3", "cylinder_um3", "gaussian_um3", "mean_um3",
                 "spread_um3", "dimension_uncertainty_um3", "fluorescence_Mcts_s"]


def cmd_volume(a) -> int:
    if not a.dims:
        raise UsageError("--dims is required")
    rows = read_table(a.dims, DIMS_COLUMNS)
    if not rows:
        raise InvalidInputError(f"{a.dims}: no data rows")
    out_rows, points = [], []
    for i, r in enumerate(rows, start=2):
        where = f"{a.dims}:{i}"
        try:
            dims = volumetry.DepositDims(parse_float(r["h_um"], where), parse_float(r["w_um"], where),
                                         parse_float(r["d_um"], where))
        except InvalidInputError as exc:
            raise MalformedDataError(f"{where}: {exc}") from None
        fl = parse_float(r["fluorescence_Mcts_s"], where)
        est = volumetry.estimate_volume(dims)
        out_rows.append([r["pillar_id"], est.spherical_cap, est.cylinder, est.gaussian, est.mean,
                         est.spread, est.dimension_uncertainty, fl])
        if est.primary >= float(a.min_volume):
            points.append((fl, est.primary))
    _out(a.output, write_table(None, VOLUME_HEADER, out_rows))
    if a.calibration_out:
        power = _positive("power", a.power)
        cal = volumetry.fit_calibration(points, power)
        if a.rescale_to:
            cal = volumetry.rescale_ratio(cal, _positive("rescale_to", a.rescale_to))
        cal.save(a.calibration_out)
    return EXIT_OK


# ---- gillespie-check -----------------------------------------------------

def cmd_gillespie_check(a) -> int:
    params = load_params(a.params)
    tol = float(a.tolerance)
    if not tol > 0:
        raise UsageError(f"--tolerance must be > 0, got {tol}")
    t_end = _positive("t_end", a.t_end)
    dt = _positive("dt", a.dt)
    n_s0 = params.N_laser if a.n_s0 is None else _positive("n_s0", a.n_s0, allow_zero=True)
    if n_s0 > 1e4 or (np.isfinite(params.N_laser) and params.N_laser > 1e4):
        raise UsageError("gillespie-check is meant for small systems (<= 1e4 sites)")
    runs = int(a.runs)
    if runs < 1:
        raise UsageError("--runs must be >= 1")
    samples = np.linspace(t_end / int(a.samples), t_end, int(a.samples))
    env = Environment(P_O2=_positive("p_o2", a.p_o2, allow_zero=True))
    initial = LicState(volume=_positive("v0", a.v0, allow_zero=True), surface_sites=n_s0)
    rep = compare_with_deterministic(params, env, initial, t_end, dt, runs, samples,
                                     tolerance=tol, seed=int(a.seed), workers=int(a.workers))
    text = write_table(None, ["t_s", "deterministic_volume", "ssa_mean_volume"],
                       zip(rep.times, rep.deterministic, rep.stochastic_mean))
    if a.output:
        _out(a.output, text)
    status = "PASS" if rep.passed else "FAIL"
    print(f"max_relative_deviation={rep.max_relative_deviation:.6g} tolerance={tol:g} {status}")
    return EXIT_OK if rep.passed else EXIT_CHECK_FAILED


# ---- parser --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="licsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with option values")
        return p

    p = common(sub.add_parser("simulate", help="deterministic trajectory to CSV"))
    p.add_argument("--params", help="preset name or parameter JSON")
    p.add_argument("--env", help="environment JSON (overrides --p-o2/--laser-power)")
    p.add_argument("--p-o2", type=float, help="O2 partial pressure, mbar")
    p.add_argument("--laser-power", type=float, help="mW")
    p.add_argument("--t-end", type=float, help="s")
    p.add_argument("--dt", type=float, help="s")
    p.add_argument("--v0", type=float, help="initial volume, site-volumes")
    p.add_argument("--n-s0", type=float, help="initial free sites (default N_laser)")
    p.add_argument("-o", "--output")

    p = common(sub.add_parser("sweep", help="O2 pressure sweep with regime labels"))
    p.add_argument("--params")
    p.add_argument("--pressures", type=float, nargs="+", help="explicit pressures, mbar")
    p.add_argument("--log-range", type=float, nargs=3, metavar=("LO", "HI", "N"))
    p.add_argument("--include-reference", action=argparse.BooleanOptionalAction, default=None,
                   help="add 4.6e-3 mbar to a log-range sweep")
    p.add_argument("--t-ref", type=float, help="reference time, s (default 12000)")
    p.add_argument("--dt", type=float)
    p.add_argument("--v0", type=float)
    p.add_argument("--laser-power", type=float)
    p.add_argument("--marker-spacing", type=float)
    _threshold_args(p)
    p.add_argument("-o", "--output")
    p.add_argument("--json", help="also write JSON regime reports here")

    p = common(sub.add_parser("analyze", help="reduce raw lab records and label regimes"))
    p.add_argument("inputs", nargs="*", help="raw CSV files or directories (JSON sidecars alongside)")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--marker-spacing", type=float)
    p.add_argument("--t-ref", type=float)
    p.add_argument("--smooth", type=int, help="odd moving-average window applied before reduction")
    _threshold_args(p)

    p = common(sub.add_parser("fit", help="fit kinetic parameters to growth curves"))
    p.add_argument("curves", nargs="*", help="curve CSVs (t_s + value column) with JSON sidecars")
    p.add_argument("--spec", help="FitSpec JSON")
    p.add_argument("--kind", choices=["fluorescence", "volume"])
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output")
    p.add_argument("--residuals", help="CSV residual table")

    p = common(sub.add_parser("volume", help="deposit volumes and calibration from SEM dimensions"))
    p.add_argument("--dims", help="CSV: pillar_id,h_um,w_um,d_um,fluorescence_Mcts_s")
    p.add_argument("--power", type=float, help="power the fluorescence was acquired at, mW")
    p.add_argument("--min-volume", type=float, help="exclude smaller deposits from the calibration fit")
    p.add_argument("--rescale-to", type=float, help="report calibration at this power, mW")
    p.add_argument("--calibration-out", help="write calibration JSON here")
    p.add_argument("-o", "--output")

    p = common(sub.add_parser("gillespie-check", help="SSA ensemble vs deterministic trajectory"))
    p.add_argument("--params")
    p.add_argument("--p-o2", type=float)
    p.add_argument("--v0", type=float)
    p.add_argument("--n-s0", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--dt", type=float, help="deterministic step, s")
    p.add_argument("--runs", type=int)
    p.add_argument("--samples", type=int, help="number of comparison times")
    p.add_argument("--tolerance", type=float, help="max allowed relative deviation")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output")
    return parser


def _threshold_args(p):
    p.add_argument("--onset-threshold-min", type=float)
    p.add_argument("--rate-tolerance", type=float)
    p.add_argument("--etch-threshold", type=float)
    p.add_argument("--etch-noise-fraction", type=float)


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
    "fit": cmd_fit,
    "volume": cmd_volume,
    "gillespie-check": cmd_gillespie_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        merged = _merge(args)
        if args.command == "analyze" and not merged.out_dir:
            raise UsageError("--out-dir is required")
        return COMMANDS[args.command](merged)
    except (UsageError, InfeasibleSpecError, InvalidStateError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except MalformedDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (LicError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
