"""Command-line entry point: ``chloromeso {generate,simulate,profile,predict,validate,config}``.

Errors from any module are printed to stderr as one JSON record and mapped
to the exit code carried by the exception class.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import exposure as ex
from .analysis import (
    DepthProfile,
    MeasuredProfile,
    NotReached,
    ThresholdReport,
    column_profile,
    compare_profiles,
    depth_max_profile,
    threshold_checks,
    time_to_threshold,
)
from .config import RunConfig, dump_config, load_config
from .errors import AnalysisError, ChloromesoError, ConfigError
from .io import (
    field_filename,
    provenance,
    read_field_csv,
    read_measured_csv,
    read_titration_csv,
    write_columns,
    write_field_csv,
    write_field_vtk,
    write_key_values,
    write_material_grid,
    write_mesostructure,
    write_profile_csv,
)
from .mesostructure import build_mesostructure, rasterize
from .oracle import erf_estimate, fd1d_series
from .solver import run_simulation


def _resolved(args) -> RunConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, years=args.years, resolution=args.resolution)


def _header(cfg: RunConfig, **extra) -> list[str]:
    return provenance(cfg.digest(), cfg.geometry.seed, **extra)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("cannot create output directory", path=str(out), detail=exc.strerror) from None
    return out


def _emit(lines: Sequence[str]) -> None:
    for line in lines:
        print(line)


# --------------------------------------------------------------------------- commands


def _generate(cfg: RunConfig, out: Path):
    geo = cfg.geometry
    meso = build_mesostructure(geo.build())
    grid = rasterize(meso, cfg.solver.resolution_mm)
    header = _header(cfg)
    write_mesostructure(out / "mesostructure.txt", meso, header)
    write_material_grid(out / "material_grid.csv", grid, header)
    rx, ry = grid.extent_residual
    summary = {
        "aggregates": len(meso.aggregates),
        "target_fraction": f"{meso.target_fraction:.6g}",
        "achieved_area_fraction": f"{meso.achieved_area_fraction:.6g}",
        "measured_aggregate_fraction": f"{geo.measured_aggregate_fraction:.6g}",
        "fraction_gap_to_measured": f"{meso.achieved_area_fraction - geo.measured_aggregate_fraction:+.4f}",
        "grid": f"{grid.nx}x{grid.ny} h={grid.h:g}",
        "grid_extent_residual_mm": f"{rx:g},{ry:g}",
        **{f"grid_fraction.{k}": f"{v:.6f}" for k, v in grid.fractions().items()},
    }
    write_key_values(out / "mesostructure_summary.txt", summary, header)
    return meso, grid, summary


def cmd_generate(args) -> int:
    cfg = _resolved(args)
    out = _out_dir(args)
    _, _, summary = _generate(cfg, out)
    _emit(f"{k} = {v}" for k, v in summary.items())
    return 0


def cmd_simulate(args) -> int:
    cfg = _resolved(args)
    out = _out_dir(args)
    scenario = cfg.scenario.build()
    solver_cfg = cfg.solver.build()
    header = _header(cfg)
    write_key_values(out / "diagnostics.txt", ex.diagnostics(scenario), header)
    (out / "resolved_config.ini").write_text("\n".join(header) + "\n" + dump_config(cfg))
    _, grid, _ = _generate(cfg, out)
    started = time.perf_counter()
    fields = run_simulation(grid, scenario, solver_cfg, cfg.geometry.itz_multiplier)
    vtk = args.vtk or cfg.solver.write_vtk
    for f in fields:
        write_field_csv(out / field_filename(f.time), f, header)
        if vtk:
            write_field_vtk(out / field_filename(f.time, "vtk"), f)
        print(f"t = {f.time:g} yr  max = {np.nanmax(f.values) if np.any(f.active) else float('nan'):.6g}")
    print(f"wrote {len(fields)} field dump(s) to {out} in {time.perf_counter() - started:.1f} s")
    return 0


def _load_fields(directory: Path):
    paths = sorted(directory.glob("field_t*.csv"))
    if not paths:
        raise AnalysisError("no field dumps found", directory=str(directory))
    fields = [read_field_csv(p) for p in paths]
    return sorted(fields, key=lambda f: f.time)


def _measured(cfg: RunConfig) -> Optional[MeasuredProfile]:
    a = cfg.analysis
    if a.measured_path is None:
        return None
    if a.measured_format == "titration":
        return MeasuredProfile.from_titration(read_titration_csv(a.measured_path))
    return read_measured_csv(a.measured_path)


def cmd_profile(args) -> int:
    cfg = _resolved(args)
    out = _out_dir(args)
    a = cfg.analysis
    binding = cfg.scenario.build().binding
    fields = _load_fields(Path(args.fields_dir or args.out_dir))
    header = _header(cfg)
    profiles: list[DepthProfile] = []
    for f in fields:
        if a.profile_kind == "column":
            x = a.column_x_mm if a.column_x_mm is not None else f.grid.nx * f.grid.h / 2
            p = column_profile(f, x)
        else:
            p = depth_max_profile(f)
        profiles.append(p)
        write_profile_csv(out / f"profile_t{f.time:07.3f}.csv", p, p.as_free(binding), header)

    report = ThresholdReport(a.threshold_percent)
    for depth in a.probe_depths_mm:
        report.add(depth, profiles)
    lines = report.lines()

    geo = cfg.geometry
    if geo.include_duct:
        duct_top = geo.duct_depth_mm - geo.duct_diameter_mm / 2
        checks = threshold_checks(profiles, duct_top, a.threshold_percent)
        if checks:
            lines.append(f"reference checks at shallowest duct depth {duct_top:g} mm (reported, not gating):")
            lines += ["  " + c.line() for c in checks]

    measured = _measured(cfg)
    if measured is not None:
        match = [p for p in profiles if abs(p.time - a.comparison_time) < 1e-9]
        if not match:
            raise AnalysisError("no field dump at the comparison time", comparison_time=a.comparison_time)
        model = match[0].as_free(binding) if a.compare_free else match[0]
        cmp = compare_profiles(model, measured)
        basis = "free" if a.compare_free else "total"
        lines.append(
            f"measured comparison at {a.comparison_time:g} yr ({basis} chloride): rmse={cmp.rmse:.6g} "
            f"max_abs={cmp.max_abs_error:.6g} bias={cmp.bias:+.6g} n={cmp.n_points}"
        )
    (out / "threshold_report.txt").write_text("\n".join([*header, *lines]) + "\n")
    _emit(lines)
    return 0


def cmd_predict(args) -> int:
    cfg = _resolved(args)
    out = _out_dir(args)
    scenario = cfg.scenario.build()
    s = cfg.solver
    depths = tuple(args.depth) if args.depth else cfg.analysis.probe_depths_mm
    extent = cfg.geometry.height_mm
    if any(d < 0 or d > extent for d in depths):
        raise AnalysisError("prediction depth outside the column", depths=",".join(map(str, depths)), extent=extent)
    end = s.end_time
    years = [float(y) for y in range(1, int(np.floor(end)) + 1)]
    if not years or years[-1] < end:
        years.append(float(end))
    series = fd1d_series(
        scenario,
        extent,
        s.resolution_mm,
        s.time_step,
        years,
        s.startup_duration,
        s.startup_refinement,
        s.initial_concentration,
    )
    profiles = [DepthProfile(r.depths, r.concentration, r.time) for r in series]
    columns: dict[str, list[float]] = {"year": [p.time for p in profiles]}
    for d in depths:
        columns[f"fd1d_{d:g}mm"] = [p.value_at(d) for p in profiles]
        columns[f"erf_{d:g}mm"] = [erf_estimate(scenario, d, t) for t in columns["year"]]
    write_columns(out / "predict.csv", columns, _header(cfg))
    threshold = cfg.analysis.threshold_percent
    lines = [f"threshold_percent = {threshold:g}"]
    for d in depths:
        hit = time_to_threshold(profiles, d, threshold)
        verdict = f"reached at {hit:.3f} yr" if not isinstance(hit, NotReached) else f"not reached by {end:g} yr"
        lines.append(f"depth {d:g} mm: {verdict}; value at {end:g} yr = {profiles[-1].value_at(d):.6g}")
    (out / "predict_report.txt").write_text("\n".join([*_header(cfg), *lines]) + "\n")
    _emit(lines)
    return 0


def cmd_validate(args) -> int:
    from .validation import run_ladder

    results = run_ladder()
    _emit(c.line() for c in results)
    failed = [c for c in results if not c.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_config(args) -> int:
    cfg = _resolved(args)
    sys.stdout.write(dump_config(cfg))
    return 0


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chloromeso", description="Mesoscale chloride ingress simulator.")
    parser.add_argument("--version", action="version", version=f"chloromeso {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="INI configuration file (defaults when omitted)")
        p.add_argument("--out-dir", default="chloromeso-out", help="output directory")
        p.add_argument("--seed", type=int, help="override geometry seed")
        p.add_argument("--years", type=float, help="override solver end time (years)")
        p.add_argument("--resolution", type=float, help="override grid cell size (mm)")

    p = sub.add_parser("generate", help="build and export a mesostructure and its material grid")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="full pipeline to field dumps at the output times")
    common(p)
    p.add_argument("--vtk", action="store_true", help="also write legacy VTK fields")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("profile", help="field dumps to depth profiles and a threshold report")
    common(p)
    p.add_argument("--fields-dir", help="directory holding field dumps (default: --out-dir)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("predict", help="fast 1D estimate and time-to-threshold at given depths")
    common(p)
    p.add_argument("--depth", type=float, action="append", help="depth in mm (repeatable)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("validate", help="run the verification ladder")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("config", help="print the resolved configuration (all keys with defaults)")
    common(p)
    p.set_defaults(func=cmd_config)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except ChloromesoError as exc:
        print(json.dumps(exc.record(), sort_keys=True), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
