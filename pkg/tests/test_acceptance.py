"""Acceptance suite: one test per criterion, each printing a single verdict line.

Criterion 8 compares against published claims and is reported only.
Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also collected in the terminal summary.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy import special

from chloromeso import exposure as ex
from chloromeso.analysis import TitrationRecord, depth_max_profile, threshold_checks, titration_concentration
from chloromeso.config import RunConfig
from chloromeso.io import provenance, write_material_grid, write_mesostructure
from chloromeso.mesostructure import MaterialGrid, MesostructureConfig, build_mesostructure, rasterize
from chloromeso.oracle import FickQuery, erf_profile, fd1d_reference, integrated_diffusivity
from chloromeso.solver import DiffusionOperator, SolverConfig, run_simulation
from chloromeso.validation import aging_scenario, constant_scenario

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow


def report(number: int, passed, summary: str) -> None:
    status = "REPORT" if passed is None else ("PASS" if passed else "FAIL")
    line = f"[{number}] {status}: {summary}"
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture(scope="module")
def default_run():
    """The full default mesoscale run, watched step by step."""
    cfg = RunConfig()
    scenario = cfg.scenario.build()
    grid = rasterize(build_mesostructure(cfg.geometry.build()), cfg.solver.resolution_mm)
    op = DiffusionOperator(grid, scenario, cfg.geometry.itz_multiplier)
    worst = {"above": -math.inf, "below": -math.inf, "decrease": -math.inf, "steps": 0}
    prev = [None]

    def watch(t, c):
        cs = op.surface(t)
        worst["above"] = max(worst["above"], float(c.max()) - cs)
        worst["below"] = max(worst["below"], -float(c.min()))
        if prev[0] is not None:
            worst["decrease"] = max(worst["decrease"], float(np.max(prev[0] - c)))
            worst["steps"] += 1
        prev[0] = c.copy()

    started = time.perf_counter()
    fields = run_simulation(grid, scenario, cfg.solver.build(), operator=op, on_step=watch)
    return cfg, fields, worst, time.perf_counter() - started


def test_criterion_1_carbonation_depth():
    depth = ex.carbonation_depth(ex.CarbonationModel(3.656), 27.0)
    ok = abs(depth - 19.00) <= 0.01
    report(1, ok, f"carbonation depth at 27 yr = {depth:.5f} mm (target 19.00 +/- 0.01)")
    assert ok


def test_criterion_2_factor_golden_values():
    kf = ex.freeze_thaw_factor(8.1)
    slope_gap = abs(ex.FREEZE_THAW_SLOPE - 0.1064 / 5.4044)
    kk_below = ex.construction_factor(ex.MixDesign(0.5 - 1e-12))
    kk_at = ex.construction_factor(ex.MixDesign(0.5))
    kt = ex.temperature_factor(ex.ThermalEnvironment(278.3, 293.0), 5175.25)
    deviation = 100.0 * abs(0.3808 - kt) / kt
    checks = {
        "k_F(8.1)": abs(kf - 1.15947) <= 1e-4,
        "slope": slope_gap <= 1e-6,
        "k_k(0.5)": kk_at == 4.0 and abs(kk_below - 4.0) < 1e-9,
        "k_T": abs(kt - 0.3736) <= 5e-4,
        "k_T deviation": deviation <= 2.5,
    }
    ok = all(checks.values())
    report(
        2,
        ok,
        f"k_F={kf:.6f}, slope gap={slope_gap:.2e}, k_k(0.5)={kk_at:g}, k_T={kt:.6f}, "
        f"deviation from 0.3808 = {deviation:.2f}% (<= 2.5%)",
    )
    assert ok, checks


def test_criterion_3_oracle_ladder():
    t0 = time.perf_counter()
    ref = fd1d_reference(constant_scenario(), 200.0, 1.0, 0.05, 27.0)
    exact = erf_profile(FickQuery(0.0, 0.37, 50.0, 27.0, ref.depths))
    err_const = float(np.max(np.abs(ref.concentration - exact))) / 0.37
    t_const = time.perf_counter() - t0

    t0 = time.perf_counter()
    scen = aging_scenario()
    ref = fd1d_reference(scen, 200.0, 1.0, 0.05, 27.0)
    tau = integrated_diffusivity(scen, 27.0)
    exact = erf_profile(FickQuery(0.0, 0.37, tau / 27.0, 27.0, ref.depths))
    err_aging = float(np.max(np.abs(ref.concentration - exact))) / 0.37
    t_aging = time.perf_counter() - t0

    erf_gap = abs(float(1.0 - special.erfc(0.5)) - 0.5204998778130465)
    ok = err_const <= 0.01 and err_aging <= 0.01 and t_const < 10 and t_aging < 10 and erf_gap <= 1e-12
    report(
        3,
        ok,
        f"constant D err={err_const:.2e} Cs ({t_const:.2f} s); aging D err={err_aging:.2e} Cs ({t_aging:.2f} s); "
        f"erf(0.5) gap={erf_gap:.1e}",
    )
    assert ok


def test_criterion_4_two_d_matches_one_d():
    cfg = RunConfig()
    scen = cfg.scenario.build()
    t0 = time.perf_counter()
    grid = MaterialGrid.homogeneous(300, 200, 1.0)
    field = run_simulation(grid, scen, SolverConfig(time_step=0.1, end_time=27.0, output_times=(27.0,)))[0]
    ref = fd1d_reference(scen, 200.0, 1.0, 0.1, 27.0)
    elapsed = time.perf_counter() - t0
    cs = float(ex.surface_concentration(scen.surface, 27.0))
    err = float(np.max(np.abs(field.values - ref.concentration[:, None]))) / cs
    ok = err <= 0.005 and elapsed < 60
    report(4, ok, f"300x200 mm at h=1: max column error = {err:.2e} Cs (<= 5e-3), {elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_5_bounds_and_monotonicity(default_run):
    _, _, worst, elapsed = default_run
    ok = worst["above"] <= 1e-9 and worst["below"] <= 1e-9 and worst["decrease"] <= 1e-9
    report(
        5,
        ok,
        f"full default run ({worst['steps']} steps, {elapsed:.1f} s): max excess over Cs(t)={worst['above']:.1e}, "
        f"max below 0={worst['below']:.1e}, max decrease={worst['decrease']:.1e} (all <= 1e-9)",
    )
    assert ok


def _pair_ratio(meso):
    circles = [p.circumscribed for p in meso.aggregates]
    if meso.duct is not None:
        circles.append(meso.duct.as_circle())
    worst = math.inf
    for a, b in itertools.combinations(circles, 2):
        d = math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])
        worst = min(worst, d / (meso.eta * (a.radius + b.radius)))
    return worst


def test_criterion_6_packing_invariants(tmp_path):
    fractions, ratios, residuals, convex = [], [], [], True
    for seed in range(10):
        meso = build_mesostructure(MesostructureConfig.default(seed=seed, target_fraction=0.45))
        fractions.append(meso.achieved_area_fraction)
        ratios.append(_pair_ratio(meso))
        residuals.append(max(p.vertex_radius_residual() for p in meso.aggregates))
        convex &= all(p.is_convex() for p in meso.aggregates)

    exports = []
    for run in ("a", "b"):
        meso = build_mesostructure(MesostructureConfig.default(seed=42))
        grid = rasterize(meso, 1.0)
        m = write_mesostructure(tmp_path / f"meso_{run}.txt", meso, provenance("x", 42))
        g = write_material_grid(tmp_path / f"grid_{run}.csv", grid, provenance("x", 42))
        exports.append((m.read_bytes(), g.read_bytes()))
    identical = exports[0] == exports[1]

    ok = (
        min(ratios) >= 1.0
        and convex
        and max(residuals) < 1e-9
        and max(abs(f - 0.45) for f in fractions) <= 0.02
        and identical
    )
    report(
        6,
        ok,
        f"10 seeds: fractions {min(fractions):.4f}..{max(fractions):.4f}, min separation ratio {min(ratios):.4f} (>= 1), "
        f"max vertex residual {max(residuals):.1e}, convex={convex}, byte-identical exports={identical}",
    )
    assert ok


def _homogeneous_profile(scen, h, dt):
    grid = MaterialGrid.homogeneous(int(round(4 / h)), int(round(200 / h)), h)
    field = run_simulation(grid, scen, SolverConfig(time_step=dt, end_time=27.0, output_times=(27.0,)))[0]
    return depth_max_profile(field)


def test_criterion_7_grid_convergence():
    scen = RunConfig().scenario.build()
    fine = _homogeneous_profile(scen, 1.0, 0.1)
    coarse = _homogeneous_profile(scen, 2.0, 0.1)
    half_dt = _homogeneous_profile(scen, 1.0, 0.05)
    scale = float(np.max(np.abs(fine.max_concentration)))
    on_coarse = np.interp(coarse.depths, fine.depths, fine.max_concentration)
    dh = float(np.max(np.abs(on_coarse - coarse.max_concentration))) / scale
    dt = float(np.max(np.abs(half_dt.max_concentration - fine.max_concentration))) / scale
    ok = dh < 0.02 and dt < 0.005
    report(7, ok, f"h 2->1 mm change = {dh:.2e} (< 2e-2); dt 0.1->0.05 yr change = {dt:.2e} (< 5e-3)")
    assert ok


def test_criterion_8_published_claims_soft(default_run):
    cfg, fields, _, _ = default_run
    profiles = [depth_max_profile(f) for f in fields]
    duct_top = cfg.geometry.duct_depth_mm - cfg.geometry.duct_diameter_mm / 2
    checks = threshold_checks(profiles, duct_top, cfg.analysis.threshold_percent)
    parts = [
        f"{c.time:g} yr: {c.value:.5f}% vs {c.multiple:g}x{cfg.analysis.threshold_percent:g}% "
        f"({'agrees' if c.met else 'disagrees'}, ratio {c.value / c.reference:.3f})"
        for c in checks
    ]
    report(8, None, f"shallowest duct depth {duct_top:g} mm; " + "; ".join(parts) + " (non-gating)")
    assert len(checks) == 2


def test_criterion_9_titration():
    rec = TitrationRecord(0.0, 1.0, 2.0, 250.0, 20.0, 10.0)
    rel = abs(titration_concentration(rec) - 0.25) / 0.25
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(500):
        c, v1, v2, v3, m = rng.uniform(0.1, 100.0, 5)
        k = rng.uniform(0.1, 10.0)
        base = titration_concentration(TitrationRecord(0.0, c, v1, v2, v3, m))
        for scaled in (
            TitrationRecord(0.0, k * c, v1, v2, v3, m),
            TitrationRecord(0.0, c, k * v1, v2, v3, m),
            TitrationRecord(0.0, c, v1, k * v2, v3, m),
            TitrationRecord(0.0, c, v1, v2, v3 / k, m),
            TitrationRecord(0.0, c, v1, v2, v3, m / k),
        ):
            worst = max(worst, abs(titration_concentration(scaled) - k * base) / (k * base))
    ok = rel <= 1e-12 and worst <= 1e-12
    report(9, ok, f"worked example rel. error = {rel:.1e} (<= 1e-12); worst linearity rel. error = {worst:.1e}")
    assert ok
