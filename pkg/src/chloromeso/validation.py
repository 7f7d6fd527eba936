"""The verification ladder run by ``chloromeso validate``.

erf -> 1D constant -> 1D time-varying -> 2D homogeneous -> 2D mesoscale.
Each rung is sized to finish in seconds; the full-size versions live in the
acceptance tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from . import exposure as ex
from .analysis import TitrationRecord, titration_concentration
from .mesostructure import MaterialGrid, MesostructureConfig, build_mesostructure, rasterize
from .oracle import FickQuery, erf_profile, fd1d_reference, integrated_diffusivity
from .solver import DiffusionOperator, SolverConfig, run_simulation

ERF_HALF = 0.5204998778130465377


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<44} value={self.value:.4g}  tol={self.tolerance:.3g}  {self.detail}"


def constant_scenario(diffusivity: float = 50.0, surface: float = 0.37) -> ex.ExposureScenario:
    """Space- and time-uniform diffusivity with a fixed surface concentration."""
    return ex.ExposureScenario(
        mix=ex.MixDesign(0.5),
        thermal=ex.ThermalEnvironment(293.0),
        freeze_thaw=ex.FreezeThawEnvironment(0.0),
        carbonation=ex.CarbonationModel(influence_polynomial=(0.0, 0.0, 0.0, 1.0)),
        binding=ex.BindingModel(0.0),
        aging=ex.AgingModel(decay_index=0.0),
        surface=ex.SurfaceChlorideModel(surface, 0.0, 0.0),
        overrides=ex.FactorOverrides(
            temperature_factor=1.0, construction_factor=1.0, freeze_thaw_factor=1.0, initial_diffusivity=diffusivity
        ),
    )


def aging_scenario(initial_diffusivity: float = 240.0, surface: float = 0.37) -> ex.ExposureScenario:
    """Depth-uniform diffusivity that decays with age; fixed surface concentration."""
    base = constant_scenario(initial_diffusivity, surface)
    return ex.ExposureScenario(**{**base.__dict__, "aging": ex.AgingModel()})


def tabulated_scenario(water_cement_ratio: float = 0.49) -> ex.ExposureScenario:
    """Tabulated field scenario with the tabulated factor values as overrides."""
    return ex.ExposureScenario(
        mix=ex.MixDesign(water_cement_ratio),
        thermal=ex.ThermalEnvironment(278.3),
        freeze_thaw=ex.FreezeThawEnvironment(133.4),
        binding=ex.BindingModel(2.14),
        surface=ex.SurfaceChlorideModel(0.0, 0.37, 0.18738),
        overrides=ex.FactorOverrides(
            activation_constant=5175.25,
            temperature_factor=0.3808,
            construction_factor=4.223,
            lab_equivalent_cycles=8.1,
        ),
    )


def _check(name: str, value: float, tol: float, detail: str = "") -> Check:
    return Check(name, bool(value <= tol), float(value), tol, detail)


def check_erf() -> Check:
    err = abs(float(1.0 - special.erfc(0.5)) - ERF_HALF)
    return _check("erf(0.5) tabulated value", err, 1e-12)


def check_factors() -> list[Check]:
    out = [
        _check(
            "carbonation depth at 27 yr (mm)",
            abs(ex.carbonation_depth(ex.CarbonationModel(3.656), 27.0) - 19.00),
            0.01,
        ),
        _check("freeze-thaw factor at n_in=8.1", abs(ex.freeze_thaw_factor(8.1) - 1.15947), 1e-4),
        _check(
            "freeze-thaw slope vs lab fit ratio",
            abs(ex.FREEZE_THAW_SLOPE - ex.FREEZE_THAW_FIT_SLOPE / ex.FREEZE_THAW_FIT_INTERCEPT),
            1e-6,
        ),
        _check("construction factor at w/c=0.5", abs(ex.construction_factor(ex.MixDesign(0.5)) - 4.0), 0.0),
    ]
    k_t = ex.temperature_factor(ex.ThermalEnvironment(278.3, 293.0), 5175.25)
    out.append(_check("temperature factor (278.3 K, q=5175.25)", abs(k_t - 0.3736), 5e-4))
    out.append(
        _check(
            "temperature factor deviation from 0.3808 (%)",
            100 * abs(0.3808 - k_t) / k_t,
            2.5,
            "reported deviation",
        )
    )
    return out


def check_fd1d_constant(h: float = 1.0, dt: float = 0.05, t_end: float = 27.0) -> Check:
    scen = constant_scenario()
    ref = fd1d_reference(scen, 200.0, h, dt, t_end)
    exact = erf_profile(FickQuery(0.0, 0.37, 50.0, t_end, ref.depths))
    return _check("fd1d vs erf, constant D (frac of Cs)", float(np.max(np.abs(ref.concentration - exact))) / 0.37, 0.01)


def check_fd1d_aging(h: float = 1.0, dt: float = 0.05, t_end: float = 27.0) -> Check:
    scen = aging_scenario()
    ref = fd1d_reference(scen, 200.0, h, dt, t_end)
    tau = integrated_diffusivity(scen, t_end)
    exact = erf_profile(FickQuery(0.0, 0.37, tau / t_end, t_end, ref.depths))
    return _check("fd1d vs erf(tau), aging D (frac of Cs)", float(np.max(np.abs(ref.concentration - exact))) / 0.37, 0.01)


def check_2d_vs_1d(width: float = 8.0, height: float = 200.0, h: float = 1.0, dt: float = 0.1, t_end: float = 27.0) -> Check:
    scen = tabulated_scenario()
    grid = MaterialGrid.homogeneous(int(round(width / h)), int(round(height / h)), h)
    cfg = SolverConfig(time_step=dt, end_time=t_end, output_times=(t_end,))
    field = run_simulation(grid, scen, cfg)[-1]
    ref = fd1d_reference(scen, height, h, dt, t_end)
    cs = float(ex.surface_concentration(scen.surface, t_end))
    err = float(np.max(np.abs(field.values - ref.concentration[:, None]))) / cs
    return _check("2D homogeneous vs fd1d (frac of Cs)", err, 0.005)


def check_packing(seed: int = 42, target: float = 0.45) -> list[Check]:
    meso = build_mesostructure(MesostructureConfig.default(seed=seed, target_fraction=target))
    circles = [p.circumscribed for p in meso.aggregates]
    if meso.duct is not None:
        circles.append(meso.duct.as_circle())
    worst = math.inf
    for a, b in itertools.combinations(circles, 2):
        d = math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])
        worst = min(worst, d / (meso.eta * (a.radius + b.radius)))
    convex = all(p.is_convex() for p in meso.aggregates)
    residual = max(p.vertex_radius_residual() for p in meso.aggregates)
    return [
        _check("packing: min separation ratio shortfall", max(0.0, 1.0 - worst), 0.0),
        _check("packing: all polygons convex (0 = yes)", 0.0 if convex else 1.0, 0.0),
        _check("packing: vertex-on-circle residual", residual, 1e-9),
        _check("packing: |achieved - target| fraction", abs(meso.achieved_area_fraction - target), 0.02),
    ]


def check_mesoscale_bounds(seed: int = 7, years: float = 10.0) -> list[Check]:
    grid = rasterize(build_mesostructure(MesostructureConfig.default(seed=seed)), 1.0)
    scen = tabulated_scenario()
    op = DiffusionOperator(grid, scen)
    state = {"prev": None, "bound": 0.0, "mono": 0.0}

    def watch(t: float, c: np.ndarray) -> None:
        cs = op.surface(t)
        if c.size:
            state["bound"] = max(state["bound"], float(c.max()) - cs, -float(c.min()))
        if state["prev"] is not None:
            state["mono"] = max(state["mono"], float(np.max(state["prev"] - c)))
        state["prev"] = c.copy()

    run_simulation(grid, scen, SolverConfig(time_step=0.1, end_time=years, output_times=(years,)), operator=op, on_step=watch)
    return [
        _check("mesoscale: bound violation", max(state["bound"], 0.0), 1e-9),
        _check("mesoscale: time-monotonicity violation", max(state["mono"], 0.0), 1e-9),
        _check("mesoscale: blocked cells carry zero D (0 = yes)", 0.0 if op.audit() else 1.0, 0.0),
    ]


def check_titration() -> Check:
    rec = TitrationRecord(0.0, 1.0, 2.0, 250.0, 20.0, 10.0)
    return _check("titration worked example (rel. error)", abs(titration_concentration(rec) - 0.25) / 0.25, 1e-12)


LADDER: tuple[Callable[[], object], ...] = (
    check_erf,
    check_factors,
    check_titration,
    check_fd1d_constant,
    check_fd1d_aging,
    check_2d_vs_1d,
    check_packing,
    check_mesoscale_bounds,
)


def run_ladder() -> list[Check]:
    results: list[Check] = []
    for fn in LADDER:
        out = fn()
        results.extend(out if isinstance(out, list) else [out])
    return results
