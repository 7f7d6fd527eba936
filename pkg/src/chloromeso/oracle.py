"""Closed-form and one-dimensional reference solutions.

These are the verification rungs below the 2D solver: the error-function
profile for constant coefficients, the integrated-diffusivity substitution
for time-varying but spatially uniform D, and a 1D implicit column solve
that shares the boundary treatment and D composition of the 2D solver but
uses a direct tridiagonal factorization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, linalg, special

from .errors import ParameterError
from .exposure import ExposureScenario, aging_factor, base_diffusivity, effective_diffusivity, surface_concentration
from .solver import SolverConfig, time_points


@dataclass(frozen=True)
class FickQuery:
    initial_concentration: float
    surface_concentration: float
    diffusivity: float  # mm^2/year
    age: float  # years
    depth: float  # mm

    def __post_init__(self):
        if self.diffusivity <= 0 or self.age <= 0:
            raise ParameterError("diffusivity and age must be positive", diffusivity=self.diffusivity, age=self.age)
        if np.any(np.asarray(self.depth) < 0):
            raise ParameterError("depth must be >= 0")


def erf_profile(query: FickQuery):
    """Semi-infinite constant-surface solution. ``depth`` may be an array."""
    x = np.asarray(query.depth, dtype=float)
    arg = x / (2.0 * np.sqrt(query.diffusivity * query.age))
    c = query.initial_concentration + (query.surface_concentration - query.initial_concentration) * special.erfc(arg)
    return float(c) if c.ndim == 0 else c


def integrated_diffusivity(scenario: ExposureScenario, t_end: float, depth: float = 0.0) -> float:
    """Integral of the effective diffusivity over [0, t_end] at ``depth`` (mm^2).

    Adaptive quadrature split at the aging reference age, where the
    integrand has a kink.
    """
    if t_end < 0:
        raise ParameterError("t_end must be >= 0", t_end=t_end)
    if t_end == 0:
        return 0.0
    base = float(base_diffusivity(scenario, depth))
    t0 = scenario.aging.reference_age_years
    pieces = [(0.0, min(t0, t_end))]
    if t_end > t0:
        pieces.append((t0, t_end))
    total = 0.0
    for a, b in pieces:
        value, _ = integrate.quad(lambda t: float(aging_factor(scenario.aging, t)), a, b, epsabs=0.0, epsrel=1e-11, limit=200)
        total += value
    return base * total


@dataclass(frozen=True)
class ReferenceProfile:
    depths: np.ndarray  # mm, cell centres
    concentration: np.ndarray  # mass-%
    time: float


def fd1d_reference(
    scenario: ExposureScenario,
    depth_extent: float,
    h: float,
    dt: float,
    t_end: float,
    startup_duration: float = 1.0,
    startup_refinement: int = 10,
    initial_concentration: float = 0.0,
) -> ReferenceProfile:
    """Backward-Euler column solve on a homogeneous mortar column.

    Same time grid, half-cell Dirichlet surface flux, harmonic faces and
    midpoint-frozen diffusivity as the 2D solver; zero flux at the bottom.
    """
    return fd1d_series(
        scenario, depth_extent, h, dt, (t_end,), startup_duration, startup_refinement, initial_concentration
    )[-1]


def fd1d_series(
    scenario: ExposureScenario,
    depth_extent: float,
    h: float,
    dt: float,
    times: Sequence[float],
    startup_duration: float = 1.0,
    startup_refinement: int = 10,
    initial_concentration: float = 0.0,
) -> list[ReferenceProfile]:
    """:func:`fd1d_reference` profiles at several times from a single integration."""
    if h <= 0 or dt <= 0:
        raise ParameterError("h and dt must be positive", h=h, dt=dt)
    n = int(round(depth_extent / h))
    if n < 1:
        raise ParameterError("depth_extent must cover at least one cell", depth_extent=depth_extent, h=h)
    times = sorted(float(t) for t in times)
    if not times or times[0] < 0:
        raise ParameterError("times must be non-empty and non-negative")
    depths = (np.arange(n) + 0.5) * h
    c = np.full(n, float(initial_concentration))
    config = SolverConfig(
        time_step=dt,
        end_time=times[-1],
        output_times=tuple(times),
        startup_duration=startup_duration,
        startup_refinement=startup_refinement,
    )
    spatial = np.asarray(base_diffusivity(scenario, depths), dtype=float)
    face = np.zeros(n - 1)
    total = spatial[:-1] + spatial[1:]
    np.divide(2 * spatial[:-1] * spatial[1:], total, out=face, where=total > 0)
    face /= h * h
    surface_coupling = 2.0 * spatial[0] / (h * h)
    pts = time_points(config)
    wanted = set(times)
    out = [ReferenceProfile(depths, c.copy(), 0.0)] if 0.0 in wanted else []
    ab = np.zeros((3, n))
    for t_old, t_new in zip(pts[:-1], pts[1:]):
        scale = (t_new - t_old) * float(aging_factor(scenario.aging, 0.5 * (t_old + t_new)))
        diag = np.ones(n)
        diag[:-1] += scale * face
        diag[1:] += scale * face
        diag[0] += scale * surface_coupling
        ab[0, 1:] = -scale * face
        ab[1] = diag
        ab[2, :-1] = -scale * face
        rhs = c.copy()
        rhs[0] += scale * surface_coupling * float(surface_concentration(scenario.surface, t_new))
        c = linalg.solve_banded((1, 1), ab, rhs)
        if float(t_new) in wanted:
            out.append(ReferenceProfile(depths, c.copy(), float(t_new)))
    return out


def erf_estimate(scenario: ExposureScenario, depth, age: float, initial_concentration: float = 0.0):
    """Quick service-life estimate: erf profile with the integrated diffusivity at ``depth``
    and the surface concentration reached at ``age``.

    Exact for constant surface concentration and depth-uniform D; otherwise an
    approximation.
    """
    depths = np.atleast_1d(np.asarray(depth, dtype=float))
    cs = float(surface_concentration(scenario.surface, age))
    out = np.empty_like(depths)
    for k, d in enumerate(depths):
        tau = integrated_diffusivity(scenario, age, float(d))
        if tau <= 0:
            out[k] = initial_concentration if d > 0 else cs
            continue
        out[k] = erf_profile(FickQuery(initial_concentration, cs, tau / age, age, float(d)))
    return out if np.ndim(depth) else float(out[0])


__all__ = [
    "FickQuery",
    "ReferenceProfile",
    "effective_diffusivity",
    "erf_estimate",
    "erf_profile",
    "fd1d_reference",
    "fd1d_series",
    "integrated_diffusivity",
]
