"""Implicit finite-volume solver for transient chloride diffusion on a material grid.

Cell-centred five-point stencil, harmonic-mean face diffusivities, backward
Euler in time with the diffusivity frozen at the step midpoint. The exposed
surface is the top edge (row 0): its faces carry a Dirichlet flux
``2 D (C_s - C) / h`` across the half cell. All other edges, and every face
touching aggregate or duct, are zero-flux. Aggregate and duct cells are not
unknowns at all.

Because every spatial factor (carbonation by depth, ITZ multiplier) is
time-independent and the aging term is a scalar, the diffusivity separates
as ``D(x, t) = S(x) a(t)``; the spatial operator is assembled once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import LinearSolveFailure, ParameterError
from .exposure import ExposureScenario, aging_factor, base_diffusivity, surface_concentration
from .mesostructure import Material, MaterialGrid

DEFAULT_OUTPUT_TIMES = (5.0, 10.0, 20.0, 27.0, 30.0, 40.0, 50.0)


@dataclass(frozen=True)
class SolverConfig:
    time_step: float = 0.1  # years
    end_time: float = 50.0
    output_times: tuple[float, ...] = DEFAULT_OUTPUT_TIMES
    linear_tolerance: float = 1e-10
    max_iterations: int = 5000
    startup_duration: float = 1.0
    startup_refinement: int = 10
    initial_concentration: float = 0.0

    def __post_init__(self):
        if self.time_step <= 0:
            raise ParameterError("time_step must be positive", time_step=self.time_step)
        if self.end_time < 0:
            raise ParameterError("end_time must be >= 0", end_time=self.end_time)
        times = tuple(sorted(float(t) for t in self.output_times))
        if any(t < 0 or t > self.end_time + 1e-12 for t in times):
            raise ParameterError("output_times must lie in [0, end_time]", end_time=self.end_time)
        object.__setattr__(self, "output_times", times)
        if self.linear_tolerance <= 0 or self.max_iterations < 1:
            raise ParameterError("linear solver settings must be positive")
        if self.startup_refinement < 1 or self.startup_duration < 0:
            raise ParameterError("startup settings must be non-negative")
        if self.initial_concentration < 0:
            raise ParameterError("initial_concentration must be >= 0")


def time_points(config: SolverConfig) -> np.ndarray:
    """Step boundaries from 0 to end_time, refined during startup and hitting every output time."""
    end = config.end_time
    if end == 0:
        return np.zeros(1)
    fine = config.time_step / config.startup_refinement
    startup = min(config.startup_duration, end)
    n_fine = int(math.ceil(startup / fine - 1e-9))
    pts = [k * fine for k in range(n_fine)]
    start_main = n_fine * fine if n_fine else 0.0
    n_main = int(math.ceil((end - start_main) / config.time_step - 1e-9))
    pts += [start_main + k * config.time_step for k in range(max(n_main, 0))]
    pts += [end, *config.output_times]
    pts = np.unique(np.asarray(pts, dtype=float))
    pts = pts[pts <= end]
    keep = np.concatenate([[True], np.diff(pts) > 1e-9 * config.time_step])
    pts = pts[keep]
    # snap any survivor within tolerance of a requested time onto it
    for t in (end, *config.output_times):
        k = int(np.argmin(np.abs(pts - t)))
        pts[k] = t
    return pts


@dataclass(frozen=True, eq=False)
class ConcentrationField:
    grid: MaterialGrid
    values: np.ndarray  # (ny, nx); NaN on aggregate and duct cells
    time: float

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def active(self) -> np.ndarray:
        return self.grid.active


def spatial_diffusivity(grid: MaterialGrid, scenario: ExposureScenario, itz_multiplier: float = 5.0) -> np.ndarray:
    """Time-independent part of the cell diffusivity (mm^2/year), zero on inactive cells."""
    if itz_multiplier < 0:
        raise ParameterError("itz_multiplier must be >= 0", itz_multiplier=itz_multiplier)
    row = np.asarray(base_diffusivity(scenario, grid.depths), dtype=float)
    s = np.repeat(row[:, None], grid.nx, axis=1)
    s[grid.codes == Material.ITZ] *= itz_multiplier
    s[~grid.active] = 0.0
    return s


def cell_diffusivity(
    scenario: ExposureScenario,
    grid: MaterialGrid,
    cell: tuple[int, int],
    time: float,
    itz_multiplier: float = 5.0,
) -> float:
    """Diffusivity of cell ``(row, col)`` at ``time`` years, mm^2/year."""
    j, i = cell
    code = grid.codes[j, i]
    if code in (Material.AGGREGATE, Material.DUCT):
        return 0.0
    depth = (j + 0.5) * grid.h
    d = float(base_diffusivity(scenario, depth)) * float(aging_factor(scenario.aging, time))
    return d * itz_multiplier if code == Material.ITZ else d


def _harmonic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    total = a + b
    out = np.zeros_like(total)
    np.divide(2.0 * a * b, total, out=out, where=total > 0)
    return out


def conjugate_gradient(
    A: sp.csr_matrix,
    b: np.ndarray,
    x0: np.ndarray,
    rtol: float,
    max_iterations: int,
    diagonal: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, int]:
    """Jacobi-preconditioned CG; stops when ||b - Ax|| <= rtol ||b||.

    Raises LinearSolveFailure when the iteration budget runs out or the
    iteration breaks down before reaching the target.
    """
    inv_d = 1.0 / (A.diagonal() if diagonal is None else diagonal)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    x = x0.copy()
    r = b - A @ x
    target = rtol * bnorm
    if float(np.linalg.norm(r)) <= target:
        return x, 0
    z = r * inv_d
    p = z.copy()
    rz = float(np.dot(r, z))
    for k in range(1, max_iterations + 1):
        ap = A @ p
        pap = float(np.dot(p, ap))
        if not pap > 0.0:
            break
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        if float(np.linalg.norm(r)) <= target:
            # confirm against the true residual; the recurrence can drift
            r = b - A @ x
            if float(np.linalg.norm(r)) <= target:
                return x, k
        z = r * inv_d
        rz_new = float(np.dot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise LinearSolveFailure(
        "conjugate gradient did not reach the residual target",
        iterations=max_iterations,
        relative_residual=float(np.linalg.norm(b - A @ x)) / bnorm,
        rtol=rtol,
    )


class DiffusionOperator:
    """Assembled spatial operator for one grid and scenario.

    ``exposed_surface=False`` turns the top edge into a zero-flux wall,
    giving a closed system (used for conservation checks).
    """

    def __init__(
        self,
        grid: MaterialGrid,
        scenario: ExposureScenario,
        itz_multiplier: float = 5.0,
        exposed_surface: bool = True,
    ):
        self.grid = grid
        self.scenario = scenario
        self.itz_multiplier = itz_multiplier
        self.exposed_surface = exposed_surface
        self.spatial = spatial_diffusivity(grid, scenario, itz_multiplier)
        self.active = grid.active
        self.n = int(np.count_nonzero(self.active))
        index = np.full(grid.codes.shape, -1, dtype=np.int64)
        index[self.active] = np.arange(self.n)
        self.index = index
        self._assemble()

    def _assemble(self) -> None:
        s, idx, h2 = self.spatial, self.index, self.grid.h**2
        diag = np.zeros(self.n)
        rows, cols, vals = [], [], []
        for a_s, b_s, a_i, b_i in (
            (s[:, :-1], s[:, 1:], idx[:, :-1], idx[:, 1:]),
            (s[:-1, :], s[1:, :], idx[:-1, :], idx[1:, :]),
        ):
            coupling = _harmonic(a_s, b_s) / h2
            live = (a_i >= 0) & (b_i >= 0) & (coupling > 0)
            ia, ib, c = a_i[live], b_i[live], coupling[live]
            np.add.at(diag, ia, c)
            np.add.at(diag, ib, c)
            rows += [ia, ib]
            cols += [ib, ia]
            vals += [-c, -c]
        boundary = np.zeros(self.n)
        if self.exposed_surface:
            top = idx[0] >= 0
            boundary[idx[0][top]] = 2.0 * s[0][top] / h2
            diag += boundary
        ar = np.arange(self.n)
        rows.append(ar)
        cols.append(ar)
        vals.append(diag)
        K = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n, self.n)
        )
        K.sum_duplicates()
        K.sort_indices()
        self.K = K
        self.boundary = boundary
        row_of = np.repeat(ar, np.diff(K.indptr))
        self._diag_pos = np.flatnonzero(K.indices == row_of)

    def aging(self, t: float) -> float:
        return float(aging_factor(self.scenario.aging, t))

    def diffusivity(self, t: float) -> np.ndarray:
        return self.spatial * self.aging(t)

    def surface(self, t: float) -> float:
        return float(surface_concentration(self.scenario.surface, t))

    def system(self, t_old: float, t_new: float) -> tuple[sp.csr_matrix, float]:
        scale = (t_new - t_old) * self.aging(0.5 * (t_old + t_new))
        A = self.K.copy()
        A.data *= scale
        A.data[self._diag_pos] += 1.0
        return A, scale

    def step(
        self,
        c_old: np.ndarray,
        t_old: float,
        t_new: float,
        rtol: float = 1e-10,
        max_iterations: int = 5000,
    ) -> np.ndarray:
        """Advance active-cell concentrations from ``t_old`` to ``t_new``."""
        if t_new <= t_old:
            raise ParameterError("time step must be positive", t_old=t_old, t_new=t_new)
        if self.n == 0:
            return c_old.copy()
        A, scale = self.system(t_old, t_new)
        b = c_old + scale * self.boundary * self.surface(t_new)
        try:
            x, _ = conjugate_gradient(A, b, c_old, rtol, max_iterations)
        except LinearSolveFailure as exc:
            exc.context["time"] = t_new
            raise
        return x

    def to_grid(self, c: np.ndarray) -> np.ndarray:
        out = np.full(self.grid.codes.shape, np.nan)
        out[self.active] = c
        return out

    def from_grid(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float)[self.active]

    def audit(self) -> bool:
        """True when no aggregate or duct cell carries diffusivity."""
        blocked = ~self.active
        return bool(np.all(self.spatial[blocked] == 0.0))


def step(
    field: ConcentrationField,
    scenario: ExposureScenario,
    dt: float,
    itz_multiplier: float = 5.0,
    rtol: float = 1e-10,
    max_iterations: int = 5000,
) -> ConcentrationField:
    """One implicit step of length ``dt`` years."""
    if dt <= 0:
        raise ParameterError("dt must be positive", dt=dt)
    op = DiffusionOperator(field.grid, scenario, itz_multiplier)
    c = op.step(op.from_grid(field.values), field.time, field.time + dt, rtol, max_iterations)
    return ConcentrationField(field.grid, op.to_grid(c), field.time + dt)


StepCallback = Callable[[float, np.ndarray], None]


def run_simulation(
    grid: MaterialGrid,
    scenario: ExposureScenario,
    config: SolverConfig,
    itz_multiplier: float = 5.0,
    on_step: Optional[StepCallback] = None,
    operator: Optional[DiffusionOperator] = None,
) -> list[ConcentrationField]:
    """Integrate from t=0 and return the fields at the requested output times.

    ``on_step(t, values)`` is called after every step, including t=0, with the
    active-cell vector. With no output times requested, the final field is
    returned.
    """
    op = operator or DiffusionOperator(grid, scenario, itz_multiplier)
    wanted: Sequence[float] = config.output_times or (config.end_time,)
    pts = time_points(config)
    c = np.full(op.n, config.initial_concentration, dtype=float)
    outputs: list[ConcentrationField] = []
    wanted_set = set(wanted)

    def emit(t: float) -> None:
        if t in wanted_set:
            outputs.append(ConcentrationField(grid, op.to_grid(c), t))

    if on_step is not None:
        on_step(0.0, c)
    emit(float(pts[0]))
    for t_old, t_new in zip(pts[:-1], pts[1:]):
        c = op.step(c, float(t_old), float(t_new), config.linear_tolerance, config.max_iterations)
        if on_step is not None:
            on_step(float(t_new), c)
        emit(float(t_new))
    if not outputs:
        outputs.append(ConcentrationField(grid, op.to_grid(c), float(pts[-1])))
    return outputs
