"""Post-processing of simulated fields and measured chloride profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import DepthOutOfRange, EmptyField, InsufficientOverlap, ParameterError
from .exposure import BindingModel, binding_partition
from .solver import ConcentrationField

MG_PER_G = 1000.0


@dataclass(frozen=True, eq=False)
class DepthProfile:
    depths: np.ndarray
    max_concentration: np.ndarray
    time: float
    skipped_rows: tuple[int, ...] = ()

    def __post_init__(self):
        depths = np.asarray(self.depths, dtype=float)
        values = np.asarray(self.max_concentration, dtype=float)
        if depths.shape != values.shape:
            raise ParameterError("depths and concentrations differ in length")
        if depths.size > 1 and np.any(np.diff(depths) <= 0):
            raise ParameterError("depths must be strictly increasing")
        object.__setattr__(self, "depths", depths)
        object.__setattr__(self, "max_concentration", values)

    def value_at(self, depth: float) -> float:
        """Value of the row nearest ``depth``."""
        if self.depths.size == 0:
            raise DepthOutOfRange("empty profile", depth=depth)
        spacing = float(np.min(np.diff(self.depths))) if self.depths.size > 1 else 2 * self.depths[0]
        if depth < 0 or depth > self.depths[-1] + spacing / 2:
            raise DepthOutOfRange(
                "depth outside the profile range", depth=depth, max_depth=float(self.depths[-1] + spacing / 2)
            )
        return float(self.max_concentration[int(np.argmin(np.abs(self.depths - depth)))])

    def as_free(self, binding: BindingModel) -> "DepthProfile":
        return DepthProfile(self.depths, binding_partition(self.max_concentration, binding), self.time, self.skipped_rows)


@dataclass(frozen=True)
class TitrationRecord:
    depth: float  # mm
    silver_nitrate_titer: float  # mg/mL
    titrant_volume: float  # mL
    water_volume: float  # mL
    extract_volume: float  # mL
    powder_mass: float  # g

    def __post_init__(self):
        if self.powder_mass <= 0 or self.extract_volume <= 0:
            raise ParameterError(
                "powder mass and extract volume must be positive",
                powder_mass=self.powder_mass,
                extract_volume=self.extract_volume,
            )
        if min(self.silver_nitrate_titer, self.titrant_volume, self.water_volume, self.depth) < 0:
            raise ParameterError("titration quantities must be non-negative")


@dataclass(frozen=True, eq=False)
class MeasuredProfile:
    depths: np.ndarray
    free_chloride: np.ndarray

    def __post_init__(self):
        depths = np.asarray(self.depths, dtype=float)
        values = np.asarray(self.free_chloride, dtype=float)
        if depths.shape != values.shape:
            raise ParameterError("depths and values differ in length")
        if np.any(depths < 0):
            raise ParameterError("measured depths must be non-negative")
        order = np.argsort(depths, kind="stable")
        object.__setattr__(self, "depths", depths[order])
        object.__setattr__(self, "free_chloride", values[order])

    @classmethod
    def from_titration(cls, records: Sequence[TitrationRecord]) -> "MeasuredProfile":
        return cls([r.depth for r in records], [titration_concentration(r) for r in records])


@dataclass(frozen=True)
class NotReached:
    final_time: float
    final_value: float

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class ProfileComparison:
    rmse: float
    max_abs_error: float
    bias: float
    n_points: int


def depth_max_profile(field: ConcentrationField) -> DepthProfile:
    """Maximum concentration across the width at every depth row."""
    active = field.active
    if not np.any(active):
        raise EmptyField("field has no active cells", time=field.time)
    has = np.any(active, axis=1)
    masked = np.where(active, field.values, -np.inf)
    row_max = masked.max(axis=1)
    depths = field.grid.depths
    skipped = tuple(int(j) for j in np.flatnonzero(~has))
    return DepthProfile(depths[has], row_max[has], field.time, skipped)


def column_profile(field: ConcentrationField, x: float) -> DepthProfile:
    """Concentration down the column nearest ``x`` (mm); inactive cells are skipped."""
    i = int(np.clip(round(x / field.grid.h - 0.5), 0, field.grid.nx - 1))
    active = field.active[:, i]
    if not np.any(active):
        raise EmptyField("column has no active cells", x=x)
    return DepthProfile(field.grid.depths[active], field.values[active, i], field.time)


def titration_concentration(record: TitrationRecord) -> float:
    """Free chloride, mass-% of powder.

    titer [mg/mL] * V1 [mL] gives mg of chloride per extract aliquot; the
    factor V2/V3 scales to the whole extract; division by the powder mass in
    mg (g * 1000) gives the mass fraction.
    """
    chloride_mg = record.silver_nitrate_titer * record.titrant_volume * record.water_volume / record.extract_volume
    return chloride_mg / (record.powder_mass * MG_PER_G) * 100.0


def time_to_threshold(
    profiles: Sequence[DepthProfile], depth: float, threshold: float
) -> Union[float, NotReached]:
    """First time the profile value at ``depth`` reaches ``threshold``.

    Values between consecutive profiles are interpolated linearly in time.
    Reaching the threshold already in the first profile returns its time.
    """
    if not profiles:
        raise EmptyField("no profiles given")
    times = [p.time for p in profiles]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ParameterError("profiles must be sorted by time")
    values = [p.value_at(depth) for p in profiles]
    if values[0] >= threshold:
        return float(times[0])
    for (t0, v0), (t1, v1) in zip(zip(times, values), zip(times[1:], values[1:])):
        if v1 >= threshold:
            if v1 == v0:
                return float(t1)
            return float(t0 + (threshold - v0) * (t1 - t0) / (v1 - v0))
    return NotReached(float(times[-1]), float(values[-1]))


def compare_profiles(model: DepthProfile, measured: MeasuredProfile) -> ProfileComparison:
    """Model interpolated to the measured depths inside the model range; bias is model - measured."""
    lo, hi = model.depths[0], model.depths[-1]
    inside = (measured.depths >= lo) & (measured.depths <= hi)
    if np.count_nonzero(inside) < 2:
        raise InsufficientOverlap(
            "fewer than two measured points inside the model depth range",
            overlap=int(np.count_nonzero(inside)),
            model_min=float(lo),
            model_max=float(hi),
        )
    d = measured.depths[inside]
    err = np.interp(d, model.depths, model.max_concentration) - measured.free_chloride[inside]
    return ProfileComparison(
        rmse=float(np.sqrt(np.mean(err * err))),
        max_abs_error=float(np.max(np.abs(err))),
        bias=float(np.mean(err)),
        n_points=int(d.size),
    )


@dataclass
class ThresholdReport:
    threshold: float
    rows: list[dict] = field(default_factory=list)

    def add(self, depth: float, profiles: Sequence[DepthProfile]) -> None:
        result = time_to_threshold(profiles, depth, self.threshold)
        final = profiles[-1]
        row = {"depth_mm": depth, "final_time": final.time, "final_value": final.value_at(depth)}
        if isinstance(result, NotReached):
            row.update(reached=False, time_to_threshold="")
        else:
            row.update(reached=True, time_to_threshold=result)
        self.rows.append(row)

    def lines(self) -> list[str]:
        out = [f"threshold_percent = {self.threshold:g}"]
        for row in self.rows:
            verdict = f"reached at {row['time_to_threshold']:.3f} yr" if row["reached"] else "not reached"
            out.append(
                f"depth {row['depth_mm']:g} mm: {verdict}; value at {row['final_time']:g} yr = {row['final_value']:.6g}"
            )
        return out


def ratio_verdict(value: float, reference: float) -> str:
    if reference <= 0 or math.isnan(value):
        return "n/a"
    return f"{value / reference:.3f}"


@dataclass(frozen=True)
class ReferenceCheck:
    """Simulated value at ``depth`` and ``time`` against ``multiple`` x threshold."""

    time: float
    depth: float
    value: float
    reference: float
    multiple: float

    @property
    def met(self) -> bool:
        return self.value >= self.reference

    def line(self) -> str:
        verdict = "met" if self.met else "not met"
        return (
            f"t={self.time:g} yr, depth {self.depth:g} mm: value {self.value:.6g} vs "
            f"{self.multiple:g}x threshold {self.reference:.6g} -> {verdict} (ratio {ratio_verdict(self.value, self.reference)})"
        )


def threshold_checks(
    profiles: Sequence[DepthProfile],
    depth: float,
    threshold: float,
    expectations: Sequence[tuple[float, float]] = ((27.0, 1.0), (50.0, 3.0)),
) -> list[ReferenceCheck]:
    """For each (time, multiple) present in ``profiles``, compare the value at ``depth`` with multiple*threshold."""
    by_time = {p.time: p for p in profiles}
    out = []
    for t, multiple in expectations:
        profile = by_time.get(float(t))
        if profile is None:
            continue
        out.append(ReferenceCheck(float(t), float(depth), profile.value_at(depth), multiple * threshold, float(multiple)))
    return out
