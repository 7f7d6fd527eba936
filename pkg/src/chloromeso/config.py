"""Run configuration: an INI file with four sections.

Grammar (``configparser`` dialect)::

    [scenario]   exposure parameters and optional factor overrides
    [geometry]   domain, grading, packing, ITZ and duct
    [solver]     resolution, time stepping, output schedule, tolerances
    [analysis]   threshold, probe depths, measured data

Values are plain numbers; lists are comma separated; ``none`` clears an
optional value. Unknown sections or keys are rejected. Every key and its
default is listed by ``chloromeso config`` (see
:func:`dump_config`).
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import typing
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from . import exposure as ex
from .errors import ConfigError
from .mesostructure import DomainRect, MesostructureConfig, TendonDuct
from .solver import DEFAULT_OUTPUT_TIMES, SolverConfig


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    @field_validator("*", mode="before")
    @classmethod
    def _parse_text(cls, value, info):
        if not isinstance(value, str):
            return value
        text = value.strip()
        annotation = cls.model_fields[info.field_name].annotation
        optional = type(None) in typing.get_args(annotation)
        if text.lower() in ("none", "") and optional:
            return None
        inner = [a for a in typing.get_args(annotation) if a is not type(None)] if optional else [annotation]
        if any(typing.get_origin(a) is tuple for a in inner):
            return [part.strip() for part in text.split(",") if part.strip()]
        return text


class ScenarioSection(_Section):
    water_cement_ratio: float = 0.49
    temperature_k: float = 278.3
    reference_temperature_k: float = 293.0
    negative_temperature_days: float = 133.4
    lambda_correction: float = 0.7
    water_content_coefficient: float = 1.0
    damage_ratio: float = 11.5
    carbonation_coefficient: float = 3.656
    carbonation_polynomial: tuple[float, float, float, float] = ex.DEFAULT_CARBONATION_POLYNOMIAL
    carbonation_max_depth_mm: float = 60.0
    binding_capacity: float = 2.14
    reference_age_days: float = 28.0
    decay_index: float = 0.264
    surface_initial: float = 0.0
    surface_increment: float = 0.37
    surface_rate: float = 0.18738
    service_age: float = 27.0
    override_activation_constant: Optional[float] = 5175.25
    override_temperature_factor: Optional[float] = 0.3808
    override_construction_factor: Optional[float] = 4.223
    override_lab_equivalent_cycles: Optional[float] = 8.1
    override_freeze_thaw_factor: Optional[float] = None
    override_initial_diffusivity: Optional[float] = None

    def build(self) -> ex.ExposureScenario:
        return ex.ExposureScenario(
            mix=ex.MixDesign(self.water_cement_ratio),
            thermal=ex.ThermalEnvironment(self.temperature_k, self.reference_temperature_k),
            freeze_thaw=ex.FreezeThawEnvironment(
                self.negative_temperature_days,
                self.lambda_correction,
                self.water_content_coefficient,
                self.damage_ratio,
            ),
            carbonation=ex.CarbonationModel(
                self.carbonation_coefficient, self.carbonation_polynomial, self.carbonation_max_depth_mm
            ),
            binding=ex.BindingModel(self.binding_capacity),
            aging=ex.AgingModel(self.reference_age_days, self.decay_index),
            surface=ex.SurfaceChlorideModel(self.surface_initial, self.surface_increment, self.surface_rate),
            overrides=ex.FactorOverrides(
                activation_constant=self.override_activation_constant,
                temperature_factor=self.override_temperature_factor,
                construction_factor=self.override_construction_factor,
                freeze_thaw_factor=self.override_freeze_thaw_factor,
                lab_equivalent_cycles=self.override_lab_equivalent_cycles,
                initial_diffusivity=self.override_initial_diffusivity,
            ),
            service_age=self.service_age,
        )


class GeometrySection(_Section):
    width_mm: float = 300.0
    height_mm: float = 200.0
    target_fraction: float = 0.45
    # volume fraction measured by CT; kept for reference, not reachable in 2D
    measured_aggregate_fraction: float = 0.5403
    d_min_mm: float = 5.0
    d_max_mm: float = 20.0
    fuller_exponent: float = 0.5
    eta: float = 1.05
    vertex_min: int = 4
    vertex_max: int = 8
    min_angle_deg: float = 30.0
    itz_width_mm: float = 0.5
    itz_multiplier: float = 5.0
    include_duct: bool = True
    duct_diameter_mm: float = 60.0
    duct_depth_mm: float = 140.0
    duct_x_mm: Optional[float] = None
    seed: int = 42
    max_attempts: int = 100_000

    def build(self) -> MesostructureConfig:
        domain = DomainRect(self.width_mm, self.height_mm)
        duct = (
            TendonDuct.at_depth(domain, self.duct_depth_mm, self.duct_diameter_mm, self.duct_x_mm)
            if self.include_duct
            else None
        )
        return MesostructureConfig(
            domain=domain,
            target_fraction=self.target_fraction,
            grading=(self.d_min_mm, self.d_max_mm),
            fuller_exponent=self.fuller_exponent,
            eta=self.eta,
            vertex_count_range=(self.vertex_min, self.vertex_max),
            min_angle_deg=self.min_angle_deg,
            itz_width=self.itz_width_mm,
            duct=duct,
            seed=self.seed,
            max_attempts=self.max_attempts,
        )


class SolverSection(_Section):
    resolution_mm: float = 1.0
    time_step: float = 0.1
    end_time: float = 50.0
    output_times: tuple[float, ...] = DEFAULT_OUTPUT_TIMES
    linear_tolerance: float = 1e-10
    max_iterations: int = 5000
    startup_duration: float = 1.0
    startup_refinement: int = 10
    initial_concentration: float = 0.0
    write_vtk: bool = False

    def build(self) -> SolverConfig:
        return SolverConfig(
            time_step=self.time_step,
            end_time=self.end_time,
            output_times=self.output_times,
            linear_tolerance=self.linear_tolerance,
            max_iterations=self.max_iterations,
            startup_duration=self.startup_duration,
            startup_refinement=self.startup_refinement,
            initial_concentration=self.initial_concentration,
        )


class AnalysisSection(_Section):
    threshold_percent: float = 0.06
    probe_depths_mm: tuple[float, ...] = (110.0, 140.0, 170.0)
    measured_path: Optional[str] = None
    measured_format: Literal["profile", "titration"] = "profile"
    compare_free: bool = True
    comparison_time: float = 27.0
    profile_kind: Literal["max", "column"] = "max"
    column_x_mm: Optional[float] = None


class RunConfig(_Section):
    scenario: ScenarioSection = ScenarioSection()
    geometry: GeometrySection = GeometrySection()
    solver: SolverSection = SolverSection()
    analysis: AnalysisSection = AnalysisSection()

    def digest(self) -> str:
        """SHA-256 over the canonical JSON form, first 16 hex digits."""
        text = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_overrides(
        self,
        seed: Optional[int] = None,
        years: Optional[float] = None,
        resolution: Optional[float] = None,
    ) -> "RunConfig":
        geometry, solver = self.geometry, self.solver
        if seed is not None:
            geometry = geometry.model_copy(update={"seed": int(seed)})
        updates = {}
        if resolution is not None:
            updates["resolution_mm"] = float(resolution)
        if years is not None:
            kept = tuple(t for t in solver.output_times if t < years)
            updates["end_time"] = float(years)
            updates["output_times"] = kept + ((float(years),) if years > 0 else ())
        if updates:
            solver = solver.model_copy(update=updates)
        try:
            return RunConfig.model_validate(
                {
                    "scenario": self.scenario.model_dump(),
                    "geometry": geometry.model_dump(),
                    "solver": solver.model_dump(),
                    "analysis": self.analysis.model_dump(),
                }
            )
        except ValidationError as exc:
            raise ConfigError("invalid override", detail=str(exc)) from None


SECTIONS = ("scenario", "geometry", "solver", "analysis")


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError("malformed configuration file", source=source, detail=str(exc)) from None
    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError("unknown configuration section", source=source, section=", ".join(unknown))
    data = {name: dict(parser[name]) for name in parser.sections()}
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(
            "invalid configuration value",
            source=source,
            location=".".join(str(p) for p in first["loc"]),
            detail=first["msg"],
        ) from None


def load_config(path: Optional[str | Path]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("cannot read configuration file", path=str(path), detail=exc.strerror) from None
    return parse_config(text, str(path))


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ", ".join(_format(v) for v in value)
    return str(value)


def dump_config(config: RunConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for name in SECTIONS:
        section = getattr(config, name)
        parser[name] = {key: _format(getattr(section, key)) for key in type(section).model_fields}
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()
