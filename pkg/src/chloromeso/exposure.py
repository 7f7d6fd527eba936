"""Influence factors for chloride diffusivity in cold-region concrete.

Every factor is a pure function of an immutable parameter record. The
factors compose into a time- and depth-dependent effective diffusion
coefficient and a time-dependent surface (boundary) concentration.

Canonical units: mm, years, mass-% of concrete. The initial diffusivity
formula yields m^2/s and is converted to mm^2/year exactly once, in
:func:`initial_diffusivity_mm2_per_year`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .errors import ParameterError

SECONDS_PER_YEAR = 3.1536e7
DAYS_PER_YEAR = 365.0
MM2_PER_M2 = 1.0e6

# Lab fit of diffusivity vs freeze-thaw cycles: D = 0.1064 n + 5.4044.
FREEZE_THAW_FIT_SLOPE = 0.1064
FREEZE_THAW_FIT_INTERCEPT = 5.4044
# Normalized slope of the fit above, as tabulated for the field coefficient.
FREEZE_THAW_SLOPE = 0.0196876

DEFAULT_CARBONATION_POLYNOMIAL = (2.999e-6, -1.14e-4, -8.723e-3, 0.9903)


@dataclass(frozen=True)
class MixDesign:
    water_cement_ratio: float

    def __post_init__(self):
        if not 0.0 < self.water_cement_ratio <= 1.0:
            raise ParameterError(
                "water_cement_ratio must lie in (0, 1]",
                water_cement_ratio=self.water_cement_ratio,
            )


@dataclass(frozen=True)
class ThermalEnvironment:
    temperature: float  # K
    reference_temperature: float = 293.0  # K

    def __post_init__(self):
        if self.temperature <= 0 or self.reference_temperature <= 0:
            raise ParameterError(
                "absolute temperatures must be positive",
                temperature=self.temperature,
                reference_temperature=self.reference_temperature,
            )


@dataclass(frozen=True)
class FreezeThawEnvironment:
    annual_negative_temperature_days: float
    lambda_correction: float = 0.7
    water_content_coefficient: float = 1.0
    damage_ratio: float = 11.5

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ParameterError(f"{f.name} must be >= 0", **{f.name: getattr(self, f.name)})
        if self.damage_ratio <= 0:
            raise ParameterError("damage_ratio must be > 0", damage_ratio=self.damage_ratio)


@dataclass(frozen=True)
class CarbonationModel:
    """Carbonation front growth and its effect on chloride diffusivity.

    ``depth_coefficient`` drives the sqrt-time front (mm/sqrt(year)).
    ``influence_polynomial`` holds cubic coefficients, highest power first,
    for the diffusivity multiplier as a function of depth in mm. The
    polynomial is evaluated no deeper than ``max_depth``.
    """

    depth_coefficient: float = 3.656
    influence_polynomial: tuple[float, float, float, float] = DEFAULT_CARBONATION_POLYNOMIAL
    max_depth: float = 60.0

    def __post_init__(self):
        if self.depth_coefficient < 0:
            raise ParameterError("depth_coefficient must be >= 0", depth_coefficient=self.depth_coefficient)
        if len(self.influence_polynomial) != 4:
            raise ParameterError("influence_polynomial needs exactly four coefficients")
        if self.max_depth <= 0:
            raise ParameterError("max_depth must be > 0", max_depth=self.max_depth)
        object.__setattr__(self, "influence_polynomial", tuple(float(c) for c in self.influence_polynomial))


@dataclass(frozen=True)
class BindingModel:
    binding_capacity: float = 2.14

    def __post_init__(self):
        if self.binding_capacity < 0:
            raise ParameterError("binding_capacity must be >= 0", binding_capacity=self.binding_capacity)


@dataclass(frozen=True)
class AgingModel:
    reference_age: float = 28.0  # days
    decay_index: float = 0.264

    def __post_init__(self):
        if self.reference_age <= 0:
            raise ParameterError("reference_age must be > 0", reference_age=self.reference_age)
        if not 0.0 <= self.decay_index < 1.0:
            raise ParameterError("decay_index must lie in [0, 1)", decay_index=self.decay_index)

    @property
    def reference_age_years(self) -> float:
        return self.reference_age / DAYS_PER_YEAR


@dataclass(frozen=True)
class SurfaceChlorideModel:
    initial_surface_concentration: float = 0.0
    ultimate_increment: float = 0.37
    rate_constant: float = 0.18738  # 1/year

    def __post_init__(self):
        if self.initial_surface_concentration < 0:
            raise ParameterError("initial_surface_concentration must be >= 0")
        if self.ultimate_increment < 0:
            raise ParameterError("ultimate_increment must be >= 0", ultimate_increment=self.ultimate_increment)
        if self.rate_constant < 0:
            raise ParameterError("rate_constant must be >= 0", rate_constant=self.rate_constant)


@dataclass(frozen=True)
class FactorOverrides:
    """Precomputed values that replace derived ones when set.

    ``initial_diffusivity`` is in mm^2/year.
    """

    activation_constant: Optional[float] = None
    temperature_factor: Optional[float] = None
    construction_factor: Optional[float] = None
    freeze_thaw_factor: Optional[float] = None
    lab_equivalent_cycles: Optional[float] = None
    initial_diffusivity: Optional[float] = None

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None and f.name != "activation_constant" and value < 0:
                raise ParameterError(f"override {f.name} must be >= 0", **{f.name: value})


@dataclass(frozen=True)
class ExposureScenario:
    mix: MixDesign
    thermal: ThermalEnvironment
    freeze_thaw: FreezeThawEnvironment
    carbonation: CarbonationModel = field(default_factory=CarbonationModel)
    binding: BindingModel = field(default_factory=BindingModel)
    aging: AgingModel = field(default_factory=AgingModel)
    surface: SurfaceChlorideModel = field(default_factory=SurfaceChlorideModel)
    overrides: FactorOverrides = field(default_factory=FactorOverrides)
    service_age: float = 27.0  # years; used for reporting carbonation depth


def activation_constant(mix: MixDesign) -> float:
    return 10475.0 - 10750.0 * mix.water_cement_ratio


def temperature_factor(thermal: ThermalEnvironment, q: float) -> float:
    """Arrhenius-type temperature multiplier, exactly 1 at the reference temperature."""
    t, t0 = thermal.temperature, thermal.reference_temperature
    if t <= 0 or t0 <= 0:
        raise ParameterError("absolute temperatures must be positive", temperature=t, reference_temperature=t0)
    return (t / t0) * math.exp(q * (1.0 / t0 - 1.0 / t))


def carbonation_depth(model: CarbonationModel, age: float) -> float:
    """Carbonation front depth in mm after ``age`` years."""
    if age < 0:
        raise ParameterError("age must be >= 0", age=age)
    return model.depth_coefficient * math.sqrt(age)


def carbonation_influence(model: CarbonationModel, depth):
    """Diffusivity multiplier at ``depth`` mm (scalar or array).

    Depth is clamped to ``model.max_depth`` and the result to >= 0.
    """
    d = np.asarray(depth, dtype=float)
    if np.any(d < 0):
        raise ParameterError("depth must be >= 0", depth=float(np.min(d)))
    d = np.minimum(d, model.max_depth)
    a3, a2, a1, a0 = model.influence_polynomial
    value = np.maximum(((a3 * d + a2) * d + a1) * d + a0, 0.0)
    return float(value) if value.ndim == 0 else value


def natural_freeze_thaw_cycles(env: FreezeThawEnvironment) -> float:
    return env.lambda_correction * env.annual_negative_temperature_days


def lab_equivalent_cycles(env: FreezeThawEnvironment, n_act: float) -> float:
    if env.damage_ratio == 0:
        raise ParameterError("damage_ratio must be nonzero")
    return env.water_content_coefficient * n_act / env.damage_ratio


def freeze_thaw_factor(n_in: float, service_age: float = 1.0, cumulative: bool = False) -> float:
    """Freeze-thaw diffusivity multiplier.

    By default ``n_in`` is a yearly lab-equivalent cycle count and the factor
    is constant over the service life. With ``cumulative=True`` the cycles
    accumulate as ``n_in * service_age``.
    """
    if n_in < 0:
        raise ParameterError("n_in must be >= 0", n_in=n_in)
    n = n_in * service_age if cumulative else n_in
    return 1.0 + FREEZE_THAW_SLOPE * n


def aging_factor(model: AgingModel, age):
    """(t0/t)^m for t >= t0, 1 before. ``age`` is in years (scalar or array)."""
    t = np.asarray(age, dtype=float)
    if np.any(t < 0):
        raise ParameterError("age must be >= 0", age=float(np.min(t)))
    t0 = model.reference_age_years
    value = np.where(t > t0, (t0 / np.maximum(t, t0)) ** model.decay_index, 1.0)
    return float(value) if value.ndim == 0 else value


def binding_partition(total_concentration, binding: BindingModel):
    """Free chloride from total chloride."""
    return np.divide(total_concentration, 1.0 + binding.binding_capacity)


def construction_factor(mix: MixDesign) -> float:
    wc = mix.water_cement_ratio
    if wc <= 0.5:
        return (1000.0 * wc * wc - 1050.0 * wc + 287.0) / 3.0
    return 4.0


def initial_diffusivity(mix: MixDesign) -> float:
    """Initial diffusivity in m^2/s."""
    return 10.0 ** (-12.06 + 2.4 * mix.water_cement_ratio)


def initial_diffusivity_mm2_per_year(mix: MixDesign) -> float:
    return initial_diffusivity(mix) * MM2_PER_M2 * SECONDS_PER_YEAR


def surface_concentration(model: SurfaceChlorideModel, age):
    t = np.asarray(age, dtype=float)
    if np.any(t < 0):
        raise ParameterError("age must be >= 0", age=float(np.min(t)))
    value = model.initial_surface_concentration + model.ultimate_increment * -np.expm1(-model.rate_constant * t)
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True)
class ResolvedFactors:
    """The factor values actually used, after overrides are applied."""

    activation_constant: float
    temperature_factor: float
    natural_cycles: float
    lab_equivalent_cycles: float
    freeze_thaw_factor: float
    construction_factor: float
    initial_diffusivity: float  # mm^2/year
    binding_capacity: float

    @property
    def time_independent_multiplier(self) -> float:
        """Product of all depth- and time-independent factors, binding included."""
        return (
            self.freeze_thaw_factor
            * self.temperature_factor
            * self.construction_factor
            * self.initial_diffusivity
            / (1.0 + self.binding_capacity)
        )


def _pick(override: Optional[float], derived: float) -> float:
    return derived if override is None else float(override)


def resolve_factors(scenario: ExposureScenario) -> ResolvedFactors:
    ov = scenario.overrides
    q = _pick(ov.activation_constant, activation_constant(scenario.mix))
    k_t = _pick(ov.temperature_factor, temperature_factor(scenario.thermal, q))
    n_act = natural_freeze_thaw_cycles(scenario.freeze_thaw)
    n_in = _pick(ov.lab_equivalent_cycles, lab_equivalent_cycles(scenario.freeze_thaw, n_act))
    k_f = _pick(ov.freeze_thaw_factor, freeze_thaw_factor(n_in))
    k_k = _pick(ov.construction_factor, construction_factor(scenario.mix))
    d0 = _pick(ov.initial_diffusivity, initial_diffusivity_mm2_per_year(scenario.mix))
    return ResolvedFactors(
        activation_constant=q,
        temperature_factor=k_t,
        natural_cycles=n_act,
        lab_equivalent_cycles=n_in,
        freeze_thaw_factor=k_f,
        construction_factor=k_k,
        initial_diffusivity=d0,
        binding_capacity=scenario.binding.binding_capacity,
    )


def base_diffusivity(scenario: ExposureScenario, depth):
    """Effective diffusivity without the aging term, mm^2/year (scalar or array)."""
    factors = resolve_factors(scenario)
    return factors.time_independent_multiplier * carbonation_influence(scenario.carbonation, depth)


def effective_diffusivity(scenario: ExposureScenario, age, depth):
    """Effective chloride diffusivity in mm^2/year at ``age`` years and ``depth`` mm."""
    value = base_diffusivity(scenario, depth) * aging_factor(scenario.aging, age)
    return float(value) if np.ndim(value) == 0 else value


def diagnostics(scenario: ExposureScenario) -> dict[str, str]:
    """Derived vs overridden factor values, plus range warnings, as a flat key-value map."""
    ov = scenario.overrides
    q_derived = activation_constant(scenario.mix)
    resolved = resolve_factors(scenario)
    n_act = natural_freeze_thaw_cycles(scenario.freeze_thaw)
    n_in_derived = lab_equivalent_cycles(scenario.freeze_thaw, n_act)
    rows = {
        "activation_constant": (q_derived, ov.activation_constant, resolved.activation_constant),
        "temperature_factor": (
            temperature_factor(scenario.thermal, resolved.activation_constant),
            ov.temperature_factor,
            resolved.temperature_factor,
        ),
        "lab_equivalent_cycles": (n_in_derived, ov.lab_equivalent_cycles, resolved.lab_equivalent_cycles),
        "freeze_thaw_factor": (
            freeze_thaw_factor(resolved.lab_equivalent_cycles),
            ov.freeze_thaw_factor,
            resolved.freeze_thaw_factor,
        ),
        "construction_factor": (construction_factor(scenario.mix), ov.construction_factor, resolved.construction_factor),
        "initial_diffusivity_mm2_per_year": (
            initial_diffusivity_mm2_per_year(scenario.mix),
            ov.initial_diffusivity,
            resolved.initial_diffusivity,
        ),
    }
    out: dict[str, str] = {}
    for name, (derived, override, used) in rows.items():
        out[f"{name}.derived"] = f"{derived:.6g}"
        out[f"{name}.override"] = "none" if override is None else f"{override:.6g}"
        out[f"{name}.used"] = f"{used:.6g}"
        if override is not None and derived != 0:
            out[f"{name}.deviation_percent"] = f"{100.0 * (override - derived) / derived:+.3f}"
    out["natural_cycles"] = f"{n_act:.6g}"
    out["carbonation_depth_mm"] = f"{carbonation_depth(scenario.carbonation, scenario.service_age):.4f}"
    out["carbonation_influence_surface"] = f"{carbonation_influence(scenario.carbonation, 0.0):.6g}"
    out["binding_capacity"] = f"{scenario.binding.binding_capacity:.6g}"
    out["effective_diffusivity_surface_at_service_age"] = (
        f"{effective_diffusivity(scenario, scenario.service_age, 0.0):.6g}"
    )

    warnings = []
    if q_derived < 0:
        warnings.append("derived activation constant is negative")
    if not 2.0 <= scenario.binding.binding_capacity <= 4.0:
        warnings.append("binding capacity outside the usual 2-4 band")
    out["warnings"] = "; ".join(warnings) if warnings else "none"
    return out
