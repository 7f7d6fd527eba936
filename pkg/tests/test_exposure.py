import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chloromeso import exposure as ex
from chloromeso.errors import ParameterError

# Expected values below were computed with mpmath at 30 digits.


def test_activation_constant():
    assert ex.activation_constant(ex.MixDesign(0.4)) == pytest.approx(6175.0)
    assert ex.activation_constant(ex.MixDesign(0.493)) == pytest.approx(5175.25)
    assert ex.activation_constant(ex.MixDesign(1.0)) == pytest.approx(-275.0)


def test_negative_activation_constant_is_flagged():
    scen = ex.ExposureScenario(ex.MixDesign(1.0), ex.ThermalEnvironment(278.3), ex.FreezeThawEnvironment(100))
    assert "negative" in ex.diagnostics(scen)["warnings"]


@pytest.mark.parametrize("wc", [0.0, -0.1, 1.01])
def test_mix_design_rejects_out_of_range(wc):
    with pytest.raises(ParameterError):
        ex.MixDesign(wc)


def test_temperature_factor():
    assert ex.temperature_factor(ex.ThermalEnvironment(293.0), 5175.25) == 1.0
    assert ex.temperature_factor(ex.ThermalEnvironment(278.3), 5175.25) == pytest.approx(0.373647181908, rel=1e-10)
    assert ex.temperature_factor(ex.ThermalEnvironment(278.3), 0.0) == pytest.approx(278.3 / 293)


@pytest.mark.parametrize("t,t0", [(0.0, 293.0), (278.3, 0.0), (-5.0, 293.0)])
def test_temperature_rejects_nonpositive(t, t0):
    with pytest.raises(ParameterError):
        ex.ThermalEnvironment(t, t0)


@given(st.floats(240, 320), st.floats(240, 320), st.floats(1, 10000))
def test_temperature_factor_increasing_in_t(t1, t2, q):
    lo, hi = sorted((t1, t2))
    if hi - lo < 1e-6:
        return
    assert ex.temperature_factor(ex.ThermalEnvironment(lo), q) < ex.temperature_factor(ex.ThermalEnvironment(hi), q)


def test_carbonation_depth():
    m = ex.CarbonationModel(depth_coefficient=3.656)
    assert ex.carbonation_depth(m, 27) == pytest.approx(19.00, abs=0.01)
    assert ex.carbonation_depth(m, 0) == 0.0
    assert ex.carbonation_depth(m, 50) == pytest.approx(25.85182392, rel=1e-9)
    with pytest.raises(ParameterError):
        ex.carbonation_depth(m, -1)


@given(st.floats(0, 100), st.floats(0, 100))
def test_carbonation_depth_squared_linear(t1, t2):
    m = ex.CarbonationModel(depth_coefficient=2.5)
    d1, d2 = ex.carbonation_depth(m, t1), ex.carbonation_depth(m, t2)
    assert d1 * d1 * t2 == pytest.approx(d2 * d2 * t1, rel=1e-9, abs=1e-9)


def test_carbonation_influence():
    m = ex.CarbonationModel()
    assert ex.carbonation_influence(m, 0.0) == pytest.approx(0.9903)
    assert ex.carbonation_influence(m, 19.0) == pytest.approx(0.803979141, rel=1e-9)
    # polynomial value at 50 mm is 0.644025 (hand expansion: 0.374875 - 0.285 - 0.43615 + 0.9903)
    assert ex.carbonation_influence(m, 50.0) == pytest.approx(0.644025, rel=1e-9)
    # deeper than the fit range the value is held at the 60 mm value
    assert ex.carbonation_influence(m, 150.0) == pytest.approx(ex.carbonation_influence(m, 60.0))
    with pytest.raises(ParameterError):
        ex.carbonation_influence(m, -1.0)


def test_carbonation_influence_clamped_nonnegative():
    m = ex.CarbonationModel(influence_polynomial=(0.0, 0.0, -1.0, 1.0))
    assert ex.carbonation_influence(m, 5.0) == 0.0


def test_freeze_thaw_chain():
    env = ex.FreezeThawEnvironment(133.4, water_content_coefficient=0.9975, damage_ratio=11.5)
    n_act = ex.natural_freeze_thaw_cycles(env)
    assert n_act == pytest.approx(93.38)
    assert ex.lab_equivalent_cycles(env, n_act) == pytest.approx(8.1, abs=0.001)
    assert ex.natural_freeze_thaw_cycles(ex.FreezeThawEnvironment(0)) == 0
    assert ex.natural_freeze_thaw_cycles(ex.FreezeThawEnvironment(100)) == pytest.approx(70.0)
    env1 = ex.FreezeThawEnvironment(0, water_content_coefficient=1.0, damage_ratio=11.5)
    assert ex.lab_equivalent_cycles(env1, 115) == pytest.approx(10.0)
    assert ex.lab_equivalent_cycles(env1, 0) == 0


def test_damage_ratio_must_be_positive():
    with pytest.raises(ParameterError):
        ex.FreezeThawEnvironment(100, damage_ratio=0.0)


def test_freeze_thaw_factor():
    assert ex.freeze_thaw_factor(0) == 1.0
    assert ex.freeze_thaw_factor(8.1) == pytest.approx(1.15946956, abs=1e-8)
    assert abs(ex.FREEZE_THAW_SLOPE - ex.FREEZE_THAW_FIT_SLOPE / ex.FREEZE_THAW_FIT_INTERCEPT) < 1e-6
    assert ex.freeze_thaw_factor(8.1, service_age=2, cumulative=True) == pytest.approx(1 + 0.0196876 * 16.2)


@given(st.floats(0, 500))
def test_freeze_thaw_matches_lab_fit_ratio(n):
    ratio = (ex.FREEZE_THAW_FIT_SLOPE * n + ex.FREEZE_THAW_FIT_INTERCEPT) / ex.FREEZE_THAW_FIT_INTERCEPT
    assert ex.freeze_thaw_factor(n) == pytest.approx(ratio, abs=1e-6 * max(1.0, n))


def test_aging_factor():
    m = ex.AgingModel()
    t0 = 28 / 365
    assert ex.aging_factor(m, t0) == 1.0
    assert ex.aging_factor(m, 27.0) == pytest.approx(0.2126788828, rel=1e-9)
    assert ex.aging_factor(ex.AgingModel(decay_index=0.0), 40.0) == 1.0
    assert ex.aging_factor(m, 0.0) == 1.0


@given(st.floats(0, 100), st.floats(0, 100))
def test_aging_factor_nonincreasing(a, b):
    m = ex.AgingModel()
    lo, hi = sorted((a, b))
    assert ex.aging_factor(m, hi) <= ex.aging_factor(m, lo)


def test_aging_continuous_at_reference():
    m = ex.AgingModel()
    t0 = m.reference_age_years
    assert ex.aging_factor(m, t0 * (1 + 1e-12)) == pytest.approx(1.0, abs=1e-10)


def test_binding_partition():
    assert ex.binding_partition(0.3, ex.BindingModel(0.0)) == 0.3
    assert ex.binding_partition(0.3, ex.BindingModel(2.14)) == pytest.approx(0.0955414012739, rel=1e-10)
    assert ex.binding_partition(0.0, ex.BindingModel(2.14)) == 0.0


@given(st.floats(0, 10), st.floats(0, 5))
def test_binding_roundtrip(c, r):
    assert ex.binding_partition(c * (1 + r), ex.BindingModel(r)) == pytest.approx(c, rel=1e-12, abs=1e-15)


def test_construction_factor():
    assert ex.construction_factor(ex.MixDesign(0.6)) == 4.0
    assert ex.construction_factor(ex.MixDesign(0.5)) == 4.0
    assert ex.construction_factor(ex.MixDesign(0.4887)) == pytest.approx(4.2308966667, rel=1e-9)
    # the tabulated 4.223 corresponds to w/c near 0.48903
    assert ex.construction_factor(ex.MixDesign(0.4890278)) == pytest.approx(4.223, abs=1e-5)


@given(st.floats(0.01, 0.5))
def test_construction_factor_polynomial_branch(wc):
    expected = (1000 * wc**2 - 1050 * wc + 287) / 3
    assert ex.construction_factor(ex.MixDesign(wc)) == pytest.approx(expected)


def test_initial_diffusivity():
    assert ex.initial_diffusivity(ex.MixDesign(0.5)) == pytest.approx(1.38038426460e-11, rel=1e-10)
    assert ex.initial_diffusivity_mm2_per_year(ex.MixDesign(0.4887)) == pytest.approx(408.9654379578, rel=1e-10)
    assert 10 ** -12.06 == pytest.approx(8.710e-13, rel=1e-3)


def test_surface_concentration():
    m = ex.SurfaceChlorideModel(0.0, 0.37, 0.18738)
    assert ex.surface_concentration(m, 0.0) == 0.0
    assert ex.surface_concentration(m, 27.0) == pytest.approx(0.3676504049, rel=1e-9)
    fast = ex.SurfaceChlorideModel(0.1, 0.37, 1e6)
    assert ex.surface_concentration(fast, 1.0) == pytest.approx(0.47)


@given(st.floats(0, 200), st.floats(0, 200))
def test_surface_concentration_monotone_bounded(a, b):
    m = ex.SurfaceChlorideModel(0.05, 0.37, 0.18738)
    lo, hi = sorted((a, b))
    assert ex.surface_concentration(m, lo) <= ex.surface_concentration(m, hi) <= 0.05 + 0.37


def tabulated_scenario(**overrides):
    kw = dict(
        temperature_factor=0.3808,
        construction_factor=4.223,
        lab_equivalent_cycles=8.1,
        activation_constant=5175.25,
    )
    kw.update(overrides)
    return ex.ExposureScenario(
        mix=ex.MixDesign(0.4887),
        thermal=ex.ThermalEnvironment(278.3),
        freeze_thaw=ex.FreezeThawEnvironment(133.4),
        binding=ex.BindingModel(2.14),
        overrides=ex.FactorOverrides(**kw),
    )


def test_effective_diffusivity_identity():
    scen = ex.ExposureScenario(
        mix=ex.MixDesign(0.5),
        thermal=ex.ThermalEnvironment(293.0),
        freeze_thaw=ex.FreezeThawEnvironment(0.0),
        carbonation=ex.CarbonationModel(influence_polynomial=(0, 0, 0, 1)),
        binding=ex.BindingModel(0.0),
        overrides=ex.FactorOverrides(
            temperature_factor=1, construction_factor=1, freeze_thaw_factor=1, initial_diffusivity=409.0
        ),
    )
    assert ex.effective_diffusivity(scen, 28 / 365, 0.0) == pytest.approx(409.0)


def test_effective_diffusivity_table1():
    # chain evaluated independently with mpmath: 51.14762598947
    assert ex.effective_diffusivity(tabulated_scenario(), 27.0, 0.0) == pytest.approx(51.147625989, rel=1e-8)


def test_effective_diffusivity_vanishes_for_strong_binding():
    scen = tabulated_scenario()
    strong = ex.ExposureScenario(**{**scen.__dict__, "binding": ex.BindingModel(1e12)})
    assert ex.effective_diffusivity(strong, 27.0, 0.0) < 1e-9


@settings(max_examples=50)
@given(st.floats(0, 80), st.floats(0, 200))
def test_effective_diffusivity_homogeneous_in_d0(age, depth):
    a = tabulated_scenario(initial_diffusivity=300.0)
    b = tabulated_scenario(initial_diffusivity=600.0)
    assert ex.effective_diffusivity(b, age, depth) == pytest.approx(2 * ex.effective_diffusivity(a, age, depth), rel=1e-14)


def test_effective_diffusivity_vectorized():
    depths = np.array([0.0, 19.0, 100.0])
    values = ex.effective_diffusivity(tabulated_scenario(), 10.0, depths)
    for d, v in zip(depths, values):
        assert v == pytest.approx(ex.effective_diffusivity(tabulated_scenario(), 10.0, float(d)))


def test_diagnostics_report_both_values():
    diag = ex.diagnostics(tabulated_scenario())
    assert diag["temperature_factor.override"] == "0.3808"
    assert float(diag["temperature_factor.derived"]) == pytest.approx(0.373647, rel=1e-5)
    dev = float(diag["temperature_factor.deviation_percent"])
    assert 0 < dev <= 2.5
    assert math.isclose(float(diag["carbonation_depth_mm"]), 19.0, abs_tol=0.01)
