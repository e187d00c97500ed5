import dataclasses
import json
import math

import numpy as np
import pytest
import scipy.constants as const

from slotbragg import photonics, tmm
from slotbragg.errors import (
    EvaluationError,
    InconsistentLossError,
    InvalidCalibrationError,
    InvalidInputError,
)


# ---------------------------------------------------------------------------
# geometry and stack construction


def test_geometry_validation():
    with pytest.raises(InvalidInputError):
        photonics.preset_geometry("rt_benchmark", periods=3,
                                  corrugation_widths_nm=(100.0, 100.0))
    with pytest.raises(InvalidInputError):
        photonics.preset_geometry("rt_benchmark", slot_width_nm=-5.0)


def test_build_stack_zero_slope_is_uniform(benchmark_geometry):
    model = photonics.IndexModel(n_slot_mode=1.7, slope_per_nm=0.0)
    stack = photonics.build_stack(benchmark_geometry, model)
    assert np.all(stack.indices == 1.7)


def test_build_stack_single_period_layout():
    geo = photonics.preset_geometry("rt_benchmark", periods=1)
    model = photonics.default_index_model()
    stack = photonics.build_stack(geo, model)
    assert len(stack.indices) == 5  # 2 mirror + 1 cavity + 2 mirror segments


def test_build_stack_is_palindromic(benchmark_geometry, index_model):
    rng = np.random.default_rng(0)
    geo = dataclasses.replace(
        benchmark_geometry,
        corrugation_widths_nm=tuple(rng.uniform(50, 150, 20)))
    stack = photonics.build_stack(geo, index_model)
    assert np.array_equal(stack.indices, stack.indices[::-1])
    assert np.array_equal(stack.thicknesses_nm, stack.thicknesses_nm[::-1])
    expected = 2 * geo.periods * geo.period_nm + geo.cavity_length_nm
    assert stack.total_length_nm == pytest.approx(expected)


def test_build_stack_rejects_unphysical_index(benchmark_geometry):
    model = photonics.IndexModel(n_slot_mode=1.05, slope_per_nm=-0.01)
    with pytest.raises(InvalidCalibrationError):
        photonics.build_stack(benchmark_geometry, model)


# ---------------------------------------------------------------------------
# mode volume


def test_mode_volume_uniform_field_identity(index_model):
    z = np.linspace(0.0, 1000.0, 2001)
    profile = tmm.FieldProfile(z_nm=z, eps_e2=np.full_like(z, 2.89),
                               lambda_nm=800.0)
    v = photonics.mode_volume(profile, index_model, slot_width_nm=20.0)
    unit = (800.0 / (2 * index_model.n_slot_mode)) ** 3
    expected = index_model.effective_area_nm2(20.0) * 1000.0 / unit
    assert v == pytest.approx(expected, rel=1e-9)


def test_mode_volume_peaked_field_below_uniform_bound(index_model):
    z = np.linspace(0.0, 1000.0, 4001)
    peaked = np.exp(-((z - 500.0) / 30.0) ** 2)
    profile = tmm.FieldProfile(z_nm=z, eps_e2=peaked, lambda_nm=800.0)
    v = photonics.mode_volume(profile, index_model, 20.0)
    unit = (800.0 / (2 * index_model.n_slot_mode)) ** 3
    bound = index_model.effective_area_nm2(20.0) * 1000.0 / unit
    assert v < bound
    # energy-equivalent width of a gaussian is sqrt(pi) * sigma
    expected = (index_model.effective_area_nm2(20.0)
                * math.sqrt(math.pi) * 30.0 / unit)
    assert v == pytest.approx(expected, rel=1e-4)


def test_mode_volume_never_exceeds_stack_volume(benchmark_geometry,
                                                benchmark_emitter, index_model):
    stack = photonics.build_stack(benchmark_geometry, index_model)
    res = photonics.cavity_resonance(benchmark_geometry, index_model)
    profile = tmm.field_profile(stack, res.lambda0_nm)
    v = photonics.mode_volume(profile, index_model,
                              benchmark_geometry.slot_width_nm)
    unit = (res.lambda0_nm / (2 * index_model.n_slot_mode)) ** 3
    bound = (index_model.effective_area_nm2(benchmark_geometry.slot_width_nm)
             * stack.total_length_nm / unit)
    assert 0 < v <= bound


# ---------------------------------------------------------------------------
# rates and figures


def test_coupling_g_square_root_volume_scaling():
    em = photonics.emitter_preset("ingaas")
    g1 = photonics.coupling_g(em, 4e-3, 915.0, 2.0)
    g2 = photonics.coupling_g(em, 1e-3, 915.0, 2.0)
    assert g2 == pytest.approx(2.0 * g1, rel=1e-12)


def test_coupling_g_oscillator_strength_scaling():
    base = photonics.emitter_preset("gaas")
    quad = dataclasses.replace(base, oscillator_strength=4.0)
    g1 = photonics.coupling_g(base, 1e-3, 916.0, 2.0)
    g2 = photonics.coupling_g(quad, 1e-3, 916.0, 2.0)
    assert g2 == pytest.approx(2.0 * g1, rel=1e-12)


def test_coupling_g_frozen_constants_oracle():
    # independent arithmetic: mu = sqrt(3 hbar e^2 f / (2 m omega)),
    # g = mu/hbar sqrt(hbar omega / (2 eps0 V)), V = 1e-3 (915nm / 4)^3,
    # divided by gamma = 1e9 -> 31576.6105149519 (checked by hand once)
    em = photonics.EmitterSpec(name="oracle", wavelength_nm=915.0,
                               oscillator_strength=5.0,
                               gammastar_over_gamma=0.0,
                               radiative_rate_hz=1e9)
    g = photonics.coupling_g(em, 1e-3, 915.0, 2.0)
    assert g == pytest.approx(31576.6105149519, rel=1e-10)


def test_cavity_kappa_reciprocal_in_q():
    em = photonics.emitter_preset("tmdc")
    k1 = photonics.cavity_kappa(728.0, 100.0, em)
    k2 = photonics.cavity_kappa(728.0, 200.0, em)
    assert k1 == pytest.approx(2.0 * k2, rel=1e-12)
    assert photonics.cavity_kappa(728.0, 1e12, em) < 1e-3 * k1


def test_cavity_kappa_frozen_constants_oracle():
    # omega = 2 pi c / 801 nm, kappa = omega / (2 * 50), gamma = 1e9
    em = photonics.EmitterSpec(name="oracle", wavelength_nm=801.0,
                               oscillator_strength=1.0,
                               gammastar_over_gamma=0.0,
                               radiative_rate_hz=1e9)
    k = photonics.cavity_kappa(801.0, 50.0, em)
    assert k == pytest.approx(23516.2492797610, rel=1e-10)
    omega = 2 * math.pi * const.c / 801e-9
    assert k == pytest.approx(omega / 100.0 / 1e9, rel=1e-12)


def test_purcell_factor_unit_case():
    assert photonics.purcell_factor(1.0, 1.0) == pytest.approx(6 / math.pi ** 2)


def test_beta_factor_limits():
    assert photonics.beta_factor(100.0, math.inf) == 1.0
    assert photonics.beta_factor(100.0, 200.0) == pytest.approx(0.5)
    with pytest.raises(InconsistentLossError):
        photonics.beta_factor(200.0, 100.0)


# ---------------------------------------------------------------------------
# full pipeline


def test_baseline_indistinguishability_band(benchmark_geometry,
                                            benchmark_emitter, index_model):
    figs = photonics.evaluate_geometry(benchmark_geometry, benchmark_emitter,
                                       index_model)
    assert 0.7 <= figs.indist <= 0.95
    assert figs.veff_norm == pytest.approx(7e-3, rel=0.2)
    assert 0.0 <= figs.beta <= 1.0


def test_slot_width_monotonicity(benchmark_geometry, benchmark_emitter,
                                 index_model):
    narrow = photonics.evaluate_geometry(
        dataclasses.replace(benchmark_geometry, slot_width_nm=20.0),
        benchmark_emitter, index_model)
    wide = photonics.evaluate_geometry(
        dataclasses.replace(benchmark_geometry, slot_width_nm=40.0),
        benchmark_emitter, index_model)
    assert wide.indist < narrow.indist


def test_deep_mirror_kills_indistinguishability(benchmark_emitter, index_model):
    few = photonics.evaluate_geometry(
        photonics.preset_geometry("rt_benchmark", slot_width_nm=15.0, periods=10),
        benchmark_emitter, index_model)
    many = photonics.evaluate_geometry(
        photonics.preset_geometry("rt_benchmark", slot_width_nm=15.0, periods=100),
        benchmark_emitter, index_model)
    assert many.indist < few.indist
    assert many.q > 100 * few.q


def test_evaluate_geometry_is_deterministic(benchmark_geometry,
                                            benchmark_emitter, index_model):
    a = photonics.evaluate_geometry(benchmark_geometry, benchmark_emitter,
                                    index_model)
    b = photonics.evaluate_geometry(benchmark_geometry, benchmark_emitter,
                                    index_model)
    assert a == b


def test_coupling_volume_product_invariant(benchmark_geometry,
                                           benchmark_emitter, index_model):
    rng = np.random.default_rng(7)
    products = []
    lam0 = None
    for _ in range(3):
        geo = dataclasses.replace(
            benchmark_geometry,
            corrugation_widths_nm=tuple(rng.uniform(80, 120, 20)))
        figs = photonics.evaluate_geometry(geo, benchmark_emitter, index_model)
        # remove the resonance-wavelength dependence before comparing
        v_m3 = figs.veff_norm * (figs.lambda0_nm * 1e-9
                                 / (2 * index_model.n_slot_mode)) ** 3
        products.append(figs.g_over_gamma * math.sqrt(v_m3))
    assert np.ptp(products) / products[0] < 1e-10


def test_evaluate_geometry_names_failing_stage(benchmark_geometry,
                                               benchmark_emitter, index_model):
    # a one-period mirror has no stopband to search
    geo = photonics.preset_geometry("rt_benchmark", periods=1)
    with pytest.raises(EvaluationError) as err:
        photonics.evaluate_geometry(geo, benchmark_emitter, index_model)
    assert err.value.stage == "find_resonance"


# ---------------------------------------------------------------------------
# presets and interchange


def test_emitter_presets_match_catalog():
    ingaas = photonics.emitter_preset("ingaas")
    assert (ingaas.wavelength_nm, ingaas.gammastar_over_gamma,
            ingaas.oscillator_strength) == (915.0, 600.0, 5.0)
    gaas = photonics.emitter_preset("gaas")
    assert (gaas.wavelength_nm, gaas.gammastar_over_gamma,
            gaas.oscillator_strength) == (916.0, 1450.0, 1.0)
    tmdc = photonics.emitter_preset("tmdc")
    assert (tmdc.wavelength_nm, tmdc.gammastar_over_gamma,
            tmdc.oscillator_strength) == (728.0, 1e4, 0.1)
    diamond = photonics.emitter_preset("diamond")
    assert (diamond.wavelength_nm, diamond.gammastar_over_gamma,
            diamond.oscillator_strength) == (685.0, 1e3, 5.0)


def test_molecule_preset_requires_oscillator_strength():
    with pytest.raises(InvalidInputError):
        photonics.emitter_preset("molecules")
    em = photonics.emitter_preset("molecules", oscillator_strength=2.0)
    assert em.wavelength_nm == 785.0 and em.gammastar_over_gamma == 1e4


def test_geometry_json_round_trip(benchmark_geometry):
    text = photonics.geometry_to_json(benchmark_geometry)
    assert photonics.geometry_from_json(text) == benchmark_geometry


def test_geometry_json_rejects_unknown_fields(benchmark_geometry):
    doc = json.loads(photonics.geometry_to_json(benchmark_geometry))
    doc["color"] = "red"
    with pytest.raises(InvalidInputError):
        photonics.geometry_from_json(json.dumps(doc))


def test_emitter_json_round_trip(benchmark_emitter):
    text = photonics.emitter_to_json(benchmark_emitter)
    assert photonics.emitter_from_json(text) == benchmark_emitter
    doc = json.loads(text)
    doc["temperature"] = 300
    with pytest.raises(InvalidInputError):
        photonics.emitter_from_json(json.dumps(doc))


# ---------------------------------------------------------------------------
# calibration


@pytest.fixture(scope="module")
def calibrated():
    return photonics.calibrate_index_model()


def test_calibration_hits_q_anchor(calibrated):
    geo = photonics.preset_geometry("rt_benchmark", periods=10)
    res = photonics.cavity_resonance(geo, calibrated)
    assert abs(res.q - 50.0) / 50.0 < 0.10


def test_calibration_hits_mode_volume_anchor(calibrated, benchmark_geometry):
    stack = photonics.build_stack(benchmark_geometry, calibrated)
    res = photonics.cavity_resonance(benchmark_geometry, calibrated)
    profile = tmm.field_profile(stack, res.lambda0_nm)
    v = photonics.mode_volume(profile, calibrated, 20.0)
    assert abs(v - 7e-3) / 7e-3 < 0.10


def test_calibration_matches_frozen_default(calibrated, index_model):
    assert calibrated.n_slot_mode == index_model.n_slot_mode
    assert calibrated.slope_per_nm == pytest.approx(index_model.slope_per_nm,
                                                    rel=1e-3)
    assert calibrated.area_nm2 == pytest.approx(index_model.area_nm2, rel=1e-2)


def test_q_grows_exponentially_with_periods(calibrated):
    qs = []
    periods = (10, 20, 30, 40, 50, 60)
    for p in periods:
        geo = photonics.preset_geometry("rt_benchmark", periods=p)
        qs.append(photonics.cavity_resonance(geo, calibrated).q)
    assert np.all(np.diff(qs) > 0)
    lq = np.log(qs)
    A = np.vstack([periods, np.ones(len(periods))]).T
    coef, *_ = np.linalg.lstsq(A, lq, rcond=None)
    r2 = 1 - np.sum((lq - A @ coef) ** 2) / np.sum((lq - lq.mean()) ** 2)
    assert r2 > 0.99
