"""Sweep grids, branch extraction, field scans, linewidths, contrast."""

import math

import numpy as np
import pytest

from spincavity.constants import TWO_PI, dbm_to_watt
from spincavity.gridio import load_grid, save_grid
from spincavity.magnetometer import bias_for_resonance
from spincavity.params import CavityParams, FieldConfig, SpinEnsembleParams
from spincavity.reference import (bias_field_config, narrowing_cavity,
                                  narrowing_spins, strong_coupling_axes,
                                  strong_coupling_cavity,
                                  strong_coupling_spins)
from spincavity.response import (reflection_coefficient,
                                 transmission_coefficient)
from spincavity.sweep import (ResonanceTrace, TraceShapeError,
                              UnresolvedSplittingError,
                              avoided_crossing_splitting, contrast,
                              extract_fwhm, magnetic_resonance_scan,
                              normalize_unity, odmr_scan, sweep_2d)

OMEGA_C = TWO_PI * 2.901e9
LOW_POWER = dbm_to_watt(-56.0)


def small_grid(n_drive=21, n_spin=11, **sweep_kwargs):
    cavity = strong_coupling_cavity()
    spins = strong_coupling_spins()
    drive = OMEGA_C + TWO_PI * np.linspace(-800e3, 800e3, n_drive)
    spin_ax = OMEGA_C + TWO_PI * np.linspace(-2e6, 2e6, n_spin)
    return sweep_2d(cavity, spins, drive, spin_ax, power=LOW_POWER,
                    **sweep_kwargs), cavity, spins


# -------------------------------------------------------------------- grids

def test_degenerate_grid_matches_direct_calls():
    cavity = strong_coupling_cavity()
    spins = strong_coupling_spins()
    wd, ws = OMEGA_C + TWO_PI * 120e3, OMEGA_C - TWO_PI * 700e3
    grid = sweep_2d(cavity, spins, [wd], [ws], n_cav_mode="fixed",
                    n_cav_fixed=5.0)
    assert grid.gamma[0, 0] == pytest.approx(
        reflection_coefficient(cavity, spins, wd, ws, 5.0), rel=1e-14)
    assert grid.t[0, 0] == pytest.approx(
        transmission_coefficient(cavity, spins, wd, ws, 5.0), rel=1e-14)


def test_grid_deterministic():
    g1, *_ = small_grid(n_drive=9, n_spin=7)
    g2, *_ = small_grid(n_drive=9, n_spin=7)
    assert np.array_equal(g1.gamma, g2.gamma)
    assert np.array_equal(g1.t, g2.t)
    assert np.array_equal(g1.n_cav, g2.n_cav)


def test_grid_invariant_under_evaluation_order():
    # oracle: per-cell evaluation in shuffled order
    grid, cavity, spins = small_grid(n_drive=9, n_spin=7,
                                     n_cav_mode="fixed", n_cav_fixed=3.0)
    cells = [(i, j) for i in range(9) for j in range(7)]
    rng = np.random.default_rng(7)
    rng.shuffle(cells)
    redone = np.empty_like(grid.gamma)
    for i, j in cells:
        redone[i, j] = reflection_coefficient(
            cavity, spins, grid.drive_axis[i], grid.spin_axis[j], 3.0)
    assert np.allclose(redone, grid.gamma, rtol=1e-14, atol=0.0)


def test_grid_rejects_non_monotonic_axis():
    cavity = strong_coupling_cavity()
    spins = strong_coupling_spins()
    with pytest.raises(ValueError):
        sweep_2d(cavity, spins, [OMEGA_C, OMEGA_C - 1.0, OMEGA_C + 1.0],
                 [OMEGA_C], n_cav_mode="fixed")


# ------------------------------------------------------------- normalization

def test_normalize_unity_max_is_one():
    grid, *_ = small_grid(n_cav_mode="fixed")
    normed = normalize_unity(grid, "reflection")
    assert float(np.max(normed.power("reflection"))) == 1.0


def test_normalize_unity_records_scale():
    grid, *_ = small_grid(n_cav_mode="fixed")
    # oracle: direct max scan of the raw power map
    raw_max = float(np.max(np.abs(grid.gamma) ** 2))
    normed = normalize_unity(grid, "reflection")
    assert normed.norm_scale["reflection"] == raw_max


def test_normalize_unity_idempotent():
    grid, *_ = small_grid(n_cav_mode="fixed")
    once = normalize_unity(grid, "reflection")
    twice = normalize_unity(once, "reflection")
    assert twice.norm_scale == once.norm_scale
    assert np.array_equal(twice.power("reflection"),
                          once.power("reflection"))


def test_normalize_rejects_zero_map():
    grid, *_ = small_grid(n_cav_mode="fixed")
    grid.t[:] = 0.0
    with pytest.raises(ValueError):
        normalize_unity(grid, "transmission")


# ---------------------------------------------------------- branch splitting

def test_splitting_at_operating_point():
    drive, spin_ax = strong_coupling_axes()
    grid = sweep_2d(strong_coupling_cavity(), strong_coupling_spins(),
                    drive, spin_ax, power=LOW_POWER)
    split = avoided_crossing_splitting(grid)
    g_eff = strong_coupling_spins().g_eff
    assert abs(split - 2 * g_eff) / (2 * g_eff) < 0.05
    # reflection dips resolve the same gap
    split_r = avoided_crossing_splitting(grid, use="reflection")
    assert abs(split_r - 2 * g_eff) / (2 * g_eff) < 0.05


def test_splitting_unresolved_without_coupling():
    cavity = strong_coupling_cavity()
    spins = strong_coupling_spins().with_updates(N=0.0)
    drive = OMEGA_C + TWO_PI * np.linspace(-800e3, 800e3, 81)
    spin_ax = OMEGA_C + TWO_PI * np.linspace(-2e6, 2e6, 21)
    grid = sweep_2d(cavity, spins, drive, spin_ax, n_cav_mode="fixed")
    with pytest.raises(UnresolvedSplittingError):
        avoided_crossing_splitting(grid)


def test_splitting_grows_with_sqrt_n():
    # oracle: dense sweep over a decade of N; splitting tracks 2 g_s sqrt(N)
    cavity = strong_coupling_cavity()
    base = strong_coupling_spins()
    drive = OMEGA_C + TWO_PI * np.linspace(-800e3, 800e3, 161)
    spin_ax = OMEGA_C + TWO_PI * np.linspace(-1e6, 1e6, 21)
    splits = []
    for n in np.logspace(math.log10(base.N / 10), math.log10(base.N), 6):
        spins = base.with_updates(N=n)
        grid = sweep_2d(cavity, spins, drive, spin_ax, n_cav_mode="fixed")
        splits.append(avoided_crossing_splitting(grid))
    assert np.all(np.diff(splits) > 0)
    ratio = splits[-1] / splits[0]
    assert ratio == pytest.approx(math.sqrt(10.0), rel=0.05)


def test_grid_refinement_stability():
    cavity = strong_coupling_cavity()
    spins = strong_coupling_spins()
    spin_ax = OMEGA_C + TWO_PI * np.linspace(-1e6, 1e6, 41)
    vals = []
    for n_drive in (161, 321):  # step 10 kHz, then halved
        drive = OMEGA_C + TWO_PI * np.linspace(-800e3, 800e3, n_drive)
        grid = sweep_2d(cavity, spins, drive, spin_ax, n_cav_mode="fixed")
        vals.append(avoided_crossing_splitting(grid))
    assert abs(vals[1] - vals[0]) / vals[0] < 0.01


# ----------------------------------------------------------------- field scan

def test_field_scan_extremum_at_center():
    cavity = narrowing_cavity()
    spins = narrowing_spins()
    field = bias_field_config()
    b0 = bias_for_resonance(cavity, spins, field)
    axis = b0 + np.linspace(-10e-4, 10e-4, 801)
    trace = magnetic_resonance_scan(cavity, spins, field, LOW_POWER, axis,
                                    n_cav_mode="fixed")
    assert abs(int(np.argmax(trace.values)) - 400) <= 1


def test_field_scan_symmetry_about_resonance():
    cavity = narrowing_cavity()
    spins = narrowing_spins()
    field = bias_field_config()
    b0 = bias_for_resonance(cavity, spins, field)
    axis = b0 + np.linspace(-8e-4, 8e-4, 257)
    trace = magnetic_resonance_scan(cavity, spins, field, LOW_POWER, axis,
                                    n_cav_mode="fixed")
    assert np.allclose(trace.values, trace.values[::-1], rtol=1e-9)


def test_field_scan_narrowing_ratio():
    cavity = narrowing_cavity()
    spins = narrowing_spins()
    field = bias_field_config()
    b0 = bias_for_resonance(cavity, spins, field)
    axis = b0 + np.linspace(-12e-4, 12e-4, 2001)
    trace = magnetic_resonance_scan(cavity, spins, field, LOW_POWER, axis,
                                    n_cav_mode="fixed")
    slope = spins.gamma_e * field.projection
    fwhm_cavity = extract_fwhm(trace) * slope
    odmr_axis = np.linspace(-TWO_PI * 150e6, TWO_PI * 150e6, 30001)
    fwhm_odmr = extract_fwhm(odmr_scan(0.05, TWO_PI * 8.5e6, 0.0, odmr_axis))
    assert abs(fwhm_odmr / fwhm_cavity - 2.0) < 0.3


def test_field_scan_narrowing_turns_off_at_low_cooperativity():
    # oracle: parameter sweep; the readout width approaches the spin width
    # from above as the cooperativity vanishes
    field = FieldConfig(B_perm=bias_field_config().B_perm, coil_range=0.02)
    widths = []
    for g_eff_hz in (5e3, 350e3):
        cavity = narrowing_cavity()
        spins = narrowing_spins().with_g_eff(TWO_PI * g_eff_hz)
        b0 = bias_for_resonance(cavity, spins, field)
        axis = b0 + np.linspace(-25e-4, 25e-4, 4001)
        trace = magnetic_resonance_scan(cavity, spins, field, LOW_POWER,
                                        axis, n_cav_mode="fixed")
        widths.append(extract_fwhm(trace) * spins.gamma_e * field.projection)
    assert widths[0] == pytest.approx(narrowing_spins().kappa_s, rel=0.03)
    assert widths[1] > 1.5 * widths[0]


# ----------------------------------------------------------------------- odmr

def test_odmr_flat_without_contrast():
    axis = np.linspace(-TWO_PI * 20e6, TWO_PI * 20e6, 101)
    trace = odmr_scan(0.0, TWO_PI * 8.5e6, 0.0, axis)
    assert np.all(trace.values == 1.0)


def test_odmr_minimum_at_center():
    axis = np.linspace(-TWO_PI * 20e6, TWO_PI * 20e6, 101)
    trace = odmr_scan(0.05, TWO_PI * 8.5e6, 0.0, axis)
    assert float(np.min(trace.values)) == pytest.approx(0.95, abs=1e-12)
    assert int(np.argmin(trace.values)) == 50


def test_odmr_operating_linewidth():
    axis = np.linspace(-TWO_PI * 300e6, TWO_PI * 300e6, 60001)
    trace = odmr_scan(0.05, TWO_PI * 8.5e6, 0.0, axis)
    assert extract_fwhm(trace) == pytest.approx(TWO_PI * 8.5e6, rel=1e-3)


# ----------------------------------------------------------------- linewidths

def test_fwhm_analytic_lorentzian():
    w = 2.0
    axis = np.linspace(-30 * w, 30 * w, 40001)
    values = (w / 2) ** 2 / (axis**2 + (w / 2) ** 2)
    trace = ResonanceTrace(axis=axis, values=values, kind="reflected_power")
    assert extract_fwhm(trace) == pytest.approx(w, rel=1e-3)


def test_fwhm_invariant_under_vertical_scaling():
    # oracle: rescale and recompute
    w = 2.0
    axis = np.linspace(-30 * w, 30 * w, 4001)
    values = (w / 2) ** 2 / (axis**2 + (w / 2) ** 2)
    t1 = ResonanceTrace(axis=axis, values=values, kind="reflected_power")
    t2 = ResonanceTrace(axis=axis, values=7.5 * values,
                        kind="reflected_power")
    assert extract_fwhm(t2) == pytest.approx(extract_fwhm(t1), rel=1e-12)


def test_fwhm_boundary_extremum_fails():
    axis = np.linspace(0.0, 10.0, 101)
    trace = ResonanceTrace(axis=axis, values=np.exp(-axis),
                           kind="reflected_power")
    with pytest.raises(TraceShapeError):
        extract_fwhm(trace)


def test_fwhm_missing_crossing_fails():
    # interior peak whose left half-crossing lies outside the window
    axis = np.linspace(-0.4, 6.0, 321)
    values = 1.0 / (axis**2 + 1.0)
    with pytest.raises(TraceShapeError):
        extract_fwhm(ResonanceTrace(axis=axis, values=values,
                                    kind="reflected_power"))


# ------------------------------------------------------------------- contrast

def test_contrast_full_span():
    trace = ResonanceTrace(axis=np.linspace(0, 1, 11),
                           values=np.linspace(0.0, 3.0, 11),
                           kind="reflected_power")
    assert contrast(trace) == 1.0


def test_contrast_constant_trace():
    trace = ResonanceTrace(axis=np.linspace(0, 1, 11),
                           values=np.full(11, 2.0), kind="reflected_power")
    assert contrast(trace) == 0.0


def test_contrast_rejects_nonpositive_maximum():
    trace = ResonanceTrace(axis=np.linspace(0, 1, 5),
                           values=np.array([-1.0, -2.0, -1.5, -2.5, -1.0]),
                           kind="reflected_power")
    with pytest.raises(ValueError):
        contrast(trace)


# ------------------------------------------------------------------- file I/O

def test_grid_round_trip_bit_exact(tmp_path):
    grid, *_ = small_grid(n_drive=7, n_spin=5)
    save_grid(grid, tmp_path / "grid")
    back = load_grid(tmp_path / "grid")
    assert np.array_equal(back.drive_axis, grid.drive_axis)
    assert np.array_equal(back.spin_axis, grid.spin_axis)
    assert np.array_equal(back.gamma, grid.gamma)
    assert np.array_equal(back.t, grid.t)
    assert np.array_equal(back.n_cav, grid.n_cav)
    assert back.norm_scale == grid.norm_scale
