"""Core response operations: coupling formulas, susceptibility,
reflection/transmission, photon-number solver, scalar figures of merit."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spincavity.constants import HBAR, MU_0, TWO_PI, dbm_to_watt
from spincavity.params import CavityParams, DriveParams, SpinEnsembleParams
from spincavity.response import (collective_coupling, cooperativity,
                                 dispersive_im_gamma_approx, loss_rate_from_q,
                                 photon_flux, quality_factor,
                                 reflection_coefficient, single_spin_coupling,
                                 solve_cavity_photon_number,
                                 solve_photon_number_grid,
                                 spin_susceptibility,
                                 transmission_coefficient)

OMEGA_C = TWO_PI * 2.901e9
G_EFF = TWO_PI * 0.70e6
N_SPINS = 1.4e15


def make_cavity(kappa_c0=TWO_PI * 125e3, kappa_c1=TWO_PI * 25.3e3,
                kappa_c2=TWO_PI * 33.4e3):
    return CavityParams(omega_c=OMEGA_C, kappa_c0=kappa_c0,
                        kappa_c1=kappa_c1, kappa_c2=kappa_c2)


def make_spins(g_eff=G_EFF, kappa_s=TWO_PI * 40e3, **kwargs):
    return SpinEnsembleParams(N=N_SPINS, g_s=g_eff / math.sqrt(N_SPINS),
                              kappa_s=kappa_s, **kwargs)


# ---------------------------------------------------------------- couplings

def test_collective_coupling_single_spin():
    assert collective_coupling(1.23, 1.0) == 1.23


def test_collective_coupling_empty_ensemble():
    assert collective_coupling(1.23, 0.0) == 0.0


def test_collective_coupling_inversion_roundtrip():
    # oracle: invert g_eff = g_s sqrt(N) for the published operating point
    g_s = G_EFF / math.sqrt(N_SPINS)
    assert g_s == pytest.approx(TWO_PI * 18.7e-3, rel=2e-3)
    assert collective_coupling(g_s, N_SPINS) == pytest.approx(G_EFF, rel=1e-12)


def test_single_spin_coupling_no_transverse_field():
    assert single_spin_coupling(TWO_PI * 28.024e9, 0.0, OMEGA_C, 1e-6) == 0.0


def test_single_spin_coupling_volume_scaling():
    g1 = single_spin_coupling(TWO_PI * 28.024e9, 1.0, OMEGA_C, 1e-6)
    g4 = single_spin_coupling(TWO_PI * 28.024e9, 1.0, OMEGA_C, 4e-6)
    assert g4 == pytest.approx(0.5 * g1, rel=1e-12)


def test_single_spin_coupling_consistent_mode_volume():
    # oracle: solve the closed form for V_cav at the operating g_s and
    # confirm the volume is physically plausible (cm^3 scale)
    gamma_e = TWO_PI * 28.024e9
    g_target = G_EFF / math.sqrt(N_SPINS)
    v_cav = HBAR * OMEGA_C * MU_0 * (gamma_e / (2.0 * g_target)) ** 2
    assert 1e-7 < v_cav < 1e-5  # 0.1 .. 10 cm^3
    assert single_spin_coupling(gamma_e, 1.0, OMEGA_C, v_cav) == \
        pytest.approx(g_target, rel=1e-12)


def test_single_spin_coupling_rejects_bad_volume():
    with pytest.raises(ValueError):
        single_spin_coupling(TWO_PI * 28.024e9, 1.0, OMEGA_C, 0.0)


# ----------------------------------------------------------- susceptibility

def test_susceptibility_on_resonance_linear():
    spins = make_spins()
    chi = spin_susceptibility(spins, OMEGA_C, OMEGA_C, 0.0)
    assert chi.imag == 0.0
    assert chi.real == pytest.approx(spins.g_eff**2 / (spins.kappa_s / 2),
                                     rel=1e-12)


def test_susceptibility_vanishes_without_coupling():
    spins = make_spins(g_eff=0.0)
    for det in (0.0, TWO_PI * 1e6, -TWO_PI * 5e6):
        assert spin_susceptibility(spins, OMEGA_C, OMEGA_C + det, 0.0) == 0.0


@pytest.mark.parametrize("lineshape", ["gaussian", "lorentzian", "q_gaussian"])
def test_susceptibility_narrow_distribution_limit(lineshape):
    # oracle: the closed-form delta kernel
    spins_d = make_spins()
    spins_b = spins_d.with_updates(lineshape=lineshape,
                                   kappa_s_star=1e-4 * spins_d.kappa_s)
    for det in (0.0, TWO_PI * 20e3, TWO_PI * 1e6):
        ref = spin_susceptibility(spins_d, OMEGA_C, OMEGA_C + det, 0.0)
        val = spin_susceptibility(spins_b, OMEGA_C, OMEGA_C + det, 0.0)
        assert abs(val - ref) / abs(ref) < 1e-6


def test_susceptibility_saturation_suppresses_absorption():
    spins = make_spins()
    chi0 = spin_susceptibility(spins, OMEGA_C, OMEGA_C, 0.0)
    chi_sat = spin_susceptibility(spins, OMEGA_C, OMEGA_C, 1e15)
    assert chi_sat.real < 0.01 * chi0.real


# ------------------------------------------------------ reflection and T

def test_reflection_critical_bare_cavity_nulls():
    cavity = make_cavity(kappa_c1=TWO_PI * 125e3, kappa_c2=0.0)
    spins = make_spins(g_eff=0.0)
    assert reflection_coefficient(cavity, spins, OMEGA_C, OMEGA_C, 0.0) == 0.0


def test_reflection_far_detuned_total():
    cavity = make_cavity()
    spins = make_spins(g_eff=0.0)
    g = reflection_coefficient(cavity, spins, OMEGA_C + TWO_PI * 1e12,
                               OMEGA_C, 0.0)
    assert abs(g - 1.0) < 1e-5


def test_reflection_requires_input_port():
    cavity = CavityParams(omega_c=OMEGA_C, kappa_c0=TWO_PI * 125e3)
    with pytest.raises(ValueError):
        reflection_coefficient(cavity, make_spins(), OMEGA_C, OMEGA_C, 0.0)


def test_transmission_bare_peak():
    cavity = make_cavity()
    spins = make_spins(g_eff=0.0)
    t0 = transmission_coefficient(cavity, spins, OMEGA_C, OMEGA_C, 0.0)
    expected = math.sqrt(cavity.kappa_c1 * cavity.kappa_c2) / \
        (cavity.kappa_c / 2)
    assert t0.imag == 0.0
    assert t0.real == pytest.approx(expected, rel=1e-12)
    for det in TWO_PI * np.array([50e3, -80e3, 300e3]):
        assert abs(transmission_coefficient(cavity, spins, OMEGA_C + det,
                                            OMEGA_C, 0.0)) < abs(t0)


def test_transmission_far_detuned_vanishes():
    cavity = make_cavity()
    spins = make_spins(g_eff=0.0)
    t = transmission_coefficient(cavity, spins, OMEGA_C + TWO_PI * 1e12,
                                 OMEGA_C, 0.0)
    assert abs(t) < 1e-6


def test_transmission_rejects_missing_output_port():
    cavity = make_cavity(kappa_c2=0.0)
    with pytest.raises(ValueError):
        transmission_coefficient(cavity, make_spins(), OMEGA_C, OMEGA_C, 0.0)


# --------------------------------------------------- dispersive approximation

def test_dispersive_approx_zero_crossing_and_oddness():
    assert dispersive_im_gamma_approx(G_EFF, TWO_PI * 5.24e6,
                                      TWO_PI * 250e3, 0.0) == 0.0
    plus = dispersive_im_gamma_approx(G_EFF, TWO_PI * 5.24e6, TWO_PI * 250e3,
                                      TWO_PI * 100e3)
    minus = dispersive_im_gamma_approx(G_EFF, TWO_PI * 5.24e6, TWO_PI * 250e3,
                                       -TWO_PI * 100e3)
    assert minus == -plus


def test_dispersive_approx_plugin_value():
    # oracle: direct arithmetic, 8 g^2 det / (ks*^2 kc) with the 2 pi factors
    # cancelling between numerator and denominator
    oracle = 8.0 * 0.70e6**2 * 100e3 / (5.24e6**2 * 250e3)
    val = dispersive_im_gamma_approx(G_EFF, TWO_PI * 5.24e6, TWO_PI * 250e3,
                                     TWO_PI * 100e3)
    assert val == pytest.approx(oracle, rel=1e-12)
    assert val == pytest.approx(0.057, abs=5e-4)


def test_dispersive_approx_rejects_degenerate_rates():
    with pytest.raises(ValueError):
        dispersive_im_gamma_approx(G_EFF, 0.0, TWO_PI * 250e3, 1.0)
    with pytest.raises(ValueError):
        dispersive_im_gamma_approx(G_EFF, TWO_PI * 5e6, 0.0, 1.0)


def test_dispersive_approx_matches_full_model_in_window():
    # lorentzian inhomogeneous line, homogeneous core saturated but power
    # broadening below the inhomogeneous width
    ks_star = TWO_PI * 5e6
    spins = make_spins(kappa_s=TWO_PI * 1e3, lineshape="lorentzian",
                       kappa_s_star=ks_star, kappa_op=TWO_PI * 5e3)
    cavity = make_cavity(kappa_c1=TWO_PI * 125e3, kappa_c2=0.0)
    n_hi = spins.kappa_op * ks_star / (2.0 * spins.g_s**2)
    for n_cav in (0.3 * n_hi, n_hi):
        for frac in (-1.0, -0.4, 0.25, 1.0):
            det_s = ks_star / 20 * frac
            gamma = reflection_coefficient(cavity, spins, OMEGA_C,
                                           OMEGA_C + det_s, n_cav)
            approx = dispersive_im_gamma_approx(spins.g_eff, ks_star,
                                                cavity.kappa_c, -det_s)
            assert abs(gamma.imag - approx) / abs(approx) < 0.10


# ------------------------------------------------------------- cooperativity

def test_cooperativity_quadratic_in_coupling():
    base = cooperativity(G_EFF, TWO_PI * 5.24e6, TWO_PI * 200e3)
    assert cooperativity(2 * G_EFF, TWO_PI * 5.24e6, TWO_PI * 200e3) == \
        pytest.approx(4 * base, rel=1e-12)


def test_cooperativity_operating_points():
    xi_loaded = cooperativity(G_EFF, TWO_PI * 5.24e6, TWO_PI * 200e3)
    assert xi_loaded == pytest.approx(1.87, abs=5e-3)
    assert abs(xi_loaded - 1.8) / 1.8 < 0.10
    xi_unloaded = cooperativity(G_EFF, TWO_PI * 5.24e6, TWO_PI * 125e3)
    assert xi_unloaded == pytest.approx(2.99, abs=5e-3)
    assert abs(xi_unloaded - 2.8) / 2.8 < 0.10


# ------------------------------------------------------------- photon number

def test_photon_number_bare_closed_form():
    cavity = make_cavity()
    spins = make_spins(g_eff=0.0)
    drive = DriveParams(omega_d=OMEGA_C, power_in=1e-6)
    n = solve_cavity_photon_number(cavity, spins, drive, OMEGA_C)
    oracle = cavity.kappa_c1 * (1e-6 / (HBAR * OMEGA_C)) / \
        (cavity.kappa_c / 2) ** 2
    assert abs(n - oracle) / oracle < 1e-9


def test_photon_number_zero_power():
    drive = DriveParams(omega_d=OMEGA_C, power_in=0.0)
    assert solve_cavity_photon_number(make_cavity(), make_spins(), drive,
                                      OMEGA_C) == 0.0


def test_photon_number_monotonic_in_power():
    # oracle: dense 60 dB power sweep
    cavity = make_cavity(kappa_c1=TWO_PI * 125e3, kappa_c2=0.0)
    spins = make_spins()
    powers = np.logspace(-9, -3, 61)
    ns = [solve_cavity_photon_number(
        cavity, spins, DriveParams(omega_d=OMEGA_C, power_in=p), OMEGA_C)
        for p in powers]
    assert np.all(np.diff(ns) > 0)


def test_photon_number_grid_matches_scalar():
    cavity = make_cavity()
    spins = make_spins()
    omd = OMEGA_C + TWO_PI * np.array([-200e3, 0.0, 350e3])
    oms = np.full(3, OMEGA_C)
    grid = solve_photon_number_grid(cavity, spins, 1e-8, omd, oms)
    for k in range(3):
        drive = DriveParams(omega_d=omd[k], power_in=1e-8)
        assert grid[k] == pytest.approx(
            solve_cavity_photon_number(cavity, spins, drive, oms[k]),
            rel=1e-9)


# -------------------------------------------------------- scalar conversions

def test_photon_flux_trivials():
    assert photon_flux(0.0, OMEGA_C) == 0.0
    assert photon_flux(2e-3, OMEGA_C) == pytest.approx(
        2 * photon_flux(1e-3, OMEGA_C), rel=1e-12)


def test_photon_flux_operating_point():
    flux = photon_flux(dbm_to_watt(-2.4), OMEGA_C)
    assert abs(flux - 3.0e20) / 3.0e20 < 0.02


def test_quality_factor_conversions():
    kc = loss_rate_from_q(OMEGA_C, 14500.0)
    assert abs(kc - TWO_PI * 200e3) / (TWO_PI * 200e3) < 0.01
    kc0 = loss_rate_from_q(OMEGA_C, 22000.0)
    assert abs(kc0 - TWO_PI * 125e3) / (TWO_PI * 125e3) < 0.06
    # round trip at machine precision
    kappa = TWO_PI * 183.7e3
    back = loss_rate_from_q(OMEGA_C, quality_factor(OMEGA_C, kappa))
    assert abs(back - kappa) / kappa < 1e-15


# ------------------------------------------------------ invariant properties

rate6 = st.floats(min_value=-3.0, max_value=3.0)  # log10 around 100 kHz
detuning = st.floats(min_value=-50e6, max_value=50e6)


@settings(max_examples=60, deadline=None)
@given(k0=rate6, k1=rate6, k2=rate6, g=st.floats(min_value=0, max_value=3e6),
       ks=rate6, dd=detuning, ds=detuning,
       n=st.floats(min_value=0, max_value=1e12))
def test_passivity(k0, k1, k2, g, ks, dd, ds, n):
    cavity = CavityParams(omega_c=OMEGA_C, kappa_c0=TWO_PI * 100e3 * 10**k0,
                          kappa_c1=TWO_PI * 100e3 * 10**k1,
                          kappa_c2=TWO_PI * 100e3 * 10**k2)
    spins = SpinEnsembleParams(N=N_SPINS, g_s=TWO_PI * g / math.sqrt(N_SPINS),
                               kappa_s=TWO_PI * 100e3 * 10**ks)
    gamma = reflection_coefficient(cavity, spins, OMEGA_C + TWO_PI * dd,
                                   OMEGA_C + TWO_PI * ds, n)
    t = transmission_coefficient(cavity, spins, OMEGA_C + TWO_PI * dd,
                                 OMEGA_C + TWO_PI * ds, n)
    assert abs(gamma) <= 1.0 + 1e-9
    assert abs(gamma) ** 2 + abs(t) ** 2 <= 1.0 + 1e-9


@settings(max_examples=60, deadline=None)
@given(dd=detuning, ds=detuning, n=st.floats(min_value=0, max_value=1e10))
def test_hermitian_symmetry(dd, ds, n):
    cavity = make_cavity()
    spins = make_spins()
    plus = reflection_coefficient(cavity, spins, OMEGA_C + TWO_PI * dd,
                                  OMEGA_C + TWO_PI * ds, n)
    minus = reflection_coefficient(cavity, spins, OMEGA_C - TWO_PI * dd,
                                   OMEGA_C - TWO_PI * ds, n)
    assert minus == pytest.approx(plus.conjugate(), rel=1e-12, abs=1e-15)
