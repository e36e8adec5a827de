"""Magnetometer chain: bias-field mapping, IQ demodulation of the
reflected microwaves, simulated readout time series, spectral
estimation, and the per-source noise budget in T/sqrt(Hz).
"""

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.signal import welch
from scipy.signal.windows import hann

from .constants import K_B, Z0_OHM
from .response import ConvergenceError, photon_flux, reflection_coefficient


def field_to_spin_frequency(field_cfg, spin):
    """Zeeman-shifted |0> <-> |+1> transition frequency, rad/s."""
    b_total = field_cfg.B_perm + field_cfg.B_coil
    return spin.D + spin.gamma_e * field_cfg.projection * b_total


def bias_for_resonance(cavity, spin, field_cfg):
    """Coil field (tesla) that tunes the spin transition onto the cavity."""
    slope = spin.gamma_e * field_cfg.projection
    return (cavity.omega_c - spin.D) / slope - field_cfg.B_perm


def iq_demodulate(gamma, v_in, lo_phase=0.0, gain=1.0):
    """(I, Q) voltages from the reflected field against a phase reference."""
    if v_in < 0:
        raise ValueError("v_in must be non-negative")
    z = gamma * v_in * gain * cmath.exp(1j * lo_phase)
    return z.real, z.imag


def incident_voltage(power, impedance=Z0_OHM):
    """RMS voltage of a travelling wave of the given power."""
    if power < 0:
        raise ValueError("power must be non-negative")
    return math.sqrt(power * impedance)


def calibrate_lo_phase(cavity, spin, n_cav=0.0, omega_d=None):
    """Local-oscillator phase that zeroes the Q channel at omega_s = omega_c.

    Solved by scalar root finding to 1e-10 rad. For a reflection-nulled
    (critically matched) operating point the center response vanishes, so
    the calibration instead rotates the dispersive slope dGamma/d omega_s
    fully into the Q channel.
    """
    if omega_d is None:
        omega_d = cavity.omega_c
    g_center = reflection_coefficient(cavity, spin, omega_d, cavity.omega_c,
                                      n_cav)
    if abs(g_center) > 1e-9:
        target = g_center
        phi0 = -cmath.phase(target)
    else:
        step = max(spin.effective_kappa_s_star, spin.kappa_s) / 1e3
        slope = (reflection_coefficient(cavity, spin, omega_d,
                                        cavity.omega_c + step, n_cav)
                 - reflection_coefficient(cavity, spin, omega_d,
                                          cavity.omega_c - step, n_cav)) \
            / (2.0 * step)
        # zero Re[slope e^{i phi}] so the odd response lands in Q
        target = slope * 1j
        phi0 = -cmath.phase(target)

    def f(phi):
        return (target * cmath.exp(1j * phi)).imag

    lo, hi = phi0 - 0.5, phi0 + 0.5
    if f(lo) * f(hi) > 0:
        raise ConvergenceError("LO-phase root not bracketed")
    phi = brentq(f, lo, hi, xtol=1e-12)
    # fold into (-pi, pi]
    return math.atan2(math.sin(phi), math.cos(phi))


def responsivity(cavity, spin, field_cfg, power, gain=1.0, n_cav=0.0,
                 lo_phase=None):
    """Small-signal Q-channel slope dQ/dB at the resonant bias, V/T.

    Central difference with a frequency step of (kappa_s_star or
    kappa_s)/1000 mapped to field through the Zeeman slope.
    """
    if lo_phase is None:
        lo_phase = calibrate_lo_phase(cavity, spin, n_cav=n_cav)
    v_in = incident_voltage(power)
    slope_b = spin.gamma_e * field_cfg.projection
    step_omega = max(spin.effective_kappa_s_star, spin.kappa_s) / 1e3
    db = step_omega / slope_b
    b0 = bias_for_resonance(cavity, spin, field_cfg)

    def q_at(b_coil):
        omega_s = field_to_spin_frequency(field_cfg.with_coil(b_coil), spin)
        gamma = reflection_coefficient(cavity, spin, cavity.omega_c, omega_s,
                                       n_cav)
        return iq_demodulate(gamma, v_in, lo_phase, gain)[1]

    return (q_at(b0 + db) - q_at(b0 - db)) / (2.0 * db)


@dataclass
class TimeSeries:
    """Sampled Q-channel voltage record."""

    times: np.ndarray
    volts: np.ndarray
    sample_rate: float
    seed: int
    metadata: dict = field(default_factory=dict)


def simulate_timeseries(cavity, spin, field_cfg, b_of_t, duration,
                        sample_rate, noise_floor, seed, power, gain=1.0,
                        n_cav=0.0, lo_phase=None):
    """Simulate the Q channel while a test field waveform is applied.

    `b_of_t` maps time (s) to the test field (tesla) added on top of maybe
    the resonant bias. White noise of the given single-sided density
    (V/sqrt(Hz)) is added at the digitizer; the sample rate must exceed
    twice the highest waveform frequency.
    """
    if lo_phase is None:
        lo_phase = calibrate_lo_phase(cavity, spin, n_cav=n_cav)
    v_in = incident_voltage(power)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    b0 = bias_for_resonance(cavity, spin, field_cfg)
    b_test = np.asarray(b_of_t(t), dtype=float)
    slope_b = spin.gamma_e * field_cfg.projection
    omega_s = spin.D + slope_b * (field_cfg.B_perm + b0 + b_test)
    gamma = reflection_coefficient(cavity, spin, cavity.omega_c, omega_s,
                                   n_cav)
    q = np.imag(gamma * np.exp(1j * lo_phase)) * v_in * gain
    rng = np.random.default_rng(seed)
    if noise_floor > 0:
        q = q + rng.normal(0.0, noise_floor * math.sqrt(sample_rate / 2.0), n)
    return TimeSeries(times=t, volts=q, sample_rate=float(sample_rate),
                      seed=int(seed),
                      metadata={"noise_floor_v_rthz": float(noise_floor),
                                "gain": float(gain),
                                "lo_phase_rad": float(lo_phase),
                                "power_in_w": float(power)})


def welch_enbw(sample_rate, nperseg):
    """Equivalent noise bandwidth (Hz) of the Hann-windowed estimator."""
    w = hann(nperseg)
    return sample_rate * np.sum(w**2) / np.sum(w) ** 2


def amplitude_spectral_density(values, sample_rate, nperseg=4096):
    """Single-sided Welch ASD (V/sqrt(Hz)): Hann window, 50% overlap.

    Normalized so a bin-centered sine of RMS amplitude A reads
    A/sqrt(ENBW) at its bin and broadband noise reads its density.
    """
    values = np.asarray(values, dtype=float)
    if values.size < nperseg + nperseg // 2:
        raise ValueError("series shorter than two Welch segments")
    freqs, psd = welch(values, fs=sample_rate, window="hann",
                       nperseg=nperseg, noverlap=nperseg // 2,
                       detrend="constant", scaling="density")
    return freqs, np.sqrt(psd)


def tone_rms_from_asd(freqs, asd, tone_freq, enbw_hz):
    """RMS amplitude of a bin-centered tone read back from the ASD."""
    i = int(np.argmin(np.abs(freqs - tone_freq)))
    return float(asd[i]) * math.sqrt(enbw_hz)


def sensitivity_from_test_tone(freqs, asd, tone_freq, v_dig, b_test, band):
    """Field sensitivity eta = e_n / (v_dig / b_test), T/sqrt(Hz).

    e_n is the median ASD over `band` (Hz), which must exclude the tone.
    """
    lo, hi = band
    if not lo < hi:
        raise ValueError("band must be an increasing (lo, hi) pair")
    if lo <= tone_freq <= hi:
        raise ValueError("band must exclude the calibration tone")
    mask = (freqs >= lo) & (freqs <= hi)
    if not np.any(mask):
        raise ValueError("band contains no ASD bins")
    if v_dig <= 0:
        raise ValueError("v_dig must be positive")
    e_n = float(np.median(asd[mask]))
    return e_n * b_test / v_dig


def johnson_noise_limit(temperature, resistance, responsivity_v_per_t,
                        source_gain=1.0):
    """Thermal-noise field floor: sqrt(4 k_B T R) referred through the chain.

    `source_gain` is the voltage gain between the resistive source and the
    digitizer where `responsivity_v_per_t` is defined.
    """
    if temperature < 0 or resistance <= 0:
        raise ValueError("temperature must be >= 0 and resistance positive")
    if responsivity_v_per_t <= 0:
        raise ValueError("responsivity must be positive")
    e_v = math.sqrt(4.0 * K_B * temperature * resistance)
    return e_v * source_gain / responsivity_v_per_t


def photon_shot_noise_limit(reflected_power, omega, responsivity_photonic):
    """Shot-noise field floor: sqrt(2 Phi) / (dPhi/dB)."""
    if responsivity_photonic <= 0:
        raise ValueError("photonic responsivity must be positive")
    flux = photon_flux(reflected_power, omega)
    return math.sqrt(2.0 * flux) / responsivity_photonic


def spin_projection_limit(n_spins, tau, gamma_eff):
    """Projection-noise floor 1/(gamma_eff sqrt(N tau)) with a tau band.

    Returns (value, (lower, upper)) where the band evaluates tau at 2x and
    0.5x to reflect the repolarization-time uncertainty.
    """
    if n_spins <= 0 or tau <= 0 or gamma_eff <= 0:
        raise ValueError("positive inputs required")

    def lim(t):
        return 1.0 / (gamma_eff * math.sqrt(n_spins * t))

    return lim(tau), (lim(2.0 * tau), lim(0.5 * tau))


@dataclass(frozen=True)
class NoiseBudget:
    """Per-source equivalent field noise and the quadrature total."""

    johnson: float
    photon_shot: float
    spin_projection: float
    electronics_floor: float
    responsivity: float
    total: float = 0.0

    def __post_init__(self):
        for name in ("johnson", "photon_shot", "spin_projection",
                     "electronics_floor"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        tot = math.sqrt(self.johnson**2 + self.photon_shot**2
                        + self.spin_projection**2
                        + self.electronics_floor**2)
        object.__setattr__(self, "total", tot)

    def as_dict(self):
        return {"johnson_t_rthz": self.johnson,
                "photon_shot_t_rthz": self.photon_shot,
                "spin_projection_t_rthz": self.spin_projection,
                "electronics_floor_t_rthz": self.electronics_floor,
                "total_t_rthz": self.total,
                "responsivity_v_per_t": self.responsivity}


def noise_budget(responsivity_v_per_t, johnson=0.0, photon_shot=0.0,
                 spin_projection=0.0, electronics_floor=0.0):
    """Aggregate already field-referred noise densities."""
    return NoiseBudget(johnson=johnson, photon_shot=photon_shot,
                       spin_projection=spin_projection,
                       electronics_floor=electronics_floor,
                       responsivity=responsivity_v_per_t)
