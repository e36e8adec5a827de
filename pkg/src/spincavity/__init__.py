"""Forward modeling, spectral fitting and noise analysis for
microwave-cavity readout of solid-state spin ensembles."""

__version__ = "0.1.0"

from .params import (CavityParams, ComplexResponse, DriveParams, FieldConfig,
                     SpinEnsembleParams)
from .response import (ConvergenceError, collective_coupling, cooperativity,
                       dispersive_im_gamma_approx, loss_rate_from_q,
                       match_input_coupling, photon_flux, quality_factor,
                       reflection_coefficient, single_spin_coupling,
                       solve_cavity_photon_number, spin_susceptibility,
                       transmission_coefficient)
from .sweep import (ResonanceTrace, SweepGrid, TraceShapeError,
                    UnresolvedSplittingError, avoided_crossing_splitting,
                    contrast, extract_fwhm, magnetic_resonance_scan,
                    normalize_unity, odmr_scan, sweep_2d)
from .fitting import (FitProblem, FitResult, fit_lorentzian, fit_spectra_2d,
                      residuals)
from .magnetometer import (NoiseBudget, amplitude_spectral_density,
                           bias_for_resonance, calibrate_lo_phase,
                           field_to_spin_frequency, iq_demodulate,
                           johnson_noise_limit, noise_budget,
                           photon_shot_noise_limit, responsivity,
                           sensitivity_from_test_tone, simulate_timeseries,
                           spin_projection_limit)
