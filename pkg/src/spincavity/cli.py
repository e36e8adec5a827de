"""Batch front door.

    spincavity <command> --config <path> [--out <dir>] [--seed <u64>]

Commands: simulate, sweep, fit, magnetometer, budget. Configs are JSON in
user units (Hz, gauss, dBm, kelvin, seconds); everything is converted to
internal angular SI at the boundary. Unknown keys are rejected; keys
starting with "_" are ignored so configs can carry notes.

Exit codes: 0 success, 2 invalid config (field-level diagnostics on
stderr), 3 numerical failure (module error payload on stderr).
"""

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .constants import (dbm_to_watt, gauss_to_tesla, hz_to_angular,
                        angular_to_hz)
from .fitting import FitProblem, fit_spectra_2d
from .gridio import (GRID_COLUMNS, _fmt, load_grid, save_asd, save_budget,
                     save_fit_report, save_grid, save_timeseries, save_trace)
from .magnetometer import (amplitude_spectral_density, calibrate_lo_phase,
                           field_to_spin_frequency, johnson_noise_limit,
                           noise_budget, photon_shot_noise_limit,
                           responsivity, sensitivity_from_test_tone,
                           simulate_timeseries, spin_projection_limit,
                           tone_rms_from_asd, welch_enbw)
from .params import CavityParams, DriveParams, FieldConfig, SpinEnsembleParams
from .response import (ConvergenceError, resolve_n_cav,
                       reflection_coefficient, transmission_coefficient)
from .sweep import (UnresolvedSplittingError, avoided_crossing_splitting,
                    contrast, extract_fwhm, magnetic_resonance_scan,
                    normalize_unity, odmr_scan, sweep_2d)


class ConfigError(ValueError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _require_keys(block, allowed, required, path):
    problems = []
    for key in block:
        if key.startswith("_"):
            continue
        if key not in allowed:
            problems.append(f"{path}: unknown key '{key}'")
    for key in required:
        if key not in block:
            problems.append(f"{path}: missing key '{key}'")
    if problems:
        raise ConfigError(problems)


def _number(block, key, path, default=None, minimum=None):
    if key not in block:
        if default is None:
            raise ConfigError(f"{path}.{key}: required number missing")
        return default
    v = block[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}")
    return float(v)


def parse_system(block):
    _require_keys(block, {"cavity", "spins", "field"}, {"cavity", "spins"},
                  "system")
    cav = block["cavity"]
    _require_keys(cav, {"frequency_hz", "kappa_unloaded_hz", "kappa_input_hz",
                        "kappa_output_hz"},
                  {"frequency_hz", "kappa_unloaded_hz"}, "system.cavity")
    cavity = CavityParams(
        omega_c=hz_to_angular(_number(cav, "frequency_hz", "system.cavity")),
        kappa_c0=hz_to_angular(_number(cav, "kappa_unloaded_hz",
                                       "system.cavity")),
        kappa_c1=hz_to_angular(_number(cav, "kappa_input_hz", "system.cavity",
                                       default=0.0)),
        kappa_c2=hz_to_angular(_number(cav, "kappa_output_hz", "system.cavity",
                                       default=0.0)))

    sp = block["spins"]
    _require_keys(sp, {"count", "single_spin_coupling_hz",
                       "kappa_homogeneous_hz", "kappa_inhomogeneous_hz",
                       "lineshape", "q", "repolarization_rate_hz",
                       "zero_field_splitting_hz", "gyromagnetic_hz_per_t",
                       "transverse_factor"},
                  {"count", "single_spin_coupling_hz", "kappa_homogeneous_hz"},
                  "system.spins")
    lineshape = sp.get("lineshape", "delta")
    spins = SpinEnsembleParams(
        N=_number(sp, "count", "system.spins", minimum=0.0),
        g_s=hz_to_angular(_number(sp, "single_spin_coupling_hz",
                                  "system.spins")),
        kappa_s=hz_to_angular(_number(sp, "kappa_homogeneous_hz",
                                      "system.spins")),
        kappa_s_star=hz_to_angular(_number(sp, "kappa_inhomogeneous_hz",
                                           "system.spins", default=0.0)),
        kappa_op=hz_to_angular(_number(sp, "repolarization_rate_hz",
                                       "system.spins", default=5e3)),
        lineshape=lineshape,
        q=_number(sp, "q", "system.spins", default=1.39),
        D=hz_to_angular(_number(sp, "zero_field_splitting_hz", "system.spins",
                                default=2.87e9)),
        gamma_e=hz_to_angular(_number(sp, "gyromagnetic_hz_per_t",
                                      "system.spins", default=28.024e9)),
        n_perp=_number(sp, "transverse_factor", "system.spins", default=1.0))

    fl = block.get("field", {})
    _require_keys(fl, {"permanent_gauss", "coil_gauss", "projection"}, set(),
                  "system.field")
    field = FieldConfig(
        B_perm=gauss_to_tesla(_number(fl, "permanent_gauss", "system.field",
                                      default=0.0)),
        B_coil=gauss_to_tesla(_number(fl, "coil_gauss", "system.field",
                                      default=0.0)),
        projection=_number(fl, "projection", "system.field",
                           default=FieldConfig().projection))
    return cavity, spins, field


def parse_drive(block, cavity):
    _require_keys(block, {"power_dbm", "frequency_offset_hz", "n_cav_mode",
                          "n_cav_fixed"}, set(), "drive")
    power_dbm = block.get("power_dbm")
    power = dbm_to_watt(power_dbm) if power_dbm is not None else 0.0
    return DriveParams(
        omega_d=cavity.omega_c + hz_to_angular(
            _number(block, "frequency_offset_hz", "drive", default=0.0)),
        power_in=power,
        n_cav_mode=block.get("n_cav_mode", "self_consistent"),
        n_cav_fixed=_number(block, "n_cav_fixed", "drive", default=0.0))


def _axis(block, path):
    _require_keys(block, {"start", "stop", "points"},
                  {"start", "stop", "points"}, path)
    n = block["points"]
    if not isinstance(n, int) or n < 1:
        raise ConfigError(f"{path}.points: expected a positive integer")
    return np.linspace(_number(block, "start", path),
                       _number(block, "stop", path), n)


def _load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc


def _manifest(out_dir, command, config_path, seed, outputs, t0):
    payload = {
        "command": command,
        "config_sha256": hashlib.sha256(
            Path(config_path).read_bytes()).hexdigest(),
        "package_version": __version__,
        "seed": seed,
        "outputs": sorted(str(o) for o in outputs),
        "wall_time_s": time.monotonic() - t0,
        "timestamp_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    path = out_dir / "run_manifest.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return path


def cmd_simulate(cfg, out_dir, seed):
    cavity, spins, field = parse_system(cfg.get("system", {}))
    drive = parse_drive(cfg.get("drive", {}), cavity)
    omega_s = field_to_spin_frequency(field, spins)
    n_cav = resolve_n_cav(cavity, spins, drive, omega_s)
    gamma = reflection_coefficient(cavity, spins, drive.omega_d, omega_s,
                                   n_cav)
    t = (transmission_coefficient(cavity, spins, drive.omega_d, omega_s,
                                  n_cav)
         if cavity.kappa_c2 > 0 else 0j)
    path = out_dir / "point.csv"
    with open(path, "w") as fh:
        fh.write(",".join(GRID_COLUMNS) + "\n")
        row = [angular_to_hz(drive.omega_d), angular_to_hz(omega_s),
               gamma.real, gamma.imag, t.real, t.imag, n_cav]
        fh.write(",".join(_fmt(v) for v in row) + "\n")
    return [path]


def _coil_to_spin_axis(block, spins, field, path):
    coil = gauss_to_tesla(_axis(block, path))
    slope = spins.gamma_e * field.projection
    return spins.D + slope * (field.B_perm + coil), coil


def cmd_sweep(cfg, out_dir, seed):
    cavity, spins, field = parse_system(cfg.get("system", {}))
    drive = parse_drive(cfg.get("drive", {}), cavity)
    block = cfg.get("sweep")
    if block is None:
        raise ConfigError("sweep: block required for the sweep command")
    _require_keys(block, {"mode", "drive_offset_hz", "coil_gauss",
                          "normalize", "drive_detuning_hz", "leakage_floor_w",
                          "odmr"}, {"mode"}, "sweep")
    outputs = []
    if block["mode"] == "map":
        drive_axis = cavity.omega_c + hz_to_angular(
            _axis(block["drive_offset_hz"], "sweep.drive_offset_hz"))
        spin_axis, _ = _coil_to_spin_axis(block["coil_gauss"], spins, field,
                                          "sweep.coil_gauss")
        grid = sweep_2d(cavity, spins, drive_axis, spin_axis,
                        power=drive.power_in, n_cav_mode=drive.n_cav_mode,
                        n_cav_fixed=drive.n_cav_fixed)
        if block.get("normalize", False):
            grid = normalize_unity(grid, "reflection")
            if grid.metadata.get("has_transmission"):
                grid = normalize_unity(grid, "transmission")
        csv_path, json_path = save_grid(grid, out_dir / "grid")
        outputs += [csv_path, json_path]
        features = {}
        try:
            split = avoided_crossing_splitting(grid)
            features["splitting_hz"] = angular_to_hz(split)
        except UnresolvedSplittingError as exc:
            features["splitting_hz"] = None
            features["splitting_error"] = str(exc)
        fpath = out_dir / "features.json"
        with open(fpath, "w") as fh:
            json.dump(features, fh, indent=2, sort_keys=True)
        outputs.append(fpath)
    elif block["mode"] == "field_scan":
        _, coil = _coil_to_spin_axis(block["coil_gauss"], spins, field,
                                     "sweep.coil_gauss")
        trace = magnetic_resonance_scan(
            cavity, spins, field, drive.power_in, coil,
            drive_detuning=hz_to_angular(_number(block, "drive_detuning_hz",
                                                 "sweep", default=0.0)),
            n_cav_mode=drive.n_cav_mode, n_cav_fixed=drive.n_cav_fixed,
            leakage_floor=_number(block, "leakage_floor_w", "sweep",
                                  default=0.0))
        outputs.append(save_trace(trace, out_dir / "scan.csv",
                                  axis_name="coil_tesla",
                                  value_name="reflected_w"))
        features = {"contrast": contrast(trace)}
        try:
            slope = spins.gamma_e * field.projection
            features["fwhm_hz"] = angular_to_hz(extract_fwhm(trace) * slope)
        except Exception as exc:
            features["fwhm_hz"] = None
            features["fwhm_error"] = str(exc)
        ob = block.get("odmr")
        if ob:
            _require_keys(ob, {"contrast", "fwhm_hz"},
                          {"contrast", "fwhm_hz"}, "sweep.odmr")
            slope = spins.gamma_e * field.projection
            omega_axis = spins.D + slope * (field.B_perm + coil)
            center = field_to_spin_frequency(
                field.with_coil(coil[np.argmax(trace.values)]), spins)
            odmr = odmr_scan(_number(ob, "contrast", "sweep.odmr"),
                             hz_to_angular(_number(ob, "fwhm_hz",
                                                   "sweep.odmr")),
                             cavity.omega_c, omega_axis)
            outputs.append(save_trace(odmr, out_dir / "odmr.csv",
                                      axis_name="omega_rad_s",
                                      value_name="fluorescence"))
            features["odmr_fwhm_hz"] = angular_to_hz(extract_fwhm(odmr))
            if features.get("fwhm_hz"):
                features["narrowing_ratio"] = (features["odmr_fwhm_hz"]
                                               / features["fwhm_hz"])
        fpath = out_dir / "features.json"
        with open(fpath, "w") as fh:
            json.dump(features, fh, indent=2, sort_keys=True)
        outputs.append(fpath)
    else:
        raise ConfigError("sweep.mode: must be 'map' or 'field_scan'")
    return outputs


def cmd_fit(cfg, out_dir, seed):
    cavity, spins, field = parse_system(cfg.get("system", {}))
    block = cfg.get("fit")
    if block is None:
        raise ConfigError("fit: block required for the fit command")
    _require_keys(block, {"reflection_grid", "transmission_grid", "free",
                          "initial_guess_hz", "bounds_hz", "n_cav",
                          "multistart"},
                  {"free", "initial_guess_hz"}, "fit")
    ref_grid = trans_grid = None
    if "reflection_grid" in block:
        ref_grid = load_grid(block["reflection_grid"])
    if "transmission_grid" in block:
        trans_grid = load_grid(block["transmission_grid"])
    guess = {k: hz_to_angular(v) for k, v in block["initial_guess_hz"].items()}
    bounds = {k: (hz_to_angular(lo), hz_to_angular(hi))
              for k, (lo, hi) in block.get("bounds_hz", {}).items()}
    problem = FitProblem.from_grids(
        reflection_grid=ref_grid, transmission_grid=trans_grid,
        cavity=cavity, spin=spins, free_params=tuple(block["free"]),
        initial_guess=guess, bounds=bounds,
        n_cav=_number(block, "n_cav", "fit", default=0.0))
    result = fit_spectra_2d(problem, multistart=block.get("multistart", 0),
                            seed=seed)
    report = {"estimates_hz": {k: angular_to_hz(v)
                               for k, v in result.estimates.items()},
              "standard_errors_hz": {k: angular_to_hz(v)
                                     for k, v in result.standard_errors.items()}}
    path = save_fit_report(result, out_dir / "fit_report.json", extra=report)
    return [path]


def _chain_gain(block, cavity, spins, field, power, n_cav, path):
    g = block.get("chain_gain", 1.0)
    if isinstance(g, dict):
        _require_keys(g, {"responsivity_target_v_per_t"},
                      {"responsivity_target_v_per_t"}, f"{path}.chain_gain")
        target = _number(g, "responsivity_target_v_per_t",
                         f"{path}.chain_gain")
        r_unit = responsivity(cavity, spins, field, power, gain=1.0,
                              n_cav=n_cav)
        return target / abs(r_unit)
    if not isinstance(g, (int, float)) or isinstance(g, bool):
        raise ConfigError(f"{path}.chain_gain: number or calibration object")
    return float(g)


def cmd_magnetometer(cfg, out_dir, seed):
    cavity, spins, field = parse_system(cfg.get("system", {}))
    drive = parse_drive(cfg.get("drive", {}), cavity)
    block = cfg.get("magnetometer")
    if block is None:
        raise ConfigError("magnetometer: block required")
    _require_keys(block, {"waveform", "duration_s", "sample_rate_hz",
                          "noise_floor_v_rthz", "chain_gain", "nperseg",
                          "band_hz"},
                  {"waveform", "duration_s", "sample_rate_hz"},
                  "magnetometer")
    wf = block["waveform"]
    _require_keys(wf, {"freq_hz", "amplitude_t_rms"},
                  {"freq_hz", "amplitude_t_rms"}, "magnetometer.waveform")
    f0 = _number(wf, "freq_hz", "magnetometer.waveform")
    amp = _number(wf, "amplitude_t_rms", "magnetometer.waveform")
    fs = _number(block, "sample_rate_hz", "magnetometer")
    duration = _number(block, "duration_s", "magnetometer")
    noise = _number(block, "noise_floor_v_rthz", "magnetometer", default=0.0)
    nperseg = block.get("nperseg", 4096)
    if drive.n_cav_mode != "fixed":
        raise ConfigError("magnetometer: drive.n_cav_mode must be 'fixed' "
                          "(the bias point is held while the field varies)")
    n_cav = drive.n_cav_fixed
    gain = _chain_gain(block, cavity, spins, field, drive.power_in, n_cav,
                       "magnetometer")

    series = simulate_timeseries(
        cavity, spins, field,
        lambda t: amp * np.sqrt(2.0) * np.sin(2.0 * np.pi * f0 * t),
        duration, fs, noise, seed, drive.power_in, gain=gain, n_cav=n_cav)
    outputs = [save_timeseries(series, out_dir / "timeseries.csv")]
    freqs, asd = amplitude_spectral_density(series.volts, fs, nperseg=nperseg)
    outputs.append(save_asd(freqs, asd, out_dir / "asd.csv"))

    report = {"seed": seed, "chain_gain": gain,
              "responsivity_v_per_t": responsivity(cavity, spins, field,
                                                   drive.power_in, gain=gain,
                                                   n_cav=n_cav)}
    band = block.get("band_hz")
    if band is not None:
        v_dig = tone_rms_from_asd(freqs, asd, f0, welch_enbw(fs, nperseg))
        eta = sensitivity_from_test_tone(freqs, asd, f0, v_dig, amp,
                                         (band[0], band[1]))
        report.update({"v_dig_v_rms": v_dig,
                       "sensitivity_t_rthz": eta,
                       "band_hz": [band[0], band[1]]})
    path = out_dir / "sensitivity.json"
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    outputs.append(path)
    return outputs


def cmd_budget(cfg, out_dir, seed):
    cavity, spins, field = parse_system(cfg.get("system", {}))
    drive = parse_drive(cfg.get("drive", {}), cavity)
    block = cfg.get("budget")
    if block is None:
        raise ConfigError("budget: block required")
    _require_keys(block, {"temperature_k", "resistance_ohm", "source_gain",
                          "electronics_floor_v_rthz", "reflected_power_dbm",
                          "photonic_responsivity_per_t", "t1_optical_s",
                          "chain_gain"}, set(), "budget")
    if drive.n_cav_mode != "fixed":
        raise ConfigError("budget: drive.n_cav_mode must be 'fixed'")
    n_cav = drive.n_cav_fixed
    gain = _chain_gain(block, cavity, spins, field, drive.power_in, n_cav,
                       "budget")
    r_v = abs(responsivity(cavity, spins, field, drive.power_in, gain=gain,
                           n_cav=n_cav))

    johnson = photon = proj = 0.0
    extras = {}
    if "temperature_k" in block:
        johnson = johnson_noise_limit(
            _number(block, "temperature_k", "budget"),
            _number(block, "resistance_ohm", "budget", default=50.0),
            r_v, source_gain=_number(block, "source_gain", "budget",
                                     default=gain))
    if "reflected_power_dbm" in block:
        rp = dbm_to_watt(_number(block, "reflected_power_dbm", "budget"))
        phot_resp = block.get("photonic_responsivity_per_t")
        if phot_resp is None:
            raise ConfigError("budget: photonic_responsivity_per_t required "
                              "with reflected_power_dbm")
        photon = photon_shot_noise_limit(rp, cavity.omega_c, float(phot_resp))
    if "t1_optical_s" in block:
        proj, band = spin_projection_limit(
            spins.N, _number(block, "t1_optical_s", "budget"),
            spins.gamma_e * field.projection)
        extras["spin_projection_band_t_rthz"] = list(band)
    floor = _number(block, "electronics_floor_v_rthz", "budget", default=0.0)
    budget = noise_budget(r_v, johnson=johnson, photon_shot=photon,
                          spin_projection=proj,
                          electronics_floor=floor / r_v if floor else 0.0)
    path = save_budget(budget, out_dir / "budget.json",
                       extra={"seed": seed, "chain_gain": gain, **extras})
    return [path]


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "fit": cmd_fit,
            "magnetometer": cmd_magnetometer, "budget": cmd_budget}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="spincavity", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=None)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    t0 = time.monotonic()
    try:
        cfg = _load_config(args.config)
        if not isinstance(cfg, dict):
            raise ConfigError("config: top level must be a JSON object")
        _require_keys(cfg, {"system", "drive", "sweep", "fit", "magnetometer",
                            "budget", "output_dir", "seed"}, {"system"},
                      "config")
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        out_dir = Path(args.out or cfg.get("output_dir", "."))
        out_dir.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command](cfg, out_dir, seed)
        outputs.append(_manifest(out_dir, args.command, args.config, seed,
                                 outputs, t0))
    except ConfigError as exc:
        json.dump({"error": "config", "details": exc.problems}, sys.stderr,
                  indent=2)
        sys.stderr.write("\n")
        return 2
    except (ConvergenceError, UnresolvedSplittingError, ValueError) as exc:
        json.dump({"error": "numerical", "type": type(exc).__name__,
                   "message": str(exc)}, sys.stderr, indent=2)
        sys.stderr.write("\n")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
