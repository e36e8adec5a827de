"""File formats: grid CSV + JSON envelope, trace/time-series/ASD CSV,
noise-budget JSON. All numeric output uses 17 significant digits so a
write/read cycle is bit-exact.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .sweep import ResonanceTrace, SweepGrid

GRID_COLUMNS = ("drive_Hz", "spin_Hz", "re_gamma", "im_gamma", "re_t",
                "im_t", "n_cav")


def _fmt(x):
    return format(float(x), ".17g")


def save_grid(grid, basepath):
    """Write <base>.csv (one row per cell, drive-major order) and
    <base>.json (parameter snapshot envelope)."""
    base = Path(basepath)
    csv_path = base.with_suffix(".csv")
    json_path = base.with_suffix(".json")
    from .constants import angular_to_hz

    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GRID_COLUMNS)
        for i, wd in enumerate(grid.drive_axis):
            for j, ws in enumerate(grid.spin_axis):
                g = grid.gamma[i, j]
                t = grid.t[i, j]
                writer.writerow([_fmt(angular_to_hz(wd)),
                                 _fmt(angular_to_hz(ws)),
                                 _fmt(g.real), _fmt(g.imag),
                                 _fmt(t.real), _fmt(t.imag),
                                 _fmt(grid.n_cav[i, j])])

    envelope = {
        "format": "spincavity-grid-v1",
        "csv": csv_path.name,
        "n_drive": int(grid.drive_axis.size),
        "n_spin": int(grid.spin_axis.size),
        "norm_scale": {k: float(v) for k, v in grid.norm_scale.items()},
        "metadata": grid.metadata,
    }
    with open(json_path, "w") as fh:
        json.dump(envelope, fh, indent=2, sort_keys=True)
    return csv_path, json_path


def load_grid(basepath):
    """Read a grid written by save_grid; inverse to 17 significant digits."""
    base = Path(basepath)
    json_path = base.with_suffix(".json")
    with open(json_path) as fh:
        envelope = json.load(fh)
    if envelope.get("format") != "spincavity-grid-v1":
        raise ValueError(f"{json_path} is not a grid envelope")
    csv_path = json_path.parent / envelope["csv"]
    from .constants import hz_to_angular

    rows = []
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != GRID_COLUMNS:
            raise ValueError(f"unexpected grid CSV header {header}")
        for row in reader:
            rows.append([float(v) for v in row])
    nd, ns = envelope["n_drive"], envelope["n_spin"]
    if len(rows) != nd * ns:
        raise ValueError("grid CSV row count does not match envelope")
    arr = np.asarray(rows).reshape(nd, ns, 7)
    drive = hz_to_angular(arr[:, 0, 0])
    spin = hz_to_angular(arr[0, :, 1])
    gamma = arr[:, :, 2] + 1j * arr[:, :, 3]
    t = arr[:, :, 4] + 1j * arr[:, :, 5]
    return SweepGrid(drive_axis=drive, spin_axis=spin, gamma=gamma, t=t,
                     n_cav=arr[:, :, 6],
                     metadata=envelope.get("metadata", {}),
                     norm_scale=envelope.get("norm_scale",
                                             {"reflection": 1.0,
                                              "transmission": 1.0}))


def save_trace(trace, path, axis_name="axis", value_name="value"):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([axis_name, value_name])
        for a, v in zip(trace.axis, trace.values):
            writer.writerow([_fmt(a), _fmt(v)])
    return Path(path)


def load_trace(path, kind):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        data = np.asarray([[float(a), float(v)] for a, v in reader])
    return ResonanceTrace(axis=data[:, 0], values=data[:, 1], kind=kind)


def save_timeseries(series, path):
    """Time series as CSV (t_s, volts); the seed travels in run metadata."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "volts"])
        for t, v in zip(series.times, series.volts):
            writer.writerow([_fmt(t), _fmt(v)])
    return Path(path)


def load_timeseries(path):
    """(times, volts) arrays from a time-series CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        data = np.asarray([[float(t), float(v)] for t, v in reader])
    return data[:, 0], data[:, 1]


def save_asd(freqs, asd, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["freq_Hz", "v_per_rtHz"])
        for f, a in zip(freqs, asd):
            writer.writerow([_fmt(f), _fmt(a)])
    return Path(path)


def load_asd(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        data = np.asarray([[float(f), float(a)] for f, a in reader])
    return data[:, 0], data[:, 1]


def save_budget(budget, path, extra=None):
    payload = budget.as_dict()
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return Path(path)


def save_fit_report(result, path, extra=None):
    payload = result.as_dict()
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return Path(path)
