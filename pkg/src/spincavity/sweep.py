"""Response maps over drive and spin frequency axes, plus feature
extraction: branch splitting, linewidths, contrast.

A SweepGrid stores the complex reflection/transmission coefficients and
the resolved photon number on a rectangular (drive, spin) grid. Cells are
mutually independent, so grids may be filled in any order (here:
vectorized numpy) with bit-identical results.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .magnetometer import field_to_spin_frequency
from .params import ComplexResponse
from .response import (reflection_coefficient, resolve_n_cav,
                       solve_photon_number_grid, transmission_coefficient)

TRACE_KINDS = ("reflected_power", "transmitted_power", "odmr_fluorescence",
               "iq_quadrature")


class UnresolvedSplittingError(RuntimeError):
    """No spin column shows two resolvable response branches."""


class TraceShapeError(RuntimeError):
    """A trace does not expose the feature the extractor needs."""


def _check_axis(axis, name):
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size == 0:
        raise ValueError(f"{name} must be a non-empty 1D axis")
    if axis.size > 1:
        d = np.diff(axis)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError(f"{name} must be strictly monotonic")
    return axis


@dataclass
class SweepGrid:
    """Complex response on a (drive, spin) frequency grid.

    gamma, t and n_cav are indexed [drive, spin]. `norm_scale` records the
    power rescaling applied by normalize_unity (1.0 = raw model values).
    """

    drive_axis: np.ndarray
    spin_axis: np.ndarray
    gamma: np.ndarray
    t: np.ndarray
    n_cav: np.ndarray
    metadata: dict = field(default_factory=dict)
    norm_scale: dict = field(default_factory=lambda: {"reflection": 1.0,
                                                      "transmission": 1.0})

    def __post_init__(self):
        self.drive_axis = _check_axis(self.drive_axis, "drive_axis")
        self.spin_axis = _check_axis(self.spin_axis, "spin_axis")
        shape = (self.drive_axis.size, self.spin_axis.size)
        for name in ("gamma", "t", "n_cav"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != shape:
                raise ValueError(f"{name} shape {arr.shape} does not match "
                                 f"axes {shape}")
            setattr(self, name, arr)

    @property
    def shape(self):
        return self.gamma.shape

    def cell(self, i, j):
        return ComplexResponse(gamma=complex(self.gamma[i, j]),
                               t=complex(self.t[i, j]),
                               n_cav=float(self.n_cav[i, j]))

    def power(self, kind="reflection"):
        """|Gamma|^2 or |T|^2 map, with any recorded normalization applied."""
        if kind == "reflection":
            return np.abs(self.gamma) ** 2 / self.norm_scale["reflection"]
        if kind == "transmission":
            return np.abs(self.t) ** 2 / self.norm_scale["transmission"]
        raise ValueError("kind must be 'reflection' or 'transmission'")


def sweep_2d(cavity, spin, drive_axis, spin_axis, power=0.0,
             n_cav_mode="self_consistent", n_cav_fixed=0.0):
    """Evaluate Gamma and T over the outer product of the two axes.

    `power` is the incident power in W; the photon number is resolved per
    cell under the requested mode before the response is evaluated.
    """
    drive_axis = _check_axis(drive_axis, "drive_axis")
    spin_axis = _check_axis(spin_axis, "spin_axis")
    omd = drive_axis[:, None]
    oms = spin_axis[None, :]

    if n_cav_mode == "fixed":
        n_cav = np.full((drive_axis.size, spin_axis.size), float(n_cav_fixed))
    elif n_cav_mode == "self_consistent":
        n_cav = solve_photon_number_grid(cavity, spin, power, omd, oms)
        n_cav = np.broadcast_to(n_cav, (drive_axis.size, spin_axis.size)).copy()
    else:
        raise ValueError("n_cav_mode must be 'fixed' or 'self_consistent'")

    gamma = reflection_coefficient(cavity, spin, omd, oms, n_cav)
    if cavity.kappa_c2 > 0:
        t = transmission_coefficient(cavity, spin, omd, oms, n_cav)
        has_t = True
    else:
        t = np.zeros_like(gamma)
        has_t = False

    meta = {
        "cavity": {"omega_c": cavity.omega_c, "kappa_c0": cavity.kappa_c0,
                   "kappa_c1": cavity.kappa_c1, "kappa_c2": cavity.kappa_c2},
        "spin": {"N": spin.N, "g_s": spin.g_s, "kappa_s": spin.kappa_s,
                 "kappa_s_star": spin.kappa_s_star, "kappa_op": spin.kappa_op,
                 "lineshape": spin.lineshape, "q": spin.q, "D": spin.D,
                 "gamma_e": spin.gamma_e, "n_perp": spin.n_perp},
        "power_in_w": float(power),
        "n_cav_mode": n_cav_mode,
        "n_cav_fixed": float(n_cav_fixed),
        "has_transmission": has_t,
    }
    return SweepGrid(drive_axis=drive_axis, spin_axis=spin_axis, gamma=gamma,
                     t=t, n_cav=n_cav, metadata=meta)


def normalize_unity(grid, kind="reflection"):
    """Rescale one power map so its maximum is exactly 1.

    Returns a new grid; the applied scale (the pre-normalization maximum)
    accumulates in norm_scale, so normalizing twice is a no-op.
    """
    current = grid.power(kind)
    peak = float(np.max(current))
    if peak <= 0.0:
        raise ValueError("cannot normalize an all-zero power map")
    scales = dict(grid.norm_scale)
    scales[kind] = scales[kind] * peak
    return replace(grid, norm_scale=scales,
                   metadata={**grid.metadata, f"normalized_{kind}": True})


def _parabolic_vertex(x, y, i):
    """Vertex abscissa of the parabola through points i-1, i, i+1."""
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    d1 = (y1 - y0) / (x1 - x0)
    d2 = (y2 - y1) / (x2 - x1)
    curv = (d2 - d1) / (x2 - x0)
    if curv == 0.0:
        return x1, y1
    xv = 0.5 * (x0 + x1 - d1 / curv)
    yv = y1  # height refinement is not needed for ranking
    return xv, yv


def _local_extrema(x, y, find="max"):
    """Interior local extrema refined by 3-point parabolic interpolation."""
    sign = 1.0 if find == "max" else -1.0
    v = sign * y
    out = []
    for i in range(1, len(v) - 1):
        if v[i] > v[i - 1] and v[i] >= v[i + 1]:
            xv, _ = _parabolic_vertex(x, v, i)
            out.append((xv, v[i]))
    return out


def avoided_crossing_splitting(grid, use=None):
    """Minimum branch separation over spin columns, rad/s.

    For each spin column the two strongest transmission maxima (or
    reflection minima) along the drive axis are located with parabolic
    refinement; equal heights break toward the lower-frequency extremum.
    Columns with fewer than two interior extrema are skipped; if every
    column is single-branched the splitting is unresolved.
    """
    if use is None:
        use = "transmission" if grid.metadata.get("has_transmission") else \
            "reflection"
    pw = grid.power(use)
    find = "max" if use == "transmission" else "min"
    x = grid.drive_axis
    best = None
    for j in range(grid.spin_axis.size):
        cands = _local_extrema(x, pw[:, j], find=find)
        if len(cands) < 2:
            continue
        cands.sort(key=lambda c: (-c[1], c[0]))
        (xa, _), (xb, _) = cands[0], cands[1]
        sep = abs(xb - xa)
        if sep > 0 and (best is None or sep < best):
            best = sep
    if best is None:
        raise UnresolvedSplittingError(
            "no spin column shows two resolvable branches")
    return best


@dataclass
class ResonanceTrace:
    """Real-valued signal versus a swept axis (rad/s or tesla)."""

    axis: np.ndarray
    values: np.ndarray
    kind: str

    def __post_init__(self):
        self.axis = _check_axis(self.axis, "axis")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.axis.shape:
            raise ValueError("axis and values must have equal length")
        if self.kind not in TRACE_KINDS:
            raise ValueError(f"kind must be one of {TRACE_KINDS}")


def magnetic_resonance_scan(cavity, spin, field, power, field_axis,
                            drive_detuning=0.0, n_cav_mode="fixed",
                            n_cav_fixed=0.0, leakage_floor=0.0):
    """Reflected power versus coil field with the drive on the bare cavity.

    `field_axis` holds coil-field values (tesla) substituted into `field`;
    `drive_detuning` offsets the drive from the bare resonance (the default
    reproduces the symmetric on-resonance scan). `leakage_floor` is an
    additive reflected-power offset (W) modeling finite circulator
    isolation.
    """
    field_axis = _check_axis(field_axis, "field_axis")
    omega_d = cavity.omega_c + drive_detuning
    omega_s = np.array([field_to_spin_frequency(field.with_coil(b), spin)
                        for b in field_axis])
    if n_cav_mode == "fixed":
        n_cav = np.full(field_axis.shape, float(n_cav_fixed))
    else:
        n_cav = solve_photon_number_grid(cavity, spin, power, omega_d,
                                         omega_s)
    gamma = reflection_coefficient(cavity, spin, omega_d, omega_s, n_cav)
    values = np.abs(gamma) ** 2 * power + leakage_floor
    return ResonanceTrace(axis=field_axis, values=values,
                          kind="reflected_power")


def odmr_scan(contrast_c, fwhm, center, axis):
    """Lorentzian fluorescence-dip model, unit off-resonance value."""
    if not (0.0 <= contrast_c <= 1.0):
        raise ValueError("contrast must lie in [0, 1]")
    if fwhm <= 0:
        raise ValueError("fwhm must be positive")
    axis = _check_axis(axis, "axis")
    hw = 0.5 * fwhm
    values = 1.0 - contrast_c * hw**2 / ((axis - center) ** 2 + hw**2)
    return ResonanceTrace(axis=axis, values=values, kind="odmr_fluorescence")


def extract_fwhm(trace):
    """Full width at half maximum (or half depth, for dips) of a trace.

    The half-level crossings on each side of the dominant extremum are
    located by linear interpolation between samples.
    """
    x = trace.axis
    y = trace.values
    lo, hi = float(np.min(y)), float(np.max(y))
    if hi == lo:
        raise TraceShapeError("constant trace has no linewidth")
    med = float(np.median(y))
    if hi - med >= med - lo:     # peak
        i0 = int(np.argmax(y))
        half = 0.5 * (hi + lo)
        above = y >= half
    else:                        # dip
        i0 = int(np.argmin(y))
        half = 0.5 * (hi + lo)
        above = y <= half
    if i0 == 0 or i0 == len(y) - 1:
        raise TraceShapeError("extremum sits on the axis boundary")

    def cross(i, step):
        j = i
        while 0 <= j + step < len(y) and above[j + step]:
            j += step
        if not (0 <= j + step < len(y)):
            raise TraceShapeError("half-level crossing outside the axis")
        x0, x1 = x[j], x[j + step]
        y0, y1 = y[j], y[j + step]
        return x0 + (half - y0) * (x1 - x0) / (y1 - y0)

    return abs(cross(i0, 1) - cross(i0, -1))


def contrast(trace):
    """(max - min) / max over the swept resonance."""
    a = float(np.max(trace.values))
    b = float(np.min(trace.values))
    if a <= 0:
        raise ValueError("contrast requires a positive trace maximum")
    return (a - b) / a
