"""Parameter containers for the coupled cavity / spin-ensemble system.

Conventions: every frequency or rate is angular (rad/s); kappa values are
FWHM-type loss rates; fields are tesla. Containers validate on
construction and are frozen so they can be shared freely between
concurrent evaluations.
"""

from dataclasses import dataclass, field, replace
import math

from .constants import GAMMA_E, PROJECTION_100, TWO_PI

LINESHAPES = ("delta", "lorentzian", "gaussian", "q_gaussian")


@dataclass(frozen=True)
class CavityParams:
    """Bare cavity frequency and its three loss channels.

    kappa_c0: unloaded (internal) loss rate
    kappa_c1: input-port coupling rate
    kappa_c2: output-port coupling rate
    """

    omega_c: float
    kappa_c0: float
    kappa_c1: float = 0.0
    kappa_c2: float = 0.0

    def __post_init__(self):
        if self.omega_c <= 0:
            raise ValueError("omega_c must be positive")
        if self.kappa_c0 <= 0:
            raise ValueError("kappa_c0 must be positive")
        if self.kappa_c1 < 0 or self.kappa_c2 < 0:
            raise ValueError("port loss rates must be non-negative")

    @property
    def kappa_c(self):
        """Total loss rate: sum of unloaded and both port channels."""
        return self.kappa_c0 + self.kappa_c1 + self.kappa_c2

    @property
    def q_unloaded(self):
        return self.omega_c / self.kappa_c0

    @property
    def q_loaded(self):
        return self.omega_c / self.kappa_c

    def with_updates(self, **kwargs):
        return replace(self, **kwargs)


@dataclass(frozen=True)
class SpinEnsembleParams:
    """Optically polarized spin ensemble coupled to the cavity mode.

    N             polarized spin count
    g_s           single-spin coupling (rad/s)
    kappa_s       homogeneous FWHM, 2/T2 (rad/s)
    kappa_s_star  inhomogeneous FWHM (rad/s); ignored for delta lineshape
    kappa_op      optical repolarization rate, 1/T1_op (rad/s)
    lineshape     one of 'delta', 'lorentzian', 'gaussian', 'q_gaussian'
    q             Tsallis parameter, only used by 'q_gaussian' (1 < q < 3)
    D             zero-field splitting (rad/s)
    gamma_e       gyromagnetic ratio (rad/s per tesla)
    n_perp        transverse geometric factor, 0 < n_perp <= 1
    """

    N: float
    g_s: float
    kappa_s: float
    kappa_s_star: float = 0.0
    kappa_op: float = TWO_PI * 5e3
    lineshape: str = "delta"
    q: float = 1.39
    D: float = TWO_PI * 2.87e9
    gamma_e: float = GAMMA_E
    n_perp: float = 1.0

    def __post_init__(self):
        if self.N < 0:
            raise ValueError("N must be non-negative")
        if self.g_s < 0:
            raise ValueError("g_s must be non-negative")
        if self.kappa_s <= 0:
            raise ValueError("kappa_s must be positive")
        if self.kappa_s_star < 0:
            raise ValueError("kappa_s_star must be non-negative")
        if self.kappa_op <= 0:
            raise ValueError("kappa_op must be positive")
        if self.lineshape not in LINESHAPES:
            raise ValueError(f"lineshape must be one of {LINESHAPES}")
        if self.lineshape == "q_gaussian" and not (1.0 < self.q < 3.0):
            raise ValueError("q_gaussian requires 1 < q < 3")
        if not (0.0 < self.n_perp <= 1.0):
            raise ValueError("n_perp must lie in (0, 1]")

    @property
    def g_eff(self):
        """Collective coupling g_s * sqrt(N)."""
        return self.g_s * math.sqrt(self.N)

    @property
    def effective_kappa_s_star(self):
        # delta lineshape forces the inhomogeneous width to zero
        return 0.0 if self.lineshape == "delta" else self.kappa_s_star

    def with_updates(self, **kwargs):
        return replace(self, **kwargs)

    def with_g_eff(self, g_eff):
        """Rescale g_s so the collective coupling equals g_eff (N kept)."""
        if self.N <= 0:
            raise ValueError("cannot set g_eff on an empty ensemble")
        return replace(self, g_s=g_eff / math.sqrt(self.N))


@dataclass(frozen=True)
class DriveParams:
    """Microwave drive: frequency, incident power, photon-number policy."""

    omega_d: float
    power_in: float = 0.0
    n_cav_mode: str = "self_consistent"   # or "fixed"
    n_cav_fixed: float = 0.0

    def __post_init__(self):
        if self.omega_d <= 0:
            raise ValueError("omega_d must be positive")
        if self.power_in < 0:
            raise ValueError("power_in must be non-negative")
        if self.n_cav_mode not in ("self_consistent", "fixed"):
            raise ValueError("n_cav_mode must be 'self_consistent' or 'fixed'")
        if self.n_cav_mode == "fixed" and self.n_cav_fixed < 0:
            raise ValueError("fixed photon number must be non-negative")


@dataclass(frozen=True)
class FieldConfig:
    """Static bias field plus tunable coil field along the same axis."""

    B_perm: float = 0.0
    B_coil: float = 0.0
    projection: float = PROJECTION_100
    coil_range: float = 25e-4   # |B_coil| limit, tesla

    def __post_init__(self):
        if not (0.0 < self.projection <= 1.0):
            raise ValueError("projection must lie in (0, 1]")
        if abs(self.B_coil) > self.coil_range:
            raise ValueError("B_coil outside configured coil range")

    def with_coil(self, b_coil):
        return replace(self, B_coil=b_coil)


@dataclass(frozen=True)
class ComplexResponse:
    """Reflection and transmission coefficients at one operating point."""

    gamma: complex
    t: complex
    n_cav: float = 0.0

    @property
    def gamma_mag(self):
        return abs(self.gamma)

    @property
    def gamma_phase(self):
        return math.atan2(self.gamma.imag, self.gamma.real)

    @property
    def reflected_power_fraction(self):
        return abs(self.gamma) ** 2

    @property
    def transmitted_power_fraction(self):
        return abs(self.t) ** 2

    def iq(self, v_in=1.0, gain=1.0, lo_phase=0.0):
        """In-phase / quadrature voltages for a unit reference chain."""
        z = self.gamma * v_in * gain * complex(math.cos(lo_phase), math.sin(lo_phase))
        return z.real, z.imag
