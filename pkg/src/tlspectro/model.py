"""Device parameterization and the closed-form defect physics.

A tunneling two-level defect with tunneling energy delta0 and asymmetry
delta (both as frequencies, Hz) in a dc field E shifts as

    f(E) = sqrt(delta0^2 + (delta - 2 p_z E / h)^2)

which traces a hyperbola versus the applied gate bias. All functions
here are pure; ensembles and time evolution live in `ensemble`.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import BiasInsensitiveTlsError, ConfigurationError
from .units import EPS0, HBAR, PLANCK_H, dipole_si

__all__ = [
    "DeviceParams",
    "TlsParams",
    "gate_field",
    "tls_frequency",
    "rms_field",
    "coupling_g",
    "splitting",
    "effective_coupling",
    "resonance_biases",
]


@dataclass(frozen=True)
class DeviceParams:
    """Geometry, dielectric and resonator parameters of the bias bridge.

    Defaults describe the measured device: a 49 nm oxide in a bias
    bridge of four parallel-plate capacitors (total volume 5.6 um^3)
    shunting a feedline-coupled lumped-element resonator. f_c is not a
    directly measured number; it is chosen so the computed rms field
    reproduces the reported 53 V/m (see config notes in the README).
    """

    d0: float = 49e-9  # dielectric thickness (m)
    cap_area: float = (5.3e-6) ** 2  # single plate area (m^2)
    v_total: float = 5.6e-18  # total oxide volume (m^3)
    eps_r: float = 10.0  # relative permittivity
    f_c: float = 4.2e9  # bare resonator frequency (Hz)
    q_c: float = 6500.0  # coupling quality factor
    q_i0: float = 450.0  # internal Q excluding sampled defects

    def __post_init__(self):
        if not (
            self.d0 > 0
            and self.cap_area > 0
            and self.v_total > 0
            and self.eps_r >= 1
            and self.f_c > 0
            and self.q_c > 0
            and self.q_i0 > 0
        ):
            raise ConfigurationError(f"invalid device parameters: {self}")

    @property
    def eps(self) -> float:
        """Absolute permittivity eps_r * eps0 (F/m)."""
        return self.eps_r * EPS0

    @property
    def omega_c(self) -> float:
        """Angular resonator frequency (rad/s)."""
        return 2.0 * math.pi * self.f_c

    @property
    def q_loaded(self) -> float:
        """Loaded Q from coupling and defect-free internal loss."""
        return 1.0 / (1.0 / self.q_c + 1.0 / self.q_i0)

    def to_dict(self) -> dict:
        return {
            "d0": self.d0,
            "cap_area": self.cap_area,
            "v_total": self.v_total,
            "eps_r": self.eps_r,
            "f_c": self.f_c,
            "q_c": self.q_c,
            "q_i0": self.q_i0,
        }


@dataclass(frozen=True)
class TlsParams:
    """Static parameters of one tunneling defect.

    delta0 and delta are energies over h (Hz); delta is signed at zero
    bias. p_z is the dipole projection along the gate field in
    e*angstrom, stored non-negative with its sign absorbed into delta.
    gamma is the full linewidth (Hz).
    """

    delta0: float
    delta: float
    p_z: float
    gamma: float

    def __post_init__(self):
        if self.delta0 <= 0:
            raise ConfigurationError("delta0 must be positive")
        if self.p_z < 0:
            raise ConfigurationError("p_z is stored >= 0 (sign goes into delta)")
        if self.gamma <= 0:
            raise ConfigurationError("gamma must be positive")


def gate_field(v_g, device: DeviceParams):
    """dc field across one capacitor of the bias bridge: E = V_g / (2 d0).

    Sign-preserving; accepts scalars or arrays.
    """
    return v_g / (2.0 * device.d0)


def _bias_detuning(tls: TlsParams, e_g):
    """delta - 2 p_z E / h, the asymmetry term at field E (Hz)."""
    return tls.delta - 2.0 * dipole_si(tls.p_z) * e_g / PLANCK_H


def tls_frequency(tls: TlsParams, e_g):
    """Defect transition frequency at dc field e_g (Hz).

    Equals delta0 exactly at the hyperbola vertex, where the field
    cancels the asymmetry.
    """
    x = _bias_detuning(tls, e_g)
    return np.hypot(tls.delta0, x)


def rms_field(device: DeviceParams) -> float:
    """Vacuum rms electric field in the capacitors (V/m).

    E_rms = sqrt(hbar * omega_c / (2 eps V_T)).
    """
    return math.sqrt(HBAR * device.omega_c / (2.0 * device.eps * device.v_total))


def coupling_g(p_z: float, device: DeviceParams) -> float:
    """Defect-resonator coupling g/2pi (Hz) for dipole projection p_z (e*A).

    g = p_z E_rms / hbar; the transmission doublet of a degenerate
    defect is split by 2 g (see `splitting`).
    """
    if p_z < 0:
        raise ConfigurationError("p_z must be >= 0")
    return dipole_si(p_z) * rms_field(device) / HBAR / (2.0 * math.pi)


def splitting(p_z: float, device: DeviceParams) -> float:
    """Avoided-crossing width 2 g / 2pi (Hz) at degeneracy."""
    return 2.0 * coupling_g(p_z, device)


def effective_coupling(tls: TlsParams, e_g, device: DeviceParams):
    """Coupling g_eff/2pi reduced by the tunneling matrix element (Hz).

    g_eff = g * delta0 / f(E): maximal at the vertex, falling off along
    the hyperbola arms where the defect is mostly asymmetry-like.
    """
    return coupling_g(tls.p_z, device) * tls.delta0 / tls_frequency(tls, e_g)


def resonance_biases(tls: TlsParams, f_target: float, device: DeviceParams) -> list[float]:
    """All gate voltages where the defect crosses f_target (V).

    Returns [] when delta0 > f_target, one bias at equality, else the
    two arm crossings, in ascending order.
    """
    if f_target <= 0:
        raise ConfigurationError("f_target must be positive")
    if tls.p_z == 0:
        raise BiasInsensitiveTlsError(
            "p_z = 0: defect frequency does not tune with bias"
        )
    if tls.delta0 > f_target:
        return []
    # delta - p_z V / (d0 h) = -/+ sqrt(f^2 - delta0^2)
    s = math.sqrt(f_target**2 - tls.delta0**2)
    scale = device.d0 * PLANCK_H / dipole_si(tls.p_z)
    if s == 0.0:
        return [tls.delta * scale]
    return sorted([(tls.delta - s) * scale, (tls.delta + s) * scale])
