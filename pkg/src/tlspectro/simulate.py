"""Forward model: transmission spectra of the defect-dressed resonator.

The resonator hangs off a feedline (notch geometry):

    S21(f) = 1 - (Q_l / Q_c) / (1 + 2i Q_l (f - f_c)/f_c + sum_k chi_k)

with one susceptibility term per near-resonant defect,

    chi_k = (2 Q_l / f_c) * g_k^2 / (i (f - nu_k) + gamma_k / 2),

where nu_k includes any jitter offset and g_k is the effective coupling
(in Hz, i.e. g/2pi). The double-dip separation of a degenerate defect
then reproduces the 2x2 coupled-mode eigenvalue splitting exactly in
the small-damping limit. Drive power saturates each defect through
g_k^2 -> g_k^2 / (1 + n / n_c_k) with n_c_k = gamma_k^2 / (8 g_k^2).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .ensemble import Mode, TlsEnsemble, evolve
from .errors import ConfigurationError
from .model import DeviceParams, rms_field
from .rng import substream
from .units import HBAR, PLANCK_H, dipole_si

__all__ = [
    "SpectrumGrid",
    "SweepConfig",
    "s21_trace",
    "voltage_sweep",
    "photon_number",
    "drive_power",
    "loss_tangent",
    "LossCurve",
    "power_sweep",
    "CHI_CUTOFF_HZ",
]

# Defects farther than this from the probe band contribute a negligible
# Lorentzian tail and are skipped in the susceptibility sum.
CHI_CUTOFF_HZ = 2e8


@dataclass
class SpectrumGrid:
    """Bias-swept transmission map: s21[i_bias, j_freq].

    freqs and biases are strictly monotone axes; trace_time_s is the
    wall time per trace and timestamps() gives each trace's start time.
    meta carries device/sweep descriptors for provenance.
    """

    freqs: np.ndarray
    biases: np.ndarray
    s21: np.ndarray
    trace_time_s: float
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if self.s21.shape != (self.biases.size, self.freqs.size):
            raise ConfigurationError(
                f"s21 shape {self.s21.shape} != (n_bias, n_freq) "
                f"({self.biases.size}, {self.freqs.size})"
            )
        for name, ax in (("freqs", self.freqs), ("biases", self.biases)):
            d = np.diff(ax)
            if ax.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
                raise ConfigurationError(f"{name} axis must be strictly monotone")
        if self.trace_time_s <= 0:
            raise ConfigurationError("trace_time_s must be positive")

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.s21)

    def timestamps(self) -> np.ndarray:
        return self.t0 + self.trace_time_s * np.arange(self.biases.size)

    def magnitude_db(self) -> np.ndarray:
        """20 log10 |S21|, the representation the extraction chain works on."""
        return 20.0 * np.log10(np.abs(self.s21))


@dataclass(frozen=True)
class SweepConfig:
    """Bias-sweep definition.

    Defaults follow the standard long scan: 0-50 mV in 100 uV steps,
    6-minute traces, probing a 12 MHz band around the resonator. n_bar
    is the mean drive photon number entering the saturation factor
    (0 = unsaturated spectroscopy); noise_sd is the complex-Gaussian
    noise on linear S21 per quadrature.
    """

    v_start: float = 0.0
    v_stop: float = 50e-3
    v_step: float = 100e-6
    f_center: float = 4.2e9
    f_span: float = 12e6
    f_points: int = 1001
    trace_time_s: float = 360.0
    n_bar: float = 0.0
    noise_sd: float = 0.002
    seed: int = 0
    jitter_substeps: int = 6
    phase_delay_s: float = 0.0

    def __post_init__(self):
        if self.v_step <= 0:
            raise ConfigurationError("v_step must be positive")
        if self.v_stop <= self.v_start:
            raise ConfigurationError("v_stop must exceed v_start")
        if self.f_points < 2:
            raise ConfigurationError("f_points must be >= 2")
        if self.f_span <= 0 or self.f_center <= 0:
            raise ConfigurationError("frequency window must be positive")
        if self.n_bar < 0:
            raise ConfigurationError("n_bar must be >= 0")
        if self.noise_sd < 0:
            raise ConfigurationError("noise_sd must be >= 0")
        if self.trace_time_s <= 0:
            raise ConfigurationError("trace_time_s must be positive")
        if self.jitter_substeps < 1:
            raise ConfigurationError("jitter_substeps must be >= 1")

    def freq_axis(self) -> np.ndarray:
        return np.linspace(
            self.f_center - self.f_span / 2.0,
            self.f_center + self.f_span / 2.0,
            self.f_points,
        )

    def bias_axis(self) -> np.ndarray:
        n = int(math.floor((self.v_stop - self.v_start) / self.v_step + 1e-9)) + 1
        return self.v_start + self.v_step * np.arange(n)

    def to_dict(self) -> dict:
        return {
            "v_start": self.v_start,
            "v_stop": self.v_stop,
            "v_step": self.v_step,
            "f_center": self.f_center,
            "f_span": self.f_span,
            "f_points": self.f_points,
            "trace_time_s": self.trace_time_s,
            "n_bar": self.n_bar,
            "noise_sd": self.noise_sd,
            "seed": self.seed,
            "jitter_substeps": self.jitter_substeps,
            "phase_delay_s": self.phase_delay_s,
        }


def _chi_terms(device: DeviceParams, ens: TlsEnsemble, v_g: float, n_bar: float, freqs):
    """Per-defect (nu, saturated g^2, gamma) arrays for the near-resonant subset."""
    empty = (np.empty(0), np.empty(0), np.empty(0))
    if len(ens) == 0:
        return empty
    p_si = dipole_si(ens.p_z)
    x = ens.delta - p_si * v_g / (device.d0 * PLANCK_H)
    nu_static = np.hypot(ens.delta0, x)
    nu = nu_static + ens.offsets
    near = np.abs(nu - device.f_c) <= CHI_CUTOFF_HZ + 0.5 * abs(freqs[-1] - freqs[0])
    if not np.any(near):
        return empty
    nu = nu[near]
    gamma = ens.gamma[near]
    # matrix-element-suppressed coupling: g * delta0 / f, with g = p E_rms / hbar
    g_bare = p_si[near] * rms_field(device) / HBAR / (2.0 * math.pi)
    g_eff = g_bare * ens.delta0[near] / nu_static[near]
    geff2 = g_eff**2
    if n_bar > 0:
        n_c = gamma**2 / (8.0 * geff2)
        geff2 = geff2 / (1.0 + n_bar / n_c)
    return nu, geff2, gamma


def s21_trace(
    freqs,
    device: DeviceParams,
    ens: TlsEnsemble,
    v_g: float,
    n_bar: float = 0.0,
    noise_sd: float = 0.0,
    rng: np.random.Generator | None = None,
    phase_delay_s: float = 0.0,
) -> np.ndarray:
    """Complex transmission over `freqs` for one fixed-bias trace.

    The ensemble snapshot is frozen for the trace; time averaging of a
    jittering ensemble is handled by `voltage_sweep` through sub-trace
    evolution.
    """
    freqs = np.asarray(freqs, dtype=float)
    ql = device.q_loaded
    nu, geff2, gamma = _chi_terms(device, ens, v_g, n_bar, freqs)
    chi = (2.0 * ql / device.f_c) * kernels.tls_susceptibility(freqs, nu, geff2, gamma)
    denom = 1.0 + 2j * ql * (freqs - device.f_c) / device.f_c + chi
    s21 = 1.0 - (ql / device.q_c) / denom
    if phase_delay_s:
        s21 = s21 * np.exp(-2j * math.pi * freqs * phase_delay_s)
    if noise_sd > 0.0:
        if rng is None:
            raise ConfigurationError("noise requested but no rng given")
        s21 = s21 + noise_sd * (
            rng.standard_normal(freqs.size) + 1j * rng.standard_normal(freqs.size)
        )
    return s21


def voltage_sweep(device: DeviceParams, ens: TlsEnsemble, cfg: SweepConfig):
    """Run a bias sweep and return (SpectrumGrid, ensemble after sweep).

    Traces are taken in bias order and the ensemble clock advances by
    trace_time_s per trace. Steady ensembles give a time-independent
    grid (each trace is a pure function of its bias and its own noise
    substream, so traces could be computed in any order); jittering
    ensembles are evolved through `jitter_substeps` sub-intervals per
    trace and the trace is the time average, which makes the sweep
    inherently sequential.
    """
    freqs = cfg.freq_axis()
    biases = cfg.bias_axis()
    s21 = np.empty((biases.size, freqs.size), dtype=np.complex128)
    t0 = ens.clock
    for i, v in enumerate(biases):
        rng = substream(cfg.seed, "noise", i)
        if ens.mode == Mode.JITTER:
            acc = np.zeros(freqs.size, dtype=np.complex128)
            sub_dt = cfg.trace_time_s / cfg.jitter_substeps
            for _ in range(cfg.jitter_substeps):
                acc += s21_trace(
                    freqs, device, ens, v, cfg.n_bar, 0.0, None, cfg.phase_delay_s
                )
                ens = evolve(ens, sub_dt)
            trace = acc / cfg.jitter_substeps
            if cfg.noise_sd > 0:
                trace = trace + cfg.noise_sd * (
                    rng.standard_normal(freqs.size) + 1j * rng.standard_normal(freqs.size)
                )
        else:
            trace = s21_trace(
                freqs, device, ens, v, cfg.n_bar, cfg.noise_sd, rng, cfg.phase_delay_s
            )
            ens = evolve(ens, cfg.trace_time_s)
        s21[i] = trace
    grid = SpectrumGrid(
        freqs=freqs,
        biases=biases,
        s21=s21,
        trace_time_s=cfg.trace_time_s,
        t0=t0,
        meta={"device": device.to_dict(), "sweep": cfg.to_dict()},
    )
    return grid, ens


def photon_number(p_applied_w: float, device: DeviceParams) -> float:
    """Steady-state mean photon number for applied power P (W).

    n = 2 P Q_l^2 / (Q_c hbar omega_c^2).
    """
    if p_applied_w < 0:
        raise ConfigurationError("power must be >= 0")
    ql = device.q_loaded
    return 2.0 * p_applied_w * ql**2 / (device.q_c * HBAR * device.omega_c**2)


def drive_power(n_bar: float, device: DeviceParams) -> float:
    """Inverse of photon_number: power (W) giving mean photon number n_bar."""
    if n_bar < 0:
        raise ConfigurationError("n_bar must be >= 0")
    ql = device.q_loaded
    return n_bar * device.q_c * HBAR * device.omega_c**2 / (2.0 * ql**2)


def loss_tangent(n_bar, tan0_tls: float, n_c: float, tan_e: float):
    """Power-saturating loss: tan0 / sqrt(1 + n/n_c) + tan_e."""
    return tan0_tls / np.sqrt(1.0 + np.asarray(n_bar, dtype=float) / n_c) + tan_e


@dataclass
class LossCurve:
    """(photon number, loss tangent) samples from a power sweep."""

    n_bar: np.ndarray
    tan_delta: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n_bar = np.asarray(self.n_bar, dtype=float)
        self.tan_delta = np.asarray(self.tan_delta, dtype=float)
        if self.n_bar.shape != self.tan_delta.shape:
            raise ConfigurationError("n_bar and tan_delta must have equal length")


def power_sweep(
    device: DeviceParams,
    loss_truth: tuple,
    n_bar_grid,
    noise_frac: float = 0.0,
    rng: np.random.Generator | None = None,
) -> LossCurve:
    """Synthesize a loss-tangent power sweep from (tan0, n_c, tan_e) truth.

    Multiplicative Gaussian noise of fractional sd `noise_frac` is
    applied per point. Used to exercise the saturation-curve fitter.
    """
    n_bar_grid = np.asarray(n_bar_grid, dtype=float)
    if n_bar_grid.size and (np.any(n_bar_grid <= 0) or np.any(np.diff(n_bar_grid) <= 0)):
        raise ConfigurationError("n_bar grid must be positive and ascending")
    tan0, n_c, tan_e = loss_truth
    tan = loss_tangent(n_bar_grid, tan0, n_c, tan_e)
    if noise_frac > 0.0:
        if rng is None:
            raise ConfigurationError("noise requested but no rng given")
        tan = tan * (1.0 + noise_frac * rng.standard_normal(n_bar_grid.size))
    return LossCurve(n_bar_grid, tan, meta={"truth": list(loss_truth), "noise_frac": noise_frac})
