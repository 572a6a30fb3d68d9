"""Dipole statistics, defect density, and loss-tangent estimation.

The density estimator counts fitted hyperbolas whose vertex frequency
(delta0) lies inside the measurement band and normalizes by oxide
volume and bandwidth, times a calibration constant frozen against
round-trip simulation (see config). Its uncertainty follows the binned
recipe: split the band into bins, take the standard deviation of the
per-bin counts, and scale by sqrt(n_bins) to the total count.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import ConfigurationError, NoEligibleTlsError
from .model import DeviceParams
from .simulate import loss_tangent
from .units import PLANCK_H, dipole_si

__all__ = [
    "DipoleStats",
    "DensityEstimate",
    "LossFit",
    "eligible_fits",
    "dipole_stats",
    "tls_density",
    "loss_from_density",
    "fit_loss_curve",
    "t1_from_nc",
    "crossing_density_estimate",
]


@dataclass
class DipoleStats:
    """Histogram and moments of eligible dipole projections (e*A)."""

    bin_edges: np.ndarray
    counts: np.ndarray
    mean: float
    sd: float
    n: int

    def to_dict(self) -> dict:
        return {
            "bin_edges": self.bin_edges.tolist(),
            "counts": self.counts.tolist(),
            "mean": self.mean,
            "sd": self.sd,
            "n": self.n,
        }


@dataclass
class DensityEstimate:
    """Defect density in count / (um^3 GHz) with binned uncertainty."""

    rho: float
    sigma_rho: float
    n_bins: int
    band: tuple
    n_eligible: int
    calibration: float

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "sigma_rho": self.sigma_rho,
            "n_bins": self.n_bins,
            "band": list(self.band),
            "n_eligible": self.n_eligible,
            "calibration": self.calibration,
        }


@dataclass
class LossFit:
    """Fitted saturation curve: tan0 / sqrt(1 + n/n_c) + tan_e."""

    tan0_tls: float
    n_c: float
    tan_e: float
    covariance: np.ndarray
    residual_rms: float

    @property
    def tan0_sd(self) -> float:
        return math.sqrt(max(self.covariance[0, 0], 0.0))

    @property
    def n_c_sd(self) -> float:
        return math.sqrt(max(self.covariance[1, 1], 0.0))

    def to_dict(self) -> dict:
        return {
            "tan0_tls": self.tan0_tls,
            "n_c": self.n_c,
            "tan_e": self.tan_e,
            "covariance": self.covariance.tolist(),
            "residual_rms": self.residual_rms,
        }


def eligible_fits(fits: list, band: tuple) -> list:
    """Fits counted toward density: vertex frequency inside the band.

    The same filter feeds dipole_stats and tls_density so both always
    see the same defect set.
    """
    lo, hi = band
    if not lo < hi:
        raise ConfigurationError("band must be ordered")
    return [f for f in fits if lo <= f.delta0_hz <= hi]


def dipole_stats(
    fits: list,
    band: tuple,
    bin_width: float = 0.05,
    support: tuple = (0.0, 1.0),
) -> DipoleStats:
    """Histogram and mean/sd of dipole projections for eligible fits."""
    kept = eligible_fits(fits, band)
    if not kept:
        raise NoEligibleTlsError("no fits with vertex frequency inside the band")
    p = np.array([f.p_z for f in kept])
    n_bins = max(int(round((support[1] - support[0]) / bin_width)), 1)
    counts, edges = np.histogram(p, bins=n_bins, range=support)
    return DipoleStats(
        bin_edges=edges,
        counts=counts,
        mean=float(p.mean()),
        sd=float(p.std(ddof=1)) if p.size > 1 else 0.0,
        n=int(p.size),
    )


def tls_density(
    fits: list,
    device: DeviceParams,
    band: tuple,
    v_range: tuple | None = None,
    n_bins: int = 6,
    calibration: float = 1.0,
) -> DensityEstimate:
    """Defect density rho = C * N_eligible / (V_T * bandwidth).

    Uncertainty comes from the spread of per-bin vertex counts across
    the band: sigma_N = sd(bin counts) * sqrt(n_bins). With zero
    eligible fits the estimate is 0 with a one-count Poisson scale.
    v_range is recorded for provenance only.
    """
    lo, hi = band
    kept = eligible_fits(fits, band)
    v_um3 = device.v_total * 1e18
    bw_ghz = (hi - lo) / 1e9
    scale = calibration / (v_um3 * bw_ghz)
    n = len(kept)
    if n == 0:
        return DensityEstimate(0.0, scale, n_bins, band, 0, calibration)
    delta0 = np.array([f.delta0_hz for f in kept])
    counts, _ = np.histogram(delta0, bins=n_bins, range=(lo, hi))
    sigma_n = float(np.std(counts, ddof=1)) * math.sqrt(n_bins) if n_bins > 1 else math.sqrt(n)
    sigma_n = max(sigma_n, math.sqrt(n))  # never report below Poisson
    return DensityEstimate(
        rho=scale * n,
        sigma_rho=scale * sigma_n,
        n_bins=n_bins,
        band=band,
        n_eligible=n,
        calibration=calibration,
    )


def loss_from_density(rho: float, p_stats, device: DeviceParams) -> float:
    """Low-power loss tangent from density: pi P0 <|p|^2> / (3 eps).

    rho is in count / (um^3 GHz); <|p|^2> = 3 <p_z^2> under the
    isotropic-orientation assumption, with <p_z^2> = mean^2 + sd^2 from
    the dipole statistics (sd = 0 when only a mean is known).
    """
    if rho < 0:
        raise ConfigurationError("rho must be >= 0")
    mean = p_stats.mean if hasattr(p_stats, "mean") else float(p_stats)
    sd = getattr(p_stats, "sd", 0.0)
    p0_si = rho * 1e18 / (1e9 * PLANCK_H)  # per m^3 per joule
    pz2 = dipole_si(mean) ** 2 + dipole_si(sd) ** 2
    return math.pi * p0_si * 3.0 * pz2 / (3.0 * device.eps)


def fit_loss_curve(curve, min_decades: float = 2.0) -> LossFit:
    """Nonlinear least squares of the saturation law to a power sweep.

    Initialization: tan_e = min(tan), tan0 = max - min, n_c at the
    half-drop point. Data spanning fewer than `min_decades` decades of
    photon number triggers an ill-conditioning warning and an inflated
    covariance.
    """
    n = np.asarray(curve.n_bar, dtype=float)
    tan = np.asarray(curve.tan_delta, dtype=float)
    if n.size < 5:
        raise ConfigurationError("loss fit needs at least 5 points")
    if np.any(n <= 0):
        raise ConfigurationError("photon numbers must be positive")
    span_ok = math.log10(n.max() / n.min()) >= min_decades
    tan_e0 = float(tan.min())
    tan00 = max(float(tan.max() - tan.min()), 1e-12)
    half = tan_e0 + tan00 / 2.0
    below = np.nonzero(tan <= half)[0]
    nc0 = float(n[below[0]]) if below.size else float(np.median(n))

    def residuals(x):
        return loss_tangent(n, x[0], x[1], x[2]) - tan

    res = least_squares(
        residuals,
        x0=[tan00, nc0, tan_e0],
        bounds=([0.0, 1e-300, 0.0], [np.inf, np.inf, np.inf]),
        x_scale=[max(tan00, 1e-6), max(nc0, 1e-6), max(tan_e0, 1e-6)],
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=5000,
    )
    jac = res.jac
    dof = max(n.size - 3, 1)
    s2 = float(res.fun @ res.fun) / dof
    try:
        cov = np.linalg.inv(jac.T @ jac) * s2
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jac.T @ jac) * s2
    if not span_ok:
        warnings.warn(
            "photon-number span below "
            f"{min_decades:g} decades; loss fit is ill-conditioned", stacklevel=2
        )
        cov = cov * 100.0
    return LossFit(
        tan0_tls=float(res.x[0]),
        n_c=float(res.x[1]),
        tan_e=float(res.x[2]),
        covariance=cov,
        residual_rms=float(np.sqrt(np.mean(res.fun**2))),
    )


def t1_from_nc(n_c: float, g_hz: float) -> float:
    """Defect relaxation time from the critical photon number (s).

    Uses n_c = 1 / (4 g_ang^2 T1 T2) with T2 = 2 T1 and g_ang = 2 pi
    g_hz, giving T1 = 1 / (2 pi g_hz sqrt(8 n_c)). Conventions differ
    by O(1) factors; treat the result as an order-of-magnitude scale.
    """
    if n_c <= 0 or g_hz <= 0:
        raise ConfigurationError("n_c and g_hz must be positive")
    return 1.0 / (2.0 * math.pi * g_hz * math.sqrt(8.0 * n_c))


def crossing_density_estimate(
    reference_rho: float, rate: float, reference_rate: float
) -> float:
    """Density inferred from transient-crossing statistics.

    Scales a hyperbola-derived reference density by the ratio of the
    observed crossings-per-trace to the reference occupancy per trace.
    """
    if reference_rate <= 0:
        raise ConfigurationError("reference rate must be positive")
    return reference_rho * rate / reference_rate
