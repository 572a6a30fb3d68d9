"""Hyperbola fitting and single-trace avoided-crossing detection.

Fits work in physical (bias, frequency) coordinates with the model

    f(V) = sqrt(delta0^2 + (p_z e A (V - v_vertex) / (d0 h))^2)

using robust (soft-L1) nonlinear least squares, since segmentation
masks contain wall pixels on both sides of a ridge. Crossing detection
finds double-minimum signatures in single background-removed traces.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import argrelextrema

from .errors import ConfigurationError, UnfittableRoiError
from .units import PLANCK_H, dipole_si

__all__ = [
    "HyperbolaFit",
    "CrossingEvent",
    "hyperbola_frequency",
    "fit_hyperbola",
    "detect_crossings",
    "crossing_rate",
    "hyperbola_occupancy",
    "MIN_SPLIT_HZ",
    "MIN_DEPTH_DB",
]

MIN_SPLIT_HZ = 0.4e6
MIN_DEPTH_DB = 1.0

MIN_PIXELS = 8
MIN_DISTINCT_BIASES = 3


@dataclass
class HyperbolaFit:
    """Fitted defect parameters with Gauss-Newton covariance.

    Parameter order in `covariance` is (delta0_hz, v_vertex, p_z).
    """

    delta0_hz: float
    v_vertex: float
    p_z: float
    residual_rms: float
    covariance: np.ndarray
    roi_id: int = -1
    n_pixels: int = 0

    @property
    def delta0_sd(self) -> float:
        return math.sqrt(max(self.covariance[0, 0], 0.0))

    @property
    def p_z_sd(self) -> float:
        return math.sqrt(max(self.covariance[2, 2], 0.0))

    @property
    def delta0_rel_err(self) -> float:
        return self.delta0_sd / self.delta0_hz

    @property
    def poorly_constrained(self) -> bool:
        """Vertex outside the data or delta0 uncertain beyond 50 percent."""
        return not np.isfinite(self.delta0_rel_err) or self.delta0_rel_err > 0.5

    def to_dict(self) -> dict:
        return {
            "delta0_hz": self.delta0_hz,
            "v_vertex": self.v_vertex,
            "p_z": self.p_z,
            "residual_rms_hz": self.residual_rms,
            "covariance": self.covariance.tolist(),
            "roi_id": self.roi_id,
            "n_pixels": self.n_pixels,
            "poorly_constrained": bool(self.poorly_constrained),
        }


@dataclass
class CrossingEvent:
    """One double-minimum signature in a single trace."""

    trace_index: int
    bias: float
    center_f: float
    splitting: float
    depth_db: float

    def to_dict(self) -> dict:
        return {
            "trace_index": self.trace_index,
            "bias": self.bias,
            "center_f_hz": self.center_f,
            "splitting_hz": self.splitting,
            "depth_db": self.depth_db,
        }


def hyperbola_frequency(v, delta0_hz: float, v_vertex: float, p_z: float, d0: float):
    """Model frequency along the hyperbola (Hz); v may be an array."""
    slope = dipole_si(p_z) / (d0 * PLANCK_H)  # Hz per volt
    return np.sqrt(delta0_hz**2 + (slope * (np.asarray(v, dtype=float) - v_vertex)) ** 2)


def fit_hyperbola(
    v_coords,
    f_coords,
    d0: float,
    init: tuple | None = None,
    roi_id: int = -1,
    robust_f_scale: float = 0.5e6,
) -> HyperbolaFit:
    """Robust least-squares fit of (delta0, v_vertex, p_z) to ROI pixels.

    v_coords/f_coords are the pixel coordinates in volts and Hz.
    `init` optionally overrides the automatic initialization (vertex at
    the minimum-frequency pixel, dipole from a two-point secant on the
    arms). Raises UnfittableRoiError for degenerate point sets.
    """
    v = np.asarray(v_coords, dtype=float)
    f = np.asarray(f_coords, dtype=float)
    if v.shape != f.shape or v.ndim != 1:
        raise ConfigurationError("v_coords and f_coords must be 1-D and equal length")
    if v.size < MIN_PIXELS:
        raise UnfittableRoiError(f"only {v.size} pixels (need >= {MIN_PIXELS})")
    if np.unique(v).size < MIN_DISTINCT_BIASES:
        raise UnfittableRoiError(
            f"only {np.unique(v).size} distinct biases (need >= {MIN_DISTINCT_BIASES})"
        )
    if init is None:
        init = _initial_guess(v, f, d0)
    delta0_0, vv_0, pz_0 = init
    if pz_0 <= 0:
        raise UnfittableRoiError("arm slope indistinguishable from zero")

    v_span = float(v.max() - v.min())

    def residuals(x):
        return hyperbola_frequency(v, x[0], x[1], x[2], d0) - f

    res = least_squares(
        residuals,
        x0=[delta0_0, vv_0, pz_0],
        loss="soft_l1",
        f_scale=robust_f_scale,
        x_scale=[max(delta0_0, 1e6), max(v_span, 1e-4), max(pz_0, 0.05)],
        bounds=([1.0, -np.inf, 1e-6], [np.inf, np.inf, np.inf]),
        max_nfev=2000,
    )
    if not res.success:
        raise UnfittableRoiError(f"optimizer failed: {res.message}")
    cov = _gauss_newton_covariance(res.jac, res.fun, n_params=3)
    raw = residuals(res.x)
    return HyperbolaFit(
        delta0_hz=float(res.x[0]),
        v_vertex=float(res.x[1]),
        p_z=float(res.x[2]),
        residual_rms=float(np.sqrt(np.mean(raw**2))),
        covariance=cov,
        roi_id=roi_id,
        n_pixels=int(v.size),
    )


def _initial_guess(v: np.ndarray, f: np.ndarray, d0: float) -> tuple:
    i_min = int(np.argmin(f))
    vv_0 = float(v[i_min])
    delta0_0 = max(float(f[i_min]), 1.0)
    # secant slope over each arm; take the steeper side
    slopes = []
    for side in (v < vv_0, v > vv_0):
        if np.count_nonzero(side) >= 1:
            j = int(np.argmax(np.abs(v - vv_0) * side))
            dv = v[j] - vv_0
            if dv != 0.0:
                slopes.append(abs((f[j] - f[i_min]) / dv))
    slope = max(slopes) if slopes else 0.0
    pz_0 = slope * d0 * PLANCK_H / dipole_si(1.0)
    if pz_0 <= 0.0:
        # vertex at the window edge (arm-only ROI): secant over the full set
        order = np.argsort(v)
        dv = v[order[-1]] - v[order[0]]
        if dv > 0:
            slope = abs((f[order[-1]] - f[order[0]]) / dv)
            pz_0 = slope * d0 * PLANCK_H / dipole_si(1.0)
    return delta0_0, vv_0, max(pz_0, 1e-6)


def _gauss_newton_covariance(jac: np.ndarray, fun: np.ndarray, n_params: int) -> np.ndarray:
    m = fun.size
    dof = max(m - n_params, 1)
    s2 = float(fun @ fun) / dof
    jtj = jac.T @ jac
    try:
        cov = np.linalg.inv(jtj) * s2
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj) * s2
        cov[np.diag_indices_from(cov)] = np.maximum(np.diag(cov), 1e12)
    return cov


def detect_crossings(
    trace_db,
    freqs,
    min_split: float = MIN_SPLIT_HZ,
    min_depth: float = MIN_DEPTH_DB,
    trace_index: int = 0,
    bias: float = 0.0,
) -> list:
    """Double-minimum signatures in one background-removed dB trace.

    Adjacent local minima separated by at least min_split, whose
    intervening maximum rises at least min_depth above both, become
    CrossingEvents; overlapping candidates are deduplicated keeping the
    deepest. Minima positions are refined by parabolic interpolation.
    """
    trace = np.asarray(trace_db, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    if trace.shape != freqs.shape:
        raise ConfigurationError("trace and frequency axis must have equal length")
    minima = argrelextrema(trace, np.less)[0]
    if minima.size < 2:
        return []
    candidates = []
    for a, b in zip(minima[:-1], minima[1:]):
        k_max = a + int(np.argmax(trace[a : b + 1]))
        depth = min(trace[k_max] - trace[a], trace[k_max] - trace[b])
        f_a = _refine_extremum(trace, freqs, a)
        f_b = _refine_extremum(trace, freqs, b)
        split = abs(f_b - f_a)
        if split >= min_split and depth >= min_depth:
            candidates.append((depth, a, b, f_a, f_b, k_max))
    events = []
    used = set()
    for depth, a, b, f_a, f_b, k_max in sorted(candidates, reverse=True):
        if a in used or b in used:
            continue
        used.update((a, b))
        events.append(
            CrossingEvent(
                trace_index=trace_index,
                bias=bias,
                center_f=float(_refine_extremum(-trace, freqs, k_max)) if 0 < k_max < trace.size - 1 else float(freqs[k_max]),
                splitting=float(abs(f_b - f_a)),
                depth_db=float(depth),
            )
        )
    events.sort(key=lambda e: e.center_f)
    return events


def _refine_extremum(trace: np.ndarray, freqs: np.ndarray, i: int) -> float:
    """Sub-bin extremum position via a parabola through three points."""
    if i <= 0 or i >= trace.size - 1:
        return float(freqs[i])
    y0, y1, y2 = trace[i - 1], trace[i], trace[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0.0:
        return float(freqs[i])
    shift = 0.5 * (y0 - y2) / denom
    step = freqs[min(i + 1, freqs.size - 1)] - freqs[i]
    return float(freqs[i] + np.clip(shift, -1.0, 1.0) * step)


def crossing_rate(
    pg,
    min_split: float = MIN_SPLIT_HZ,
    min_depth: float = MIN_DEPTH_DB,
    events: list | None = None,
) -> float:
    """Detected crossings per trace over a processed grid.

    With `events` given, just divides the event count by the number of
    traces; otherwise runs detect_crossings on every trace of the
    (background-removed) grid.
    """
    n_traces = len(pg.biases)
    if n_traces == 0:
        raise ConfigurationError("grid has no traces")
    if events is None:
        events = []
        for i in range(n_traces):
            events.extend(
                detect_crossings(
                    pg.values[i],
                    pg.freqs,
                    min_split=min_split,
                    min_depth=min_depth,
                    trace_index=i,
                    bias=float(pg.biases[i]),
                )
            )
    return len(events) / n_traces


def hyperbola_occupancy(n_tls: float, mean_width_v: float, v_range_v: float) -> float:
    """Expected visible defects per trace: n_tls * mean_width / v_range.

    Assumes non-overlapping features; values above 1 are clamped with a
    warning since the linear estimate breaks down there.
    """
    if n_tls < 0 or mean_width_v <= 0 or v_range_v <= 0:
        raise ConfigurationError("occupancy arguments must be positive")
    p = n_tls * mean_width_v / v_range_v
    if p > 1.0:
        warnings.warn("occupancy exceeds 1; clamped (overlapping-feature regime)")
        return 1.0
    return p
