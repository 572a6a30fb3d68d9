"""Grid analysis: extraction chain + ridge fitting + statistics.

Composes the pipeline stages on a spectrum grid, extracts one ridge
trace per region of interest (per-trace subpixel peak localization
within the region's bias slab), fits hyperbolas, gates them on fit
residual, deduplicates, and assembles dipole/density statistics and
per-trace crossing events into a GridAnalysis.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import pipeline as pl
from .config import AnalysisConfig
from .density import DensityEstimate, DipoleStats, dipole_stats, tls_density
from .errors import NoEligibleTlsError, UnfittableRoiError
from .fitting import HyperbolaFit, crossing_rate, detect_crossings, fit_hyperbola
from .model import DeviceParams
from .simulate import SpectrumGrid

__all__ = ["GridAnalysis", "analyze_grid", "track_ridge"]


@dataclass
class GridAnalysis:
    """Everything extracted from one grid."""

    fits: list
    rejected_fits: list
    crossings: list
    crossing_rate: float
    dipoles: DipoleStats | None
    density: DensityEstimate
    band: tuple
    v_range: tuple
    n_rois: int

    @property
    def n_hyperbolas(self) -> int:
        return len(self.fits)

    def to_dict(self) -> dict:
        return {
            "n_rois": self.n_rois,
            "n_hyperbolas": self.n_hyperbolas,
            "fits": [f.to_dict() for f in self.fits],
            "n_rejected_fits": len(self.rejected_fits),
            "crossings": [c.to_dict() for c in self.crossings],
            "crossing_rate": self.crossing_rate,
            "dipoles": None if self.dipoles is None else self.dipoles.to_dict(),
            "density": self.density.to_dict(),
            "band": list(self.band),
            "v_range": list(self.v_range),
        }


def _refine_col(row: np.ndarray, j: int) -> float:
    """Subpixel column of a row maximum via a 3-point parabola."""
    if j <= 0 or j >= row.size - 1:
        return float(j)
    denom = row[j - 1] - 2.0 * row[j] + row[j + 1]
    if denom == 0.0:
        return float(j)
    return j + float(np.clip(0.5 * (row[j - 1] - row[j + 1]) / denom, -1.0, 1.0))


def track_ridge(
    pg: pl.ProcessedGrid,
    i_seed: int,
    j_seed: int,
    gate: float,
    base_window_px: int = 12,
    max_window_px: int = 80,
):
    """Follow one intensity ridge outward from a seed pixel.

    Starting at (i_seed, j_seed), walks the bias rows in both
    directions. Each step predicts the next column from the last two
    accepted positions (ridges curve away quadratically, so a linear
    extrapolation with a widening search window tracks the arms) and
    accepts the local maximum inside the window if it clears `gate`.
    The walk stops at the first sub-gate row, which keeps unrelated
    features elsewhere in the row from contaminating the trace.

    Returns (biases, frequencies) of the accepted ridge samples.
    """
    values = pg.values
    n_rows, n_cols = values.shape
    f_step = pg.freqs[1] - pg.freqs[0] if n_cols > 1 else 0.0
    samples = {}

    def walk(direction: int):
        prev = float(j_seed)
        prev_prev = None
        i = i_seed + direction
        while 0 <= i < n_rows:
            drift = 0.0 if prev_prev is None else prev - prev_prev
            center = prev + drift
            window = base_window_px + int(np.ceil(1.5 * abs(drift)))
            window = min(window, max_window_px)
            lo = int(np.clip(np.floor(center - window), 0, n_cols - 1))
            hi = int(np.clip(np.ceil(center + window), 0, n_cols - 1))
            if hi <= lo:
                break
            row = values[i, lo : hi + 1]
            j = lo + int(np.argmax(row))
            if values[i, j] < gate:
                break
            col = _refine_col(values[i], j)
            samples[i] = col
            prev_prev = prev
            prev = col
            i += direction

    if not (0 <= i_seed < n_rows and 0 <= j_seed < n_cols):
        return np.empty(0), np.empty(0)
    if values[i_seed, j_seed] >= gate:
        samples[i_seed] = _refine_col(values[i_seed], j_seed)
        walk(+1)
        walk(-1)
    rows = sorted(samples)
    vs = np.array([pg.biases[i] for i in rows])
    fs = np.array([pg.freqs[0] + samples[i] * f_step for i in rows])
    return vs, fs


def _noise_scale(values: np.ndarray) -> float:
    """Robust per-pixel noise level.

    Uses the 25th percentile of absolute deviations (scaled to sigma
    for a Gaussian) rather than the median, so the estimate stays in
    the noise bulk even when defect features cover a sizable fraction
    of the grid.
    """
    med = np.median(values)
    q25 = float(np.percentile(np.abs(values - med), 25.0))
    return q25 / 0.3186


def analyze_grid(
    grid: SpectrumGrid,
    device: DeviceParams,
    cfg: AnalysisConfig | None = None,
) -> GridAnalysis:
    """Run the full extraction chain on one grid."""
    cfg = cfg if cfg is not None else AnalysisConfig()
    band = (float(grid.freqs.min()), float(grid.freqs.max()))
    v_range = (float(grid.biases.min()), float(grid.biases.max()))

    cleaned = pl.remove_background(pl.to_db(grid))
    smoothed = pl.smooth(cleaned, cfg.smooth_sigma_px)
    grad = pl.gradient_magnitude(smoothed)
    mask = pl.segment(
        grad,
        method="threshold",
        percentile=cfg.threshold_percentile,
        min_px=cfg.min_component_px,
    )
    rois = pl.extract_rois(mask, pad_px=cfg.pad_px)

    # Track one ridge per connected component, seeded at its brightest
    # pixel; duplicate tracks from fragments of one defect collapse in
    # the dedupe step. (The merged ROIs are kept for reporting.)
    gate = cfg.ridge_gate_sigmas * _noise_scale(smoothed.values)
    fits, rejected = [], []
    for k, comp in enumerate(mask.components):
        pix = comp.pixels
        bright = int(np.argmax(smoothed.values[pix[:, 0], pix[:, 1]]))
        i_seed, j_seed = int(pix[bright, 0]), int(pix[bright, 1])
        v, f = track_ridge(
            smoothed,
            i_seed,
            j_seed,
            gate,
            base_window_px=cfg.ridge_window_px,
            max_window_px=cfg.ridge_max_window_px,
        )
        try:
            fit = fit_hyperbola(v, f, device.d0, roi_id=k)
        except UnfittableRoiError:
            continue
        (fits if fit.residual_rms <= cfg.max_residual_hz else rejected).append(fit)
    fits = _dedupe_fits(fits, cfg.dedupe_dv, cfg.dedupe_df)

    crossings = []
    for i in range(len(grid.biases)):
        crossings.extend(
            detect_crossings(
                cleaned.values[i],
                cleaned.freqs,
                min_split=cfg.min_split_hz,
                min_depth=cfg.min_depth_db,
                trace_index=i,
                bias=float(grid.biases[i]),
            )
        )
    rate = crossing_rate(cleaned, events=crossings)

    try:
        dip = dipole_stats(fits, band)
    except NoEligibleTlsError:
        dip = None
    density = tls_density(
        fits,
        device,
        band,
        v_range,
        n_bins=cfg.density_n_bins,
        calibration=cfg.density_calibration,
    )
    return GridAnalysis(
        fits=fits,
        rejected_fits=rejected,
        crossings=crossings,
        crossing_rate=rate,
        dipoles=dip,
        density=density,
        band=band,
        v_range=v_range,
        n_rois=len(rois),
    )


def _dedupe_fits(fits: list, dv: float, df: float) -> list:
    """Collapse duplicate detections of one defect, keeping the best fit."""
    kept = []
    for f in sorted(fits, key=lambda f: f.residual_rms):
        dup = any(
            abs(f.v_vertex - g.v_vertex) <= dv and abs(f.delta0_hz - g.delta0_hz) <= df
            for g in kept
        )
        if not dup:
            kept.append(f)
    kept.sort(key=lambda f: f.v_vertex)
    return kept
