"""Image-processing chain: spectrum grid -> candidate feature pixel sets.

Stages operate on the dB magnitude of a SpectrumGrid and preserve its
axes: background removal (bias-average then frequency-average
subtraction), 1-D Gaussian smoothing along frequency, gradient
magnitude in array coordinates, segmentation into connected
components, and ROI extraction with box merging. Each ProcessedGrid
records the exact chain applied in its stage tag.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, UntrainedClassifierError
from .simulate import SpectrumGrid

__all__ = [
    "ProcessedGrid",
    "FeatureMask",
    "Component",
    "Roi",
    "to_db",
    "remove_background",
    "smooth",
    "gradient_magnitude",
    "segment",
    "PixelClassifier",
    "extract_rois",
]


@dataclass
class ProcessedGrid:
    """Real-valued grid with provenance: values[i_bias, j_freq]."""

    freqs: np.ndarray
    biases: np.ndarray
    values: np.ndarray
    stages: tuple = ()

    def __post_init__(self):
        if self.values.shape != (len(self.biases), len(self.freqs)):
            raise ConfigurationError("values shape must be (n_bias, n_freq)")

    def tagged(self, stage: str, values: np.ndarray) -> "ProcessedGrid":
        return replace(self, values=values, stages=self.stages + (stage,))


@dataclass
class Component:
    """One connected pixel set of a feature mask."""

    label: int
    pixels: np.ndarray  # (n, 2) int array of (i_bias, j_freq)
    bbox: tuple  # (i_lo, i_hi, j_lo, j_hi) inclusive

    @property
    def size(self) -> int:
        return len(self.pixels)


@dataclass
class FeatureMask:
    """Boolean feature mask plus its disjoint connected components."""

    mask: np.ndarray
    components: list

    def __post_init__(self):
        total = sum(c.size for c in self.components)
        if total != int(self.mask.sum()):
            raise ConfigurationError("components must partition the mask")


def to_db(grid: SpectrumGrid) -> ProcessedGrid:
    """Enter the chain: 20 log10 |S21| with a 'db' stage tag."""
    return ProcessedGrid(grid.freqs, grid.biases, grid.magnitude_db(), stages=("db",))


def remove_background(pg: ProcessedGrid) -> ProcessedGrid:
    """Subtract the bias-averaged trace, then the frequency-wise average.

    The first subtraction removes the static resonator profile at each
    frequency; the second removes per-trace baseline drift. Idempotent.
    """
    if len(pg.biases) < 2:
        raise ConfigurationError("background removal needs at least 2 biases")
    v = pg.values - pg.values.mean(axis=0, keepdims=True)
    v = v - v.mean(axis=1, keepdims=True)
    return pg.tagged("background_removed", v)


def smooth(pg: ProcessedGrid, sigma_px: float) -> ProcessedGrid:
    """1-D Gaussian filter along the frequency axis (reflect padding)."""
    if sigma_px < 0:
        raise ConfigurationError("sigma_px must be >= 0")
    if sigma_px == 0:
        return pg.tagged("smoothed(sigma=0)", pg.values.copy())
    v = ndimage.gaussian_filter1d(pg.values, sigma_px, axis=1, mode="reflect")
    return pg.tagged(f"smoothed(sigma={sigma_px:g})", v)


def gradient_magnitude(pg: ProcessedGrid) -> ProcessedGrid:
    """|grad| in array coordinates: central differences, one-sided at borders."""
    if pg.values.shape[0] < 2 or pg.values.shape[1] < 2:
        raise ConfigurationError("gradient needs a grid of at least 2x2")
    di, dj = np.gradient(pg.values)
    return pg.tagged("gradient", np.hypot(di, dj))


def segment(
    pg: ProcessedGrid,
    method: str = "threshold",
    percentile: float = 98.0,
    min_px: int = 10,
    classifier: "PixelClassifier | None" = None,
) -> FeatureMask:
    """Turn a gradient-stage grid into a feature mask.

    threshold: keep pixels above the given percentile, apply a 3x3
    morphological opening, drop components smaller than min_px.
    classifier: per-pixel prediction from a trained PixelClassifier
    (same opening and size filter applied to its output).
    """
    if method == "threshold":
        raw = pg.values > np.percentile(pg.values, percentile)
    elif method == "classifier":
        if classifier is None or not classifier.is_trained:
            raise UntrainedClassifierError("classifier segmentation requires a trained model")
        raw = classifier.predict(pg)
    else:
        raise ConfigurationError(f"unknown segmentation method {method!r}")
    if np.any(raw):
        raw = ndimage.binary_opening(raw, structure=np.ones((3, 3), dtype=bool))
    mask, components = _label_components(raw, min_px)
    return FeatureMask(mask, components)


def _label_components(raw: np.ndarray, min_px: int):
    # 8-connectivity so diagonal ridge pixels stay in one component
    labels, n = ndimage.label(raw, structure=np.ones((3, 3), dtype=bool))
    mask = np.zeros_like(raw)
    components = []
    for lab in range(1, n + 1):
        pix = np.argwhere(labels == lab)
        if len(pix) < min_px:
            continue
        i_lo, j_lo = pix.min(axis=0)
        i_hi, j_hi = pix.max(axis=0)
        components.append(
            Component(label=len(components) + 1, pixels=pix, bbox=(i_lo, i_hi, j_lo, j_hi))
        )
        mask[pix[:, 0], pix[:, 1]] = True
    return mask, components


FEATURE_SIGMAS = (1.0, 2.0, 4.0)


class PixelClassifier:
    """Per-pixel tree-ensemble segmentation over a small feature stack.

    Features per pixel: raw intensity, Gaussian-smoothed intensities at
    several scales, and gradient magnitude — the same recipe as typical
    trainable-segmentation plugins, backed by a random forest. Train
    with (grid, mask) pairs, then pass to `segment(method="classifier")`.
    """

    def __init__(self, n_estimators: int = 50, random_state: int = 0):
        self.n_estimators = n_estimators
        self.random_state = random_state
        self._model = None

    @property
    def is_trained(self) -> bool:
        return self._model is not None

    @staticmethod
    def _features(pg: ProcessedGrid) -> np.ndarray:
        v = pg.values
        stack = [v]
        for s in FEATURE_SIGMAS:
            stack.append(ndimage.gaussian_filter(v, s, mode="reflect"))
        di, dj = np.gradient(v)
        stack.append(np.hypot(di, dj))
        return np.stack([a.ravel() for a in stack], axis=1)

    def fit(self, grids: list, masks: list) -> "PixelClassifier":
        from sklearn.ensemble import RandomForestClassifier

        if not grids or len(grids) != len(masks):
            raise ConfigurationError("training needs matching (grid, mask) lists")
        x = np.concatenate([self._features(g) for g in grids], axis=0)
        y = np.concatenate([np.asarray(m, dtype=bool).ravel() for m in masks])
        if y.all() or not y.any():
            raise ConfigurationError("training masks must contain both classes")
        model = RandomForestClassifier(
            n_estimators=self.n_estimators,
            random_state=self.random_state,
            n_jobs=-1,
            class_weight="balanced",
        )
        model.fit(x, y)
        self._model = model
        return self

    def predict(self, pg: ProcessedGrid) -> np.ndarray:
        if self._model is None:
            raise UntrainedClassifierError("fit() the classifier before predict()")
        pred = self._model.predict(self._features(pg))
        return pred.reshape(pg.values.shape).astype(bool)


@dataclass
class Roi:
    """Region of interest: merged component pixels plus a padded box."""

    pixels: np.ndarray  # (n, 2) int array of (i_bias, j_freq)
    bbox: tuple  # padded, clipped, inclusive (i_lo, i_hi, j_lo, j_hi)
    component_labels: tuple = ()


def extract_rois(mask: FeatureMask, pad_px: int = 2) -> list:
    """One ROI per component; overlapping padded boxes are merged.

    Boxes are padded by pad_px and clipped to the grid. Components
    whose padded boxes overlap (e.g. one ridge split by a small gap)
    are merged into a single ROI covering the union of their pixels.
    """
    if pad_px < 0:
        raise ConfigurationError("pad_px must be >= 0")
    shape = mask.mask.shape
    boxes = []
    for c in mask.components:
        i_lo, i_hi, j_lo, j_hi = c.bbox
        boxes.append(
            [
                max(i_lo - pad_px, 0),
                min(i_hi + pad_px, shape[0] - 1),
                max(j_lo - pad_px, 0),
                min(j_hi + pad_px, shape[1] - 1),
            ]
        )
    groups = _merge_overlapping(boxes)
    rois = []
    for group in groups:
        pix = np.concatenate([mask.components[i].pixels for i in group], axis=0)
        members = [boxes[i] for i in group]
        bbox = (
            min(b[0] for b in members),
            max(b[1] for b in members),
            min(b[2] for b in members),
            max(b[3] for b in members),
        )
        rois.append(
            Roi(
                pixels=pix,
                bbox=bbox,
                component_labels=tuple(mask.components[i].label for i in group),
            )
        )
    rois.sort(key=lambda r: (r.bbox[0], r.bbox[2]))
    return rois


def _boxes_overlap(a, b) -> bool:
    return not (a[1] < b[0] or b[1] < a[0] or a[3] < b[2] or b[3] < a[2])


def _merge_overlapping(boxes: list) -> list:
    """Group box indices into overlap-connected clusters (fixpoint union)."""
    n = len(boxes)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if _boxes_overlap(boxes[i], boxes[j]):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())
