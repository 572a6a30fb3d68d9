"""Configuration objects, file loading, and precedence.

Configs are plain frozen dataclasses grouped under RunConfig. Files may
be JSON (one structured document) or line-oriented `section.key=value`
pairs; CLI flags override file values, which override the defaults
recorded here. Calibrated constants (density calibration, detection
thresholds, jitter knobs) live here so physics code stays free of
magic numbers.
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .ensemble import CabsProtocol, DipoleDist, EnsembleSpec, JitterParams
from .errors import ConfigurationError
from .model import DeviceParams
from .simulate import SweepConfig

__all__ = ["AnalysisConfig", "LossTruth", "RunConfig", "load_config", "apply_overrides"]


@dataclass(frozen=True)
class AnalysisConfig:
    """Extraction-chain knobs, frozen against round-trip recovery runs.

    The density calibration constant converts the raw vertex count per
    (volume x bandwidth) into a density; it was fixed once by
    simulating ensembles of known density with this exact configuration
    and is only valid together with these thresholds.
    """

    smooth_sigma_px: float = 2.0
    threshold_percentile: float = 90.0
    min_component_px: int = 8
    pad_px: int = 2
    ridge_gate_sigmas: float = 5.0
    ridge_window_px: int = 12
    ridge_max_window_px: int = 80
    max_residual_hz: float = 0.5e6
    dedupe_dv: float = 0.5e-3
    dedupe_df: float = 2.0e6
    min_split_hz: float = 0.4e6
    min_depth_db: float = 0.05
    density_calibration: float = 1.0
    density_n_bins: int = 6

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LossTruth:
    """Ground-truth saturation parameters used by power-sweep steps."""

    tan0_tls: float = 1.88e-3
    n_c: float = 0.021
    tan_e: float = 0.5e-3
    noise_frac: float = 0.03
    n_points: int = 25
    n_min: float = 1e-3
    n_max: float = 1e5

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs: device, ensemble, sweep, analysis, jitter."""

    device: DeviceParams = field(default_factory=DeviceParams)
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    jitter: JitterParams = field(default_factory=JitterParams)
    cabs: CabsProtocol = field(default_factory=CabsProtocol)
    loss_truth: LossTruth = field(default_factory=LossTruth)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "device": self.device.to_dict(),
            "ensemble": self.ensemble.to_dict(),
            "sweep": self.sweep.to_dict(),
            "analysis": self.analysis.to_dict(),
            "jitter": self.jitter.to_dict(),
            "cabs": self.cabs.to_dict(),
            "loss_truth": self.loss_truth.to_dict(),
            "seed": self.seed,
        }


_SECTIONS = {
    "device": DeviceParams,
    "ensemble": EnsembleSpec,
    "sweep": SweepConfig,
    "analysis": AnalysisConfig,
    "jitter": JitterParams,
    "cabs": CabsProtocol,
    "loss_truth": LossTruth,
}


def _coerce(cls, data: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = dict(data)
    if cls is EnsembleSpec:
        if "dipole_dist" in kwargs and isinstance(kwargs["dipole_dist"], dict):
            kwargs["dipole_dist"] = DipoleDist(**kwargs["dipole_dist"])
        for key in ("delta0_band", "delta_band"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"bad {cls.__name__} config: {exc}") from exc


def _parse_scalar(text: str):
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _read_config_dict(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON config: {exc}") from exc
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"{path}:{lineno}: key clash at {key}")
        node[parts[-1]] = _parse_scalar(value)
    return out


def config_from_dict(data: dict, base: RunConfig | None = None) -> RunConfig:
    base = base if base is not None else RunConfig()
    unknown = set(data) - set(_SECTIONS) - {"seed"}
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            merged = {**getattr(base, name).to_dict(), **data[name]}
            if cls is EnsembleSpec and isinstance(merged.get("dipole_dist"), dict):
                pass  # handled in _coerce
            kwargs[name] = _coerce(cls, merged)
    if "seed" in data:
        kwargs["seed"] = int(data["seed"])
    return replace(base, **kwargs)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    """Load a JSON or key=value config file over the defaults (or `base`)."""
    return config_from_dict(_read_config_dict(Path(path)), base=base)


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Apply flat `section.key` -> value overrides (CLI precedence)."""
    nested: dict = {}
    for key, value in overrides.items():
        if key == "seed":
            nested["seed"] = value
            continue
        if "." not in key:
            raise ConfigurationError(f"override {key!r} must look like section.key")
        section, name = key.split(".", 1)
        nested.setdefault(section, {})[name] = value
    return config_from_dict(nested, base=cfg)
