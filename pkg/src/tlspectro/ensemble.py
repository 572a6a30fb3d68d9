"""Defect ensembles: sampling, bias treatments, and frequency jitter.

An ensemble is sampled once per cooldown from a density target and
per-parameter distributions. In Steady mode every defect keeps its
static frequency; after an alternating-bias treatment the ensemble
enters Jitter mode, where each defect's frequency hops by a random
offset at exponentially distributed dwell times (a telegraph-like jump
process). Thermal cycling to 10 K or above restores Steady mode with
the same members.

All operations return new ensembles; draws come from Philox substreams
recorded in the ensemble so evolution replays exactly from a snapshot.
"""

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ConfigurationError
from .model import DeviceParams, TlsParams, gate_field, resonance_biases, tls_frequency
from .rng import substream
from .units import PLANCK_H, dipole_si

__all__ = [
    "Mode",
    "DipoleDist",
    "EnsembleSpec",
    "JitterParams",
    "CabsProtocol",
    "TlsEnsemble",
    "VisibleTls",
    "sample_ensemble",
    "visible_subset",
    "apply_cabs",
    "thermal_cycle",
    "evolve",
]


class Mode(str, enum.Enum):
    STEADY = "steady"
    JITTER = "jitter"


@dataclass(frozen=True)
class DipoleDist:
    """Distribution descriptor for the dipole projection p_z (e*A).

    family: "truncnorm" (mean, sd, truncated to [lo, hi]), "uniform"
    (over [lo, hi]) or "fixed" (all members at `mean`). Truncated-normal
    draws use the inverse CDF so each member consumes exactly one
    uniform variate.
    """

    family: str = "truncnorm"
    mean: float = 0.49
    sd: float = 0.15
    lo: float = 0.05
    hi: float = 1.0

    def __post_init__(self):
        if self.family not in ("truncnorm", "uniform", "fixed"):
            raise ConfigurationError(f"unknown dipole distribution family {self.family!r}")
        if self.family != "fixed" and not self.lo < self.hi:
            raise ConfigurationError("dipole distribution needs lo < hi")
        if self.family == "truncnorm" and self.sd <= 0:
            raise ConfigurationError("truncnorm sd must be positive")
        if self.lo < 0:
            raise ConfigurationError("p_z support must be non-negative")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.from_uniform(rng.uniform(size=n))

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Map standard uniforms to dipole values (one variate per draw)."""
        u = np.asarray(u, dtype=float)
        if self.family == "fixed":
            return np.full(u.shape, float(self.mean))
        if self.family == "uniform":
            return self.lo + (self.hi - self.lo) * u
        a = ndtr((self.lo - self.mean) / self.sd)
        b = ndtr((self.hi - self.mean) / self.sd)
        return self.mean + self.sd * ndtri(a + u * (b - a))

    def to_dict(self) -> dict:
        return {"family": self.family, "mean": self.mean, "sd": self.sd, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class EnsembleSpec:
    """Sampling law for one cooldown.

    p0_target is the defect density in count / (um^3 GHz); the member
    count is p0_target * V_T * width(delta0_band). delta0 is
    log-uniform over delta0_band, the zero-bias asymmetry uniform over
    delta_band (signed; the dipole sign is absorbed here), p_z drawn
    from dipole_dist.
    """

    p0_target: float = 75.0
    delta0_band: tuple = (0.5e9, 6.0e9)
    delta_band: tuple = (-2.5e10, 2.5e10)
    dipole_dist: DipoleDist = field(default_factory=DipoleDist)
    gamma_default: float = 0.25e6
    seed: int = 0

    def __post_init__(self):
        if self.p0_target < 0:
            raise ConfigurationError("p0_target must be >= 0")
        lo, hi = self.delta0_band
        if not 0 < lo < hi:
            raise ConfigurationError("delta0_band must be positive with lo < hi")
        dlo, dhi = self.delta_band
        if not dlo < dhi:
            raise ConfigurationError("delta_band must have lo < hi")
        if self.gamma_default <= 0:
            raise ConfigurationError("gamma_default must be positive")

    def member_count(self, device: DeviceParams) -> int:
        width_ghz = (self.delta0_band[1] - self.delta0_band[0]) / 1e9
        v_um3 = device.v_total * 1e18
        return int(round(self.p0_target * v_um3 * width_ghz))

    def to_dict(self) -> dict:
        return {
            "p0_target": self.p0_target,
            "delta0_band": list(self.delta0_band),
            "delta_band": list(self.delta_band),
            "dipole_dist": self.dipole_dist.to_dict(),
            "gamma_default": self.gamma_default,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class JitterParams:
    """Phenomenological jump-process knobs for the post-treatment regime.

    Defaults are calibrated (see config module) so a standard sweep
    detects ~0.24 transient crossings per trace: dwell times are
    exponential with mean tau_dwell_s, and each jump re-draws the
    frequency offset uniformly in +-width_hz.
    """

    tau_dwell_s: float = 180.0
    width_hz: float = 50e6

    def __post_init__(self):
        if self.tau_dwell_s <= 0 or self.width_hz <= 0:
            raise ConfigurationError("jitter parameters must be positive")

    def to_dict(self) -> dict:
        return {"tau_dwell_s": self.tau_dwell_s, "width_hz": self.width_hz}


@dataclass(frozen=True)
class CabsProtocol:
    """Alternating-bias treatment parameters (validated, not modeled).

    The microscopic link between the pulse sequence and the jitter
    response is unknown; the protocol is recorded for provenance and
    the response is set by JitterParams.
    """

    amplitude_v: float = 10.0
    pulse_s: float = 10.0
    dwell_s: float = 10.0
    repetitions: int = 2800
    stage_temp_k: float = 0.010

    def __post_init__(self):
        if not (
            self.amplitude_v > 0
            and self.pulse_s > 0
            and self.dwell_s > 0
            and self.repetitions > 0
        ):
            raise ConfigurationError("CABS protocol fields must be positive")

    def to_dict(self) -> dict:
        return {
            "amplitude_v": self.amplitude_v,
            "pulse_s": self.pulse_s,
            "dwell_s": self.dwell_s,
            "repetitions": self.repetitions,
            "stage_temp_k": self.stage_temp_k,
        }


@dataclass(frozen=True)
class TlsEnsemble:
    """Snapshot of a defect ensemble.

    Static per-member parameters are parallel float64 arrays; dynamic
    state (mode, offsets, jump schedule) changes only through the
    treatment/evolution functions, which return new snapshots.
    """

    delta0: np.ndarray
    delta: np.ndarray
    p_z: np.ndarray
    gamma: np.ndarray
    mode: Mode = Mode.STEADY
    clock: float = 0.0
    offsets: np.ndarray = None
    next_jump: np.ndarray = None
    jump_counts: np.ndarray = None
    jitter: JitterParams = None
    rng_state: dict = None
    seed: int = 0
    treatment_count: int = 0

    def __post_init__(self):
        n = len(self.delta0)
        for name in ("delta", "p_z", "gamma"):
            if len(getattr(self, name)) != n:
                raise ConfigurationError("member arrays must have equal length")
        if self.offsets is None:
            object.__setattr__(self, "offsets", np.zeros(n))
        if self.next_jump is None:
            object.__setattr__(self, "next_jump", np.full(n, np.inf))
        if self.jump_counts is None:
            object.__setattr__(self, "jump_counts", np.zeros(n, dtype=np.int64))
        if self.mode == Mode.STEADY and np.any(self.offsets != 0.0):
            raise ConfigurationError("steady ensembles must have zero jitter offsets")

    def __len__(self) -> int:
        return len(self.delta0)

    @property
    def members(self) -> list[TlsParams]:
        return [
            TlsParams(float(d0), float(d), float(p), float(g))
            for d0, d, p, g in zip(self.delta0, self.delta, self.p_z, self.gamma)
        ]

    def frequencies(self, v_g: float, device: DeviceParams) -> np.ndarray:
        """Current defect frequencies at bias v_g, jitter offsets included (Hz)."""
        x = self.delta - dipole_si(self.p_z) * v_g / (device.d0 * PLANCK_H)
        return np.hypot(self.delta0, x) + self.offsets

    def to_dict(self) -> dict:
        state = None
        if self.rng_state is not None:
            state = _state_to_jsonable(self.rng_state)
        return {
            "delta0": self.delta0.tolist(),
            "delta": self.delta.tolist(),
            "p_z": self.p_z.tolist(),
            "gamma": self.gamma.tolist(),
            "mode": self.mode.value,
            "clock": self.clock,
            "offsets": self.offsets.tolist(),
            "next_jump": [None if not np.isfinite(t) else t for t in self.next_jump],
            "jump_counts": self.jump_counts.tolist(),
            "jitter": None if self.jitter is None else self.jitter.to_dict(),
            "rng_state": state,
            "seed": self.seed,
            "treatment_count": self.treatment_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TlsEnsemble":
        state = d.get("rng_state")
        return cls(
            delta0=np.asarray(d["delta0"], dtype=float),
            delta=np.asarray(d["delta"], dtype=float),
            p_z=np.asarray(d["p_z"], dtype=float),
            gamma=np.asarray(d["gamma"], dtype=float),
            mode=Mode(d["mode"]),
            clock=d["clock"],
            offsets=np.asarray(d["offsets"], dtype=float),
            next_jump=np.array(
                [np.inf if t is None else t for t in d["next_jump"]], dtype=float
            ),
            jump_counts=np.asarray(d["jump_counts"], dtype=np.int64),
            jitter=None if d.get("jitter") is None else JitterParams(**d["jitter"]),
            rng_state=None if state is None else _state_from_jsonable(state),
            seed=d["seed"],
            treatment_count=d["treatment_count"],
        )


def _state_to_jsonable(state: dict) -> dict:
    out = {}
    for k, v in state.items():
        if isinstance(v, dict):
            out[k] = _state_to_jsonable(v)
        elif isinstance(v, np.ndarray):
            out[k] = {"__ndarray__": v.tolist(), "dtype": str(v.dtype)}
        else:
            out[k] = v
    return out


def _state_from_jsonable(state: dict) -> dict:
    out = {}
    for k, v in state.items():
        if isinstance(v, dict) and "__ndarray__" in v:
            out[k] = np.asarray(v["__ndarray__"], dtype=v["dtype"])
        elif isinstance(v, dict):
            out[k] = _state_from_jsonable(v)
        else:
            out[k] = v
    return out


def sample_ensemble(spec: EnsembleSpec, device: DeviceParams) -> TlsEnsemble:
    """Draw a Steady ensemble realizing the spec's density and distributions.

    Each member consumes a fixed number of variates from its own
    counter-based substream, so sampling is reproducible and could be
    farmed out per member.
    """
    n = spec.member_count(device)
    if n == 0:
        empty = np.empty(0)
        return TlsEnsemble(empty, empty.copy(), empty.copy(), empty.copy(), seed=spec.seed)
    lo, hi = spec.delta0_band
    dlo, dhi = spec.delta_band
    rows = np.empty((n, 3))
    for i in range(n):
        rows[i] = substream(spec.seed, "member", i).uniform(size=3)
    delta0 = np.exp(math.log(lo) + rows[:, 0] * (math.log(hi) - math.log(lo)))
    delta = dlo + rows[:, 1] * (dhi - dlo)
    p_z = spec.dipole_dist.from_uniform(rows[:, 2])
    gamma = np.full(n, spec.gamma_default)
    return TlsEnsemble(delta0, delta, p_z, gamma, seed=spec.seed)


@dataclass(frozen=True)
class VisibleTls:
    """One ensemble member that enters the measurement window."""

    index: int
    tls: TlsParams
    crossing_biases: list[float]
    vertex_in_band: bool


def visible_subset(
    ens: TlsEnsemble,
    device: DeviceParams,
    f_band: tuple,
    v_range: tuple,
) -> list[VisibleTls]:
    """Members whose static frequency enters f_band somewhere in v_range.

    Jitter offsets are ignored: this is the steady-spectrum visibility
    used for counting. Crossing biases are the in-range solutions at the
    band center (falling back to the band edge the defect clips), and
    vertex_in_band flags delta0 inside f_band.
    """
    f_lo, f_hi = f_band
    v_lo, v_hi = v_range
    if not (f_lo < f_hi and v_lo < v_hi):
        raise ConfigurationError("f_band and v_range must be ordered")
    f_mid = 0.5 * (f_lo + f_hi)
    out = []
    for i, tls in enumerate(ens.members):
        if tls.p_z == 0.0:
            f0 = math.hypot(tls.delta0, tls.delta)
            if f_lo <= f0 <= f_hi:
                out.append(VisibleTls(i, tls, [], f_lo <= tls.delta0 <= f_hi))
            continue
        v_vertex = tls.delta * device.d0 * PLANCK_H / dipole_si(tls.p_z)
        v_at_min = min(max(v_vertex, v_lo), v_hi)
        f_min = float(tls_frequency(tls, gate_field(v_at_min, device)))
        f_max = max(
            float(tls_frequency(tls, gate_field(v_lo, device))),
            float(tls_frequency(tls, gate_field(v_hi, device))),
        )
        if f_min > f_hi or f_max < f_lo:
            continue
        crossings = []
        for f_target in (f_mid, f_lo, f_hi):
            if f_target <= tls.delta0:
                continue
            sols = [v for v in resonance_biases(tls, f_target, device) if v_lo <= v <= v_hi]
            if sols:
                crossings = sols
                break
        out.append(VisibleTls(i, tls, crossings, f_lo <= tls.delta0 <= f_hi))
    return out


def apply_cabs(
    ens: TlsEnsemble,
    proto: CabsProtocol,
    jitter: JitterParams | None = None,
) -> TlsEnsemble:
    """Switch the ensemble into the post-treatment Jitter regime.

    Static member parameters are untouched (the defect density is
    preserved); every member gets a fresh random offset and an
    exponential dwell until its first jump. Applying to an ensemble
    already in Jitter mode re-seeds the jump clock.
    """
    if jitter is None:
        jitter = ens.jitter if ens.jitter is not None else JitterParams()
    n = len(ens)
    count = ens.treatment_count + 1
    gen = substream(ens.seed, "jitter", count)
    offsets = gen.uniform(-jitter.width_hz, jitter.width_hz, n)
    dwell = _positive_exponential(gen, jitter.tau_dwell_s, n)
    return replace(
        ens,
        mode=Mode.JITTER,
        offsets=offsets,
        next_jump=ens.clock + dwell,
        jump_counts=np.zeros(n, dtype=np.int64),
        jitter=jitter,
        rng_state=gen.bit_generator.state,
        treatment_count=count,
    )


def thermal_cycle(
    ens: TlsEnsemble,
    peak_temp_k: float,
    redraw_dipoles: bool = False,
    dipole_dist: DipoleDist | None = None,
) -> TlsEnsemble:
    """Thermal cycle to peak_temp_k and back to base.

    At or above 10 K the jitter regime resets: mode returns to Steady
    with all offsets zeroed and members retained. Below 10 K the
    ensemble is returned unchanged. With redraw_dipoles=True the dipole
    projections are re-drawn from dipole_dist (default: a fresh draw of
    the same member count), mimicking the mild post-cycle shifts of the
    mean dipole; off by default.
    """
    if peak_temp_k < 0:
        raise ConfigurationError("temperature must be non-negative")
    if peak_temp_k < 10.0:
        return ens
    n = len(ens)
    count = ens.treatment_count + 1
    p_z = ens.p_z
    if redraw_dipoles and n:
        dist = dipole_dist if dipole_dist is not None else DipoleDist()
        p_z = dist.sample(substream(ens.seed, "redraw", count), n)
    return replace(
        ens,
        mode=Mode.STEADY,
        p_z=p_z,
        offsets=np.zeros(n),
        next_jump=np.full(n, np.inf),
        jump_counts=np.zeros(n, dtype=np.int64),
        rng_state=None,
        treatment_count=count,
    )


def evolve(ens: TlsEnsemble, dt: float) -> TlsEnsemble:
    """Advance the simulation clock by dt seconds.

    Steady mode only moves the clock. In Jitter mode each member whose
    jump time has elapsed re-draws its offset and schedules a new
    exponential dwell, repeatedly, until all jump times pass the new
    clock.
    """
    if dt < 0:
        raise ConfigurationError("dt must be >= 0")
    t_end = ens.clock + dt
    if ens.mode == Mode.STEADY or dt == 0.0 or len(ens) == 0:
        return replace(ens, clock=t_end)
    gen = np.random.Generator(np.random.Philox())
    gen.bit_generator.state = ens.rng_state
    offsets = ens.offsets.copy()
    next_jump = ens.next_jump.copy()
    counts = ens.jump_counts.copy()
    jit = ens.jitter
    while True:
        due = np.flatnonzero(next_jump <= t_end)
        if due.size == 0:
            break
        offsets[due] = gen.uniform(-jit.width_hz, jit.width_hz, due.size)
        next_jump[due] += _positive_exponential(gen, jit.tau_dwell_s, due.size)
        counts[due] += 1
    return replace(
        ens,
        clock=t_end,
        offsets=offsets,
        next_jump=next_jump,
        jump_counts=counts,
        rng_state=gen.bit_generator.state,
    )


def _positive_exponential(gen: np.random.Generator, tau: float, n: int) -> np.ndarray:
    """Exponential dwell draws, nudged away from exact zero.

    Keeps jump times strictly increasing even in the (measure-zero)
    event of a zero draw.
    """
    d = gen.exponential(tau, n)
    tiny = np.finfo(float).tiny
    d[d <= 0.0] = tiny
    return d
