"""OFDM CSI synthesis for a scene of moving point reflectors.

A frame is ``H = phi * sum_p alpha_p a(r_p) b(v_p)^T + Z`` where ``a`` and
``b`` are the range and velocity steering vectors, ``phi`` a random phase
drawn once per frame and ``Z`` circular white Gaussian noise with
per-element variance ``P_n / N``.
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ValidationError

SPEED_OF_LIGHT = 299_792_458.0

__all__ = [
    "SPEED_OF_LIGHT",
    "RfConfig",
    "StaticRange",
    "SineDriftRange",
    "OscillatingRange",
    "Path",
    "Scene",
    "CsiFrame",
    "ScenarioParams",
    "range_steering",
    "velocity_steering",
    "synthesize_frame",
    "drifting_scenario",
    "make_rng",
    "FULL_RF",
    "DESK_RF",
]


@dataclass(frozen=True)
class RfConfig:
    """OFDM numerology.  ``T0`` defaults to ``1 / delta_f`` (no cyclic prefix)."""

    f_c: float
    N: int
    delta_f: float
    M: int
    T0: Optional[float] = None

    def __post_init__(self):
        if self.N < 2 or self.M < 2:
            raise ValidationError(f"need N >= 2 and M >= 2, got N={self.N}, M={self.M}")
        if not (self.delta_f > 0 and self.f_c > 0):
            raise ValidationError("carrier frequency and subcarrier spacing must be positive")
        if self.T0 is None:
            object.__setattr__(self, "T0", 1.0 / self.delta_f)
        elif not self.T0 > 0:
            raise ValidationError("OFDM symbol duration must be positive")

    @property
    def B(self):
        return self.N * self.delta_f

    @property
    def Q(self):
        return self.N * self.M

    @property
    def range_resolution(self):
        return SPEED_OF_LIGHT / (2.0 * self.B)

    @property
    def velocity_resolution(self):
        return SPEED_OF_LIGHT / (2.0 * self.f_c * self.M * self.T0)

    @property
    def max_range(self):
        return SPEED_OF_LIGHT / (2.0 * self.delta_f)

    @property
    def max_velocity(self):
        return SPEED_OF_LIGHT / (4.0 * self.f_c * self.T0)


# Full-size numerology: 1584 subcarriers, 1120 symbols, 120 kHz spacing.
FULL_RF = RfConfig(f_c=27.4e9, N=1584, delta_f=120e3, M=1120)
# Desk profile: N*M shrunk ~100x, subcarrier spacing widened to keep B = 190 MHz
# (and with it the range resolution the dynamic clutter drift is measured against).
DESK_RF = RfConfig(f_c=27.4e9, N=256, delta_f=190e6 / 256, M=64)


@dataclass(frozen=True)
class StaticRange:
    r0: float

    def range(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.r0)

    def velocity(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class SineDriftRange:
    """``r(t) = r0 + amplitude * sin(2 pi t / period) + drift_rate * t``."""

    r0: float
    amplitude: float = 0.1
    period: float = 5.0
    drift_rate: float = 0.0

    def range(self, t):
        t = np.asarray(t, dtype=float)
        return self.r0 + self.amplitude * np.sin(2 * np.pi * t / self.period) + self.drift_rate * t

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        w = 2 * np.pi / self.period
        return self.amplitude * w * np.cos(w * t) + self.drift_rate


@dataclass(frozen=True)
class OscillatingRange:
    """Back-and-forth motion between ``r_min`` and ``r_max`` with peak speed ``v_max``."""

    r_min: float
    r_max: float
    v_max: float
    phase: float = 0.0

    @property
    def omega(self):
        return 2.0 * self.v_max / (self.r_max - self.r_min)

    @property
    def period(self):
        return 2 * np.pi / self.omega

    def range(self, t):
        t = np.asarray(t, dtype=float)
        mid = 0.5 * (self.r_max + self.r_min)
        half = 0.5 * (self.r_max - self.r_min)
        return mid + half * np.sin(self.omega * t + self.phase)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        half = 0.5 * (self.r_max - self.r_min)
        return half * self.omega * np.cos(self.omega * t + self.phase)


Trajectory = Union[StaticRange, SineDriftRange, OscillatingRange]


@dataclass(frozen=True)
class Path:
    alpha: complex
    trajectory: Trajectory
    kind: str = "clutter"

    def __post_init__(self):
        if self.kind not in ("clutter", "target"):
            raise ValidationError(f"path kind must be 'clutter' or 'target', got {self.kind!r}")
        if not abs(self.alpha) > 0:
            raise ValidationError("path amplitude must be non-zero")

    def range(self, t):
        return float(self.trajectory.range(t))

    def velocity(self, t):
        return float(self.trajectory.velocity(t))


@dataclass(frozen=True)
class Scene:
    paths: tuple = ()
    noise_power_total: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if self.noise_power_total < 0:
            raise ValidationError("noise power must be non-negative")

    def noise_variance(self, cfg):
        """Per-element noise variance ``P_n / N``."""
        return self.noise_power_total / cfg.N

    @property
    def clutter(self):
        return tuple(p for p in self.paths if p.kind == "clutter")

    @property
    def targets(self):
        return tuple(p for p in self.paths if p.kind == "target")

    def without_targets(self):
        return replace(self, paths=self.clutter)

    def with_noise(self, noise_power_total):
        return replace(self, noise_power_total=noise_power_total)


@dataclass(frozen=True)
class CsiFrame:
    data: np.ndarray
    timestamp: float = 0.0

    @property
    def shape(self):
        return self.data.shape

    def vec(self):
        """Row-major vectorisation, length ``N * M``."""
        return self.data.reshape(-1)


def make_rng(seed, stream=0):
    """Seeded PCG64 generator; ``stream`` selects an independent substream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


def range_steering(r, cfg):
    if r < 0:
        raise ValidationError(f"range must be non-negative, got {r}")
    n = np.arange(cfg.N)
    return np.exp(-1j * 4 * np.pi * n * cfg.delta_f * r / SPEED_OF_LIGHT)


def velocity_steering(v, cfg):
    m = np.arange(cfg.M)
    return np.exp(1j * 4 * np.pi * m * cfg.T0 * cfg.f_c * v / SPEED_OF_LIGHT)


def synthesize_frame(scene, cfg, t, rng=None, phase=None, include_targets=True):
    """Draw one CSI frame at time ``t``.

    ``phase`` forces the per-frame rotation (otherwise uniform on [0, 2pi)
    from ``rng``).  The rotation is always drawn before the noise so that the
    random stream layout does not depend on ``phase``.
    """
    if rng is None:
        rng = make_rng(scene.rng_seed, 1)
    theta = rng.uniform(0.0, 2 * np.pi)
    phi = np.exp(1j * theta) if phase is None else complex(phase)

    h = np.zeros((cfg.N, cfg.M), dtype=np.complex128)
    for p in scene.paths:
        if p.kind == "target" and not include_targets:
            continue
        r = p.range(t)
        if r < 0:
            raise ValidationError(f"path range became negative ({r:.3f} m) at t={t}")
        h += p.alpha * np.outer(range_steering(r, cfg), velocity_steering(p.velocity(t), cfg))
    h *= phi

    var = scene.noise_variance(cfg)
    if var > 0:
        z = rng.standard_normal((cfg.N, cfg.M, 2)).view(np.complex128)[..., 0]
        h += np.sqrt(var / 2.0) * z
    return CsiFrame(h, float(t))


@dataclass
class ScenarioParams:
    """Dynamic-clutter scenario: five random clutter paths, one drifting, one oscillating target.

    Amplitudes are in dB relative to the strongest clutter path (unit amplitude).
    """

    n_clutter: int = 5
    clutter_range: Sequence[float] = (3.0, 40.0)
    amplitude_spread_db: float = 20.0
    dynamic_r0: float = 11.5
    dynamic_amplitude: float = 0.1
    dynamic_period: float = 5.0
    dynamic_drift: float = 0.5
    duration: float = 100.0
    target_r_min: float = 5.0
    target_r_max: float = 20.0
    target_v_max: float = 2.0
    target_db: float = -30.0
    with_target: bool = True

    def __post_init__(self):
        self.clutter_range = tuple(self.clutter_range)
        if self.n_clutter < 1:
            raise ValidationError("scenario needs at least one clutter path")
        if self.duration <= 0:
            raise ValidationError("scenario duration must be positive")


def drifting_scenario(cfg, seed, params=None):
    """Seeded scene: ``n_clutter`` clutter paths (one drifting) plus one target.

    The drifting path is the strongest clutter return (amplitude 1); the
    others are log-uniform over ``amplitude_spread_db`` below it with random
    phases and uniform ranges in ``clutter_range``.
    """
    params = params or ScenarioParams()
    rng = make_rng(seed, 0)
    lo, hi = params.clutter_range
    paths = [
        Path(
            1.0 + 0j,
            SineDriftRange(
                params.dynamic_r0,
                params.dynamic_amplitude,
                params.dynamic_period,
                params.dynamic_drift / params.duration,
            ),
        )
    ]
    for _ in range(params.n_clutter - 1):
        r = rng.uniform(lo, hi)
        gain_db = -rng.uniform(0.0, params.amplitude_spread_db)
        alpha = 10 ** (gain_db / 20) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        paths.append(Path(complex(alpha), StaticRange(float(r))))
    target_phase = rng.uniform(0, 2 * np.pi)
    if params.with_target:
        traj = OscillatingRange(
            params.target_r_min, params.target_r_max, params.target_v_max, float(target_phase)
        )
        alpha_t = 10 ** (params.target_db / 20) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        paths.append(Path(complex(alpha_t), traj, kind="target"))
    return Scene(tuple(paths), 0.0, int(seed))
