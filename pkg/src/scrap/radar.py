"""Range-Doppler periodogram, strongest-peak detection and SCNR."""

from dataclasses import dataclass

import numpy as np

from .channel import SPEED_OF_LIGHT, CsiFrame
from .errors import UndefinedScnrError, ValidationError

__all__ = [
    "Periodogram",
    "Detection",
    "periodogram",
    "bin_of",
    "strongest_peak",
    "clutter_region_mask",
    "residual_clutter_power",
    "scnr",
    "is_detection",
]


@dataclass(frozen=True)
class Periodogram:
    power: np.ndarray
    cfg: object
    pad_r: int = 1
    pad_v: int = 1

    @property
    def n_bins(self):
        return self.power.shape[0]

    @property
    def m_bins(self):
        return self.power.shape[1]

    @property
    def range_per_bin(self):
        return SPEED_OF_LIGHT / (2.0 * self.cfg.delta_f * self.n_bins)

    @property
    def velocity_per_bin(self):
        return SPEED_OF_LIGHT / (2.0 * self.cfg.f_c * self.cfg.T0 * self.m_bins)

    def range_axis(self):
        return np.arange(self.n_bins) * self.range_per_bin

    def velocity_axis(self):
        """Velocity per Doppler bin, upper half wrapped to negative values."""
        m = np.arange(self.m_bins)
        m = np.where(m >= self.m_bins / 2, m - self.m_bins, m)
        return m * self.velocity_per_bin


@dataclass(frozen=True)
class Detection:
    bin: tuple
    range: float
    velocity: float
    power: float


def periodogram(frame, cfg, pad_r=1, pad_v=1, window=None):
    """``|sum_k sum_l H[k,l] e^{+j2pi kn/N'} e^{-j2pi lm/M'}|^2 / (N M)``.

    Forward FFT across symbols, inverse-direction FFT across subcarriers.
    ``window`` is an optional callable ``(N, M) -> taper`` applied first.
    """
    h = frame.data if isinstance(frame, CsiFrame) else np.asarray(frame)
    n, m = h.shape
    if (n, m) != (cfg.N, cfg.M):
        raise ValidationError(f"frame shape {h.shape} does not match config ({cfg.N}, {cfg.M})")
    if pad_r < 1 or pad_v < 1:
        raise ValidationError("zero-pad factors must be >= 1")
    if window is not None:
        h = h * window(n, m)
    n_pad, m_pad = pad_r * n, pad_v * m
    spec = np.fft.fft(h, n=m_pad, axis=1)
    spec = np.fft.ifft(spec, n=n_pad, axis=0) * n_pad
    power = (spec.real ** 2 + spec.imag ** 2) / (n * m)
    return Periodogram(power, cfg, pad_r, pad_v)


def _fractional_bin(r, v, pgram):
    cfg = pgram.cfg
    if not 0 <= r < cfg.max_range:
        raise ValidationError(f"range {r} m outside unambiguous window [0, {cfg.max_range:.3f})")
    if not -cfg.max_velocity <= v < cfg.max_velocity:
        raise ValidationError(f"velocity {v} m/s outside unambiguous window")
    return r / pgram.range_per_bin, v / pgram.velocity_per_bin


def bin_of(r, v, pgram):
    """Nearest periodogram bin of a reflector at range ``r`` and velocity ``v``."""
    fn, fm = _fractional_bin(r, v, pgram)
    n = int(np.floor(fn + 0.5)) % pgram.n_bins
    m = int(np.floor(fm + 0.5)) % pgram.m_bins
    return n, m


def strongest_peak(pgram):
    """Global maximum; ties go to the smallest ``n``, then ``m`` (row-major argmax)."""
    flat = int(np.argmax(pgram.power))
    n, m = divmod(flat, pgram.m_bins)
    vel = pgram.velocity_axis()[m]
    return Detection((n, m), float(n * pgram.range_per_bin), float(vel), float(pgram.power[n, m]))


def _wrapped_delta(a, b, period):
    d = (np.asarray(a) - b) % period
    return np.minimum(d, period - d)


def clutter_region_mask(pgram, clutter_gt, scale=5.0):
    """Bins inside any ellipse around a clutter ground-truth bin.

    Semi-axes are ``scale`` range resolutions and ``scale`` velocity
    resolutions, expressed in (padded) bins; the Doppler axis wraps.
    """
    cfg = pgram.cfg
    a = scale * cfg.range_resolution / pgram.range_per_bin
    b = scale * cfg.velocity_resolution / pgram.velocity_per_bin
    n_idx = np.arange(pgram.n_bins)[:, None]
    m_idx = np.arange(pgram.m_bins)[None, :]
    mask = np.zeros(pgram.power.shape, dtype=bool)
    for r, v in clutter_gt:
        n0, m0 = bin_of(r, v, pgram)
        dn = (n_idx - n0) / a
        dm = _wrapped_delta(m_idx, m0, pgram.m_bins) / b
        mask |= dn ** 2 + dm ** 2 <= 1.0
    return mask


def residual_clutter_power(pgram, clutter_gt, scale=5.0):
    """Mean periodogram power over the clutter ellipses."""
    mask = clutter_region_mask(pgram, clutter_gt, scale)
    if not mask.any():
        raise UndefinedScnrError("clutter region is empty")
    return float(pgram.power[mask].mean())


def scnr(pgram, target_gt, clutter_gt, scale=5.0):
    """Target-bin power over mean clutter-region power, in dB."""
    if len(clutter_gt) == 0:
        raise UndefinedScnrError("no clutter paths: SCNR is undefined")
    n, m = bin_of(*target_gt, pgram)
    p_c = residual_clutter_power(pgram, clutter_gt, scale)
    num = pgram.power[n, m]
    if p_c <= 0:
        raise UndefinedScnrError("clutter region has zero power")
    with np.errstate(divide="ignore"):
        return float(10 * np.log10(num / p_c))


def is_detection(det, target_gt, pgram, tol_bins=3):
    """Hit test: both bin offsets within ``tol_bins`` unpadded bins (inclusive)."""
    n0, m0 = bin_of(*target_gt, pgram)
    n, m = det.bin
    dn = abs(n - n0)
    dm = int(_wrapped_delta(m, m0, pgram.m_bins))
    return dn <= tol_bins * pgram.pad_r and dm <= tol_bins * pgram.pad_v
