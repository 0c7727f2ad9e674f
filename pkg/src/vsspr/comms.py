"""Baseband primitives: QAM constellations, FIR channel, AWGN, slicer, SER."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigurationError, NumericError, ParameterError
from .numerics import gaussian_complex

SUPPORTED_ORDERS = (4, 16, 256)

# C(z) = 0.5 + 1.2 z^-1 + 1.5 z^-2 - z^-3
PAPER_CHANNEL = (0.5, 1.2, 1.5, -1.0)


def _gray(k):
    return k ^ (k >> 1)


@dataclass(frozen=True)
class Constellation:
    """Unit-average-power square QAM alphabet.

    ``points[k]`` is the symbol carrying label ``k``. Labels are Gray coded
    per axis: the upper half of the bits selects the in-phase level and the
    lower half the quadrature level.
    """

    order: int
    points: np.ndarray
    scale: float
    levels: np.ndarray
    level_codes: np.ndarray

    @property
    def side(self) -> int:
        return len(self.levels)

    @property
    def min_distance(self) -> float:
        return 2.0 * self.scale


def make_constellation(order: int) -> Constellation:
    """Gray-mapped square QAM with ``order`` in {4, 16, 256}; 4 is QPSK."""
    if order not in SUPPORTED_ORDERS:
        raise ParameterError(f"unsupported constellation order {order}; use one of {SUPPORTED_ORDERS}")
    side = int(round(np.sqrt(order)))
    half_bits = int(np.log2(side))
    scale = float(np.sqrt(3.0 / (2.0 * (order - 1))))
    # amplitude of level index i is 2i - (side - 1); level i carries Gray code gray(i)
    amps = 2.0 * np.arange(side) - (side - 1)
    codes = np.array([_gray(i) for i in range(side)])
    level_of_code = np.argsort(codes)
    labels = np.arange(order)
    i_level = level_of_code[labels >> half_bits]
    q_level = level_of_code[labels & (side - 1)]
    points = scale * (amps[i_level] + 1j * amps[q_level])
    return Constellation(
        order=order,
        points=points,
        scale=scale,
        levels=scale * amps,
        level_codes=codes,
    )


def draw_symbols(c: Constellation, n, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. uniform symbols (``n`` may be a shape)."""
    if np.any(np.asarray(n) < 0):
        raise ParameterError(f"symbol count must be >= 0, got {n}")
    return c.points[rng.integers(0, c.order, size=n)]


def apply_channel(s, taps) -> np.ndarray:
    """Causal FIR filtering along the last axis, zero initial state, tail dropped."""
    taps = np.asarray(taps, dtype=complex)
    if taps.ndim != 1 or not np.any(taps != 0):
        raise ConfigurationError("channel needs at least one nonzero tap")
    s = np.asarray(s, dtype=complex)
    if s.shape[-1] == 0:
        return s.copy()
    return lfilter(taps, [1.0], s, axis=-1)


def noise_variance(sig, snr_db):
    """Noise variance giving ``snr_db`` relative to the empirical power of ``sig``.

    The power is measured along the last axis; ``snr_db`` broadcasts against
    the remaining axes.
    """
    sig = np.asarray(sig)
    if sig.shape[-1] == 0:
        raise ParameterError("signal must be nonempty")
    power = np.mean(np.abs(sig) ** 2, axis=-1)
    if np.any(~(power > 0)):
        raise ParameterError("signal has zero power; SNR is undefined")
    return power / 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)


def add_scaled_noise(sig, unit_noise, snr_db):
    """Add unit-variance noise scaled to ``snr_db``; returns (noisy, sigma_v2)."""
    sigma2 = noise_variance(sig, snr_db)
    return sig + np.sqrt(sigma2)[..., None] * unit_noise, sigma2


def add_awgn(sig, snr_db, rng: np.random.Generator):
    """Add circular complex white Gaussian noise at ``snr_db``.

    Returns ``(noisy, sigma_v2)``.
    """
    sig = np.asarray(sig, dtype=complex)
    unit = gaussian_complex(rng, 1.0, sig.shape)
    noisy, sigma2 = add_scaled_noise(sig, unit, snr_db)
    return noisy, (float(sigma2) if np.ndim(sigma2) == 0 else sigma2)


def _nearest_level(values, c: Constellation):
    dist = np.abs(values[..., None] - c.levels)
    best = np.min(dist, axis=-1, keepdims=True)
    # among equidistant levels prefer the smaller Gray code
    key = np.where(dist == best, c.level_codes, c.order)
    return np.argmin(key, axis=-1)


def slice_symbols(z, c: Constellation):
    """Map soft values to the nearest constellation point.

    Ties go to the point with the lowest label. Because the lattice is
    square, the search separates into one nearest-level search per axis.
    """
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise NumericError("cannot slice a non-finite value")
    i = _nearest_level(z.real, c)
    q = _nearest_level(z.imag, c)
    out = c.levels[i] + 1j * c.levels[q]
    return complex(out) if out.ndim == 0 else out


def symbol_error_rate(decisions, truth, skip: int = 0):
    """Fraction of positions ``>= skip`` (last axis) where decision != truth."""
    decisions = np.asarray(decisions)
    truth = np.asarray(truth)
    if decisions.shape != truth.shape:
        raise ConfigurationError(f"length mismatch: {decisions.shape} vs {truth.shape}")
    n = decisions.shape[-1]
    if not 0 <= skip < n:
        raise ConfigurationError(f"skip={skip} must lie in [0, {n})")
    wrong = decisions[..., skip:] != truth[..., skip:]
    ser = np.mean(wrong, axis=-1)
    return float(ser) if np.ndim(ser) == 0 else ser
