"""Baseline estimation and pulse extraction for one polarization."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DomainError, InsufficientDataError
from .spectra import PolChannel, Spectrogram, channel_freq

log = logging.getLogger(__name__)

MAD_TO_SIGMA = 1.4826
SIGMA_FLOOR_FRACTION = 1e-6
MIN_WINDOW_FRAMES = 32
DEFAULT_K_SIGMA = 8.0

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class BaselineEstimate:
    """Robust location/scale per channel, or per (frame, channel) when tracked."""

    mu_hat: np.ndarray
    sigma_hat: np.ndarray

    def __post_init__(self):
        if self.mu_hat.shape != self.sigma_hat.shape:
            raise DomainError("mu_hat and sigma_hat shapes differ")
        if not np.all(self.sigma_hat > 0):
            raise DomainError("sigma_hat must be positive everywhere")


@dataclass(frozen=True)
class Pulse:
    pol: PolChannel
    mjd: float
    freq_hz: float
    snr: float
    frame_index: int
    chan_index: int
    first_mjd: float = 0.0
    last_mjd: float = 0.0
    n_cells: int = 1


def _powers(frames: Spectrogram | np.ndarray) -> np.ndarray:
    return frames.powers if isinstance(frames, Spectrogram) else np.asarray(frames)


def _median_mad(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    block = block.astype(np.float64, copy=False)
    mu = np.median(block, axis=0)
    mad = np.median(np.abs(block - mu), axis=0)
    sigma = np.maximum(MAD_TO_SIGMA * mad, SIGMA_FLOOR_FRACTION * mu)
    # all-zero channels still need a positive scale
    sigma = np.where(sigma > 0, sigma, np.finfo(np.float64).tiny)
    return mu, sigma


def estimate_baseline(frames: Spectrogram | np.ndarray, window_frames: int, start: int = 0) -> BaselineEstimate:
    """Median / scaled-MAD baseline over ``window_frames`` frames from ``start``."""
    if window_frames < MIN_WINDOW_FRAMES:
        raise DomainError(f"window_frames must be >= {MIN_WINDOW_FRAMES}, got {window_frames}")
    powers = _powers(frames)
    if powers.shape[0] - start < window_frames:
        raise InsufficientDataError(
            f"baseline needs {window_frames} frames, only {max(powers.shape[0] - start, 0)} available"
        )
    mu, sigma = _median_mad(powers[start:start + window_frames])
    return BaselineEstimate(mu, sigma)


def track_baseline(frames: Spectrogram | np.ndarray, window_frames: int) -> BaselineEstimate:
    """Blocked baseline following slow gain drift.

    One estimate per consecutive window; trailing frames that do not fill a
    window use the last full block's estimate.
    """
    powers = _powers(frames)
    n_blocks = powers.shape[0] // window_frames if window_frames > 0 else 0
    if n_blocks == 0:
        estimate_baseline(powers, window_frames)  # raises the appropriate error
    mu = np.empty(powers.shape, dtype=np.float64)
    sigma = np.empty(powers.shape, dtype=np.float64)
    for b in range(n_blocks):
        est = estimate_baseline(powers, window_frames, start=b * window_frames)
        stop = powers.shape[0] if b == n_blocks - 1 else (b + 1) * window_frames
        mu[b * window_frames:stop] = est.mu_hat
        sigma[b * window_frames:stop] = est.sigma_hat
    return BaselineEstimate(mu, sigma)


def false_alarm_rate(k_sigma: float = DEFAULT_K_SIGMA) -> float:
    """Per-cell chance that exponential noise crosses mu + k*sigma.

    For Exp(m) power the median is m*ln2 and the MAD is m*asinh(1/2), so the
    threshold sits at m*(ln2 + k*1.4826*asinh(1/2)).
    """
    if not k_sigma > 0:
        raise DomainError(f"k_sigma must be positive, got {k_sigma}")
    return 0.5 * math.exp(-k_sigma * MAD_TO_SIGMA * math.asinh(0.5))


def detect_pulses(frames: Spectrogram, b: BaselineEstimate, k_sigma: float = DEFAULT_K_SIGMA) -> list[Pulse]:
    """Cells above mu + k*sigma, 8-connected regions merged at their peak cell."""
    if not k_sigma > 0:
        raise DomainError(f"k_sigma must be positive, got {k_sigma}")
    header = frames.header
    powers = frames.powers.astype(np.float64)
    mask = powers > b.mu_hat + k_sigma * b.sigma_hat
    labels, n = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    if n == 0:
        return []
    z = (powers - b.mu_hat) / b.sigma_hat
    index = np.arange(1, n + 1)
    peaks = ndimage.maximum_position(z, labels, index)
    sizes = ndimage.sum_labels(mask, labels, index)
    extents = ndimage.find_objects(labels)
    pulses = []
    for (row, chan), size, (rows, _) in zip(peaks, sizes, extents):
        frame_index = frames.first_frame + int(row)
        pulses.append(Pulse(
            pol=header.pol,
            mjd=header.frame_mjd(frame_index),
            freq_hz=channel_freq(header, int(chan)),
            snr=float(z[row, chan]),
            frame_index=frame_index,
            chan_index=int(chan),
            first_mjd=header.frame_mjd(frames.first_frame + rows.start),
            last_mjd=header.frame_mjd(frames.first_frame + rows.stop - 1),
            n_cells=int(size),
        ))
    pulses.sort(key=lambda p: (p.frame_index, p.chan_index))
    log.debug("%s: %d pulses above %.1f sigma", header.pol.name, len(pulses), k_sigma)
    return pulses
