"""Deterministic preprocessing of recorded channels.

Every function here is pure: channels are immutable and each call returns a
new channel or value.
"""

from __future__ import annotations

import logging
import math
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.signal import butter, filtfilt, find_peaks, lfilter

from dyad_influence.domain.errors import (
    ChannelMismatchError,
    ConfigError,
    InsufficientSamplesError,
    InvalidCutoffError,
    InvalidRatioError,
    InvalidSplitError,
    NoPeakError,
)
from dyad_influence.domain.signals import BivariateEpoch, Channel, Epoch, PeriodHistogram

logger = logging.getLogger(__name__)

DEFAULT_CUTOFF_HZ = 10.0
DEFAULT_FILTER_ORDER = 2
DEFAULT_PROMINENCE_FRACTION = 0.05
DEFAULT_HISTOGRAM_BIN_HZ = 0.25


def _butterworth_dualpass(x: Channel, fc: float, order: int, btype: str) -> Channel:
    nyquist = x.fs / 2.0
    if not 0.0 < fc < nyquist:
        raise InvalidCutoffError(f"cutoff {fc} Hz must lie in (0, {nyquist}) Hz for fs={x.fs} Hz")
    if order < 1:
        raise ConfigError(f"filter order must be >= 1, got {order}")
    padlen = 3 * order
    if len(x) <= padlen:
        raise InsufficientSamplesError(
            f"channel '{x.label}' has {len(x)} samples; dual-pass filtering needs more than {padlen}"
        )
    b, a = butter(order, fc, btype=btype, fs=x.fs)
    # even extension mirrors the signal about both ends
    filtered = filtfilt(b, a, x.samples, padtype="even", padlen=padlen)
    return x.derive(filtered)


def butterworth_lowpass_dualpass(
    x: Channel, fc: float = DEFAULT_CUTOFF_HZ, order: int = DEFAULT_FILTER_ORDER
) -> Channel:
    """Zero-phase low-pass: forward then backward pass of an ``order`` Butterworth section.

    The effective magnitude response is the square of the single-pass response.
    """
    return _butterworth_dualpass(x, fc, order, "lowpass")


def butterworth_bandpass_causal(
    x: Channel, f_lo: float, f_hi: float, order: int = DEFAULT_FILTER_ORDER
) -> Channel:
    """Low-pass at ``f_hi`` then high-pass at ``f_lo``, each section applied twice in the forward direction.

    The magnitude response is the squared single-pass response; the output at time t depends only on
    inputs up to t.
    """
    if not f_lo < f_hi:
        raise InvalidCutoffError(f"band edges must satisfy f_lo < f_hi, got [{f_lo}, {f_hi}]")
    nyquist = x.fs / 2.0
    if not 0.0 < f_lo < nyquist or not f_hi < nyquist:
        raise InvalidCutoffError(f"band [{f_lo}, {f_hi}] Hz must lie in (0, {nyquist}) Hz for fs={x.fs} Hz")
    if order < 1:
        raise ConfigError(f"filter order must be >= 1, got {order}")
    samples = x.samples
    for fc, btype in ((f_hi, "lowpass"), (f_lo, "highpass")):
        b, a = butter(order, fc, btype=btype, fs=x.fs)
        samples = lfilter(b, a, lfilter(b, a, samples))
    return x.derive(samples)


def decimate(x: Channel, target_fs: float) -> Channel:
    """Keep every ``fs / target_fs``-th sample; the input must already be band-limited."""
    if target_fs <= 0:
        raise InvalidRatioError(f"target rate must be positive, got {target_fs}")
    ratio = x.fs / target_fs
    factor = int(round(ratio))
    if factor < 1 or not math.isclose(ratio, factor, rel_tol=0.0, abs_tol=1e-9):
        raise InvalidRatioError(f"{x.fs} Hz is not an integer multiple of {target_fs} Hz")
    return x.derive(x.samples[::factor], fs=target_fs)


def epoch_split(x: Channel, k: int, parent_trial: str = "") -> List[Epoch]:
    """Cut ``x`` into ``k`` consecutive equal windows; trailing remainder samples are dropped."""
    if k < 1:
        raise InvalidSplitError(f"split count must be >= 1, got {k}")
    if k > len(x):
        raise InvalidSplitError(f"cannot split {len(x)} samples into {k} epochs")
    width = len(x) // k
    return [
        Epoch(
            samples=x.samples[index * width : (index + 1) * width],
            fs=x.fs,
            parent_trial=parent_trial,
            window_index=index,
        )
        for index in range(k)
    ]


def epoch_split_pair(a: Channel, b: Channel, k: int, parent_trial: str = "") -> List[BivariateEpoch]:
    if len(a) != len(b) or a.fs != b.fs:
        raise ChannelMismatchError("both force channels must share length and sampling rate before epoching")
    return [
        BivariateEpoch.pair(first, second)
        for first, second in zip(epoch_split(a, k, parent_trial), epoch_split(b, k, parent_trial))
    ]


class Extrema(NamedTuple):
    indices: np.ndarray
    kinds: np.ndarray  # +1 maximum, -1 minimum


def detect_extrema(samples: np.ndarray, min_prominence: Optional[float]) -> Extrema:
    """Alternating local maxima and minima with at least ``min_prominence``.

    Consecutive extrema of the same kind are collapsed onto the more extreme one.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size < 3:
        return Extrema(np.array([], dtype=int), np.array([], dtype=int))
    prominence = min_prominence if min_prominence and min_prominence > 0 else None
    maxima, _ = find_peaks(samples, prominence=prominence)
    minima, _ = find_peaks(-samples, prominence=prominence)

    order = np.argsort(np.concatenate([maxima, minima]), kind="stable")
    indices = np.concatenate([maxima, minima])[order]
    kinds = np.concatenate([np.ones(maxima.size, dtype=int), -np.ones(minima.size, dtype=int)])[order]

    kept_indices: List[int] = []
    kept_kinds: List[int] = []
    for index, kind in zip(indices.tolist(), kinds.tolist()):
        if kept_kinds and kept_kinds[-1] == kind:
            previous = kept_indices[-1]
            if kind * samples[index] > kind * samples[previous]:
                kept_indices[-1] = index
            continue
        kept_indices.append(index)
        kept_kinds.append(kind)
    return Extrema(np.asarray(kept_indices, dtype=int), np.asarray(kept_kinds, dtype=int))


def default_prominence(x: Channel, fraction: float = DEFAULT_PROMINENCE_FRACTION) -> float:
    return fraction * float(np.ptp(x.samples)) if len(x) else 0.0


def extrema_periods(
    x: Channel,
    min_prominence: Optional[float] = None,
    bin_width: float = DEFAULT_HISTOGRAM_BIN_HZ,
) -> PeriodHistogram:
    """Histogram of 1/period, where a period separates two consecutive extrema of the same kind.

    ``min_prominence`` defaults to 5% of the channel's peak-to-peak range.
    """
    if len(x) < 3:
        raise InsufficientSamplesError("extrema detection needs at least 3 samples")
    if min_prominence is None:
        min_prominence = default_prominence(x)
    extrema = detect_extrema(x.samples, min_prominence)

    periods: List[np.ndarray] = []
    for kind in (1, -1):
        same = extrema.indices[extrema.kinds == kind]
        periods.append(np.diff(same) / x.fs)
    frequencies = 1.0 / np.concatenate(periods) if extrema.indices.size else np.array([])

    n_bins = max(1, int(math.ceil((x.fs / 2.0) / bin_width)))
    edges = np.linspace(0.0, n_bins * bin_width, n_bins + 1)
    counts, _ = np.histogram(frequencies, bins=edges)
    return PeriodHistogram(frequencies=frequencies, bin_edges=edges, counts=counts)


def merge_histograms(histograms: Sequence[PeriodHistogram]) -> PeriodHistogram:
    if not histograms:
        raise InsufficientSamplesError("no histograms to merge")
    edges = histograms[0].bin_edges
    frequencies = np.concatenate([h.frequencies for h in histograms])
    counts, _ = np.histogram(frequencies, bins=edges)
    return PeriodHistogram(frequencies=frequencies, bin_edges=edges, counts=counts)


def dominant_frequency(x: Channel) -> float:
    """Frequency of the largest non-DC bin of the amplitude spectrum of the demeaned channel."""
    if len(x) < 2:
        raise InsufficientSamplesError("dominant frequency needs at least 2 samples")
    centered = x.samples - np.mean(x.samples)
    magnitude = np.abs(np.fft.rfft(centered))[1:]
    scale = max(1.0, float(np.max(np.abs(x.samples))))
    if magnitude.size == 0 or float(np.max(magnitude)) <= 1e-12 * scale * len(x):
        raise NoPeakError(f"channel '{x.label}' has no spectral peak outside DC")
    freqs = np.fft.rfftfreq(len(x), d=1.0 / x.fs)[1:]
    return float(freqs[int(np.argmax(magnitude))])
