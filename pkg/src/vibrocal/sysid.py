"""Nonparametric frequency-response estimation from input/output recordings."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .errors import VibrocalError
from .signals import SampledSignal


@dataclass(frozen=True)
class FrequencyResponse:
    """Complex frequency-response samples on a strictly increasing grid.

    Attributes
    ----------
    freqs : ndarray
        Frequencies in Hz, strictly increasing, non-negative.
    values : ndarray
        Complex response, units (m/s^2)/V for device measurements.
    coherence : ndarray or None
        Per-bin magnitude-squared coherence in [0, 1], same length as
        `freqs`; None when not applicable (e.g. model evaluations).
    """

    freqs: np.ndarray
    values: np.ndarray
    coherence: np.ndarray | None = None

    def __post_init__(self):
        freqs = np.atleast_1d(np.asarray(self.freqs, dtype=np.float64))
        values = np.atleast_1d(np.asarray(self.values, dtype=np.complex128))
        if freqs.ndim != 1 or freqs.size == 0 or freqs.shape != values.shape:
            raise VibrocalError("freqs and values must be 1-D and of equal length")
        if freqs[0] < 0 or np.any(np.diff(freqs) <= 0):
            raise VibrocalError("freqs must be non-negative and strictly increasing")
        if not np.all(np.isfinite(values)):
            raise VibrocalError("response values must be finite")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "values", values)
        if self.coherence is not None:
            coh = np.atleast_1d(np.asarray(self.coherence, dtype=np.float64))
            if coh.shape != freqs.shape:
                raise VibrocalError("coherence must match the frequency grid")
            if not np.all((coh >= 0) & (coh <= 1)):
                raise VibrocalError("coherence must lie in [0, 1]")
            object.__setattr__(self, "coherence", coh)

    def __len__(self):
        return self.freqs.size


def estimate_frf(
    input: SampledSignal,
    output: SampledSignal,
    segment_len: int = 4096,
    overlap: float = 0.5,
) -> FrequencyResponse:
    """Welch-averaged H1 frequency-response estimate with coherence.

    H(f) = S_xy(f) / S_xx(f) from Hann-windowed, overlapping segments,
    together with the magnitude-squared coherence |S_xy|^2 / (S_xx * S_yy).
    Bins with zero averaged input power are marked invalid: value 0,
    coherence 0. With a single segment the coherence is identically one and
    carries no information; a warning is emitted.

    Parameters
    ----------
    input, output : SampledSignal
        Drive and recorded signal; equal sample rates and lengths.
    segment_len : int
        Welch segment length; a power of two.
    overlap : float
        Segment overlap fraction in [0, 0.9].

    Returns
    -------
    FrequencyResponse
        Bins from 0 to fs/2 inclusive.
    """
    if input.sample_rate != output.sample_rate:
        raise VibrocalError(
            f"sample-rate mismatch: {input.sample_rate} vs {output.sample_rate}"
        )
    if len(input) != len(output):
        raise VibrocalError(
            f"length mismatch: input {len(input)} vs output {len(output)} samples"
        )
    segment_len = int(segment_len)
    if segment_len < 2 or segment_len & (segment_len - 1):
        raise VibrocalError(f"segment_len must be a power of two, got {segment_len}")
    if len(input) < segment_len:
        raise VibrocalError(
            f"signals ({len(input)} samples) shorter than one segment ({segment_len})"
        )
    if not 0 <= overlap <= 0.9:
        raise VibrocalError(f"overlap must lie in [0, 0.9], got {overlap}")

    fs = input.sample_rate
    noverlap = int(round(overlap * segment_len))
    kwargs = dict(
        fs=fs, window="hann", nperseg=segment_len, noverlap=noverlap, detrend=False
    )
    freqs, s_xx = scipy.signal.welch(input.samples, **kwargs)
    _, s_yy = scipy.signal.welch(output.samples, **kwargs)
    _, s_xy = scipy.signal.csd(input.samples, output.samples, **kwargs)

    n_segments = 1 + (len(input) - segment_len) // (segment_len - noverlap)
    if n_segments < 2:
        warnings.warn(
            "single-segment estimate: coherence is identically one and unreliable",
            stacklevel=2,
        )

    valid = s_xx > 0
    values = np.zeros(freqs.size, dtype=np.complex128)
    values[valid] = s_xy[valid] / s_xx[valid]
    coherence = np.zeros(freqs.size)
    both = valid & (s_yy > 0)
    if n_segments < 2:
        coherence[both] = 1.0
    else:
        coherence[both] = np.abs(s_xy[both]) ** 2 / (s_xx[both] * s_yy[both])
        np.clip(coherence, 0.0, 1.0, out=coherence)
    return FrequencyResponse(freqs, values, coherence)


def prepare_sysid_pair(
    input: SampledSignal, output: SampledSignal, segment_len: int
) -> tuple[SampledSignal, SampledSignal]:
    """Condition a playback/recording pair for Welch estimation.

    Prepends one segment of silence to both signals and zero-pads the
    shorter one, so that every excitation instant is seen by windows at all
    phases and the full response tail is kept. Without the pre-roll, content
    near the start of the record only ever lands in one window's taper and
    picks up a large single-window bias.
    """
    if input.sample_rate != output.sample_rate:
        raise VibrocalError(
            f"sample-rate mismatch: {input.sample_rate} vs {output.sample_rate}"
        )
    total = int(segment_len) + max(len(input), len(output))
    lead = np.zeros(int(segment_len))

    def pad(signal: SampledSignal) -> SampledSignal:
        samples = np.concatenate(
            [lead, signal.samples, np.zeros(total - segment_len - len(signal))]
        )
        return SampledSignal(samples, signal.sample_rate)

    return pad(input), pad(output)


def band_mask(frf: FrequencyResponse, coherence_threshold: float, band: tuple) -> np.ndarray:
    """Boolean mask of bins inside `band` with coherence above the threshold."""
    if frf.coherence is None:
        raise VibrocalError("frequency response carries no coherence")
    if not 0 <= coherence_threshold <= 1:
        raise VibrocalError(
            f"coherence_threshold must lie in [0, 1], got {coherence_threshold}"
        )
    lo, hi = float(band[0]), float(band[1])
    return (frf.coherence >= coherence_threshold) & (frf.freqs >= lo) & (frf.freqs <= hi)
