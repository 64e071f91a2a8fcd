"""Excitation signals, envelope shaping, and time-domain comparison metrics.

All signals are uniformly sampled, real-valued, mono. Command/input signals
are in volts, recorded acceleration in m/s^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .errors import VibrocalError

SWEEP_LAWS = ("linear", "logarithmic")


@dataclass(frozen=True)
class SampledSignal:
    """A uniformly sampled real-valued time series.

    Attributes
    ----------
    samples : ndarray, shape (n,)
        Sample values, finite, float64.
    sample_rate : float
        Sampling rate in Hz, > 0.
    """

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise VibrocalError("signal must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise VibrocalError("signal contains non-finite samples")
        rate = float(self.sample_rate)
        if not math.isfinite(rate) or rate <= 0:
            raise VibrocalError(f"sample_rate must be positive and finite, got {rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", rate)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        """Signal duration in seconds."""
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class SweepSpec:
    """Parameters of a swept-sine excitation.

    `law` selects how the instantaneous frequency moves from `f_start` to
    `f_end`: linearly in time, or along a constant-ratio (logarithmic) curve.
    `fade` is the raised-cosine ramp length applied at both ends.
    """

    f_start: float
    f_end: float
    duration: float
    amplitude: float = 1.0
    law: str = "linear"
    fade: float = 0.0

    def __post_init__(self):
        fields = (self.f_start, self.f_end, self.duration, self.amplitude, self.fade)
        if not all(math.isfinite(v) for v in fields):
            raise VibrocalError("sweep spec contains non-finite fields")
        if not 0 < self.f_start < self.f_end:
            raise VibrocalError(
                f"need 0 < f_start < f_end, got ({self.f_start}, {self.f_end})"
            )
        if self.duration <= 0:
            raise VibrocalError(f"duration must be positive, got {self.duration}")
        if self.amplitude <= 0:
            raise VibrocalError(f"amplitude must be positive, got {self.amplitude}")
        if not 0 <= self.fade <= self.duration / 2:
            raise VibrocalError(
                f"fade must lie in [0, duration/2], got {self.fade}"
            )
        if self.law not in SWEEP_LAWS:
            raise VibrocalError(f"unknown sweep law {self.law!r}, expected one of {SWEEP_LAWS}")


def generate_sweep(spec: SweepSpec, sample_rate: float) -> SampledSignal:
    """Generate a swept-sine (chirp) excitation signal.

    The phase is evaluated in closed form rather than by accumulating
    per-sample increments, so the result is bit-reproducible and free of
    phase drift.

    Parameters
    ----------
    spec : SweepSpec
        Sweep parameters; `spec.f_end` must stay below Nyquist.
    sample_rate : float
        Sampling rate in Hz.

    Returns
    -------
    SampledSignal
        Chirp of length round(duration * sample_rate) with raised-cosine
        fades of `spec.fade` seconds at both ends.
    """
    fs = float(sample_rate)
    if not math.isfinite(fs) or fs <= 0:
        raise VibrocalError(f"sample_rate must be positive and finite, got {fs}")
    if spec.f_end >= fs / 2:
        raise VibrocalError(
            f"f_end={spec.f_end} Hz violates Nyquist for sample_rate={fs} Hz"
        )
    n = int(round(spec.duration * fs))
    if n < 1:
        raise VibrocalError("sweep shorter than one sample")
    t = np.arange(n) / fs
    big_t = spec.duration
    if spec.law == "linear":
        phase = 2 * np.pi * (spec.f_start * t + (spec.f_end - spec.f_start) * t**2 / (2 * big_t))
    else:
        ratio = spec.f_end / spec.f_start
        phase = 2 * np.pi * spec.f_start * big_t / np.log(ratio) * (ratio ** (t / big_t) - 1.0)
    out = SampledSignal(spec.amplitude * np.sin(phase), fs)
    if spec.fade > 0:
        out = apply_fade(out, spec.fade)
    return out


def apply_fade(signal: SampledSignal, fade: float) -> SampledSignal:
    """Apply raised-cosine ramps to both ends of a signal.

    The first and last round(fade * fs) samples are scaled by
    0.5 * (1 - cos(pi * t / fade)); interior samples are unchanged.
    """
    if fade < 0:
        raise VibrocalError(f"fade must be non-negative, got {fade}")
    n = len(signal)
    k = int(round(fade * signal.sample_rate))
    if k == 0:
        return signal
    if 2 * k > n:
        raise VibrocalError(
            f"fade of {k} samples is longer than half the signal ({n} samples)"
        )
    ramp = 0.5 * (1.0 - np.cos(np.pi * (np.arange(k) / signal.sample_rate) / fade))
    samples = signal.samples.copy()
    samples[:k] *= ramp
    samples[n - k:] *= ramp[::-1]
    return SampledSignal(samples, signal.sample_rate)


def tone_burst(
    freq: float,
    duration: float,
    sample_rate: float,
    amplitude: float = 1.0,
    lead: float = 0.0,
    tail: float = 0.0,
) -> SampledSignal:
    """Raised-cosine-windowed tone burst with optional leading/trailing silence.

    Localized in both time and frequency; used as the default validation
    signal for rendering accuracy checks.
    """
    fs = float(sample_rate)
    if freq <= 0 or freq >= fs / 2:
        raise VibrocalError(f"tone frequency {freq} Hz outside (0, Nyquist)")
    if duration <= 0:
        raise VibrocalError("burst duration must be positive")
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    envelope = 0.5 * (1.0 - np.cos(2 * np.pi * t / duration))
    burst = amplitude * envelope * np.sin(2 * np.pi * freq * t)
    n_lead = int(round(lead * fs))
    n_tail = int(round(tail * fs))
    samples = np.concatenate([np.zeros(n_lead), burst, np.zeros(n_tail)])
    return SampledSignal(samples, fs)


def _bandpass(x: np.ndarray, band: tuple, fs: float) -> np.ndarray:
    # 4th-order Butterworth, forward-backward: zero phase so the integer-lag
    # alignment below is not biased by filter delay.
    sos = scipy.signal.butter(4, [band[0], band[1]], btype="bandpass", fs=fs, output="sos")
    return scipy.signal.sosfiltfilt(sos, x)


def nrmse_aligned(
    desired: SampledSignal,
    measured: SampledSignal,
    band: tuple,
    max_lag: int,
) -> float:
    """Normalized RMS error after optimal gain and integer-lag alignment.

    Both signals are band-pass filtered to `band`, the integer lag in
    [-max_lag, max_lag] with the strongest cross-correlation magnitude is
    found (ties broken toward the smallest |lag|), the optimal scalar gain
    is fit by least squares, and the residual RMS is normalized by the RMS
    of the filtered desired signal. 0 means perfect reproduction up to gain
    and delay; 1 corresponds to no reproduction at all.
    """
    if desired.sample_rate != measured.sample_rate:
        raise VibrocalError(
            f"sample-rate mismatch: {desired.sample_rate} vs {measured.sample_rate}"
        )
    fs = desired.sample_rate
    lo, hi = float(band[0]), float(band[1])
    if not 0 < lo < hi < fs / 2:
        raise VibrocalError(f"band {band} must lie inside (0, {fs / 2}) Hz")
    max_lag = int(max_lag)
    if not 0 <= max_lag < min(len(desired), len(measured)):
        raise VibrocalError("max_lag must be non-negative and shorter than both signals")

    d = _bandpass(desired.samples, (lo, hi), fs)
    m = _bandpass(measured.samples, (lo, hi), fs)
    rms_d = math.sqrt(float(np.mean(d * d)))
    if rms_d == 0.0:
        raise VibrocalError("desired signal has no in-band energy")

    # c[j] = sum_i d[i] * m[i - (j - (len(m) - 1))]; the shift L applied to
    # the measured signal (m_L[i] = m[i + L]) corresponds to j = len(m) - 1 - L.
    c = scipy.signal.correlate(d, m, mode="full", method="fft")
    lags = np.arange(-max_lag, max_lag + 1)
    scores = np.abs(c[len(m) - 1 - lags])
    best = np.flatnonzero(scores == scores.max())
    lag = int(lags[best[np.lexsort((lags[best], np.abs(lags[best])))[0]]])

    shifted = np.zeros_like(d)
    src_lo, src_hi = max(0, lag), min(len(m), len(d) + lag)
    if src_hi > src_lo:
        shifted[src_lo - lag: src_hi - lag] = m[src_lo:src_hi]
    energy = float(np.dot(shifted, shifted))
    gain = float(np.dot(d, shifted)) / energy if energy > 0 else 0.0
    resid = d - gain * shifted
    return math.sqrt(float(np.mean(resid * resid))) / rms_d
