"""Regularized inverse-filter design and command-signal synthesis.

The inverse is realized as a linear-phase-latency FIR filter: the
Tikhonov-regularized spectral inverse is sampled on the design grid,
limited to the calibration band, gain-capped, and transformed to real taps
with an explicit latency of half the filter length. Minimum-phase inversion
is deliberately not offered; the rendering metric compensates pure delay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import VibrocalError
from .signals import SampledSignal
from .tffit import RationalTF, evaluate_tf

DEFAULT_G_MAX = 100.0  # 40 dB: protects an amplifier/actuator from anti-resonance boosts
_AUTO_BETA_FACTOR = 1e-4


@dataclass(frozen=True)
class InverseFilter:
    """FIR inverse filter with explicit latency.

    `taps` convolve a desired acceleration signal into a drive command;
    `latency` (= len(taps)//2) is the group delay of the cascade
    inverse-then-plant on a converged model.
    """

    taps: np.ndarray
    latency: int
    band: tuple
    beta: float
    g_max: float
    sample_rate: float

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.size < 2:
            raise VibrocalError("taps must be a 1-D array")
        if not np.all(np.isfinite(taps)):
            raise VibrocalError("taps must be finite")
        if self.latency != taps.size // 2:
            raise VibrocalError(
                f"latency {self.latency} != len(taps)//2 = {taps.size // 2}"
            )
        peak = float(np.max(np.abs(np.fft.rfft(taps))))
        if peak > self.g_max * (1 + 1e-6):
            raise VibrocalError(
                f"filter gain {peak} exceeds the cap {self.g_max}"
            )
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "band", (float(self.band[0]), float(self.band[1])))


def _band_weight(freqs: np.ndarray, band: tuple) -> np.ndarray:
    """1 inside the band, raised-cosine transitions of width 5% of each edge outside."""
    lo, hi = band
    w = np.zeros(freqs.size)
    w[(freqs >= lo) & (freqs <= hi)] = 1.0
    w_lo = 0.05 * lo
    if w_lo > 0:
        rise = (freqs >= lo - w_lo) & (freqs < lo)
        w[rise] = 0.5 * (1 + np.cos(np.pi * (lo - freqs[rise]) / w_lo))
    w_hi = 0.05 * hi
    if w_hi > 0:
        fall = (freqs > hi) & (freqs <= hi + w_hi)
        w[fall] = 0.5 * (1 + np.cos(np.pi * (freqs[fall] - hi) / w_hi))
    return w


def design_inverse(
    tf: RationalTF,
    band: tuple,
    beta: float | None = None,
    g_max: float = DEFAULT_G_MAX,
    fir_len: int = 2048,
) -> InverseFilter:
    """Design a band-limited, gain-capped FIR inverse of a fitted model.

    The model response H is evaluated on the fir_len-point DFT grid and
    inverted as C = conj(H) / (|H|^2 + beta) inside `band` (zero outside,
    with raised-cosine transitions of width 5% of each band edge). |C| is
    clamped to `g_max` preserving phase, and real taps are synthesized by
    inverse DFT with a circular shift of fir_len/2 and a Hann taper.

    Parameters
    ----------
    tf : RationalTF
        Fitted plant model.
    band : (low_hz, high_hz)
        Frequencies where inversion is attempted; 0 <= low < high <= fs/2.
    beta : float, optional
        Tikhonov constant in units of |H|^2. Default: 1e-4 times the median
        in-band |H|^2, which makes the knob scale-free.
    g_max : float
        Hard cap on |C|, linear scale.
    fir_len : int
        Even tap count >= 64; latency is fir_len // 2.
    """
    fs = tf.sample_rate
    fir_len = int(fir_len)
    if fir_len < 64 or fir_len % 2:
        raise VibrocalError(f"fir_len must be an even integer >= 64, got {fir_len}")
    lo, hi = float(band[0]), float(band[1])
    if not 0 <= lo < hi <= fs / 2:
        raise VibrocalError(f"band {band} must satisfy 0 <= low < high <= {fs / 2}")
    if beta is not None and beta < 0:
        raise VibrocalError(f"beta must be non-negative, got {beta}")
    if not g_max > 0:
        raise VibrocalError(f"g_max must be positive, got {g_max}")

    freqs = np.fft.rfftfreq(fir_len, 1.0 / fs)
    h = evaluate_tf(tf, freqs).values
    power = np.abs(h) ** 2
    in_band = (freqs >= lo) & (freqs <= hi)
    if beta is None:
        beta = _AUTO_BETA_FACTOR * float(np.median(power[in_band]))

    denom = power + beta
    c = np.zeros(freqs.size, dtype=np.complex128)
    nonzero = denom > 0
    c[nonzero] = np.conj(h[nonzero]) / denom[nonzero]
    c *= _band_weight(freqs, (lo, hi))
    mag = np.abs(c)
    over = mag > g_max
    c[over] *= g_max / mag[over]
    c[0] = c[0].real
    c[-1] = c[-1].real

    # Explicit conjugate-symmetric extension so the zero-imaginary-residue
    # invariant of the synthesized taps is actually checked.
    full = np.concatenate([c, np.conj(c[-2:0:-1])])
    taps_c = np.fft.ifft(full)
    if np.max(np.abs(taps_c.imag)) > 1e-12 * max(1.0, np.max(np.abs(taps_c.real))):
        raise VibrocalError("inverse filter synthesis left an imaginary residue")
    taps = np.roll(taps_c.real, fir_len // 2)
    taps *= 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(fir_len) / fir_len)

    peak = float(np.max(np.abs(np.fft.rfft(taps))))
    if peak > g_max:
        taps *= g_max / peak
    return InverseFilter(taps, fir_len // 2, (lo, hi), float(beta), float(g_max), fs)


def adapt_signal(input: SampledSignal, inv: InverseFilter) -> SampledSignal:
    """Convolve an input signal with the inverse filter to get a command signal.

    Full linear convolution: the output has len(input) + len(taps) - 1
    samples and its useful portion lags the input by `inv.latency` samples.
    """
    if input.sample_rate != inv.sample_rate:
        raise VibrocalError(
            f"sample-rate mismatch: {input.sample_rate} vs {inv.sample_rate}"
        )
    return SampledSignal(np.convolve(input.samples, inv.taps), input.sample_rate)
