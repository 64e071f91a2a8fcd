"""Parametric rational transfer-function fitting on frequency-response data.

The fit linearizes the rational approximation problem (minimize
|B(z) - H * A(z)|^2 over the masked bins), then reweights by 1/|A_prev|^2
for a few iterations so the effective cost approaches the true relative
error |B/A - H|^2. Real coefficients are enforced by solving the real and
imaginary parts jointly, which is equivalent to fitting on the
conjugate-symmetric extension of the bins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .errors import FitError, VibrocalError
from .sysid import FrequencyResponse

# Poles are kept at magnitude <= 1 - 1e-6 so the inverse design always sees
# finite values on the unit circle. The internal clamp radius sits slightly
# deeper so that re-rooting the expanded polynomial cannot cross the bound.
POLE_RADIUS_LIMIT = 1.0 - 1e-6
_CLAMP_RADIUS = 1.0 - 1.25e-6

_SK_MAX_ITERS = 20
_SK_COEFF_TOL = 1e-10


@dataclass(frozen=True)
class RationalTF:
    """Discrete-time rational transfer function at a fixed sample rate.

    `b` and `a` hold numerator/denominator coefficients in ascending powers
    of z^{-1}; a[0] is 1 and every pole has magnitude <= 1 - 1e-6.
    """

    b: np.ndarray
    a: np.ndarray
    sample_rate: float

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=np.float64))
        a = np.atleast_1d(np.asarray(self.a, dtype=np.float64))
        if b.size < 1 or a.size < 1:
            raise VibrocalError("coefficient arrays must be non-empty")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(a))):
            raise VibrocalError("coefficients must be finite")
        if a[0] != 1.0:
            raise VibrocalError(f"denominator must be normalized to a[0] = 1, got {a[0]}")
        if not self.sample_rate > 0:
            raise VibrocalError("sample_rate must be positive")
        if a.size > 1:
            worst = np.max(np.abs(np.roots(a)))
            if worst > POLE_RADIUS_LIMIT:
                raise VibrocalError(
                    f"unstable denominator: pole magnitude {worst} exceeds {POLE_RADIUS_LIMIT}"
                )
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    @property
    def order(self) -> int:
        return max(self.b.size, self.a.size) - 1


def evaluate_tf(tf: RationalTF, freqs) -> FrequencyResponse:
    """Evaluate H(f) = B(z^{-1})/A(z^{-1}) at z = exp(2j*pi*f/fs)."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=np.float64))
    nyquist = tf.sample_rate / 2
    if np.any(freqs < 0) or np.any(freqs > nyquist * (1 + 1e-12)):
        raise VibrocalError(f"frequencies must lie in [0, {nyquist}] Hz")
    _, h = scipy.signal.freqz(tf.b, tf.a, worN=2 * np.pi * freqs / tf.sample_rate)
    return FrequencyResponse(freqs, h)


def _response(b: np.ndarray, a: np.ndarray, z_inv: np.ndarray) -> np.ndarray:
    num = np.polynomial.polynomial.polyval(z_inv, b)
    den = np.polynomial.polynomial.polyval(z_inv, a)
    return num / den


def _rel_rms_error(h_fit: np.ndarray, h_ref: np.ndarray) -> float:
    scale = math.sqrt(float(np.mean(np.abs(h_ref) ** 2)))
    if scale == 0.0:
        return math.sqrt(float(np.mean(np.abs(h_fit - h_ref) ** 2)))
    return math.sqrt(float(np.mean(np.abs(h_fit - h_ref) ** 2))) / scale


def _infer_sample_rate(frf: FrequencyResponse, sample_rate) -> float:
    if sample_rate is not None:
        return float(sample_rate)
    # Pipeline FRFs span the full grid up to Nyquist, so the top bin is fs/2.
    return 2.0 * float(frf.freqs[-1])


def _from_arc_basis(b_v, a_v, centre: float, scale: float):
    """Convert arc-basis polynomials back to real z^{-1} coefficients.

    Direct binomial expansion of (z^{-1} - c)^k / s^k amplifies rounding by
    (1/s)^degree, so the conversion goes through the roots: affine-map the
    v-roots to z^{-1}-roots and re-expand the products, which is stable for
    the moderate orders used here.
    """

    def to_z(coeffs):
        coeffs = np.asarray(coeffs, dtype=np.float64)
        tol = 1e-13 * max(1.0, float(np.max(np.abs(coeffs))))
        degree = coeffs.size - 1
        while degree > 0 and abs(coeffs[degree]) < tol:
            degree -= 1
        if degree == 0:
            return np.array([coeffs[0] + 0j])
        v_roots = np.roots(coeffs[degree::-1])
        u_roots = centre + scale * v_roots
        poly = np.array([1.0 + 0j])
        for u in u_roots:
            poly = np.convolve(poly, np.array([-u, 1.0]))
        return (coeffs[degree] / scale**degree) * poly

    b_z = to_z(b_v)
    a_z = to_z(a_v)
    for arr, name in ((b_z, "numerator"), (a_z, "denominator")):
        if np.max(np.abs(arr.imag)) > 1e-6 * max(1.0, float(np.max(np.abs(arr.real)))):
            raise FitError(f"{name} reconstruction lost conjugate symmetry")
    b_z, a_z = b_z.real, a_z.real
    if abs(a_z[0]) < 1e-8 * np.max(np.abs(a_z)):
        raise FitError("fit produced a degenerate denominator (pole at infinity)")
    return b_z / a_z[0], a_z / a_z[0]


def fit_rational(
    frf: FrequencyResponse,
    mask,
    nb: int,
    na: int,
    sample_rate: float | None = None,
) -> RationalTF:
    """Fit a rational transfer function to the masked bins of an FRF.

    A linear least-squares fit of the equation-error form
    sum_i w_i |B(z_i) - H_i A(z_i)|^2, followed by up to 20 reweighting
    iterations with w_i = 1/|A_prev(z_i)|^2. An iteration that increases the
    masked-bin residual is rejected and the previous iterate returned. The
    result is stabilized before return.

    Parameters
    ----------
    frf : FrequencyResponse
        Data to fit.
    mask : boolean array
        Bins to include; at least nb + na + 1 must be set.
    nb, na : int
        Numerator and denominator polynomial orders (>= 0).
    sample_rate : float, optional
        Sample rate of the target filter; by default inferred from the top
        grid frequency (full-grid FRFs end at Nyquist).
    """
    if nb < 0 or na < 0:
        raise VibrocalError("polynomial orders must be non-negative")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != frf.freqs.shape:
        raise VibrocalError("mask must match the frequency grid")
    n_bins = int(mask.sum())
    if n_bins < nb + na + 1:
        raise FitError(
            f"underdetermined fit: {n_bins} masked bins for {nb + na + 1} coefficients"
        )
    fs = _infer_sample_rate(frf, sample_rate)
    if np.any(frf.freqs[mask] > fs / 2 * (1 + 1e-12)):
        raise VibrocalError("masked bins exceed the Nyquist frequency")

    h = frf.values[mask]
    z_inv = np.exp(-2j * np.pi * frf.freqs[mask] / fs)
    # The fit runs on the conjugate-symmetric extension of the bins in a
    # shifted-and-scaled monomial basis v = (z^{-1} - c)/s centered on the
    # data: plain powers of z^{-1} on a short arc of the unit circle are
    # numerically degenerate beyond order ~8.
    z_ext = np.concatenate([z_inv, np.conj(z_inv)])
    h_ext = np.concatenate([h, np.conj(h)])
    centre = float(np.mean(z_ext).real)
    scale = float(np.max(np.abs(z_ext - centre)))
    if scale == 0.0:
        scale = 1.0
    v = (z_ext - centre) / scale
    powers = v[:, None] ** np.arange(max(nb, na) + 1)[None, :]
    # Columns: b^_0..b^_nb, then a^_1..a^_na; the denominator is normalized
    # by fixing its constant v-coefficient, an in-arc normalization point.
    design = np.hstack([powers[:, : nb + 1], -h_ext[:, None] * powers[:, 1: na + 1]])
    # Relative data weighting: without it the equation error is absolute and
    # bins 60+ dB below the peaks are fit arbitrarily badly.
    h_mag = np.abs(h_ext)
    data_w = 1.0 / np.maximum(h_mag, 1e-3 * max(float(np.median(h_mag)), 1e-300))

    weights = data_w
    best = None
    best_err = np.inf
    prev_x = None
    n_half = z_inv.size
    for _ in range(_SK_MAX_ITERS):
        lhs = np.concatenate([(design * weights[:, None]).real,
                              (design * weights[:, None]).imag])
        rhs = np.concatenate([(h_ext * weights).real, (h_ext * weights).imag])
        x, _, rank, _ = np.linalg.lstsq(lhs, rhs, rcond=None)
        b_v = x[: nb + 1]
        a_v = np.concatenate([[1.0], x[nb + 1:]])
        num = np.polynomial.polynomial.polyval(v[:n_half], b_v)
        den = np.polynomial.polynomial.polyval(v[:n_half], a_v)
        err = _rel_rms_error(num / den, h)
        if rank < lhs.shape[1] and err > 1e-4:
            # Rank deficiency with a near-exact fit is harmless over-
            # parametrization (a flat FRF fit at order 1, or exact data fit
            # above its true order); with a poor fit it means the data does
            # not determine the model.
            raise FitError(
                f"singular normal equations: rank {rank} < {lhs.shape[1]} unknowns"
            )
        if err > best_err:
            break
        best = (b_v, a_v)
        best_err = err
        if prev_x is not None and np.max(np.abs(x - prev_x)) < _SK_COEFF_TOL:
            break
        prev_x = x
        weights = data_w / np.maximum(np.abs(
            np.polynomial.polynomial.polyval(v, a_v)
        ), 1e-12)
    b, a = _from_arc_basis(best[0], best[1], centre, scale)
    return stabilize(b, a, fs)


def select_order(
    frf: FrequencyResponse,
    mask,
    max_order: int,
    fit_tol: float,
    sample_rate: float | None = None,
):
    """Fit with nb = na = k for k = 1..max_order and pick the cheapest fit.

    Returns (tf, achieved_error, order) for the smallest order whose
    rms-relative masked-bin error is within `fit_tol`; if none reaches the
    tolerance, the order with the smallest error wins (ties toward lower
    order). Errors are measured on the stabilized result.

    Raises
    ------
    FitError
        Propagated from fit_rational.
    """
    if max_order < 1:
        raise VibrocalError(f"max_order must be >= 1, got {max_order}")
    if not fit_tol > 0:
        raise VibrocalError(f"fit_tol must be positive, got {fit_tol}")
    mask = np.asarray(mask, dtype=bool)
    fs = _infer_sample_rate(frf, sample_rate)
    h = frf.values[mask]
    z_inv = np.exp(-2j * np.pi * frf.freqs[mask] / fs)
    best = None
    for order in range(1, max_order + 1):
        tf = fit_rational(frf, mask, order, order, sample_rate=fs)
        err = _rel_rms_error(_response(tf.b, tf.a, z_inv), h)
        if err <= fit_tol:
            return tf, err, order
        if best is None or err < best[1]:
            best = tf, err, order
    return best


def stabilize(b, a, sample_rate: float) -> RationalTF:
    """Normalize a[0] to 1 and move every offending pole inside the margin.

    Poles outside the unit circle are reflected to 1/conj(p), which leaves
    the magnitude response unchanged apart from a constant factor that is
    folded back into the numerator; poles merely inside the stability margin
    are clamped radially. Phase at reflected poles necessarily changes.
    """
    b = np.atleast_1d(np.asarray(b, dtype=np.float64)).copy()
    a = np.atleast_1d(np.asarray(a, dtype=np.float64)).copy()
    if a.size < 1 or not np.any(a != 0):
        raise VibrocalError("degenerate zero denominator")
    if a[0] == 0:
        raise VibrocalError("leading denominator coefficient must be nonzero")
    b /= a[0]
    a /= a[0]
    a[0] = 1.0
    if a.size == 1:
        return RationalTF(b, a, sample_rate)

    poles = np.roots(a)
    changed = False
    gain = 1.0
    new_poles = []
    for p in poles:
        mag = abs(p)
        if mag > POLE_RADIUS_LIMIT:
            changed = True
            if mag >= 1.0:
                # |e^{jw} - p| = |p| * |e^{jw} - 1/conj(p)|, so dividing the
                # numerator by |p| preserves |H| on the unit circle exactly.
                p = 1.0 / np.conj(p)
                gain /= mag
                mag = abs(p)
            if mag > _CLAMP_RADIUS:
                p = p * (_CLAMP_RADIUS / mag)
        new_poles.append(p)
    if not changed:
        return RationalTF(b, a, sample_rate)

    a_new = np.array([1.0 + 0j])
    for p in new_poles:
        a_new = np.convolve(a_new, np.array([1.0, -p]))
    imag_scale = np.max(np.abs(a_new.imag))
    if imag_scale > 1e-8 * max(1.0, np.max(np.abs(a_new.real))):
        raise VibrocalError("stabilized denominator is not conjugate-symmetric")
    return RationalTF(b * gain, a_new.real, sample_rate)
