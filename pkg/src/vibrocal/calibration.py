"""Per-location and whole-device calibration loops.

One location runs sweep -> FRF estimate -> model fit -> inverse design ->
validation playback, repeating with an escalation policy until the rendered
validation signal matches the desired one: first the order budget doubles
(up to the configured cap), then the sweep duration doubles (up to 4x,
which doubles the Welch averages), then the loop stops and reports the
best iterate.

The device is an abstract playback-and-record port: any object with a
`sample_rate` attribute and `play_and_record(command, location, seed)`
returning a SampledSignal. The simulator implements it; real hardware
would be another implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import VibrocalError
from .inversion import DEFAULT_G_MAX, design_inverse, adapt_signal
from .plant import Location
from .signals import SampledSignal, SweepSpec, generate_sweep, nrmse_aligned, tone_burst
from .sysid import (
    FrequencyResponse,
    band_mask,
    estimate_frf,
    prepare_sysid_pair,
)
from .tffit import RationalTF, select_order


@dataclass(frozen=True)
class CalibConfig:
    """All knobs of the calibration loop for one device.

    `beta=None` lets the inverse design pick its scale-aware default.
    `validation=None` uses a 100 ms raised-cosine tone burst at the band's
    geometric mean frequency. `segment_len=None` derives the Welch segment
    from the base sweep length so that every location shares one frequency
    grid regardless of per-location sweep escalation.
    """

    sweep: SweepSpec
    band: tuple
    coherence_threshold: float = 0.95
    fit_tol: float = 0.02
    render_tol: float = 0.05
    max_order: int = 16
    max_iters: int = 4
    beta: float | None = None
    g_max: float = DEFAULT_G_MAX
    fir_len: int = 2048
    validation: SampledSignal | None = None
    segment_len: int | None = None
    overlap: float = 0.5

    def __post_init__(self):
        lo, hi = float(self.band[0]), float(self.band[1])
        if not (self.fit_tol > 0 and self.render_tol >= 0):
            raise VibrocalError("tolerances must be positive")
        if not 0 <= self.coherence_threshold <= 1:
            raise VibrocalError("coherence_threshold must lie in [0, 1]")
        if self.max_iters < 1:
            raise VibrocalError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.max_order < 1:
            raise VibrocalError(f"max_order must be >= 1, got {self.max_order}")
        if not (self.sweep.f_start <= lo < hi <= self.sweep.f_end):
            raise VibrocalError(
                f"band {self.band} must lie inside the sweep range "
                f"[{self.sweep.f_start}, {self.sweep.f_end}]"
            )
        object.__setattr__(self, "band", (lo, hi))


@dataclass(frozen=True)
class LocationModel:
    """Fitted model and quality metrics for one target location."""

    location: Location
    tf: RationalTF
    order: int
    fit_error: float
    render_error: float
    mean_coherence: float
    converged: bool
    iterations_used: int
    frf: FrequencyResponse | None = None

    def __post_init__(self):
        if self.fit_error < 0 or self.render_error < 0:
            raise VibrocalError("errors must be non-negative")
        if not 0 <= self.mean_coherence <= 1:
            raise VibrocalError("mean_coherence must lie in [0, 1]")


@dataclass(frozen=True)
class DeviceMap:
    """Per-location models for one device, sharing a single frequency grid."""

    sample_rate: float
    band: tuple
    entries: tuple
    actuator_pos: Location | None = None
    format_version: int = 1
    failures: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.format_version != 1:
            raise VibrocalError(
                f"unsupported format_version {self.format_version}, expected 1"
            )
        entries = tuple(self.entries)
        seen = set()
        for entry in entries:
            key = (entry.location.x, entry.location.y)
            if key in seen:
                raise VibrocalError(f"duplicate entry location {key}")
            seen.add(key)
            if entry.tf.sample_rate != self.sample_rate:
                raise VibrocalError("entry sample rate differs from the map")
            if entry.frf is None:
                raise VibrocalError("every map entry must store its measured FRF")
        grids = {entry.frf.freqs.tobytes() for entry in entries}
        if len(grids) > 1:
            raise VibrocalError("entries do not share a common frequency grid")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "band", (float(self.band[0]), float(self.band[1])))

    @property
    def grid(self) -> np.ndarray:
        if not self.entries:
            raise VibrocalError("device map has no entries")
        return self.entries[0].frf.freqs


def default_config(sample_rate: float = 4000.0) -> CalibConfig:
    """Default calibration settings: 10-500 Hz 5 s sweep, 20-500 Hz band."""
    del sample_rate  # sweep range is fixed; rate enters at generation time
    return CalibConfig(
        sweep=SweepSpec(f_start=10.0, f_end=500.0, duration=5.0, amplitude=1.0,
                        law="linear", fade=0.05),
        band=(20.0, 500.0),
    )


def _interaction_seed(seed: int, counter: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(counter)]).generate_state(1)[0])


def _auto_segment_len(n_sweep: int) -> int:
    # Longest affordable segment: resolution bias at lightly damped
    # resonances falls with segment length, and the padded record always
    # provides enough averages. Capped so stored FRF grids stay compact.
    return int(min(8192, max(256, 2 ** math.floor(math.log2(max(2, n_sweep / 2))))))


def _render_max_lag(fir_len: int) -> int:
    return fir_len // 2 + fir_len // 8


def _default_validation(config: CalibConfig, sample_rate: float) -> SampledSignal:
    # Keep the window just long enough for the lag search: silent padding
    # dilutes the desired signal's RMS while sensor noise keeps integrating,
    # which inflates the NRMSE floor on noisy devices.
    lo, hi = config.band
    centre = math.sqrt(lo * hi)
    n_lead = int(round(0.025 * sample_rate))
    n_burst = int(round(0.1 * sample_rate))
    n_min = _render_max_lag(config.fir_len) + 100
    n_tail = max(int(round(0.1 * sample_rate)), n_min - n_lead - n_burst)
    return tone_burst(
        centre, 0.1, sample_rate, amplitude=1.0,
        lead=n_lead / sample_rate, tail=n_tail / sample_rate,
    )


def run_location_calibration(
    device, location: Location, config: CalibConfig, seed: int
) -> LocationModel:
    """Calibrate one target location against a playback-and-record port.

    Returns the best iterate (minimum render error) with `converged` set
    when the rendering error reached `config.render_tol`, and
    `iterations_used` counting all executed iterations.
    """
    fs = device.sample_rate
    if config.sweep.f_end >= fs / 2:
        raise VibrocalError("sweep range violates the device Nyquist frequency")
    validation = (
        config.validation
        if config.validation is not None
        else _default_validation(config, fs)
    )
    if validation.sample_rate != fs:
        raise VibrocalError("validation signal sample rate does not match the device")
    base_len = int(round(config.sweep.duration * fs))
    segment_len = config.segment_len or _auto_segment_len(base_len)

    order_budget = min(config.max_order, max(2, -(-config.max_order // 4)))
    sweep_spec = config.sweep
    duration_cap = 4 * config.sweep.duration
    best = None
    interactions = 0
    iterations = 0
    for _ in range(config.max_iters):
        iterations += 1
        sweep = generate_sweep(sweep_spec, fs)
        recording = device.play_and_record(
            sweep, location, _interaction_seed(seed, interactions)
        )
        interactions += 1
        x, y = prepare_sysid_pair(sweep, recording, segment_len)
        frf = estimate_frf(x, y, segment_len=segment_len, overlap=config.overlap)
        mask = band_mask(frf, config.coherence_threshold, config.band)
        if int(mask.sum()) < 2 * order_budget + 1:
            raise VibrocalError(
                "too few coherent bins in the calibration band; "
                "check band, coherence_threshold, and sweep range"
            )
        tf, fit_error, order = select_order(
            frf, mask, order_budget, config.fit_tol, sample_rate=fs
        )
        inv = design_inverse(tf, config.band, config.beta, config.g_max, config.fir_len)
        command = adapt_signal(validation, inv)
        rendered = device.play_and_record(
            command, location, _interaction_seed(seed, interactions)
        )
        interactions += 1
        render_error = nrmse_aligned(
            validation,
            rendered,
            config.band,
            max_lag=min(_render_max_lag(config.fir_len), len(validation) - 1),
        )
        # Stored FRFs are trimmed to the band: that is the part the fit was
        # built from, and it keeps map files compact.
        keep = (frf.freqs >= config.band[0]) & (frf.freqs <= config.band[1])
        stored_frf = FrequencyResponse(
            frf.freqs[keep], frf.values[keep], frf.coherence[keep]
        )
        model = LocationModel(
            location=location,
            tf=tf,
            order=order,
            fit_error=fit_error,
            render_error=render_error,
            mean_coherence=float(np.mean(frf.coherence[mask])) if mask.any() else 0.0,
            converged=render_error <= config.render_tol,
            iterations_used=iterations,
            frf=stored_frf,
        )
        if best is None or model.render_error < best.render_error:
            best = model
        if model.converged:
            break
        if order_budget < config.max_order:
            order_budget = min(2 * order_budget, config.max_order)
        elif sweep_spec.duration < duration_cap:
            sweep_spec = replace(
                sweep_spec, duration=min(2 * sweep_spec.duration, duration_cap)
            )
        else:
            break
    return replace(best, iterations_used=iterations)


def run_device_calibration(
    device, locations, config: CalibConfig, seed: int
) -> DeviceMap:
    """Calibrate every listed location and assemble a device map.

    Each location gets an independent, reproducible seed (seed XOR index).
    Per-location failures are collected in `DeviceMap.failures` instead of
    aborting the run.
    """
    locations = list(locations)
    if not locations:
        raise VibrocalError("location list is empty")
    keys = [(loc.x, loc.y) for loc in locations]
    if len(set(keys)) != len(keys):
        raise VibrocalError("locations must be pairwise distinct")
    entries = []
    failures = []
    for index, location in enumerate(locations):
        try:
            entries.append(
                run_location_calibration(device, location, config, seed ^ index)
            )
        except VibrocalError as exc:
            failures.append((location, str(exc)))
    return DeviceMap(
        sample_rate=device.sample_rate,
        band=config.band,
        entries=tuple(entries),
        actuator_pos=getattr(device, "actuator_pos", None),
        failures=tuple(failures),
    )
