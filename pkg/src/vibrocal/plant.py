"""Simulated touch surface: a damped modal plate driven by a resonant actuator.

The plate is simply supported, so mode shapes are products of sines with
genuine nodes and anti-nodes; the out-of-plane acceleration at a sensor
location is the modal superposition filtered through a band-pass resonant
actuator. This gives location-dependent frequency responses with
anti-resonances, which is what the calibration pipeline has to cope with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import VibrocalError
from .signals import SampledSignal
from .sysid import FrequencyResponse

PLANT_PRESETS = ("small", "rich")


@dataclass(frozen=True)
class Location:
    """Point on the device surface in normalized coordinates (both in [0, 1])."""

    x: float
    y: float

    def __post_init__(self):
        x, y = float(self.x), float(self.y)
        if not (math.isfinite(x) and math.isfinite(y) and 0 <= x <= 1 and 0 <= y <= 1):
            raise VibrocalError(f"location ({self.x}, {self.y}) outside the unit square")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class PlateMode:
    """One plate bending mode: half-wave counts, natural frequency, damping."""

    m: int
    n: int
    f_n: float
    zeta: float

    def __post_init__(self):
        if int(self.m) < 1 or int(self.n) < 1:
            raise VibrocalError("half-wave counts must be >= 1")
        if not self.f_n > 0:
            raise VibrocalError(f"natural frequency must be positive, got {self.f_n}")
        if not 0 < self.zeta < 1:
            raise VibrocalError(f"damping ratio must lie in (0, 1), got {self.zeta}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "f_n", float(self.f_n))
        object.__setattr__(self, "zeta", float(self.zeta))

    def shape_at(self, loc: Location) -> float:
        """Mode shape sin(m*pi*x) * sin(n*pi*y) at a location."""
        return math.sin(self.m * math.pi * loc.x) * math.sin(self.n * math.pi * loc.y)


@dataclass(frozen=True)
class PlateModel:
    """Modal plate plus actuator dynamics plus sensor noise level.

    `actuator_gain` scales the whole chain in (m/s^2)/V; `noise_sigma` is the
    standard deviation of white Gaussian sensor noise in m/s^2.
    """

    modes: tuple
    actuator_pos: Location
    actuator_f0: float
    actuator_zeta: float
    actuator_gain: float
    noise_sigma: float
    sample_rate: float

    def __post_init__(self):
        modes = tuple(self.modes)
        if len(modes) < 1:
            raise VibrocalError("plate needs at least one mode")
        freqs = [mode.f_n for mode in modes]
        if len(set(freqs)) != len(freqs):
            raise VibrocalError("mode frequencies must be distinct")
        if max(freqs) >= self.sample_rate / 2:
            raise VibrocalError("mode frequencies must stay below Nyquist")
        if not 0 < self.actuator_f0 < self.sample_rate / 2:
            raise VibrocalError(
                f"actuator_f0 must lie in (0, Nyquist), got {self.actuator_f0}"
            )
        if not 0 < self.actuator_zeta < 1:
            raise VibrocalError(
                f"actuator damping must lie in (0, 1), got {self.actuator_zeta}"
            )
        if not self.actuator_gain > 0:
            raise VibrocalError("actuator_gain must be positive")
        if self.noise_sigma < 0:
            raise VibrocalError("noise_sigma must be non-negative")
        object.__setattr__(self, "modes", modes)


def default_plant(preset: str) -> PlateModel:
    """Canonical plant fixtures.

    `small`: three well-separated modes, noiseless, actuator on the upper
    right. `rich`: eight modes spanning 60-800 Hz. Identical calls return
    identical models.
    """
    if preset == "small":
        return PlateModel(
            modes=(
                PlateMode(1, 1, 120.0, 0.03),
                PlateMode(2, 1, 210.0, 0.03),
                PlateMode(1, 2, 260.0, 0.03),
            ),
            actuator_pos=Location(0.8, 0.85),
            actuator_f0=90.0,
            actuator_zeta=0.5,
            actuator_gain=1.0,
            noise_sigma=0.0,
            sample_rate=4000.0,
        )
    if preset == "rich":
        return PlateModel(
            modes=(
                PlateMode(1, 1, 60.0, 0.025),
                PlateMode(2, 1, 140.0, 0.03),
                PlateMode(1, 2, 175.0, 0.028),
                PlateMode(2, 2, 250.0, 0.032),
                PlateMode(3, 1, 330.0, 0.027),
                PlateMode(3, 2, 445.0, 0.03),
                PlateMode(1, 3, 590.0, 0.026),
                PlateMode(2, 3, 800.0, 0.03),
            ),
            actuator_pos=Location(0.75, 0.8),
            actuator_f0=80.0,
            actuator_zeta=0.45,
            actuator_gain=1.0,
            noise_sigma=0.0,
            sample_rate=4000.0,
        )
    raise VibrocalError(f"unknown plant preset {preset!r}, expected one of {PLANT_PRESETS}")


# Canonical sensor locations used by fixture-based checks: interior points
# away from plate edges, none on a node line of the preset modes.
FIXTURE_LOCATIONS = (
    Location(0.2, 0.2),
    Location(0.3, 0.6),
    Location(0.45, 0.35),
    Location(0.6, 0.7),
    Location(0.8, 0.3),
)


def frf_exact(plant: PlateModel, sensor: Location, freqs) -> FrequencyResponse:
    """Exact frequency response from actuator drive voltage to sensor acceleration.

    H(f) = H_act(f) * sum_k phi_k(actuator) * phi_k(sensor) * (-w^2)
                            / (w_k^2 - w^2 + 2j zeta_k w_k w)

    with the actuator modeled as a band-pass resonance
    H_act(f) = gain * 2j zeta_a w_a w / (w_a^2 - w^2 + 2j zeta_a w_a w).
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=np.float64))
    nyquist = plant.sample_rate / 2
    if np.any(freqs < 0) or np.any(freqs > nyquist * (1 + 1e-12)):
        raise VibrocalError(f"frequencies must lie in [0, {nyquist}] Hz")
    w = 2 * np.pi * freqs
    w_a = 2 * np.pi * plant.actuator_f0
    h_act = (
        plant.actuator_gain
        * (2j * plant.actuator_zeta * w_a * w)
        / (w_a**2 - w**2 + 2j * plant.actuator_zeta * w_a * w)
    )
    plate = np.zeros(freqs.size, dtype=np.complex128)
    for mode in plant.modes:
        w_k = 2 * np.pi * mode.f_n
        residue = mode.shape_at(plant.actuator_pos) * mode.shape_at(sensor)
        plate += residue * (-(w**2)) / (w_k**2 - w**2 + 2j * mode.zeta * w_k * w)
    return FrequencyResponse(freqs, h_act * plate)


def simulate_playback(
    plant: PlateModel, command: SampledSignal, sensor: Location, seed: int
) -> SampledSignal:
    """Play a command signal through the plant and record sensor acceleration.

    Exact for this LTI plant: the command is zero-padded (at least doubled,
    plus ring-down margin so the modal decay does not wrap around), its
    spectrum is multiplied by the exact FRF, and the full tail is kept.
    Gaussian sensor noise of std `noise_sigma` is drawn from a generator
    seeded with `seed`, so identical inputs give bit-identical output.
    """
    if command.sample_rate != plant.sample_rate:
        raise VibrocalError(
            f"command sample rate {command.sample_rate} != plant rate {plant.sample_rate}"
        )
    n = len(command)
    n_pad = scipy.fft.next_fast_len(2 * n + 2 * int(plant.sample_rate))
    spectrum = np.fft.rfft(command.samples, n_pad)
    grid = np.fft.rfftfreq(n_pad, 1.0 / plant.sample_rate)
    response = frf_exact(plant, sensor, grid).values
    out = np.fft.irfft(spectrum * response, n_pad)
    if plant.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        out = out + rng.normal(0.0, plant.noise_sigma, n_pad)
    return SampledSignal(out, plant.sample_rate)


class SimulatedDevice:
    """Playback-and-record port backed by a PlateModel.

    The port contract consumed by the calibration loop: a `sample_rate`
    attribute and `play_and_record(command, location, seed)` returning the
    recorded acceleration. Stateless, so concurrent calls are safe.
    """

    def __init__(self, plant: PlateModel):
        self.plant = plant

    @property
    def sample_rate(self) -> float:
        return self.plant.sample_rate

    @property
    def actuator_pos(self) -> Location:
        return self.plant.actuator_pos

    def play_and_record(
        self, command: SampledSignal, location: Location, seed: int
    ) -> SampledSignal:
        return simulate_playback(self.plant, command, location, seed)


class StaticGainDevice:
    """Trivial port whose response is a frequency-independent gain."""

    def __init__(self, gain: float, sample_rate: float):
        self.gain = float(gain)
        self.sample_rate = float(sample_rate)

    def play_and_record(
        self, command: SampledSignal, location: Location, seed: int
    ) -> SampledSignal:
        if command.sample_rate != self.sample_rate:
            raise VibrocalError("command sample rate does not match the device")
        return SampledSignal(self.gain * command.samples, self.sample_rate)
