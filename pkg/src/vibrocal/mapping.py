"""Device-map persistence and spatial interpolation between calibrated points.

Interpolation acts on the stored nonparametric FRF samples, not on fitted
coefficients: complex FRF averaging is well-posed, while pole trajectories
between coefficient sets can cross the unit circle.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .calibration import DeviceMap, LocationModel
from .errors import MapFormatError, VibrocalError
from .plant import Location
from .sysid import FrequencyResponse
from .tffit import RationalTF, select_order

SUPPORTED_FORMAT_VERSION = 1
_IDW_EPSILON = 1e-12
_COINCIDENCE_RADIUS = 1e-9


def _entry_to_dict(entry: LocationModel) -> dict:
    return {
        "location": {"x": entry.location.x, "y": entry.location.y},
        "tf": {"b": [float(v) for v in entry.tf.b],
               "a": [float(v) for v in entry.tf.a]},
        "order": int(entry.order),
        "fit_error": float(entry.fit_error),
        "render_error": float(entry.render_error),
        "mean_coherence": float(entry.mean_coherence),
        "converged": bool(entry.converged),
        "frf": {
            "f": [float(v) for v in entry.frf.freqs],
            "re": [float(v) for v in entry.frf.values.real],
            "im": [float(v) for v in entry.frf.values.imag],
        },
    }


def _entry_from_dict(doc: dict, sample_rate: float) -> LocationModel:
    frf = FrequencyResponse(
        np.asarray(doc["frf"]["f"], dtype=np.float64),
        np.asarray(doc["frf"]["re"], dtype=np.float64)
        + 1j * np.asarray(doc["frf"]["im"], dtype=np.float64),
    )
    return LocationModel(
        location=Location(doc["location"]["x"], doc["location"]["y"]),
        tf=RationalTF(doc["tf"]["b"], doc["tf"]["a"], sample_rate),
        order=int(doc["order"]),
        fit_error=float(doc["fit_error"]),
        render_error=float(doc["render_error"]),
        mean_coherence=float(doc["mean_coherence"]),
        converged=bool(doc["converged"]),
        iterations_used=0,
        frf=frf,
    )


def map_to_json(device_map: DeviceMap) -> str:
    """Serialize a device map to its canonical JSON form.

    Numbers round-trip exactly (shortest-repr float serialization), and the
    key order is fixed, so equal maps produce byte-identical documents.
    """
    doc = {
        "format_version": device_map.format_version,
        "sample_rate_hz": float(device_map.sample_rate),
        "band_hz": [float(device_map.band[0]), float(device_map.band[1])],
        "entries": [_entry_to_dict(entry) for entry in device_map.entries],
    }
    if device_map.actuator_pos is not None:
        doc["actuator_pos"] = {
            "x": device_map.actuator_pos.x,
            "y": device_map.actuator_pos.y,
        }
    return json.dumps(doc, indent=2) + "\n"


def map_from_json(text: str) -> DeviceMap:
    """Parse and validate a device map document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MapFormatError(f"malformed device map document: {exc}") from None
    if not isinstance(doc, dict):
        raise MapFormatError("device map document must be a JSON object")
    version = doc.get("format_version")
    if version != SUPPORTED_FORMAT_VERSION:
        raise MapFormatError(
            f"unsupported format_version {version!r}, "
            f"this build supports {SUPPORTED_FORMAT_VERSION}"
        )
    try:
        sample_rate = float(doc["sample_rate_hz"])
        band = (float(doc["band_hz"][0]), float(doc["band_hz"][1]))
        entries = tuple(
            _entry_from_dict(entry, sample_rate) for entry in doc["entries"]
        )
        actuator = doc.get("actuator_pos")
        actuator_pos = Location(actuator["x"], actuator["y"]) if actuator else None
    except (KeyError, IndexError, TypeError) as exc:
        raise MapFormatError(f"device map document is missing fields: {exc}") from None
    return DeviceMap(
        sample_rate=sample_rate,
        band=band,
        entries=entries,
        actuator_pos=actuator_pos,
    )


def save_map(device_map: DeviceMap, path) -> None:
    """Write a device map as JSON; see map_to_json for the format guarantees."""
    with open(path, "w", encoding="utf-8") as stream:
        stream.write(map_to_json(device_map))


def load_map(path) -> DeviceMap:
    """Read and validate a device map written by save_map."""
    with open(path, "r", encoding="utf-8") as stream:
        return map_from_json(stream.read())


def interpolate_frf(device_map: DeviceMap, query: Location) -> FrequencyResponse:
    """Inverse-distance-weighted FRF at an arbitrary location.

    Weights are 1/(d^2 + 1e-12) in normalized coordinates, so stored values
    are interpolated exactly in the limit; a query within 1e-9 of a stored
    location returns that entry's FRF directly.
    """
    if not device_map.entries:
        raise VibrocalError("device map has no entries")
    distances = np.array(
        [
            math.hypot(entry.location.x - query.x, entry.location.y - query.y)
            for entry in device_map.entries
        ]
    )
    nearest = int(np.argmin(distances))
    if distances[nearest] < _COINCIDENCE_RADIUS:
        stored = device_map.entries[nearest].frf
        return FrequencyResponse(stored.freqs.copy(), stored.values.copy())
    weights = 1.0 / (distances**2 + _IDW_EPSILON)
    weights /= weights.sum()
    stacked = np.stack([entry.frf.values for entry in device_map.entries])
    return FrequencyResponse(device_map.grid.copy(), weights @ stacked)


def _band_bins(device_map: DeviceMap) -> np.ndarray:
    grid = device_map.grid
    return (grid >= device_map.band[0]) & (grid <= device_map.band[1])


def model_at(
    device_map: DeviceMap, query: Location, max_order: int = 16, fit_tol: float = 0.02
) -> RationalTF:
    """Fitted transfer function at an arbitrary location.

    Interpolates the stored FRFs to the query location, then fits a model
    over all bins inside the map's band.
    """
    frf = interpolate_frf(device_map, query)
    tf, _, _ = select_order(
        frf, _band_bins(device_map), max_order, fit_tol,
        sample_rate=device_map.sample_rate,
    )
    return tf


def loo_validate(device_map: DeviceMap) -> np.ndarray:
    """Leave-one-out interpolation error for every stored entry.

    Each entry is predicted from the remaining ones at its own location; the
    reported error is the rms-relative complex mismatch over the band.
    """
    if len(device_map.entries) < 2:
        raise VibrocalError("leave-one-out validation needs at least 2 entries")
    bins = _band_bins(device_map)
    errors = np.empty(len(device_map.entries))
    for index, entry in enumerate(device_map.entries):
        rest = DeviceMap(
            sample_rate=device_map.sample_rate,
            band=device_map.band,
            entries=tuple(
                other for k, other in enumerate(device_map.entries) if k != index
            ),
            actuator_pos=device_map.actuator_pos,
        )
        predicted = interpolate_frf(rest, entry.location).values[bins]
        stored = entry.frf.values[bins]
        scale = math.sqrt(float(np.mean(np.abs(stored) ** 2)))
        errors[index] = (
            math.sqrt(float(np.mean(np.abs(predicted - stored) ** 2))) / scale
            if scale > 0
            else math.sqrt(float(np.mean(np.abs(predicted - stored) ** 2)))
        )
    return errors
