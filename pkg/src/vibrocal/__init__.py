"""Location-specific vibration calibration for actuator-driven touch surfaces.

The pipeline: sweep a location, estimate its frequency response, fit a
rational transfer function, design a regularized inverse filter, and adapt
input signals into command signals so the acceleration measured at that
location reproduces the input. A simulated modal plate stands in for
hardware and doubles as an exact oracle.
"""

from .calibration import (
    CalibConfig,
    DeviceMap,
    LocationModel,
    default_config,
    run_device_calibration,
    run_location_calibration,
)
from .errors import FitError, MapFormatError, VibrocalError
from .inversion import InverseFilter, adapt_signal, design_inverse
from .mapping import (
    interpolate_frf,
    load_map,
    loo_validate,
    map_from_json,
    map_to_json,
    model_at,
    save_map,
)
from .plant import (
    FIXTURE_LOCATIONS,
    Location,
    PlateMode,
    PlateModel,
    SimulatedDevice,
    StaticGainDevice,
    default_plant,
    frf_exact,
    simulate_playback,
)
from .signals import (
    SampledSignal,
    SweepSpec,
    apply_fade,
    generate_sweep,
    nrmse_aligned,
    tone_burst,
)
from .sysid import FrequencyResponse, band_mask, estimate_frf, prepare_sysid_pair
from .tffit import RationalTF, evaluate_tf, fit_rational, select_order, stabilize

__version__ = "0.1.0"

__all__ = [
    "CalibConfig",
    "DeviceMap",
    "FIXTURE_LOCATIONS",
    "FitError",
    "FrequencyResponse",
    "InverseFilter",
    "Location",
    "LocationModel",
    "MapFormatError",
    "PlateMode",
    "PlateModel",
    "RationalTF",
    "SampledSignal",
    "SimulatedDevice",
    "StaticGainDevice",
    "SweepSpec",
    "VibrocalError",
    "adapt_signal",
    "apply_fade",
    "band_mask",
    "default_config",
    "default_plant",
    "design_inverse",
    "estimate_frf",
    "evaluate_tf",
    "fit_rational",
    "frf_exact",
    "generate_sweep",
    "interpolate_frf",
    "load_map",
    "loo_validate",
    "map_from_json",
    "map_to_json",
    "model_at",
    "nrmse_aligned",
    "prepare_sysid_pair",
    "run_device_calibration",
    "run_location_calibration",
    "save_map",
    "select_order",
    "simulate_playback",
    "stabilize",
    "tone_burst",
]
