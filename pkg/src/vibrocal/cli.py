"""Command-line front end for the calibration pipeline.

Subcommands cover the individual pipeline stages (sweep-gen, simulate,
identify, fit, invert, adapt, evaluate) and the orchestrated runs
(calibrate, query, loo). Exit codes: 0 success, 1 domain or configuration
error, 2 usage error. All randomness is controlled by --seed (or the
VIBROCAL_SEED environment variable).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import fileio
from .calibration import (
    CalibConfig,
    default_config,
    run_device_calibration,
)
from .errors import VibrocalError
from .inversion import InverseFilter, adapt_signal, design_inverse
from .mapping import load_map, loo_validate, model_at, save_map
from .plant import (
    Location,
    PlateMode,
    PlateModel,
    SimulatedDevice,
    default_plant,
    simulate_playback,
)
from .signals import SampledSignal, SweepSpec, generate_sweep, nrmse_aligned
from .sysid import band_mask, estimate_frf, prepare_sysid_pair
from .tffit import fit_rational, select_order


def _seed_from(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("VIBROCAL_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise VibrocalError(f"VIBROCAL_SEED={env!r} is not an integer") from None
    return 0


def _plant_from_doc(doc) -> PlateModel:
    if isinstance(doc, str):
        return default_plant(doc)
    try:
        modes = tuple(
            PlateMode(m["m"], m["n"], m["f_hz"], m["zeta"]) for m in doc["modes"]
        )
        act = doc["actuator"]
        return PlateModel(
            modes=modes,
            actuator_pos=Location(act["x"], act["y"]),
            actuator_f0=float(act["f0_hz"]),
            actuator_zeta=float(act["zeta"]),
            actuator_gain=float(act.get("gain", 1.0)),
            noise_sigma=float(doc.get("noise_sigma", 0.0)),
            sample_rate=float(doc["sample_rate_hz"]),
        )
    except (KeyError, TypeError) as exc:
        raise VibrocalError(f"plant description missing fields: {exc}") from None


def _load_plant(spec: str) -> PlateModel:
    if spec in ("small", "rich"):
        return default_plant(spec)
    with open(spec, "r", encoding="utf-8") as stream:
        try:
            doc = json.load(stream)
        except json.JSONDecodeError as exc:
            raise VibrocalError(f"{spec}: malformed plant description: {exc}") from None
    return _plant_from_doc(doc)


def _cmd_sweep_gen(args) -> int:
    spec = SweepSpec(
        f_start=args.f_start,
        f_end=args.f_end,
        duration=args.duration,
        amplitude=args.amplitude,
        law=args.law,
        fade=args.fade,
    )
    fileio.write_signal(generate_sweep(spec, args.fs), args.out)
    return 0


def _cmd_simulate(args) -> int:
    plant = _load_plant(args.plant)
    command = fileio.read_signal(args.command)
    recording = simulate_playback(
        plant, command, Location(args.x, args.y), _seed_from(args)
    )
    fileio.write_signal(recording, args.out)
    return 0


def _cmd_identify(args) -> int:
    x = fileio.read_signal(args.input)
    y = fileio.read_signal(args.output)
    segment_len = args.segment_len
    if segment_len is None:
        from .calibration import _auto_segment_len

        segment_len = _auto_segment_len(min(len(x), len(y)))
    x, y = prepare_sysid_pair(x, y, segment_len)
    frf = estimate_frf(x, y, segment_len=segment_len, overlap=args.overlap)
    fileio.write_frf(frf, args.out)
    return 0


def _cmd_fit(args) -> int:
    frf = fileio.read_frf(args.frf)
    band = (args.band[0], args.band[1]) if args.band else (frf.freqs[0], frf.freqs[-1])
    mask = band_mask(frf, args.coherence_threshold, band)
    fs = args.fs if args.fs else None
    if args.order is not None:
        tf = fit_rational(frf, mask, args.order, args.order, sample_rate=fs)
    else:
        tf, _, _ = select_order(frf, mask, args.max_order, args.fit_tol, sample_rate=fs)
    fileio.write_tf(tf, args.out)
    return 0


def _cmd_invert(args) -> int:
    tf = fileio.read_tf(args.tf)
    inv = design_inverse(
        tf, (args.band[0], args.band[1]), args.beta, args.g_max, args.fir_len
    )
    fileio.write_signal(SampledSignal(inv.taps, inv.sample_rate), args.out)
    return 0


def _cmd_adapt(args) -> int:
    signal = fileio.read_signal(args.input)
    taps = fileio.read_signal(args.taps)
    peak = float(np.max(np.abs(np.fft.rfft(taps.samples))))
    inv = InverseFilter(
        taps=taps.samples,
        latency=len(taps) // 2,
        band=(0.0, taps.sample_rate / 2),
        beta=0.0,
        g_max=max(peak, 1.0),
        sample_rate=taps.sample_rate,
    )
    fileio.write_signal(adapt_signal(signal, inv), args.out)
    return 0


def _config_from_doc(doc: dict) -> CalibConfig:
    base = default_config()
    sweep = base.sweep
    if "sweep" in doc:
        s = doc["sweep"]
        sweep = SweepSpec(
            f_start=s.get("f_start", sweep.f_start),
            f_end=s.get("f_end", sweep.f_end),
            duration=s.get("duration", sweep.duration),
            amplitude=s.get("amplitude", sweep.amplitude),
            law=s.get("law", sweep.law),
            fade=s.get("fade", sweep.fade),
        )
    band = tuple(doc.get("band_hz", base.band))
    return CalibConfig(
        sweep=sweep,
        band=band,
        coherence_threshold=doc.get("coherence_threshold", base.coherence_threshold),
        fit_tol=doc.get("fit_tol", base.fit_tol),
        render_tol=doc.get("render_tol", base.render_tol),
        max_order=doc.get("max_order", base.max_order),
        max_iters=doc.get("max_iters", base.max_iters),
        beta=doc.get("beta", base.beta),
        g_max=doc.get("g_max", base.g_max),
        fir_len=doc.get("fir_len", base.fir_len),
        segment_len=doc.get("segment_len", base.segment_len),
        overlap=doc.get("overlap", base.overlap),
    )


def _cmd_calibrate(args) -> int:
    with open(args.config, "r", encoding="utf-8") as stream:
        try:
            doc = json.load(stream)
        except json.JSONDecodeError as exc:
            raise VibrocalError(f"{args.config}: malformed config: {exc}") from None
    if "locations" not in doc or not doc["locations"]:
        raise VibrocalError(f"{args.config}: config must list calibration locations")
    locations = [Location(pair[0], pair[1]) for pair in doc["locations"]]
    plant = _plant_from_doc(doc.get("plant", "small"))
    if "noise_sigma" in doc:
        plant = dataclasses.replace(plant, noise_sigma=float(doc["noise_sigma"]))
    config = _config_from_doc(doc)
    seed = args.seed if args.seed is not None else doc.get("seed", None)
    if seed is None:
        seed = _seed_from(args)
    device_map = run_device_calibration(SimulatedDevice(plant), locations, config, seed)
    save_map(device_map, args.out)
    for entry in device_map.entries:
        print(
            f"location ({entry.location.x}, {entry.location.y}): "
            f"converged={entry.converged} order={entry.order} "
            f"fit_error={entry.fit_error:.4g} render_error={entry.render_error:.4g} "
            f"iterations={entry.iterations_used}"
        )
    for location, message in device_map.failures:
        print(f"location ({location.x}, {location.y}): FAILED: {message}")
    if device_map.failures:
        return 1
    return 0


def _cmd_query(args) -> int:
    device_map = load_map(args.map)
    tf = model_at(
        device_map, Location(args.x, args.y), args.max_order, args.fit_tol
    )
    fileio.write_tf(tf, args.out)
    return 0


def _cmd_evaluate(args) -> int:
    desired = fileio.read_signal(args.desired)
    measured = fileio.read_signal(args.measured)
    value = nrmse_aligned(
        desired, measured, (args.band[0], args.band[1]), args.max_lag
    )
    print(f"nrmse={value!r}")
    return 0


def _cmd_loo(args) -> int:
    device_map = load_map(args.map)
    errors = loo_validate(device_map)
    for entry, err in zip(device_map.entries, errors):
        print(f"({entry.location.x}, {entry.location.y}) {err!r}")
    print(f"median {float(np.median(errors))!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vibrocal",
        description="Location-specific vibration calibration toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep-gen", help="generate a sweep signal CSV")
    p.add_argument("--f-start", type=float, default=10.0)
    p.add_argument("--f-end", type=float, default=500.0)
    p.add_argument("--duration", type=float, default=5.0)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--law", choices=("linear", "logarithmic"), default="linear")
    p.add_argument("--fade", type=float, default=0.05)
    p.add_argument("--fs", type=float, default=4000.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep_gen)

    p = sub.add_parser("simulate", help="play a command CSV through a plant")
    p.add_argument("--plant", default="small", help="preset name or plant JSON file")
    p.add_argument("--command", required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("identify", help="estimate an FRF from input/output CSVs")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--segment-len", type=int, default=None)
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_identify)

    p = sub.add_parser("fit", help="fit a rational TF to an FRF CSV")
    p.add_argument("--frf", required=True)
    p.add_argument("--band", type=float, nargs=2, default=None)
    p.add_argument("--coherence-threshold", type=float, default=0.95)
    p.add_argument("--max-order", type=int, default=16)
    p.add_argument("--fit-tol", type=float, default=0.02)
    p.add_argument("--order", type=int, default=None, help="fixed order (skips selection)")
    p.add_argument("--fs", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("invert", help="design an inverse FIR from a TF JSON")
    p.add_argument("--tf", required=True)
    p.add_argument("--band", type=float, nargs=2, required=True)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--g-max", type=float, default=100.0)
    p.add_argument("--fir-len", type=int, default=2048)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_invert)

    p = sub.add_parser("adapt", help="convolve an input CSV with inverse taps")
    p.add_argument("--input", required=True)
    p.add_argument("--taps", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_adapt)

    p = sub.add_parser("calibrate", help="run the full calibration from a config JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("query", help="fit a TF at an arbitrary location of a map")
    p.add_argument("--map", required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--max-order", type=int, default=16)
    p.add_argument("--fit-tol", type=float, default=0.02)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("evaluate", help="NRMSE between two signal CSVs")
    p.add_argument("--desired", required=True)
    p.add_argument("--measured", required=True)
    p.add_argument("--band", type=float, nargs=2, required=True)
    p.add_argument("--max-lag", type=int, default=4000)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("loo", help="leave-one-out interpolation errors of a map")
    p.add_argument("--map", required=True)
    p.set_defaults(func=_cmd_loo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except VibrocalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
