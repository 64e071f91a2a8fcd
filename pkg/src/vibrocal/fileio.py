"""CSV and JSON interchange formats for signals, FRFs, and transfer functions.

Signal CSV: a single header line `# sample_rate_hz=<value>` followed by one
sample per line. FRF CSV: header `f_hz,re,im,coherence` followed by one bin
per line. Floats are written with shortest-repr formatting, so files
round-trip exactly.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import VibrocalError
from .signals import SampledSignal
from .sysid import FrequencyResponse
from .tffit import RationalTF

_SIGNAL_HEADER = "# sample_rate_hz="
FRF_HEADER = "f_hz,re,im,coherence"


def write_signal(signal: SampledSignal, path) -> None:
    """Write a signal CSV: header line with the sample rate, one value per line."""
    with open(path, "w", encoding="utf-8") as stream:
        stream.write(f"{_SIGNAL_HEADER}{signal.sample_rate!r}\n")
        for value in signal.samples:
            stream.write(f"{float(value)!r}\n")


def read_signal(path) -> SampledSignal:
    """Read a signal CSV written by write_signal."""
    with open(path, "r", encoding="utf-8") as stream:
        header = stream.readline().strip()
        if not header.startswith(_SIGNAL_HEADER):
            raise VibrocalError(
                f"{path}: missing '{_SIGNAL_HEADER}<value>' header line"
            )
        try:
            rate = float(header[len(_SIGNAL_HEADER):])
        except ValueError:
            raise VibrocalError(f"{path}: unparsable sample rate in header") from None
        try:
            samples = [float(line) for line in stream if line.strip()]
        except ValueError as exc:
            raise VibrocalError(f"{path}: unparsable sample value: {exc}") from None
    if not samples:
        raise VibrocalError(f"{path}: signal file contains no samples")
    return SampledSignal(np.asarray(samples), rate)


def write_frf(frf: FrequencyResponse, path) -> None:
    """Write an FRF CSV with columns f_hz, re, im, coherence."""
    coherence = (
        frf.coherence if frf.coherence is not None else np.ones(len(frf))
    )
    with open(path, "w", encoding="utf-8") as stream:
        stream.write(FRF_HEADER + "\n")
        for f, v, c in zip(frf.freqs, frf.values, coherence):
            stream.write(f"{float(f)!r},{float(v.real)!r},{float(v.imag)!r},{float(c)!r}\n")


def read_frf(path) -> FrequencyResponse:
    """Read an FRF CSV written by write_frf."""
    with open(path, "r", encoding="utf-8") as stream:
        header = stream.readline().strip()
        if header != FRF_HEADER:
            raise VibrocalError(f"{path}: expected header '{FRF_HEADER}', got {header!r}")
        rows = []
        for number, line in enumerate(stream, start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise VibrocalError(f"{path}:{number}: expected 4 columns")
            try:
                rows.append([float(part) for part in parts])
            except ValueError:
                raise VibrocalError(f"{path}:{number}: unparsable value") from None
    if not rows:
        raise VibrocalError(f"{path}: FRF file contains no bins")
    data = np.asarray(rows)
    freqs = data[:, 0]
    if np.any(np.diff(freqs) <= 0):
        raise VibrocalError(f"{path}: f_hz column must be strictly increasing")
    return FrequencyResponse(freqs, data[:, 1] + 1j * data[:, 2], data[:, 3])


def write_tf(tf: RationalTF, path) -> None:
    """Write a transfer function as JSON with keys b, a, sample_rate_hz."""
    doc = {
        "b": [float(v) for v in tf.b],
        "a": [float(v) for v in tf.a],
        "sample_rate_hz": tf.sample_rate,
    }
    with open(path, "w", encoding="utf-8") as stream:
        stream.write(json.dumps(doc, indent=2) + "\n")


def read_tf(path) -> RationalTF:
    """Read a transfer function written by write_tf."""
    with open(path, "r", encoding="utf-8") as stream:
        try:
            doc = json.load(stream)
        except json.JSONDecodeError as exc:
            raise VibrocalError(f"{path}: malformed TF document: {exc}") from None
    try:
        return RationalTF(doc["b"], doc["a"], float(doc["sample_rate_hz"]))
    except (KeyError, TypeError) as exc:
        raise VibrocalError(f"{path}: TF document missing fields: {exc}") from None
