"""On-disk pulse format: amplitude/phase text files.

Header lines are `#key value`; the body is one CSV row per step with
`amp_hz,phase_deg` per channel.  Amplitudes are printed with 6 significant
digits and phases with 6 decimal places, so write -> read -> write is a
byte-exact fixed point while the first write may round the underlying
Cartesian values.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .propagation import ControlPulse, MAX_CONTROL_STEPS

FORMAT_VERSION = 1


class PulseFileError(ValueError):
    """Malformed pulse file; message carries the offending line."""


def _amp_str(value: float) -> str:
    return "%#.6g" % value


def _phase_str(value: float) -> str:
    return "%.6f" % value


def _dt_us_str(dt_s: float) -> str:
    # quantize to 1e-9 us (1e-15 s): the us <-> s unit conversion is not
    # bit-stable under shortest repr, and femtosecond resolution is far
    # beyond physical meaning
    text = "%.9f" % (dt_s * 1e6)
    return text.rstrip("0").rstrip(".") or "0"


def to_polar(ux: float, uy: float) -> tuple[float, float]:
    """Cartesian Hz pair to (amplitude Hz, phase deg in [0, 360))."""
    amp = math.hypot(ux, uy)
    phase = math.degrees(math.atan2(uy, ux)) % 360.0
    # keep the printed form inside [0, 360) after rounding to 6 decimals
    phase = round(phase, 6) % 360.0
    return amp, phase


def to_cartesian(amp: float, phase_deg: float) -> tuple[float, float]:
    rad = math.radians(phase_deg)
    return amp * math.cos(rad), amp * math.sin(rad)


def format_pulse(pulse: ControlPulse) -> str:
    """Render a pulse in the on-disk text format."""
    if pulse.max_rf_hz is None:
        raise PulseFileError("pulse carries no max_rf_hz; cannot write header")
    lines = [
        f"#format_version {FORMAT_VERSION}",
        f"#channels {','.join(pulse.channels)}",
        f"#steps {pulse.steps}",
        f"#dt_us {_dt_us_str(pulse.dt_s)}",
        "#max_rf_hz " + ",".join(f"{ch}={pulse.max_rf_hz[ch]!r}" for ch in pulse.channels),
    ]
    for j in range(pulse.steps):
        cells = []
        for c in range(len(pulse.channels)):
            amp, phase = to_polar(pulse.amplitudes[j, c, 0], pulse.amplitudes[j, c, 1])
            cells.append(_amp_str(amp))
            cells.append(_phase_str(phase))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_pulse(pulse: ControlPulse, path: str | os.PathLike) -> None:
    """Write a pulse file atomically (no partial files on failure)."""
    text = format_pulse(pulse)
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _parse_header_line(line: str, lineno: int) -> tuple[str, str]:
    body = line[1:].strip()
    if " " not in body:
        raise PulseFileError(f"line {lineno}: header needs '#key value', got {line!r}")
    key, value = body.split(" ", 1)
    return key, value.strip()


def parse_pulse(text: str) -> ControlPulse:
    """Parse the on-disk text format back into a pulse."""
    header: dict[str, str] = {}
    rows: list[str] = []
    row_linenos: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if rows:
                raise PulseFileError(f"line {lineno}: header line after body started")
            key, value = _parse_header_line(line, lineno)
            if key in header:
                raise PulseFileError(f"line {lineno}: duplicate header key {key!r}")
            header[key] = value
        else:
            rows.append(line)
            row_linenos.append(lineno)

    for key in ("format_version", "channels", "steps", "dt_us", "max_rf_hz"):
        if key not in header:
            raise PulseFileError(f"missing header key {key!r}")
    if header["format_version"] != str(FORMAT_VERSION):
        raise PulseFileError(f"unsupported format_version {header['format_version']!r}")
    channels = tuple(header["channels"].split(","))
    if any(not ch for ch in channels):
        raise PulseFileError("empty channel label in header")
    try:
        steps = int(header["steps"])
    except ValueError:
        raise PulseFileError(f"header steps is not an integer: {header['steps']!r}") from None
    if not 1 <= steps <= MAX_CONTROL_STEPS:
        raise PulseFileError(f"header steps {steps} outside [1, {MAX_CONTROL_STEPS}]")
    try:
        dt_s = float(header["dt_us"]) * 1e-6
    except ValueError:
        raise PulseFileError(f"header dt_us is not a number: {header['dt_us']!r}") from None
    max_rf: dict[str, float] = {}
    for item in header["max_rf_hz"].split(","):
        if "=" not in item:
            raise PulseFileError(f"malformed max_rf_hz item {item!r}")
        ch, val = item.split("=", 1)
        try:
            max_rf[ch] = float(val)
        except ValueError:
            raise PulseFileError(f"max_rf_hz[{ch!r}] is not a number: {val!r}") from None

    if len(rows) != steps:
        missing = steps - len(rows)
        if missing > 0:
            raise PulseFileError(f"body ends early: step {len(rows) + 1} of {steps} missing")
        raise PulseFileError(f"body has {len(rows)} rows but header says {steps}")

    amps = np.empty((steps, len(channels), 2))
    for j, (row, lineno) in enumerate(zip(rows, row_linenos)):
        cells = row.split(",")
        if len(cells) != 2 * len(channels):
            raise PulseFileError(f"line {lineno}: expected {2 * len(channels)} fields, "
                                 f"got {len(cells)}")
        for c in range(len(channels)):
            try:
                amp = float(cells[2 * c])
                phase = float(cells[2 * c + 1])
            except ValueError:
                raise PulseFileError(f"line {lineno}: non-numeric field") from None
            if amp < 0:
                raise PulseFileError(f"line {lineno}: negative amplitude {amp}")
            if not 0.0 <= phase < 360.0:
                raise PulseFileError(f"line {lineno}: phase {phase} outside [0, 360)")
            amps[j, c] = to_cartesian(amp, phase)
    return ControlPulse(dt_s=dt_s, channels=channels, amplitudes=amps, max_rf_hz=max_rf)


def read_pulse(path: str | os.PathLike) -> ControlPulse:
    """Read a pulse file; inverse of write_pulse up to printed precision."""
    with open(path, "r", encoding="ascii") as fh:
        text = fh.read()
    return parse_pulse(text)
