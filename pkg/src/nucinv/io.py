"""Columnar text files with self-describing headers, pulse import/export, and metadata sidecars.

Numeric files are plain text: ``#``-prefixed header lines of ``key: value``,
then a ``# columns:`` line naming each column with its unit, then rows in a
fixed order. Nothing time-dependent is written to them; run timestamps go to
a JSON sidecar so reruns are byte-identical.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMA_VERSION
from .errors import ValidationError
from .pulses import PulseRecord
from .records import Spectrum


def _fmt_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (complex, np.complexfloating)):
        value = complex(value)
        return f"{value.real!r}{value.imag:+}j"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt_value(v) for v in value) + "]"
    return str(value)


def write_columns(path: str | Path, columns: list[tuple[str, str, np.ndarray]], header: dict | None = None, digits: int = 12) -> Path:
    """Write (name, unit, values) columns; all columns must have equal length."""
    path = Path(path)
    n = {len(c[2]) for c in columns}
    if len(n) != 1:
        raise ValidationError("columns differ in length")
    lines = [f"# schema_version: {SCHEMA_VERSION}"]
    for key, value in (header or {}).items():
        text = _fmt_value(value).replace("\n", " ")
        lines.append(f"# {key}: {text}")
    lines.append("# columns: " + " ".join(f"{name}[{unit}]" for name, unit, _ in columns))
    data = np.column_stack([np.asarray(c[2], dtype=float) for c in columns])
    fmt = f"%.{digits}e"
    body = "\n".join(" ".join(fmt % v for v in row) for row in data)
    path.write_text("\n".join(lines) + "\n" + body + ("\n" if body else ""))
    return path


def read_columns(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Inverse of ``write_columns``: (header strings, name -> values)."""
    header: dict[str, str] = {}
    names: list[str] = []
    rows = []
    for raw in Path(path).read_text().splitlines():
        if raw.startswith("#"):
            key, _, value = raw[1:].strip().partition(":")
            if key == "columns":
                names = [c.split("[")[0] for c in value.split()]
            else:
                header[key.strip()] = value.strip()
        elif raw.strip():
            rows.append([float(x) for x in raw.split()])
    if not names:
        raise ValidationError(f"{path}: no '# columns:' line")
    data = np.array(rows, dtype=float).reshape(-1, len(names))
    return header, {name: data[:, i] for i, name in enumerate(names)}


def write_spectrum(path, spectrum: Spectrum, header: dict | None = None, digits: int = 12, omega_unit: str = "rad/fs") -> Path:
    """Frequency, complex amplitude (if known), intensity, input intensity, normalized ratio."""
    head = {"kind": spectrum.meta.get("kind", "unknown")}
    for key in ("floor", "halfwidth", "lamb_shift", "background", "n_members", "model", "area"):
        if key in spectrum.meta:
            head[key] = spectrum.meta[key]
    head.update(header or {})
    cols = [("omega", omega_unit, spectrum.omega)]
    if spectrum.amplitude is not None:
        cols += [("re_amplitude", "arb", spectrum.amplitude.real), ("im_amplitude", "arb", spectrum.amplitude.imag)]
    cols += [
        ("intensity", "arb", spectrum.intensity),
        ("input_intensity", "arb", spectrum.input_intensity),
        ("normalized", "1", spectrum.normalized),
    ]
    return write_columns(path, cols, head, digits)


def read_spectrum(path) -> Spectrum:
    head, cols = read_columns(path)
    amp = cols["re_amplitude"] + 1j * cols["im_amplitude"] if "re_amplitude" in cols else None
    return Spectrum(cols["omega"], cols["intensity"], cols["input_intensity"], cols["normalized"], dict(head), amp)


def write_trace(path, output, header: dict | None = None, full: bool = False, digits: int = 12) -> Path:
    """Time trace of an OutputRecord: <J_z>, <J+J->, and with ``full`` the complex fields."""
    cols = [("t", "fs", output.time_grid), ("jz", "1", output.jz_expect), ("jpjm", "1", output.emission_intensity)]
    if full:
        cols += [
            ("re_a_in", "fs^-1/2", output.a_in.real),
            ("im_a_in", "fs^-1/2", output.a_in.imag),
            ("re_a_out", "fs^-1/2", output.a_out.real),
            ("im_a_out", "fs^-1/2", output.a_out.imag),
            ("re_j_minus", "1", output.j_minus_expect.real),
            ("im_j_minus", "1", output.j_minus_expect.imag),
        ]
    head = {"pulse_end_fs": output.pulse_end}
    head.update(header or {})
    return write_columns(path, cols, head, digits)


def write_pulse(path, pulse: PulseRecord, header: dict | None = None, digits: int = 15) -> Path:
    head = {"n_photons": pulse.n_photons}
    if pulse.area is not None:
        head["area"] = pulse.area
    if pulse.seed is not None:
        head["seed"] = pulse.seed
    head.update(header or {})
    cols = [("t", "fs", pulse.time_grid), ("re", "fs^-1/2", pulse.amplitude.real), ("im", "fs^-1/2", pulse.amplitude.imag)]
    return write_columns(path, cols, head, digits)


def read_pulse(path) -> PulseRecord:
    """Load a pulse file (columns t, re, im); the photon number is recomputed from the samples."""
    head, cols = read_columns(path)
    for name in ("t", "re", "im"):
        if name not in cols:
            raise ValidationError(f"{path}: pulse file needs columns t, re, im")
    amp = cols["re"] + 1j * cols["im"]
    t = cols["t"]
    n_ph = float(np.trapezoid(np.abs(amp) ** 2, t)) if t.size > 1 else 0.0
    return PulseRecord(t, amp, n_ph, meta={"kind": "file", "source": str(path)})


def write_table(path, rows: list[dict], header: dict | None = None, units: dict | None = None) -> Path:
    """Whitespace-separated summary table; strings and numbers allowed."""
    path = Path(path)
    units = units or {}
    names = list(rows[0]) if rows else []
    lines = [f"# schema_version: {SCHEMA_VERSION}"]
    lines += [f"# {k}: {_fmt_value(v)}" for k, v in (header or {}).items()]
    lines.append("# columns: " + " ".join(f"{n}[{units.get(n, '1')}]" for n in names))
    for row in rows:
        cells = []
        for n in names:
            v = row[n]
            if isinstance(v, float):
                cells.append("nan" if math.isnan(v) else f"{v:.6e}")
            else:
                cells.append(str(v))
        lines.append(" ".join(cells))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_sidecar(path, command: str, config_hash: str, seed: int, files: list[str], extra: dict | None = None) -> Path:
    """Run metadata, including the only timestamp the tool writes."""
    info = {
        "command": command,
        "config_hash": config_hash,
        "seed": seed,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "argv": sys.argv,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "files": sorted(files),
    }
    info.update(extra or {})
    path = Path(path)
    path.write_text(json.dumps(info, indent=2, default=str) + "\n")
    return path
