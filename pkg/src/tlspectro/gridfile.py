"""Spectrum-grid file format: text and binary, lossless round trips.

Binary layout: 8-byte magic "SGRD0001", then a UTF-8 header of
key=value lines terminated by one blank line, then the payload as
little-endian float64, row-major [bias][freq], with re/im interleaved
when complex. The text format carries the same header (no magic) and a
comma-separated decimal payload, one bias row per line, serialized via
repr so float64 values survive the round trip exactly.

Parsers reject malformed input with GridFormatError naming the byte
offset; nothing is silently coerced.
"""

import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import GridFormatError
from .model import DeviceParams
from .simulate import SpectrumGrid

__all__ = ["MAGIC", "write_grid", "read_grid"]

MAGIC = b"SGRD0001"
FORMAT_VERSION = 1

_DEVICE_KEYS = ("d0", "cap_area", "v_total", "eps_r", "f_c", "q_c", "q_i0")


def _header_lines(grid: SpectrumGrid) -> list:
    f_step = float(grid.freqs[1] - grid.freqs[0]) if grid.freqs.size > 1 else 0.0
    v_step = float(grid.biases[1] - grid.biases[0]) if grid.biases.size > 1 else 0.0
    _require_uniform(grid.freqs, "freqs")
    _require_uniform(grid.biases, "biases")
    lines = [
        f"format_version={FORMAT_VERSION}",
        f"n_freq={grid.freqs.size}",
        f"n_bias={grid.biases.size}",
        f"f_start_hz={grid.freqs[0]!r}",
        f"f_step_hz={f_step!r}",
        f"v_start_v={grid.biases[0]!r}",
        f"v_step_v={v_step!r}",
        f"trace_time_s={grid.trace_time_s!r}",
        f"t0_s={grid.t0!r}",
        f"complex={1 if grid.is_complex else 0}",
        f"seed={grid.meta.get('sweep', {}).get('seed', 0)}",
    ]
    device = grid.meta.get("device")
    if device:
        for key in _DEVICE_KEYS:
            if key in device:
                lines.append(f"device_{key}={device[key]!r}")
    return lines


def _require_uniform(axis: np.ndarray, name: str):
    if axis.size > 2:
        steps = np.diff(axis)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise GridFormatError(f"{name} axis must be uniform to serialize")


def write_grid(grid: SpectrumGrid, path, mode: str = "binary") -> None:
    """Write a grid file atomically (temp file + rename)."""
    if mode not in ("binary", "text"):
        raise GridFormatError(f"unknown grid file mode {mode!r}")
    path = Path(path)
    header = "\n".join(_header_lines(grid)) + "\n\n"
    if mode == "binary":
        payload = _payload_array(grid).astype("<f8").tobytes()
        blob = MAGIC + header.encode("utf-8") + payload
    else:
        rows = []
        data = _payload_array(grid)
        per_row = data.reshape(grid.biases.size, -1)
        for row in per_row:
            rows.append(",".join(repr(x) for x in row))
        blob = (header + "\n".join(rows) + "\n").encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _payload_array(grid: SpectrumGrid) -> np.ndarray:
    if grid.is_complex:
        out = np.empty((grid.biases.size, grid.freqs.size * 2))
        out[:, 0::2] = grid.s21.real
        out[:, 1::2] = grid.s21.imag
        return out
    return np.asarray(grid.s21, dtype=float)


def read_grid(path) -> SpectrumGrid:
    """Read a text or binary grid file; raises GridFormatError on damage."""
    blob = Path(path).read_bytes()
    if blob[:8] == MAGIC:
        return _read_binary(blob)
    if blob[: len(MAGIC)].startswith(b"SGRD"):
        raise GridFormatError(f"unsupported magic {blob[:8]!r}", offset=0)
    return _read_text(blob)


def _parse_header(text: str, base_offset: int):
    fields = {}
    offset = base_offset
    for line in text.split("\n"):
        if line == "":
            break
        if "=" not in line:
            raise GridFormatError(f"malformed header line {line!r}", offset=offset)
        key, value = line.split("=", 1)
        fields[key] = value
        offset += len(line.encode("utf-8")) + 1
    required = (
        "format_version",
        "n_freq",
        "n_bias",
        "f_start_hz",
        "f_step_hz",
        "v_start_v",
        "v_step_v",
        "trace_time_s",
        "complex",
    )
    for key in required:
        if key not in fields:
            raise GridFormatError(f"missing header field {key!r}", offset=base_offset)
    try:
        parsed = {
            "n_freq": int(fields["n_freq"]),
            "n_bias": int(fields["n_bias"]),
            "f_start": float(fields["f_start_hz"]),
            "f_step": float(fields["f_step_hz"]),
            "v_start": float(fields["v_start_v"]),
            "v_step": float(fields["v_step_v"]),
            "trace_time": float(fields["trace_time_s"]),
            "t0": float(fields.get("t0_s", 0.0)),
            "complex": int(fields["complex"]),
            "version": int(fields["format_version"]),
            "seed": int(fields.get("seed", 0)),
        }
    except ValueError as exc:
        raise GridFormatError(f"non-numeric header value ({exc})", offset=base_offset) from exc
    if parsed["version"] != FORMAT_VERSION:
        raise GridFormatError(f"unsupported format_version {parsed['version']}", offset=base_offset)
    if parsed["n_freq"] < 1 or parsed["n_bias"] < 1:
        raise GridFormatError("grid dimensions must be positive", offset=base_offset)
    if parsed["complex"] not in (0, 1):
        raise GridFormatError("complex flag must be 0 or 1", offset=base_offset)
    device = {}
    for key, value in fields.items():
        if key.startswith("device_"):
            try:
                device[key[len("device_") :]] = float(value)
            except ValueError as exc:
                raise GridFormatError(f"bad device field {key}", offset=base_offset) from exc
    parsed["device"] = device
    return parsed, offset


def _grid_from(parsed: dict, values: np.ndarray) -> SpectrumGrid:
    n_f, n_b = parsed["n_freq"], parsed["n_bias"]
    if parsed["complex"]:
        s21 = values[:, 0::2] + 1j * values[:, 1::2]
    else:
        s21 = values
    freqs = parsed["f_start"] + parsed["f_step"] * np.arange(n_f)
    biases = parsed["v_start"] + parsed["v_step"] * np.arange(n_b)
    meta = {"sweep": {"seed": parsed["seed"]}}
    if parsed["device"]:
        meta["device"] = parsed["device"]
    return SpectrumGrid(
        freqs=freqs,
        biases=biases,
        s21=s21,
        trace_time_s=parsed["trace_time"],
        t0=parsed["t0"],
        meta=meta,
    )


def _read_binary(blob: bytes) -> SpectrumGrid:
    sep = blob.find(b"\n\n", 8)
    if sep < 0:
        raise GridFormatError("header not terminated by blank line", offset=len(blob))
    try:
        header_text = blob[8:sep].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise GridFormatError("header is not valid UTF-8", offset=8) from exc
    parsed, _ = _parse_header(header_text + "\n", 8)
    payload_offset = sep + 2
    n_vals = parsed["n_bias"] * parsed["n_freq"] * (2 if parsed["complex"] else 1)
    expected = n_vals * 8
    payload = blob[payload_offset:]
    if len(payload) != expected:
        raise GridFormatError(
            f"payload length {len(payload)} != expected {expected}",
            offset=payload_offset + min(len(payload), expected),
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(parsed["n_bias"], -1)
    return _grid_from(parsed, values.copy())


def _read_text(blob: bytes) -> SpectrumGrid:
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise GridFormatError("file is not valid UTF-8 text", offset=0) from exc
    sep = text.find("\n\n")
    if sep < 0:
        raise GridFormatError("header not terminated by blank line", offset=len(blob))
    parsed, _ = _parse_header(text[:sep] + "\n", 0)
    body = text[sep + 2 :]
    per_row = parsed["n_freq"] * (2 if parsed["complex"] else 1)
    rows = [r for r in body.split("\n") if r != ""]
    if len(rows) != parsed["n_bias"]:
        raise GridFormatError(
            f"expected {parsed['n_bias']} payload rows, found {len(rows)}",
            offset=sep + 2,
        )
    values = np.empty((parsed["n_bias"], per_row))
    offset = sep + 2
    for i, row in enumerate(rows):
        parts = row.split(",")
        if len(parts) != per_row:
            raise GridFormatError(
                f"row {i}: expected {per_row} values, found {len(parts)}", offset=offset
            )
        try:
            values[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise GridFormatError(f"row {i}: non-numeric value ({exc})", offset=offset) from exc
        offset += len(row.encode("utf-8")) + 1
    return _grid_from(parsed, values)
