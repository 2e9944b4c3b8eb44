"""PMNS binary field files and JSON sidecars.

Layout: b"PMNS", u16 version, u32 n, f64 L, u8 component count, then for
every mode in row-major k order starting at k = -n/2, each component's
(re, im) as little-endian f64.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .grid import FourierVectorField, GridSpec

MAGIC = b"PMNS"
VERSION = 1
_HEADER = struct.Struct("<4sHIdB")


class FormatError(ValueError):
    pass


def _atomic_write(path: Path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_field(field: FourierVectorField) -> bytes:
    g = field.grid
    body = np.fft.fftshift(field.amplitudes, axes=(1, 2, 3))
    body = np.moveaxis(body, 0, -1).astype("<c16")
    return _HEADER.pack(MAGIC, VERSION, g.n, g.box_length, 3) + body.tobytes()


def decode_field(data: bytes, dealias_fraction: float = 2.0 / 3.0) -> FourierVectorField:
    if len(data) < _HEADER.size:
        raise FormatError("truncated header")
    magic, version, n, length, ncomp = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError("bad magic")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    expected = _HEADER.size + n**3 * ncomp * 16
    if len(data) != expected or ncomp != 3:
        raise FormatError("payload size does not match header")
    body = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).reshape(n, n, n, ncomp)
    amps = np.fft.ifftshift(np.moveaxis(body, -1, 0), axes=(1, 2, 3)).astype(complex)
    return FourierVectorField(GridSpec(n, length, dealias_fraction), amps)


def write_field(path, field: FourierVectorField):
    _atomic_write(Path(path), encode_field(field))


def read_field(path, dealias_fraction: float = 2.0 / 3.0) -> FourierVectorField:
    return decode_field(Path(path).read_bytes(), dealias_fraction)


def write_json(path, payload: dict):
    payload = {"format_version": VERSION, **payload}
    _atomic_write(Path(path), (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode())


def write_csv(path, header: list[str], rows):
    lines = ["# format_version=%d" % VERSION, ",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if not isinstance(v, str) else v for v in row))
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode())
