"""On-disk formats: FieldFile binaries, CSV tables and run manifests.

FieldFile layout (128-byte header, then the payload):

    offset  size  content
    0       9     magic b"CAPSTRIP1"
    9       1     endianness tag, b"<" (little) or b">" (big)
    10      6     zero padding
    16      4     uint32 d
    20      4     uint32 n
    24      8     float64 L
    32      8     float64 time
    40      64    field name, UTF-8, NUL padded
    104     24    reserved (zero)
    128     8 n^d float64 values, row-major (C order)

All header numbers and the payload use the byte order named by the tag.
"""
from __future__ import annotations

import csv
import json
import platform
import struct
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__

MAGIC = b"CAPSTRIP1"
HEADER_SIZE = 128
NAME_SIZE = 64


class FormatError(ValueError):
    """A file does not follow the FieldFile layout."""


@dataclass(frozen=True)
class FieldHeader:
    d: int
    n: int
    L: float
    time: float
    name: str
    byteorder: str = "<"


def _pack_header(h: FieldHeader) -> bytes:
    name = h.name.encode("utf-8")
    if len(name) > NAME_SIZE:
        raise FormatError(f"field name longer than {NAME_SIZE} bytes")
    e = h.byteorder
    head = MAGIC + e.encode() + bytes(6)
    head += struct.pack(e + "IIdd", h.d, h.n, h.L, h.time)
    head += name.ljust(NAME_SIZE, b"\0") + bytes(24)
    assert len(head) == HEADER_SIZE
    return head


def write_field(path: str, values: np.ndarray, L: float, name: str, time: float = 0.0,
                byteorder: str = "<") -> FieldHeader:
    values = np.asarray(values, dtype=float)
    d, n = values.ndim, values.shape[0]
    if d not in (1, 2) or any(s != n for s in values.shape):
        raise FormatError(f"field must be n or n x n, got shape {values.shape}")
    if byteorder not in "<>":
        raise FormatError("byteorder must be '<' or '>'")
    header = FieldHeader(d, n, float(L), float(time), name, byteorder)
    with open(path, "wb") as fh:
        fh.write(_pack_header(header))
        fh.write(np.ascontiguousarray(values).astype(byteorder + "f8").tobytes())
    return header


def read_field(path: str) -> tuple[FieldHeader, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER_SIZE or blob[:9] != MAGIC:
        raise FormatError(f"{path}: not a FieldFile")
    e = blob[9:10].decode("ascii", "replace")
    if e not in "<>" or len(e) != 1:
        raise FormatError(f"{path}: bad endianness tag")
    d, n, L, t = struct.unpack(e + "IIdd", blob[16:40])
    name = blob[40:40 + NAME_SIZE].rstrip(b"\0").decode("utf-8")
    if d not in (1, 2):
        raise FormatError(f"{path}: bad dimension {d}")
    count = n**d
    payload = blob[HEADER_SIZE:]
    if len(payload) != 8 * count:
        raise FormatError(f"{path}: payload holds {len(payload)} bytes, expected {8 * count}")
    values = np.frombuffer(payload, dtype=e + "f8").astype(float).reshape((n,) * d)
    return FieldHeader(d, n, L, t, name, e), values


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str, columns, rows) -> None:
    """CSV with a header line; floats use shortest round-trip repr (bit-exact)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_manifest(path: str, command: str, config: dict, grid: dict, timings: dict,
                   extra: dict | None = None) -> dict:
    manifest = {
        "command": command,
        "version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "created_unix": time.time(),
        "grid": grid,
        "config": config,
        "timings_s": timings,
    }
    if extra:
        manifest.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
