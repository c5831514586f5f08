"""Binary field files, trajectory manifests and CSV export.

A field file is the four bytes ``TDF1`` followed by three little-endian
uint32 values ``rank, nx, ny`` and ``rank * nx * ny`` little-endian float64
values in row-major order (rows run along y; vector components are stored
one after the other).
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TDF1"
_HEADER = struct.Struct("<4sIII")


class FieldFormatError(ValueError):
    pass


def write_field(path, field):
    field = np.asarray(field, dtype="<f8")
    if field.ndim == 2:
        rank = 1
    elif field.ndim == 3 and field.shape[0] == 2:
        rank = 2
    else:
        raise FieldFormatError(f"cannot store an array of shape {field.shape} as a field")
    ny, nx = field.shape[-2:]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rank, nx, ny))
        fh.write(np.ascontiguousarray(field).tobytes())


def read_field(path, rank=None, grid=None):
    """Read a field file; ``rank`` and ``grid`` guard against mismatched data."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FieldFormatError(f"{path}: file shorter than the header")
    magic, frank, nx, ny = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FieldFormatError(f"{path}: bad magic {magic!r}")
    if frank not in (1, 2):
        raise FieldFormatError(f"{path}: rank must be 1 or 2, got {frank}")
    expected = frank * nx * ny * 8
    payload = len(data) - _HEADER.size
    if payload != expected:
        raise FieldFormatError(f"{path}: payload has {payload} bytes, header implies {expected}")
    if rank is not None and frank != rank:
        kind = {1: "scalar", 2: "vector"}
        raise FieldFormatError(f"{path}: holds a {kind[frank]} field but a {kind[rank]} field was requested")
    if grid is not None and (nx, ny) != (grid.nx, grid.ny):
        raise FieldFormatError(f"{path}: field is {nx}x{ny} but the grid is {grid.nx}x{grid.ny}")
    arr = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(float)
    return arr.reshape((ny, nx) if frank == 1 else (2, ny, nx))


def write_trajectory(directory, name, times, fields):
    """One field file per snapshot plus ``<name>.json`` listing times and file names."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for n, f in enumerate(fields):
        fname = f"{name}_{n:05d}.tdf"
        write_field(directory / fname, f)
        files.append(fname)
    manifest = {"name": name, "times": [float(t) for t in times], "files": files}
    path = directory / f"{name}.json"
    path.write_text(json.dumps(manifest, indent=1), encoding="utf-8")
    return path


def read_trajectory(manifest_path, rank=None, grid=None):
    """Return ``(times, fields)`` from a manifest written by :func:`write_trajectory`."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    times, files = manifest.get("times"), manifest.get("files")
    if not isinstance(times, list) or not isinstance(files, list) or len(times) != len(files):
        raise FieldFormatError(f"{manifest_path}: manifest needs equally long 'times' and 'files' lists")
    base = manifest_path.parent
    for fname in files:
        if not (base / fname).is_file():
            raise FieldFormatError(f"{manifest_path}: snapshot {fname} is missing")
    fields = np.stack([read_field(base / f, rank, grid) for f in files])
    return np.asarray(times, dtype=float), fields


def write_field_csv(path, field):
    """One grid row per line; vector components are written as consecutive blocks."""
    field = np.asarray(field, dtype=float)
    blocks = field if field.ndim == 3 else field[None]
    np.savetxt(path, np.concatenate(list(blocks), axis=0), delimiter=",", fmt="%.17g")


def write_rows_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
