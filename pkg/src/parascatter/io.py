"""File formats: complex field grids, spectra, resonances, T-matrix magnitudes.

Grid files start with a 16-byte header: magic b"PSGR", then little-endian
u32 nx, u32 ny and u32 dtype (1 = complex64 as float32 re/im pairs). The
payload is row-major with x running fastest, so value (ix, iy) sits at
index iy * nx + ix. Every binary file gets a JSON sidecar next to it.
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List

import numpy as np

from .spectrum import Resonance, SpectrumScan

MAGIC = b"PSGR"
DTYPE_COMPLEX64 = 1
HEADER = struct.Struct("<4sIII")
SPECTRUM_HEADER = ["k", "k2", "tnorm"]


@dataclass(frozen=True)
class GridSpec:
    """Rectangular sampling window; nx columns along x, ny rows along y."""

    x_min: float = -2.0
    x_max: float = 2.0
    y_min: float = -2.0
    y_max: float = 2.0
    nx: int = 101
    ny: int = 101

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("grid bounds need max > min")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid counts must be >= 2")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    def points(self) -> np.ndarray:
        """(ny*nx, 2) Cartesian points in file order."""
        xx, yy = np.meshgrid(self.x, self.y)
        return np.column_stack([xx.ravel(), yy.ravel()])


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def export_grid(values, grid: GridSpec, path, meta=None) -> Path:
    """Write complex values on the grid as a PSGR file plus JSON sidecar."""
    values = np.asarray(values).ravel()
    if values.size != grid.nx * grid.ny:
        raise ValueError(f"expected {grid.nx * grid.ny} values, got {values.size}")
    pairs = np.empty((values.size, 2), dtype="<f4")
    pairs[:, 0] = values.real
    pairs[:, 1] = values.imag
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, grid.nx, grid.ny, DTYPE_COMPLEX64))
        fh.write(pairs.tobytes(order="C"))
    side = {"format": "PSGR", "dtype": "complex64", "layout": "row-major, x fastest",
            "grid": grid.__dict__.copy()}
    if meta:
        side.update(meta)
    write_json(sidecar_path(path), side)
    return path


def read_grid(path):
    """Return (values as complex64 array of shape (ny, nx), nx, ny)."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise ValueError("file too short for a PSGR header")
    magic, nx, ny, dtype = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if dtype != DTYPE_COMPLEX64:
        raise ValueError(f"unsupported dtype code {dtype}")
    body = np.frombuffer(raw, dtype="<f4", offset=HEADER.size)
    if body.size != 2 * nx * ny:
        raise ValueError("payload size does not match the header")
    pairs = body.reshape(-1, 2)
    vals = (pairs[:, 0] + 1j * pairs[:, 1]).astype(np.complex64)
    return vals.reshape(ny, nx), nx, ny


def export_spectrum(scan: SpectrumScan, path) -> Path:
    """CSV with header k,k2,tnorm, ascending in k."""
    path = Path(path)
    order = np.argsort(scan.k_values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPECTRUM_HEADER)
        for i in order:
            k = float(scan.k_values[i])
            w.writerow([repr(k), repr(k * k), repr(float(scan.norms[i]))])
    return path


def read_spectrum(path):
    """Return (k, k2, tnorm) arrays from a spectrum CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != SPECTRUM_HEADER:
        raise ValueError("spectrum CSV must start with the header k,k2,tnorm")
    data = np.array(rows[1:], dtype=float).reshape(-1, 3)
    return data[:, 0], data[:, 1], data[:, 2]


def export_resonances(resonances: Iterable[Resonance], path, meta=None) -> Path:
    """JSON list of resonances sorted by k, with optional metadata."""
    rows = sorted(resonances, key=lambda r: r.k_n)
    payload = {"resonances": [r.to_dict() for r in rows]}
    if meta:
        payload["meta"] = meta
    write_json(path, payload)
    return Path(path)


def read_resonances(path) -> List[Resonance]:
    with open(path) as fh:
        payload = json.load(fh)
    return [Resonance(**row) for row in payload["resonances"]]


def export_tmatrix(T, path, meta=None) -> Path:
    """|T| as row-major little-endian float32 with a JSON sidecar of dimensions."""
    mag = np.abs(np.asarray(T)).astype("<f4")
    if mag.ndim != 2:
        raise ValueError("T must be a matrix")
    path = Path(path)
    path.write_bytes(mag.tobytes(order="C"))
    side = {"rows": mag.shape[0], "cols": mag.shape[1], "dtype": "float32",
            "byte_order": "little", "layout": "row-major", "quantity": "abs(T)"}
    if meta:
        side.update(meta)
    write_json(sidecar_path(path), side)
    return path


def read_tmatrix(path) -> np.ndarray:
    with open(sidecar_path(path)) as fh:
        side = json.load(fh)
    data = np.fromfile(path, dtype="<f4")
    return data.reshape(side["rows"], side["cols"])
