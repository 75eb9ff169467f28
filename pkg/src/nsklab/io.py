"""
Binary snapshots, trajectory files and CSV slices.

Snapshot layout (little endian): the 8-byte magic ``NSKFLD01``, then
``dim, n, rank`` as ``uint32`` and ``box_length`` as ``float64``, then the
samples as row-major ``float64`` (``dim`` leading components for a vector).
``rank`` is 0 for a scalar field and ``dim`` for a vector field.
A trajectory file is the magic ``NSKTRJ01``, ``dim, n, count`` as ``uint32``,
``box_length``, then per snapshot the time followed by ``q`` and ``u`` samples.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .spectral import Grid, SpectralField
from .state import FluidState

FIELD_MAGIC = b"NSKFLD01"
TRAJ_MAGIC = b"NSKTRJ01"
_FIELD_HEADER = struct.Struct("<8sIIId")
_TRAJ_HEADER = struct.Struct("<8sIIId")


def field_bytes(f: SpectralField) -> bytes:
    g = f.grid
    rank = g.dim if f.is_vector else 0
    data = np.ascontiguousarray(f.samples, dtype="<f8")
    return _FIELD_HEADER.pack(FIELD_MAGIC, g.dim, g.n, rank, g.box_length) + data.tobytes()


def field_from_bytes(blob: bytes) -> SpectralField:
    if len(blob) < _FIELD_HEADER.size:
        raise ValueError("truncated snapshot header")
    magic, dim, n, rank, box = _FIELD_HEADER.unpack_from(blob)
    if magic != FIELD_MAGIC:
        raise ValueError("not a field snapshot (bad magic)")
    if rank not in (0, dim):
        raise ValueError(f"rank {rank} does not match dim {dim}")
    grid = Grid(dim, n, box)
    shape = grid.shape if rank == 0 else (dim,) + grid.shape
    count = int(np.prod(shape))
    payload = np.frombuffer(blob, dtype="<f8", count=count, offset=_FIELD_HEADER.size)
    if payload.size != count or len(blob) != _FIELD_HEADER.size + 8 * count:
        raise ValueError("snapshot payload size mismatch")
    return SpectralField(grid, samples=payload.reshape(shape).astype(float))


def write_snapshot(path, f: SpectralField) -> Path:
    path = Path(path)
    path.write_bytes(field_bytes(f))
    return path


def read_snapshot(path) -> SpectralField:
    return field_from_bytes(Path(path).read_bytes())


def write_trajectory(path, snapshots) -> Path:
    """Write ``FluidState`` snapshots sharing one grid."""
    snapshots = list(snapshots)
    if not snapshots:
        raise ValueError("empty trajectory")
    g = snapshots[0].grid
    buf = io.BytesIO()
    buf.write(_TRAJ_HEADER.pack(TRAJ_MAGIC, g.dim, g.n, len(snapshots), g.box_length))
    for s in snapshots:
        buf.write(struct.pack("<d", s.t))
        buf.write(np.ascontiguousarray(s.q.samples, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(s.u.samples, dtype="<f8").tobytes())
    path = Path(path)
    path.write_bytes(buf.getvalue())
    return path


def read_trajectory(path) -> list[FluidState]:
    blob = Path(path).read_bytes()
    magic, dim, n, count, box = _TRAJ_HEADER.unpack_from(blob)
    if magic != TRAJ_MAGIC:
        raise ValueError("not a trajectory file (bad magic)")
    grid = Grid(dim, n, box)
    m = n**dim
    off = _TRAJ_HEADER.size
    out = []
    for _ in range(count):
        (t,) = struct.unpack_from("<d", blob, off)
        off += 8
        q = np.frombuffer(blob, "<f8", m, off).reshape(grid.shape).astype(float)
        off += 8 * m
        u = np.frombuffer(blob, "<f8", dim * m, off).reshape((dim,) + grid.shape).astype(float)
        off += 8 * dim * m
        out.append(FluidState(SpectralField(grid, samples=q), SpectralField(grid, samples=u), t))
    if off != len(blob):
        raise ValueError("trajectory payload size mismatch")
    return out


def slice_csv(f: SpectralField, component: int = 0) -> str:
    """CSV ``x,value`` along the first axis through the origin of the other axes."""
    g = f.grid
    arr = f.samples[component] if f.is_vector else f.samples
    line = arr[(slice(None),) + (0,) * (g.dim - 1)]
    x = np.arange(g.n) * g.spacing
    rows = ["x,value"] + [f"{float(xi)!r},{float(v)!r}" for xi, v in zip(x, line)]
    return "\n".join(rows) + "\n"


__all__ = [
    "field_bytes",
    "field_from_bytes",
    "read_snapshot",
    "read_trajectory",
    "slice_csv",
    "write_snapshot",
    "write_trajectory",
]
