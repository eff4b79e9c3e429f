"""Field serialization: the CSF1 binary format and CSV text export.

CSF1 layout (all little-endian):
    magic   4 bytes  b"CSF1"
    dim     uint32
    shape   dim * uint32     per-axis node counts
    period  dim * float64    per-axis lengths
    rank    uint32           0 scalar, 1 covector, 2 packed symmetric tensor
    data    float64 components, C order, component axis first

Symmetric tensors use the packed upper-triangle order of
:class:`confspec.grids.SymTensorField`.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grids import CovectorField, Grid, MetricField, ScalarField, SymTensorField, _packed_pairs

MAGIC = b"CSF1"

_RANKS = {ScalarField: 0, CovectorField: 1, SymTensorField: 2}


def write_field(path, field) -> None:
    """Write a field (or the tensor of a MetricField) in CSF1 format."""
    if isinstance(field, MetricField):
        field = field.tensor
    rank = _RANKS[type(field)]
    grid = field.grid
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", grid.dim))
        fh.write(struct.pack(f"<{grid.dim}I", *grid.shape))
        fh.write(struct.pack(f"<{grid.dim}d", *grid.period))
        fh.write(struct.pack("<I", rank))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(path, order: int = 4):
    """Read a CSF1 file; returns ScalarField, CovectorField or SymTensorField.

    The stencil order is not part of the format and defaults to 4.
    """
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"not a CSF1 file: bad magic {magic!r}")
        (dim,) = struct.unpack("<I", fh.read(4))
        shape = struct.unpack(f"<{dim}I", fh.read(4 * dim))
        period = struct.unpack(f"<{dim}d", fh.read(8 * dim))
        (rank,) = struct.unpack("<I", fh.read(4))
        grid = Grid(shape, period, order)
        ncomp = {0: 1, 1: dim, 2: dim * (dim + 1) // 2}.get(rank)
        if ncomp is None:
            raise ValueError(f"unknown field rank {rank}")
        count = ncomp * grid.num_nodes
        data = np.frombuffer(fh.read(8 * count), dtype="<f8", count=count)
        trailing = fh.read(1)
    if trailing:
        raise ValueError("trailing bytes after field data")
    if rank == 0:
        return ScalarField(grid, data.reshape(grid.shape))
    if rank == 1:
        return CovectorField(grid, data.reshape((dim,) + grid.shape))
    return SymTensorField(grid, data.reshape((ncomp,) + grid.shape))


def _component_names(field) -> list[str]:
    if isinstance(field, ScalarField):
        return ["value"]
    if isinstance(field, CovectorField):
        return [f"v{i}" for i in range(field.grid.dim)]
    return [f"t{i}{j}" for i, j in _packed_pairs(field.grid.dim)]


def export_csv(path, field) -> None:
    """Plain-text export: node coordinates followed by field components."""
    if isinstance(field, MetricField):
        field = field.tensor
    grid = field.grid
    coords = grid.coordinates().reshape(grid.dim, -1)
    vals = field.values.reshape(-1, grid.num_nodes) if field.values.ndim > grid.dim else field.values.reshape(1, -1)
    names = [f"x{i}" for i in range(grid.dim)] + _component_names(field)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        table = np.vstack([coords, vals]).T
        for row in table:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def field_path(directory, stem: str) -> Path:
    return Path(directory) / f"{stem}.csf"
