"""Velocity grids, leakage perturbations and their on-disk formats.

Grids are stored row-major with row 0 at the surface. Values are kept at
single precision so that every in-memory grid is exactly representable in
the binary container and a save/load cycle is bit-exact.

Binary container (little-endian)::

    magic   4s   b"GFVM" (velocity map) or b"GFPT" (perturbation)
    version u32  1
    depth   u32
    width   u32
    dx      f32  metres per cell
    values  f32  depth * width, row-major

Small grids (at most ``CSV_MAX_CELLS`` cells) may also be read and written as
CSV text, one line per grid row, with an optional ``# dx=<metres>`` header.
"""

import math
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import GeometryMismatch, MapFormatError

MAP_MAGIC = b"GFVM"
PERT_MAGIC = b"GFPT"
FORMAT_VERSION = 1
CSV_MAX_CELLS = 10_000

_HEADER = struct.Struct("<4sIIIf")

LAYERS = ("shallow", "intermediate", "deep")


def _frozen_f32(values):
    arr = np.array(values, dtype=np.float32, copy=True)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise GeometryMismatch(f"expected a non-empty 2D grid, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _first_bad_cell(mask):
    r, c = np.argwhere(mask)[0]
    return int(r), int(c)


class _Grid:
    """Shared geometry helpers for maps and perturbations."""

    values: np.ndarray
    dx: float

    @property
    def depth_cells(self):
        return self.values.shape[0]

    @property
    def width_cells(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def same_geometry(self, other):
        return self.shape == other.shape and self.dx == other.dx


@dataclass(frozen=True, eq=False)
class VelocityMap(_Grid):
    """Acoustic velocity (m/s) on a regular grid with spacing ``dx`` metres."""

    values: np.ndarray
    dx: float

    def __post_init__(self):
        arr = _frozen_f32(self.values)
        dx = float(np.float32(self.dx))
        if not (math.isfinite(dx) and dx > 0):
            raise ValueError(f"dx must be finite and positive, got {self.dx}")
        bad = ~np.isfinite(arr)
        if bad.any():
            raise MapFormatError("non-finite value at (%d,%d)" % _first_bad_cell(bad))
        bad = arr <= 0
        if bad.any():
            raise MapFormatError("non-positive value at (%d,%d)" % _first_bad_cell(bad))
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "dx", dx)

    def __eq__(self, other):
        if not isinstance(other, VelocityMap):
            return NotImplemented
        return self.dx == other.dx and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class Perturbation(_Grid):
    """Leakage delta ``baseline - leaked`` in m/s; positive where velocity dropped."""

    values: np.ndarray
    dx: float

    def __post_init__(self):
        arr = _frozen_f32(self.values)
        dx = float(np.float32(self.dx))
        if not (math.isfinite(dx) and dx > 0):
            raise ValueError(f"dx must be finite and positive, got {self.dx}")
        bad = ~np.isfinite(arr)
        if bad.any():
            raise MapFormatError("non-finite value at (%d,%d)" % _first_bad_cell(bad))
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "dx", dx)

    @classmethod
    def zeros_like(cls, grid):
        return cls(np.zeros(grid.shape, dtype=np.float32), grid.dx)

    def __eq__(self, other):
        if not isinstance(other, Perturbation):
            return NotImplemented
        return self.dx == other.dx and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class LayerProfile:
    """Row boundaries: shallow is ``[0, shallow_end)``, intermediate
    ``[shallow_end, intermediate_end)``, deep is everything below."""

    shallow_end: int
    intermediate_end: int

    def __post_init__(self):
        if not 0 < self.shallow_end < self.intermediate_end:
            raise ValueError(
                f"need 0 < shallow_end < intermediate_end, got "
                f"{self.shallow_end}, {self.intermediate_end}"
            )

    def validate_for(self, grid):
        if self.intermediate_end >= grid.depth_cells:
            raise GeometryMismatch(
                f"intermediate_end={self.intermediate_end} must be below the "
                f"grid depth {grid.depth_cells}"
            )

    def rows(self, layer):
        """Return the ``slice`` of rows covered by ``layer``."""
        if layer == "shallow":
            return slice(0, self.shallow_end)
        if layer == "intermediate":
            return slice(self.shallow_end, self.intermediate_end)
        if layer == "deep":
            return slice(self.intermediate_end, None)
        raise ValueError(f"unknown layer {layer!r}; expected one of {LAYERS}")


def _check_geometry(a, b):
    if not a.same_geometry(b):
        raise GeometryMismatch(
            f"grid geometry differs: {a.shape} dx={a.dx} vs {b.shape} dx={b.dx}"
        )


def subtract_baseline(baseline, leaked):
    """Pure leakage field ``baseline - leaked``."""
    _check_geometry(baseline, leaked)
    diff = baseline.values.astype(np.float64) - leaked.values.astype(np.float64)
    return Perturbation(diff, baseline.dx)


def recompose(baseline, pert, v_min=300.0, v_max=6000.0):
    """Rebuild a velocity map as ``clip(baseline - pert, v_min, v_max)``."""
    _check_geometry(baseline, pert)
    if not v_min > 0 or v_max < v_min:
        raise ValueError(f"invalid clamp range [{v_min}, {v_max}]")
    vel = baseline.values.astype(np.float64) - pert.values.astype(np.float64)
    # clip after the f32 cast so the bounds hold exactly at single precision
    vel = np.clip(vel.astype(np.float32), np.float32(v_min), np.float32(v_max))
    return VelocityMap(vel, baseline.dx)


def layer_samples(field, profile, layer):
    """Values of ``field`` in ``layer``, flattened row-major."""
    profile.validate_for(field)
    return field.values[profile.rows(layer)].ravel().copy()


# --- file I/O ----------------------------------------------------------------


def _atomic_write(path, data, mode="wb"):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _encode(grid, magic):
    depth, width = grid.shape
    header = _HEADER.pack(magic, FORMAT_VERSION, depth, width, grid.dx)
    return header + grid.values.astype("<f4").tobytes()


def _decode(blob, magic, path):
    if len(blob) < _HEADER.size:
        raise MapFormatError(f"{path}: truncated header")
    got, version, depth, width, dx = _HEADER.unpack_from(blob)
    if got != magic:
        raise MapFormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise MapFormatError(f"{path}: unsupported version {version}")
    if depth == 0 or width == 0:
        raise MapFormatError(f"{path}: empty grid {depth}x{width}")
    expected = _HEADER.size + 4 * depth * width
    if len(blob) != expected:
        raise MapFormatError(
            f"{path}: payload is {len(blob)} bytes, header implies {expected}"
        )
    values = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(depth, width)
    return values, dx


def _read_csv(path, dx):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                if key.strip() == "dx":
                    dx = float(val)
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise MapFormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise MapFormatError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise MapFormatError(f"{path}: ragged rows (widths {sorted(widths)})")
    if len(rows) * len(rows[0]) > CSV_MAX_CELLS:
        raise MapFormatError(f"{path}: CSV grids are limited to {CSV_MAX_CELLS} cells")
    if dx is None:
        raise MapFormatError(f"{path}: missing '# dx=' header and no dx given")
    return np.array(rows), dx


def _read_grid(path, magic, dx):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] in (MAP_MAGIC, PERT_MAGIC):
        return _decode(blob, magic, path)
    return _read_csv(path, dx)


def _check_dims(grid, geometry, path):
    if geometry is not None and tuple(grid.shape) != tuple(geometry):
        raise GeometryMismatch(
            f"{path}: dimensions {grid.shape} do not match expected {tuple(geometry)}"
        )


def load_map(path, geometry=None, dx=None):
    """Read a velocity map from a ``GFVM`` file or a CSV grid.

    ``geometry`` is an optional ``(depth, width)`` the map must have. ``dx`` is
    only used for CSV files without a ``# dx=`` header.
    """
    values, dx = _read_grid(path, MAP_MAGIC, dx)
    try:
        vmap = VelocityMap(values, dx)
    except MapFormatError as exc:
        raise MapFormatError(f"{path}: {exc}") from None
    _check_dims(vmap, geometry, path)
    return vmap


def load_perturbation(path, geometry=None, dx=None):
    values, dx = _read_grid(path, PERT_MAGIC, dx)
    try:
        pert = Perturbation(values, dx)
    except MapFormatError as exc:
        raise MapFormatError(f"{path}: {exc}") from None
    _check_dims(pert, geometry, path)
    return pert


def _write_csv(grid, path):
    if grid.values.size > CSV_MAX_CELLS:
        raise MapFormatError(f"CSV grids are limited to {CSV_MAX_CELLS} cells")
    lines = [f"# dx={grid.dx!r}"]
    for row in grid.values:
        lines.append(",".join(repr(float(v)) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n", mode="w")


def save_map(vmap, path):
    """Write ``vmap``; a ``.csv`` suffix selects the text format."""
    if os.fspath(path).lower().endswith(".csv"):
        _write_csv(vmap, path)
    else:
        _atomic_write(path, _encode(vmap, MAP_MAGIC))


def save_perturbation(pert, path):
    if os.fspath(path).lower().endswith(".csv"):
        _write_csv(pert, path)
    else:
        _atomic_write(path, _encode(pert, PERT_MAGIC))
