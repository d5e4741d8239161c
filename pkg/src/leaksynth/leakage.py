"""Relocation of a leakage plume to the shallow/intermediate boundary.

The perturbation is cropped to its main body, cut by a random horizontal
line, and shifted vertically so the cut lands on the bottom of the shallow
layer. Columns are never changed and values are never resampled.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyLeakage, GeometryMismatch, OutOfGrid, SingleRowLeakage
from .velocity_model import Perturbation


@dataclass(frozen=True)
class CroppedLeakage:
    pert: Perturbation
    bbox: tuple  # (row_min, row_max, col_min, col_max), inclusive
    threshold: float

    @property
    def n_rows(self):
        return self.bbox[1] - self.bbox[0] + 1


@dataclass(frozen=True)
class SplitLeakage:
    upper: Perturbation
    lower: Perturbation
    split_row: int


def default_crop_threshold(pert):
    """One third of the largest perturbation value."""
    peak = float(np.max(pert.values))
    if not peak > 0:
        raise EmptyLeakage("perturbation has no positive cell")
    return peak / 3.0


def crop_leakage(pert, th_l):
    """Keep cells strictly greater than ``th_l`` and zero the rest."""
    if not th_l > 0:
        raise ValueError(f"crop threshold must be positive, got {th_l}")
    keep = pert.values > th_l
    if not keep.any():
        raise EmptyLeakage(f"no cell exceeds crop threshold {th_l:g}")
    rows = np.flatnonzero(keep.any(axis=1))
    cols = np.flatnonzero(keep.any(axis=0))
    cropped = np.where(keep, pert.values, np.float32(0))
    bbox = (int(rows[0]), int(rows[-1]), int(cols[0]), int(cols[-1]))
    return CroppedLeakage(Perturbation(cropped, pert.dx), bbox, float(th_l))


def split_at(crop, split_row):
    """Cut ``crop`` so that rows ``< split_row`` form the upper part."""
    values = crop.pert.values
    upper = np.zeros_like(values)
    lower = np.zeros_like(values)
    upper[:split_row] = values[:split_row]
    lower[split_row:] = values[split_row:]
    return SplitLeakage(
        Perturbation(upper, crop.pert.dx), Perturbation(lower, crop.pert.dx), int(split_row)
    )


def split_horizontal(crop, rng_seed):
    """Cut the crop at a row drawn uniformly from ``(row_min, row_max]``."""
    row_min, row_max = crop.bbox[:2]
    if row_max == row_min:
        raise SingleRowLeakage(f"leakage occupies the single row {row_min}")
    rng = np.random.default_rng(rng_seed)
    split_row = int(rng.integers(row_min + 1, row_max + 1))
    return split_at(crop, split_row)


def whole_below(crop):
    """Degenerate split with everything in the lower part (single-row plumes)."""
    return split_at(crop, crop.bbox[0])


def move_to_boundary(split, profile):
    """Shift both parts so the split line sits at ``profile.shallow_end``."""
    total = split.upper.values + split.lower.values
    depth = total.shape[0]
    if profile.shallow_end >= depth:
        raise GeometryMismatch(
            f"shallow_end={profile.shallow_end} outside grid depth {depth}"
        )
    offset = profile.shallow_end - split.split_row
    rows = np.flatnonzero((total != 0).any(axis=1))
    if rows.size and (rows[0] + offset < 0 or rows[-1] + offset >= depth):
        raise OutOfGrid(
            f"shifting rows {rows[0]}..{rows[-1]} by {offset:+d} leaves the "
            f"{depth}-row grid"
        )
    moved = np.zeros_like(total)
    if offset >= 0:
        moved[offset:] = total[: depth - offset]
    else:
        moved[:offset] = total[-offset:]
    return Perturbation(moved, split.upper.dx)
