"""Candidate leakage maps conditioned on an observed one.

``propose_map`` is a lightweight stochastic stand-in for a learned
conditional generator: it rescales the condition's leakage and bends it with
a smooth random displacement field, so proposals keep the condition's shape
but vary in strength and outline. Maps produced elsewhere (e.g. by a trained
diffusion model) can be fed to the same pipeline through ``import_maps``.
"""

import logging
import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyLeakage, LeakSynthError
from .velocity_model import Perturbation, load_map, recompose, subtract_baseline

log = logging.getLogger(__name__)

MAP_SUFFIXES = (".gfvm", ".csv")


@dataclass(frozen=True)
class ProposalParams:
    amplitude_jitter: tuple = (0.8, 1.3)
    smooth_warp_sigma: float = 4.0
    warp_max_shift: float = 3.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.amplitude_jitter
        if not 0 < lo <= hi:
            raise ValueError(f"amplitude jitter must satisfy 0 < lo <= hi, got {self.amplitude_jitter}")
        if self.warp_max_shift < 0:
            raise ValueError("warp_max_shift must be >= 0")
        if self.smooth_warp_sigma <= 0:
            raise ValueError("smooth_warp_sigma must be > 0")


def _displacement(rng, shape, sigma, max_shift):
    field = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="reflect")
    peak = np.max(np.abs(field))
    if peak == 0:
        return np.zeros(shape)
    return field * (max_shift / peak)


def warp_field(values, rng, sigma, max_shift):
    """Resample ``values`` along a smooth displacement bounded by ``max_shift``."""
    if max_shift == 0:
        return values.astype(np.float64)
    shape = values.shape
    d_row = _displacement(rng, shape, sigma, max_shift)
    d_col = _displacement(rng, shape, sigma, max_shift)
    rows, cols = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
    coords = np.stack([rows + d_row, cols + d_col])
    return ndimage.map_coordinates(
        values.astype(np.float64), coords, order=1, mode="constant", cval=0.0
    )


def propose_map(condition, baseline, params, v_min=300.0, v_max=6000.0):
    """Draw one leakage map resembling ``condition``."""
    pert = subtract_baseline(baseline, condition)
    if not np.any(pert.values > 0):
        raise EmptyLeakage("condition map carries no leakage relative to the baseline")
    rng = np.random.default_rng(params.seed)
    lo, hi = params.amplitude_jitter
    amplitude = rng.uniform(lo, hi) if hi > lo else lo
    warped = warp_field(pert.values, rng, params.smooth_warp_sigma, params.warp_max_shift)
    return recompose(baseline, Perturbation(amplitude * warped, baseline.dx), v_min, v_max)


def list_map_files(directory):
    return sorted(
        os.path.join(directory, name)
        for name in os.listdir(directory)
        if name.lower().endswith(MAP_SUFFIXES)
    )


def scan_maps(directory, baseline):
    """Load every readable map in ``directory`` that matches ``baseline``.

    Returns ``(loaded, skipped)``: ``loaded`` is a list of ``(filename, map)``
    in filename order, ``skipped`` a list of ``(filename, reason)``.
    """
    loaded, skipped = [], []
    for path in list_map_files(directory):
        name = os.path.basename(path)
        try:
            vmap = load_map(path, geometry=baseline.shape, dx=baseline.dx)
            if vmap.dx != baseline.dx:
                raise LeakSynthError(f"dx {vmap.dx} differs from baseline dx {baseline.dx}")
        except (LeakSynthError, OSError, ValueError) as exc:
            log.warning("skipping %s: %s", path, exc)
            skipped.append((name, str(exc)))
            continue
        loaded.append((name, vmap))
    if not loaded and not skipped:
        log.warning("no map files found in %s", directory)
    return loaded, skipped


def import_maps(directory, baseline):
    """Externally generated maps from ``directory``; bad files are skipped."""
    loaded, _ = scan_maps(directory, baseline)
    return [vmap for _, vmap in loaded]
