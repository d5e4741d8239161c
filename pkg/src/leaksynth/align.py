"""Layer-wise distribution alignment by empirical quantile mapping.

A thresholded empirical CDF keeps only samples strictly above a floor
(cells with no real leakage are excluded) and renormalises over the retained
mass. The mapping ``g`` between a source and a target CDF is piecewise linear:
between consecutive sorted source samples ``m1 <= m <= m2``

    g(m) = sh1 + (m - m1) * (sh2 - sh1) / (m2 - m1)

where ``sh1``/``sh2`` are the target values at the same fractional rank as
``m1``/``m2`` (rank ``i`` of ``n`` sits at fraction ``i / (n - 1)``, and the
target is read by linear interpolation on its own sorted samples). The lowest
source sample maps to the lowest target sample, anything above the source
maximum maps to the target maximum.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import BelowThreshold, GeometryMismatch, NoMassAboveThreshold
from .velocity_model import Perturbation

log = logging.getLogger(__name__)

ALIGN_MODES = ("absolute", "delta")


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    sorted_samples: np.ndarray
    threshold: float

    def __post_init__(self):
        s = np.asarray(self.sorted_samples, dtype=np.float64)
        if s.ndim != 1 or s.size == 0:
            raise NoMassAboveThreshold("empirical CDF needs at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("CDF samples must be finite")
        if np.any(s <= self.threshold):
            raise ValueError("CDF samples must lie strictly above the threshold")
        if np.any(np.diff(s) < 0):
            raise ValueError("CDF samples must be sorted ascending")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "sorted_samples", s)
        object.__setattr__(self, "threshold", float(self.threshold))

    @property
    def n(self):
        return self.sorted_samples.size

    def eval(self, x):
        """Fraction of retained samples ``<= x``."""
        counts = np.searchsorted(self.sorted_samples, x, side="right")
        return counts / self.n

    def quantile_at_rank(self, frac_index):
        """Linear interpolation on the sorted samples at fractional index."""
        s = self.sorted_samples
        if s.size == 1:
            return np.full(np.shape(frac_index), s[0])
        u = np.clip(np.asarray(frac_index, dtype=np.float64), 0.0, s.size - 1)
        j = np.minimum(np.floor(u).astype(np.intp), s.size - 2)
        # rounding may overshoot the upper sample by an ulp; clamp to keep monotone
        return np.minimum(s[j] + (u - j) * (s[j + 1] - s[j]), s[j + 1])

    def __eq__(self, other):
        if not isinstance(other, EmpiricalCdf):
            return NotImplemented
        return self.threshold == other.threshold and np.array_equal(
            self.sorted_samples, other.sorted_samples
        )

    def to_csv(self, path):
        lines = [f"threshold,{self.threshold!r}"]
        lines += [repr(float(v)) for v in self.sorted_samples]
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if len(header) != 2 or header[0] != "threshold":
                raise ValueError(f"{path}: expected 'threshold,<value>' header")
            samples = [float(line) for line in fh if line.strip()]
        return build_cdf(samples, float(header[1]))


@dataclass(frozen=True)
class AlignSpec:
    target_shallow: EmpiricalCdf
    target_intermediate: EmpiricalCdf
    th_s: float = 50.0
    th_m: float = 50.0
    mode: str = "absolute"

    def __post_init__(self):
        if self.mode not in ALIGN_MODES:
            raise ValueError(f"align mode must be one of {ALIGN_MODES}, got {self.mode!r}")


def build_cdf(samples, threshold):
    """Empirical CDF of the samples strictly above ``threshold``."""
    s = np.asarray(samples, dtype=np.float64).ravel()
    kept = np.sort(s[s > threshold], kind="stable")
    if kept.size == 0:
        raise NoMassAboveThreshold(
            f"none of {s.size} samples exceeds threshold {threshold:g}"
        )
    return EmpiricalCdf(kept, threshold)


def map_values(m, source, target):
    """Vectorised quantile mapping of ``m`` from ``source`` onto ``target``."""
    m = np.asarray(m, dtype=np.float64)
    if np.any(m <= source.threshold):
        raise BelowThreshold(
            f"value(s) at or below source threshold {source.threshold:g} cannot be mapped"
        )
    s = source.sorted_samples
    n = s.size
    t = target.sorted_samples
    if n == 1:
        return np.where(m <= s[0], t[0], t[-1])

    scale = (target.n - 1) / (n - 1)
    # lowest index among exact ties; otherwise the bracket's lower end
    lo = np.searchsorted(s, m, side="left")
    exact = (lo < n) & (s[np.minimum(lo, n - 1)] == m)
    i = np.where(exact, lo, np.searchsorted(s, m, side="right") - 1)
    i = np.clip(i, 0, n - 2)
    m1, m2 = s[i], s[i + 1]
    sh1 = target.quantile_at_rank(i * scale)
    sh2 = target.quantile_at_rank((i + 1) * scale)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.minimum(sh1 + (m - m1) * (sh2 - sh1) / (m2 - m1), sh2)
    g = np.where(exact, target.quantile_at_rank(lo * scale), g)
    g = np.where(m <= s[0], t[0], g)
    g = np.where(m > s[-1], t[-1], g)
    return g


def map_value(m, source, target):
    """Map a single value ``m`` through the source-to-target quantile map."""
    return float(map_values(np.float64(m), source, target))


def _align_layer(v3, base, rows, th, target, mode, layer):
    block = v3[rows]
    selected = block > th
    if not selected.any():
        log.warning("%s layer has no leakage above %g; left unchanged", layer, th)
        return 0
    if mode == "absolute":
        provisional = base[rows][selected] - block[selected]
        source = build_cdf(provisional, -math.inf)
        mapped = base[rows][selected] - map_values(provisional, source, target)
    else:
        source = build_cdf(block[selected], th)
        mapped = map_values(block[selected], source, target)
    out = block.copy()
    out[selected] = mapped
    v3[rows] = out
    return int(selected.sum())


def align_perturbation(v3, baseline, spec, profile):
    """Align the shallow and intermediate parts of a moved leakage field.

    In ``absolute`` mode the mapped quantity is the provisional velocity
    ``baseline - v3`` and the result is returned as a perturbation again; in
    ``delta`` mode ``v3`` itself is mapped. Deep rows and cells at or below the
    layer threshold are passed through untouched.
    """
    if not v3.same_geometry(baseline):
        raise GeometryMismatch("perturbation and baseline geometry differ")
    profile.validate_for(v3)
    work = v3.values.astype(np.float64)
    base = baseline.values.astype(np.float64)
    n_shallow = _align_layer(
        work, base, profile.rows("shallow"), spec.th_s, spec.target_shallow, spec.mode, "shallow"
    )
    n_inter = _align_layer(
        work, base, profile.rows("intermediate"), spec.th_m,
        spec.target_intermediate, spec.mode, "intermediate",
    )
    if n_shallow == 0 and n_inter == 0:
        log.warning("nothing to align: no leakage above thresholds in either layer")
    # unselected cells round-trip f32 -> f64 -> f32 exactly
    return Perturbation(work, v3.dx)


def layer_cdf(baseline, leaked, profile, layer, threshold, mode="absolute"):
    """Target CDF for ``layer`` taken from a map whose leakage sits there.

    Cells participate where the leakage delta exceeds ``threshold``; the
    samples are absolute velocities (``absolute``) or the deltas (``delta``).
    """
    profile.validate_for(baseline)
    rows = profile.rows(layer)
    delta = baseline.values[rows].astype(np.float64) - leaked.values[rows].astype(np.float64)
    selected = delta > threshold
    if mode == "absolute":
        return build_cdf(leaked.values[rows][selected], 0.0)
    return build_cdf(delta[selected], threshold)
