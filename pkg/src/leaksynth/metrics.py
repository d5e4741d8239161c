"""Map-quality metrics and the weighted fine-tuning loss."""

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import GeometryMismatch

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricReport:
    ssim: float
    mae: float
    mse: float


@dataclass(frozen=True)
class LossWeights:
    lam: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")


def _values(x):
    return np.asarray(getattr(x, "values", x), dtype=np.float64)


def _pair(a, b):
    a, b = _values(a), _values(b)
    if a.shape != b.shape:
        raise GeometryMismatch(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a, b, vmin, vmax, window=SSIM_WINDOW, sigma=SSIM_SIGMA, k1=SSIM_K1, k2=SSIM_K2):
    """Mean structural similarity over all fully-contained Gaussian windows.

    Both inputs are scaled to ``[0, 1]`` with the shared ``(vmin, vmax)`` so
    scores are comparable between samples of one dataset.
    """
    a, b = _pair(a, b)
    if not vmax > vmin:
        raise ValueError(f"degenerate normalisation range [{vmin}, {vmax}]")
    if min(a.shape) < window:
        raise GeometryMismatch(f"grid {a.shape} smaller than the {window}x{window} window")
    span = vmax - vmin
    x = (a - vmin) / span
    y = (b - vmin) / span
    w = gaussian_window(window, sigma)

    def filt(z):
        return signal.correlate2d(z, w, mode="valid")

    mu_x, mu_y = filt(x), filt(y)
    sxx = filt(x * x) - mu_x * mu_x
    syy = filt(y * y) - mu_y * mu_y
    sxy = filt(x * y) - mu_x * mu_y
    c1 = k1 ** 2
    c2 = k2 ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def mae(a, b):
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)))


def mse(a, b):
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def compare(pred, truth, vmin, vmax):
    return MetricReport(ssim(pred, truth, vmin, vmax), mae(pred, truth), mse(pred, truth))


def _stack(batch):
    if isinstance(batch, np.ndarray):
        return batch.astype(np.float64)
    return np.asarray([_values(m) for m in batch], dtype=np.float64)


def _group_loss(pred, truth):
    pred, truth = _stack(pred), _stack(truth)
    if pred.shape != truth.shape:
        raise GeometryMismatch(f"batch shape mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        return None
    diff = pred - truth
    return float(np.mean(np.abs(diff))) + float(np.mean(diff ** 2))


def finetune_loss(pred_u, gt_u, pred_p, gt_p, weights):
    """``lam * (L1 + L2)`` on the unprivileged group plus ``(1 - lam) * (L1 + L2)``
    on the privileged group, each a batch mean."""
    lam = weights.lam if isinstance(weights, LossWeights) else LossWeights(weights).lam
    total = 0.0
    for name, w, pred, gt in (("unprivileged", lam, pred_u, gt_u), ("privileged", 1.0 - lam, pred_p, gt_p)):
        loss = _group_loss(pred, gt)
        if loss is None:
            if w != 0:
                raise ValueError(f"{name} group is empty but carries weight {w}")
            continue
        total += w * loss
    return total
