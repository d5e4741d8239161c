"""Slow reference implementations used only by the tests."""

import numpy as np


def quantile_match(m, source, target):
    """Sort both sample sets, bracket ``m`` by linear scan, and read the target
    at the same index ratio as the bracket ends."""
    s = sorted(float(x) for x in source)
    t = sorted(float(x) for x in target)
    n, k = len(s), len(t)

    def target_at(frac_index):
        if k == 1:
            return t[0]
        j = int(frac_index)
        if j >= k - 1:
            return t[-1]
        return t[j] + (frac_index - j) * (t[j + 1] - t[j])

    if m <= s[0]:
        return t[0]
    if m > s[-1]:
        return t[-1]
    for i in range(n):
        if s[i] == m:
            return target_at(i * (k - 1) / (n - 1))
    for i in range(n - 1):
        if s[i] < m < s[i + 1]:
            sh1 = target_at(i * (k - 1) / (n - 1))
            sh2 = target_at((i + 1) * (k - 1) / (n - 1))
            return sh1 + (m - s[i]) * (sh2 - sh1) / (s[i + 1] - s[i])
    raise AssertionError("unreachable")


def ks_distance(values, sorted_target):
    """Two-sample Kolmogorov-Smirnov statistic, evaluating both step CDFs at
    every sample point of either set."""
    import bisect

    a = sorted(float(v) for v in values)
    b = sorted(float(v) for v in sorted_target)
    worst = 0.0
    for x in a + b:
        fa = bisect.bisect_right(a, x) / len(a)
        fb = bisect.bisect_right(b, x) / len(b)
        worst = max(worst, abs(fa - fb))
    return worst


def ssim_windows(x, y, vmin, vmax, size=11, sigma=1.5, k1=0.01, k2=0.03):
    """Per-window SSIM with explicit loops over every valid window position."""
    x = (np.asarray(x, dtype=float) - vmin) / (vmax - vmin)
    y = (np.asarray(y, dtype=float) - vmin) / (vmax - vmin)
    half = (size - 1) / 2
    w = np.empty((size, size))
    for i in range(size):
        for j in range(size):
            w[i, j] = np.exp(-((i - half) ** 2 + (j - half) ** 2) / (2 * sigma ** 2))
    w /= w.sum()
    c1, c2 = k1 ** 2, k2 ** 2
    scores = []
    for r in range(x.shape[0] - size + 1):
        for c in range(x.shape[1] - size + 1):
            px = x[r:r + size, c:c + size]
            py = y[r:r + size, c:c + size]
            mx = sum(w[i, j] * px[i, j] for i in range(size) for j in range(size))
            my = sum(w[i, j] * py[i, j] for i in range(size) for j in range(size))
            vx = sum(w[i, j] * (px[i, j] - mx) ** 2 for i in range(size) for j in range(size))
            vy = sum(w[i, j] * (py[i, j] - my) ** 2 for i in range(size) for j in range(size))
            cxy = sum(w[i, j] * (px[i, j] - mx) * (py[i, j] - my) for i in range(size) for j in range(size))
            scores.append((2 * mx * my + c1) * (2 * cxy + c2) / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2)))
    return float(np.mean(scores))


def naive_mae_mse(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    total_abs = 0.0
    total_sq = 0.0
    count = 0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            d = a[i, j] - b[i, j]
            total_abs += abs(d)
            total_sq += d * d
            count += 1
    return total_abs / count, total_sq / count


def first_arrival(trace, dt, fraction=0.01):
    """Time of the first sample whose magnitude exceeds ``fraction`` of the
    trace maximum."""
    peak = np.max(np.abs(trace))
    idx = int(np.argmax(np.abs(trace) > fraction * peak))
    return idx * dt


def analytic_trace_2d(times, travel_time, wavelet):
    """Homogeneous 2D line-source response up to a constant: the wavelet
    convolved with ``H(t - T) / sqrt(t**2 - T**2)``. With ``tau = T cosh(s)``
    the kernel becomes ``ds`` and the integral is smooth."""
    from scipy import integrate

    out = np.zeros(len(times))
    for i, t in enumerate(times):
        if t > travel_time:
            s_max = np.arccosh(t / travel_time)
            out[i] = integrate.quad(
                lambda s: wavelet(t - travel_time * np.cosh(s)), 0.0, s_max, limit=200
            )[0]
    return out


def compensated_arrival(trace, times, dt, distance, velocity, wavelet):
    """First-arrival pick minus the pick delay that the source wavelet and 2D
    spreading introduce in the analytic trace."""
    travel = distance / velocity
    reference = analytic_trace_2d(times, travel, wavelet)
    delay = first_arrival(reference, dt) - travel
    return first_arrival(trace, dt) - delay
