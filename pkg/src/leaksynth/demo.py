"""Small synthetic inputs for trying the pipeline end to end.

Writes a layered baseline, a few condition maps with a plume in the
intermediate/deep section, target CDFs taken from maps whose plume sits in
the shallow and the intermediate layer, and a ready-to-run config.
"""

import os

import numpy as np

from .align import layer_cdf
from .config import PipelineConfig
from .velocity_model import LayerProfile, VelocityMap, save_map


def layered_baseline(depth=64, width=64, dx=10.0, profile=None, seed=0):
    profile = profile or LayerProfile(depth // 4, (5 * depth) // 8)
    rng = np.random.default_rng(seed)
    rows = np.arange(depth)[:, None]
    v = np.where(rows < profile.shallow_end, 1600.0 + 8.0 * rows,
                 np.where(rows < profile.intermediate_end, 2300.0 + 10.0 * rows, 3000.0 + 8.0 * rows))
    lateral = 30.0 * np.sin(2 * np.pi * np.arange(width) / width + rng.uniform(0, 2 * np.pi))
    return VelocityMap(np.broadcast_to(v, (depth, width)) + lateral[None, :], dx)


def plume(shape, centre, radii, amplitude):
    """Smooth elliptical velocity drop (positive values, m/s)."""
    r = np.arange(shape[0])[:, None]
    c = np.arange(shape[1])[None, :]
    d2 = ((r - centre[0]) / radii[0]) ** 2 + ((c - centre[1]) / radii[1]) ** 2
    return amplitude * np.exp(-d2)


def leaked(baseline, centre, radii, amplitude):
    drop = plume(baseline.shape, centre, radii, amplitude)
    return VelocityMap(baseline.values - drop, baseline.dx)


def make_demo(out_dir, depth=64, width=64, n_conditions=3, seed=0):
    """Create demo inputs in ``out_dir`` and return the config path."""
    profile = LayerProfile(depth // 4, (5 * depth) // 8)
    rng = np.random.default_rng(seed)
    os.makedirs(os.path.join(out_dir, "conditions"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "targets"), exist_ok=True)

    base = layered_baseline(depth, width, profile=profile, seed=seed)
    save_map(base, os.path.join(out_dir, "baseline.gfvm"))
    for k in range(n_conditions):
        centre = (rng.uniform(profile.intermediate_end - 6, profile.intermediate_end + 6),
                  rng.uniform(0.35 * width, 0.65 * width))
        radii = (rng.uniform(4, 8), rng.uniform(3, 6))
        vmap = leaked(base, centre, radii, rng.uniform(300, 500))
        save_map(vmap, os.path.join(out_dir, "conditions", f"cond_{k:03d}.gfvm"))

    shallow_example = leaked(base, (profile.shallow_end - 5, width / 2), (5, 7), 250.0)
    inter_example = leaked(base, ((profile.shallow_end + profile.intermediate_end) / 2, width / 2), (6, 6), 400.0)
    cfg = PipelineConfig(
        baseline="baseline.gfvm",
        condition_dir="conditions",
        output_dir="out",
        target_shallow_cdf="targets/shallow.csv",
        target_intermediate_cdf="targets/intermediate.csv",
        shallow_end=profile.shallow_end,
        intermediate_end=profile.intermediate_end,
        sponge_width=10,
        sponge_strength=0.03,
        receiver_step=max(1, width // 32),
        n_samples=4,
    )
    layer_cdf(base, shallow_example, profile, "shallow", cfg.th_s, cfg.align_mode).to_csv(
        os.path.join(out_dir, cfg.target_shallow_cdf))
    layer_cdf(base, inter_example, profile, "intermediate", cfg.th_m, cfg.align_mode).to_csv(
        os.path.join(out_dir, cfg.target_intermediate_cdf))
    path = os.path.join(out_dir, "config.ini")
    with open(path, "w") as fh:
        fh.write(cfg.to_ini())
    return path
