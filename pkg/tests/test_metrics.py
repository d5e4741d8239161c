import numpy as np
import pytest

from leaksynth.errors import GeometryMismatch
from leaksynth.metrics import LossWeights, compare, finetune_loss, mae, mse, ssim
from leaksynth.velocity_model import VelocityMap

from oracles import naive_mae_mse, ssim_windows


def test_ssim_identity(rng):
    x = rng.uniform(1500, 4500, (32, 40))
    assert ssim(x, x, 1500, 4500) == 1.0


def test_ssim_accepts_maps(rng):
    a = VelocityMap(rng.uniform(1500, 4500, (16, 16)), 10.0)
    assert ssim(a, a, 1000, 5000) == 1.0


def test_ssim_matches_window_oracle(rng):
    for _ in range(3):
        a = rng.uniform(1500, 4500, (16, 16))
        b = a + rng.normal(0, 300, (16, 16))
        assert abs(ssim(a, b, 1500, 4500) - ssim_windows(a, b, 1500, 4500)) <= 1e-10


def test_ssim_independent_noise_is_low():
    scores = []
    for seed in range(100):
        r = np.random.default_rng(seed)
        scores.append(ssim(r.uniform(0, 1, (64, 64)), r.uniform(0, 1, (64, 64)), 0.0, 1.0))
    assert max(scores) < 0.1


def test_ssim_symmetric_and_bounded(rng):
    a = rng.uniform(0, 1, (20, 20))
    b = rng.uniform(0, 1, (20, 20))
    assert ssim(a, b, 0, 1) == ssim(b, a, 0, 1)
    assert ssim(a, -b, -1, 1) <= 1.0


def test_ssim_errors(rng):
    a = rng.uniform(0, 1, (16, 16))
    with pytest.raises(ValueError):
        ssim(a, a, 1.0, 1.0)
    with pytest.raises(GeometryMismatch):
        ssim(a, a[:, :15], 0, 1)
    with pytest.raises(GeometryMismatch):
        ssim(a[:8], a[:8], 0, 1)


def test_mae_mse_identities(rng):
    a = rng.uniform(1500, 4500, (8, 8))
    assert mae(a, a) == 0 and mse(a, a) == 0
    assert mae(a, a + 10) == pytest.approx(10, abs=1e-9)
    assert mse(a, a + 10) == pytest.approx(100, abs=1e-7)


def test_mae_mse_match_naive_loops(rng):
    for _ in range(10):
        a = rng.normal(0, 100, (8, 8))
        b = rng.normal(0, 100, (8, 8))
        ref_mae, ref_mse = naive_mae_mse(a, b)
        assert abs(mae(a, b) - ref_mae) <= 1e-12 * ref_mae
        assert abs(mse(a, b) - ref_mse) <= 1e-12 * ref_mse
        assert mae(a, b) == mae(b, a) and mse(a, b) == mse(b, a)


def test_compare_report(rng):
    a = rng.uniform(1500, 4500, (16, 16))
    rep = compare(a, a + 1, 1500, 4501)
    assert rep.mae == pytest.approx(1) and rep.mse == pytest.approx(1) and rep.ssim < 1


def groups(rng):
    pu, gu = rng.normal(0, 1, (3, 6, 6)), rng.normal(0, 1, (3, 6, 6))
    pp, gp = rng.normal(0, 2, (5, 6, 6)), rng.normal(0, 2, (5, 6, 6))
    return pu, gu, pp, gp


def test_loss_boundary_weights(rng):
    pu, gu, pp, gp = groups(rng)
    a = mae(pu.ravel()[None], gu.ravel()[None]) + mse(pu.ravel()[None], gu.ravel()[None])
    b = mae(pp.ravel()[None], gp.ravel()[None]) + mse(pp.ravel()[None], gp.ravel()[None])
    assert finetune_loss(pu, gu, pp, gp, LossWeights(1.0)) == a
    assert finetune_loss(pu, gu, pp, gp, LossWeights(0.0)) == b
    assert finetune_loss(pu, gu, pu, gu, LossWeights(0.5)) == a


def test_loss_is_affine_in_lambda(rng):
    pu, gu, pp, gp = groups(rng)
    lams = [0.0, 0.3, 1.0]
    vals = [finetune_loss(pu, gu, pp, gp, lam) for lam in lams]
    slope = (vals[2] - vals[0]) / (lams[2] - lams[0])
    assert abs(vals[0] + slope * lams[1] - vals[1]) <= 1e-12 * max(1.0, abs(vals[1]))


def test_loss_empty_groups(rng):
    pu, gu, _, _ = groups(rng)
    empty = np.zeros((0, 6, 6))
    assert finetune_loss(pu, gu, empty, empty, 1.0) == finetune_loss(pu, gu, pu, gu, 1.0)
    with pytest.raises(ValueError):
        finetune_loss(pu, gu, empty, empty, 0.5)
    with pytest.raises(ValueError):
        LossWeights(1.5)


def test_loss_accepts_map_lists(rng):
    maps = [VelocityMap(rng.uniform(1500, 2000, (4, 4)), 1.0) for _ in range(4)]
    assert finetune_loss(maps[:2], maps[2:], maps[:2], maps[2:], 0.5) == pytest.approx(
        finetune_loss(
            np.stack([m.values for m in maps[:2]]), np.stack([m.values for m in maps[2:]]),
            np.stack([m.values for m in maps[:2]]), np.stack([m.values for m in maps[2:]]), 0.5,
        )
    )
