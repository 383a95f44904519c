import numpy as np
import numpy.testing as npt
import pytest

from sensefuse.errors import ConfigError, DimensionError, EmptySequenceError
from sensefuse.noise import (
    NoiseProfileSpec,
    WalkConfig,
    apply_noise,
    profile_schedule,
    reflect,
    walk_schedule,
)
from sensefuse.rng import Prng


# -- reflection ---------------------------------------------------------------


def test_reflect_hand_values():
    assert reflect(0.0, 3.0) == 0.0
    assert reflect(4.5, 3.0) == pytest.approx(1.5, abs=1e-12)
    assert reflect(-1.0, 3.0) == pytest.approx(1.0, abs=1e-12)
    assert reflect(3.0, 3.0) == pytest.approx(3.0, abs=1e-12)


def test_reflect_range_periodicity_evenness():
    a = Prng(1).uniform(-50.0, 50.0, 100_000)
    val = reflect(a, 3.0)
    assert val.min() >= 0.0 and val.max() <= 3.0
    npt.assert_allclose(val, reflect(a + 6.0, 3.0), atol=1e-12)
    npt.assert_allclose(val, reflect(-a, 3.0), atol=1e-12)


def test_reflect_is_lipschitz():
    prng = Prng(2)
    a = prng.uniform(-30.0, 30.0, 50_000)
    eps = prng.uniform(-0.5, 0.5, 50_000)
    assert np.all(
        np.abs(reflect(a + eps, 3.0) - reflect(a, 3.0)) <= np.abs(eps) + 1e-12
    )


def test_reflect_rejects_nonpositive_bound():
    with pytest.raises(ConfigError):
        reflect(1.0, 0.0)
    with pytest.raises(ConfigError):
        reflect(1.0, -3.0)


# -- random-walk schedules ------------------------------------------------------


def test_walk_schedule_bounded():
    cfg = WalkConfig()
    sched = walk_schedule(Prng(3), cfg, 10_000)
    assert len(sched) == 10_000
    assert sched.sigma.min() >= 0.0
    assert sched.sigma.max() <= 3.0


def test_walk_schedule_deterministic():
    cfg = WalkConfig()
    a = walk_schedule(Prng(42).split("s"), cfg, 500)
    b = walk_schedule(Prng(42).split("s"), cfg, 500)
    npt.assert_array_equal(a.sigma, b.sigma)


def test_walk_start_level_distribution():
    # sigma(0) is the uniform start draw itself, independent of length
    cfg = WalkConfig()
    starts = np.array(
        [walk_schedule(Prng(0).split(i), cfg, 2).sigma[0] for i in range(4000)]
    )
    assert starts.min() >= 0.0 and starts.max() < 1.5
    assert abs(starts.mean() - 0.75) < 0.03
    short = [walk_schedule(Prng(0).split(i), cfg, 2).sigma[0] for i in range(50)]
    long = [walk_schedule(Prng(0).split(i), cfg, 400).sigma[0] for i in range(50)]
    npt.assert_array_equal(short, long)


def test_walk_degenerate_scale_is_constant():
    cfg = WalkConfig(gamma_scale=1e-9)
    sched = walk_schedule(Prng(7), cfg, 300)
    assert np.ptp(sched.sigma) < 1e-5


def test_walk_sign_symmetry():
    # fraction of upward steps ~ 1/2
    cfg = WalkConfig(gamma_scale=1e-9)  # freeze magnitudes, signs still drawn
    ups = 0
    total = 0
    for i in range(500):
        sched = walk_schedule(Prng(11).split(i), WalkConfig(), 201)
        diffs = np.diff(sched.sigma)
        moved = diffs != 0.0
        ups += int((diffs[moved] > 0).sum())
        total += int(moved.sum())
    assert total > 90_000
    assert abs(ups / total - 0.5) < 0.01


def test_walk_level_coverage():
    # pooled marginal over many schedules covers [0, 3] roughly uniformly
    cfg = WalkConfig()
    root = Prng(13)
    pooled = np.concatenate(
        [walk_schedule(root.split(i), cfg, 200).sigma for i in range(10_000)]
    )
    hist, _ = np.histogram(pooled, bins=10, range=(0.0, 3.0))
    fractions = hist / pooled.size
    assert fractions.min() >= 0.05


def test_walk_rejects_empty():
    with pytest.raises(EmptySequenceError):
        walk_schedule(Prng(0), WalkConfig(), 0)


def test_walk_config_validation():
    with pytest.raises(ConfigError):
        WalkConfig(sigma_max=0.0)
    with pytest.raises(ConfigError):
        WalkConfig(gamma_shape=-1.0)
    assert WalkConfig().sigma0_upper == 1.5


# -- deterministic profiles -----------------------------------------------------


def test_linear_sweep():
    spec = NoiseProfileSpec("linear_sweep", {"start": 0.0, "end": 3.0})
    sched = profile_schedule(spec, 300)
    assert sched.sigma[0] == 0.0
    assert sched.sigma[-1] == pytest.approx(3.0)
    assert np.all(np.diff(sched.sigma) > 0)


def test_burst():
    spec = NoiseProfileSpec("burst", {"onset": 100, "duration": 50, "level": 2.0})
    sched = profile_schedule(spec, 300)
    inside = np.zeros(300, bool)
    inside[100:150] = True
    npt.assert_array_equal(sched.sigma[inside], 2.0)
    npt.assert_array_equal(sched.sigma[~inside], 0.0)


def test_sinusoid_spans_range():
    spec = NoiseProfileSpec(
        "sinusoid", {"amplitude": 1.5, "offset": 1.5, "period": 100.0}
    )
    sched = profile_schedule(spec, 400)
    assert sched.sigma.min() == pytest.approx(0.0, abs=1e-9)
    assert sched.sigma.max() == pytest.approx(3.0, abs=1e-9)
    # period of 100 frames: value repeats every 100 steps
    npt.assert_allclose(sched.sigma[:300], sched.sigma[100:], atol=1e-9)


def test_constant_and_clamping():
    sched = profile_schedule(NoiseProfileSpec("constant", {"level": 1.0}), 50)
    npt.assert_array_equal(sched.sigma, 1.0)
    over = profile_schedule(
        NoiseProfileSpec("sinusoid", {"amplitude": 5.0, "offset": 1.5}), 200
    )
    assert over.sigma.max() <= 3.0
    assert over.sigma.min() >= 0.0


def test_profile_random_walk_kind_is_seed_deterministic():
    spec = NoiseProfileSpec("random_walk", {"seed": 77})
    a = profile_schedule(spec, 128)
    b = profile_schedule(spec, 128)
    npt.assert_array_equal(a.sigma, b.sigma)
    assert a.sigma.max() <= 3.0


def test_unknown_profile_kind_rejected():
    with pytest.raises(ConfigError):
        NoiseProfileSpec("sawtooth", {})


# -- noise mixing ---------------------------------------------------------------


def test_apply_noise_zero_schedule_is_identity():
    x = Prng(1).normal(200 * 8).reshape(200, 8).astype(np.float32)
    sched = profile_schedule(NoiseProfileSpec("constant", {"level": 0.0}), 200)
    out = apply_noise(Prng(2), x, sched)
    npt.assert_array_equal(out, x)
    assert out is not x


def test_apply_noise_does_not_mutate_input():
    x = np.zeros((50, 4), np.float32)
    sched = profile_schedule(NoiseProfileSpec("constant", {"level": 1.0}), 50)
    apply_noise(Prng(3), x, sched)
    npt.assert_array_equal(x, 0.0)


def test_apply_noise_per_frame_std():
    T, D = 10_000, 64
    x = np.zeros((T, D), np.float64)
    sched = profile_schedule(NoiseProfileSpec("constant", {"level": 1.0}), T)
    out = apply_noise(Prng(5), x, sched)
    per_frame_std = out.std(axis=1)
    assert abs(per_frame_std.mean() - 1.0) < 0.02


def test_apply_noise_std_ratio():
    T, D = 2000, 64
    x = Prng(7).normal(T * D).reshape(T, D)
    big = profile_schedule(NoiseProfileSpec("constant", {"level": 3.0}), T)
    small = profile_schedule(
        NoiseProfileSpec("constant", {"level": 0.1}, sigma_max=3.0), T
    )
    dev_big = (apply_noise(Prng(8), x, big) - x).std(axis=1).mean()
    dev_small = (apply_noise(Prng(9), x, small) - x).std(axis=1).mean()
    assert abs(dev_big / dev_small - 30.0) < 3.0


def test_apply_noise_length_mismatch():
    x = np.zeros((10, 3), np.float32)
    sched = profile_schedule(NoiseProfileSpec("constant", {"level": 1.0}), 11)
    with pytest.raises(DimensionError):
        apply_noise(Prng(0), x, sched)


def test_schedule_csv_roundtrip(tmp_path):
    sched = walk_schedule(Prng(21), WalkConfig(), 40)
    path = tmp_path / "sched.csv"
    sched.to_csv(path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "frame,sigma"
    values = np.array([float(line.split(",")[1]) for line in rows[1:]])
    npt.assert_array_equal(values, sched.sigma)
