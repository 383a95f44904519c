import numpy as np
import numpy.testing as npt
import pytest

from sensefuse.errors import ConfigError
from sensefuse.rng import Prng


def test_same_seed_same_stream():
    a = Prng(1234).next_u64(64)
    b = Prng(1234).next_u64(64)
    npt.assert_array_equal(a, b)


def test_known_first_words_are_stable():
    # frozen reference values pin the generator across platforms/releases
    words = Prng(0).next_u64(4)
    npt.assert_array_equal(
        words,
        np.array(
            [
                16294208416658607535,
                7960286522194355700,
                487617019471545679,
                17909611376780542444,
            ],
            dtype=np.uint64,
        ),
    )


def test_distinct_seeds_differ():
    assert list(Prng(1).next_u64(8)) != list(Prng(2).next_u64(8))


def test_split_reproducible_and_independent_of_consumption():
    root = Prng(99)
    child_a = root.split("noise", 3, 1)
    root.next_u64(1000)  # consuming the parent must not move child streams
    child_b = Prng(99).split("noise", 3, 1)
    npt.assert_array_equal(child_a.next_u64(16), child_b.next_u64(16))


def test_split_streams_do_not_collide():
    seeds = set()
    first_words = set()
    root = Prng(7)
    for name in ("train", "test"):
        for i in range(500):
            child = root.split("corpus", name, i)
            seeds.add(child.seed)
            first_words.add(int(child.next_u64(1)[0]))
    assert len(seeds) == 1000
    assert len(first_words) == 1000


def test_split_rejects_bad_id_type():
    with pytest.raises(ConfigError):
        Prng(0).split(3.5)


def test_random_range_and_mean():
    u = Prng(5).random(200_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.005
    assert abs(u.var() - 1.0 / 12.0) < 0.002


def test_uniform_bounds():
    u = Prng(11).uniform(-1.0, 1.0, 100_000)
    assert u.min() >= -1.0 and u.max() < 1.0
    assert abs(u.mean()) < 0.01


def test_normal_moments():
    z = Prng(13).normal(400_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01
    # symmetry of tails
    assert abs((z > 1.0).mean() - (z < -1.0).mean()) < 0.005


def test_gamma_moments_at_walk_parameters():
    # Gamma(k, theta): mean k*theta, variance k*theta^2
    draws = Prng(17).gamma(0.8, 0.2, 1_000_000)
    assert draws.min() > 0.0
    assert abs(draws.mean() - 0.16) < 0.002
    assert abs(draws.var() - 0.032) < 0.001


def test_gamma_shape_above_one_moments():
    draws = Prng(19).gamma(2.5, 1.5, 500_000)
    assert abs(draws.mean() - 3.75) < 0.02
    assert abs(draws.var() - 5.625) < 0.12


def test_gamma_shape_one_matches_exponential():
    # Gamma(1, 1) is Exp(1); Kolmogorov-Smirnov against the exact CDF
    n = 100_000
    x = np.sort(Prng(23).gamma(1.0, 1.0, n))
    cdf = 1.0 - np.exp(-x)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    ks = max(upper.max(), lower.max())
    assert ks < 0.01


def test_gamma_rejects_bad_parameters():
    with pytest.raises(ConfigError):
        Prng(0).gamma(0.0, 1.0)
    with pytest.raises(ConfigError):
        Prng(0).gamma(1.0, -2.0)


def test_scalar_draw_shapes():
    prng = Prng(3)
    assert isinstance(prng.random(), float)
    assert isinstance(prng.normal(), float)
    assert isinstance(prng.gamma(0.8, 0.2), float)
