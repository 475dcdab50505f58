import math

import numpy as np
import pytest

from amrc.classifier import deterministic_rule
from amrc.datagen import (
    SyntheticConfig,
    draw_instances,
    synth_step,
    synthetic_stream,
    true_error,
    true_tau,
)
from amrc.errors import InputError, UnsupportedError
from amrc.feature_map import FeatureMap, InstanceMapConfig


@pytest.fixture
def cfg():
    return SyntheticConfig(omega=0.1, steps=500, seed=3)


@pytest.fixture
def linear_fm():
    return FeatureMap(InstanceMapConfig.linear(2), 2)


class FixedRandom:
    """Generator stand-in that returns a fixed label and no noise."""

    def __init__(self, label):
        self.label = label

    def integers(self, low, high):
        return self.label

    def normal(self, loc, scale, size):
        return np.zeros(size)


# cos(omega t) = 1 at t = 2 pi / omega
FULL_TURN = round(2 * math.pi / 0.1)


@pytest.mark.parametrize(("y", "expected"), [(1, [4.0, 0.0]), (2, [-4.0, 0.0])])
def test_synth_step_noiseless(y, expected):
    cfg = SyntheticConfig(omega=2 * math.pi)
    x, label = synth_step(cfg, 1, FixedRandom(y))
    assert label == y
    assert x.tolist() == pytest.approx(expected, abs=1e-12)


def test_class_means_on_circle(cfg):
    for t in range(1, 200, 7):
        for y in (1, 2):
            assert np.linalg.norm(cfg.class_mean(t, y)) == pytest.approx(4.0)


def test_synth_step_rejects_nonpositive_time(cfg):
    with pytest.raises(InputError):
        synth_step(cfg, 0, np.random.default_rng(0))


def test_stream_is_seeded(cfg):
    first = list(synthetic_stream(cfg))
    second = list(synthetic_stream(cfg))
    assert len(first) == 500
    for (x1, y1), (x2, y2) in zip(first, second):
        assert y1 == y2
        assert np.array_equal(x1, x2)
    other = list(synthetic_stream(SyntheticConfig(steps=500, seed=4)))
    assert any(y1 != y2 for (_, y1), (_, y2) in zip(first, other))


def test_label_frequencies():
    labels = [y for _, y in synthetic_stream(SyntheticConfig(steps=10000, seed=0))]
    assert np.mean(np.array(labels) == 1) == pytest.approx(0.5, abs=0.02)


def test_sample_means_match_class_means(cfg):
    rng = np.random.default_rng(1)
    t = 37
    draws = {1: [], 2: []}
    for _ in range(20000):
        x, y = synth_step(cfg, t, rng)
        draws[y].append(x)
    for y, xs in draws.items():
        tolerance = 3 * cfg.noise_std / math.sqrt(len(xs))
        assert np.allclose(np.mean(xs, axis=0), cfg.class_mean(t, y), atol=tolerance)


def test_draw_instances_shape(cfg):
    assert draw_instances(cfg, 5, 50, np.random.default_rng(0)).shape == (50, 2)


def test_true_tau_at_full_turn(linear_fm):
    cfg = SyntheticConfig(omega=0.1)
    tau = true_tau(cfg, FULL_TURN, linear_fm)
    assert tau.tolist() == pytest.approx([2.0, 0.0, -2.0, 0.0], abs=1e-3)


def test_true_tau_blocks(cfg, linear_fm):
    for t in (1, 10, 123):
        blocks = true_tau(cfg, t, linear_fm).reshape(2, 2)
        assert np.linalg.norm(blocks, axis=1) == pytest.approx([2.0, 2.0])
        # The two class means are opposite points of the circle
        assert blocks[0] == pytest.approx(-blocks[1])


def test_true_tau_needs_linear_map(cfg):
    rff = FeatureMap(InstanceMapConfig.rff(2, rff_dim=4, rff_scale=1.0), 2)
    with pytest.raises(UnsupportedError):
        true_tau(cfg, 1, rff)


def test_true_error_constant_rule(cfg):
    def always_first(x):
        return np.array([1.0, 0.0])

    rng = np.random.default_rng(2)
    error = true_error(cfg, 20, always_first, trials=10000, rng=rng)
    assert error == pytest.approx(0.5, abs=0.02)


def test_true_error_bayes_rule(cfg, linear_fm):
    t = 20
    # Linear rule scoring each label by its class mean, i.e. the Bayes rule
    mu = np.concatenate([cfg.class_mean(t, 1), cfg.class_mean(t, 2)])
    rule = deterministic_rule(linear_fm, mu)
    error = true_error(cfg, t, rule, trials=10000, rng=np.random.default_rng(3))
    assert 0.0 < error < 0.5


def test_true_error_estimates_agree(cfg):
    def soft(x):
        return np.array([0.3, 0.7])

    first = true_error(cfg, 9, soft, trials=10000, rng=np.random.default_rng(4))
    second = true_error(cfg, 9, soft, trials=10000, rng=np.random.default_rng(5))
    assert abs(first - second) < 0.02


def test_synthetic_config_validation():
    with pytest.raises(InputError):
        SyntheticConfig(omega=0.0)
    with pytest.raises(InputError):
        SyntheticConfig(noise_std=-1.0)
