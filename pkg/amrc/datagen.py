"""Synthetic drifting stream: two labels whose class means rotate on a circle
of radius 4, with the exact mean vector available as an oracle.
"""
import logging
import math
import typing

import numpy as np

from amrc.classifier import Rule
from amrc.errors import InputError, UnsupportedError
from amrc.feature_map import LINEAR, FeatureMap

logger = logging.getLogger(__name__)

RADIUS = 4.0
N_CLASSES = 2
INPUT_DIM = 2
DEFAULT_OMEGA = 0.1
DEFAULT_NOISE_STD = math.sqrt(2.0)
DEFAULT_TRIALS = 1000

Sample = typing.Tuple[np.ndarray, int]


class SyntheticConfig:
    """Rotating-Gaussian stream.

    :param float omega: Angular rate of the drift.
    :param float noise_std: Standard deviation of the additive Gaussian noise.
    :param int steps: Stream length T.
    :param int seed: Seed of the stream.
    """

    def __init__(
        self,
        omega: float = DEFAULT_OMEGA,
        noise_std: float = DEFAULT_NOISE_STD,
        steps: int = 10000,
        seed: int = 0,
    ) -> None:
        if omega <= 0:
            raise InputError("omega must be positive")
        if noise_std <= 0:
            raise InputError("noise_std must be positive")
        if steps < 1:
            raise InputError("steps must be positive")
        self.omega = float(omega)
        self.noise_std = float(noise_std)
        self.steps = int(steps)
        self.seed = seed

    def __repr__(self) -> str:
        return (
            f"SyntheticConfig(omega={self.omega}, noise_std={self.noise_std:.6g}, "
            f"steps={self.steps}, seed={self.seed})"
        )

    def angle(self, t: int, y: int) -> float:
        return math.pi * ((math.cos(self.omega * t) - 3.0) / 2.0 + y)

    def class_mean(self, t: int, y: int) -> np.ndarray:
        """Mean of x given label ``y`` at time ``t``."""
        theta = self.angle(t, y)
        return RADIUS * np.array([math.cos(theta), math.sin(theta)])


def synth_step(
    cfg: SyntheticConfig, t: int, rng: np.random.Generator
) -> Sample:
    """Draw (x_t, y_t) with y uniform over {1, 2}."""
    if t < 1:
        raise InputError("t must be at least 1")
    y = int(rng.integers(1, N_CLASSES + 1))
    x = cfg.class_mean(t, y) + rng.normal(0.0, cfg.noise_std, size=INPUT_DIM)
    return x, y


def synthetic_stream(cfg: SyntheticConfig) -> typing.Iterator[Sample]:
    """Yield the T pairs of the stream seeded by ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    for t in range(1, cfg.steps + 1):
        yield synth_step(cfg, t, rng)


def draw_instances(
    cfg: SyntheticConfig, t: int, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Fresh instances from the time-``t`` distribution, labels discarded."""
    return np.array([synth_step(cfg, t, rng)[0] for _ in range(size)])


def true_tau(cfg: SyntheticConfig, t: int, fm: FeatureMap) -> np.ndarray:
    """Exact mean vector E[Phi(x, y)] at time ``t`` for a linear map."""
    if fm.instance_map.kind != LINEAR:
        raise UnsupportedError("The exact mean vector needs the linear instance map")
    if fm.n_classes != N_CLASSES or fm.d != INPUT_DIM:
        raise UnsupportedError(
            f"Feature map has {fm.n_classes} labels and d={fm.d}, "
            f"expected {N_CLASSES} and {INPUT_DIM}"
        )
    prior = 1.0 / N_CLASSES
    return np.concatenate(
        [prior * cfg.class_mean(t, y) for y in range(1, N_CLASSES + 1)]
    )


def true_error(
    cfg: SyntheticConfig,
    t: int,
    rule: Rule,
    trials: int = DEFAULT_TRIALS,
    rng: typing.Optional[np.random.Generator] = None,
) -> float:
    """Monte-Carlo error probability of ``rule`` at time ``t``: the miss
    probability 1 - h(y|x) averaged over ``trials`` fresh pairs.
    """
    if trials < 1:
        raise InputError("trials must be positive")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    misses = 0.0
    for _ in range(trials):
        x, y = synth_step(cfg, t, rng)
        misses += 1.0 - float(rule(x)[y - 1])
    return misses / trials
