"""Prediction with minimax risk classifiers: the randomized rule
h(y|x) = (Phi(x, y)' mu - phi(mu))_+ / c_x and its deterministic argmax.
"""
import typing

import numpy as np

from amrc.feature_map import FeatureMap, subset_rows
from amrc.optimizer import SubgradientCache, varphi_local

# Maps an instance to a probability vector over labels 1..|Y|
Rule = typing.Callable[[np.ndarray], np.ndarray]


class PredictionDistribution:
    def __init__(self, probs: np.ndarray, c_x: float, varphi_value: float) -> None:
        self.probs = probs
        self.c_x = c_x
        self.varphi_value = varphi_value

    def __repr__(self) -> str:
        return (
            f"PredictionDistribution(probs={np.round(self.probs, 6).tolist()}, "
            f"c_x={self.c_x:.6g})"
        )

    @property
    def mode(self) -> int:
        return int(np.argmax(self.probs)) + 1


def predict_probs(
    fm: FeatureMap,
    mu: np.ndarray,
    cache_F: np.ndarray,
    cache_h: np.ndarray,
    x: typing.Any,
) -> PredictionDistribution:
    """Label probabilities for ``x``. phi is evaluated over the cached rows
    together with the subset rows of ``x`` itself.
    """
    own_F, own_h = subset_rows(fm, x)
    F = np.vstack([np.reshape(cache_F, (-1, fm.m)), own_F])
    h = np.concatenate([np.reshape(cache_h, -1), own_h])
    varphi_value, _ = varphi_local(F, h, mu)
    numerators = np.maximum(fm.scores(x, mu) - varphi_value, 0.0)
    c_x = float(numerators.sum())
    if c_x == 0.0:
        probs = np.full(fm.n_classes, 1.0 / fm.n_classes)
    else:
        probs = numerators / c_x
    return PredictionDistribution(probs, c_x, varphi_value)


def predict_deterministic(fm: FeatureMap, mu: np.ndarray, x: typing.Any) -> int:
    """argmax_y Phi(x, y)' mu, ties broken by the lowest label."""
    return int(np.argmax(fm.scores(x, mu))) + 1


def sample_label(dist: PredictionDistribution, rng: np.random.Generator) -> int:
    return int(rng.choice(dist.probs.shape[0], p=dist.probs)) + 1


def randomized_rule(
    fm: FeatureMap, mu: np.ndarray, cache: SubgradientCache
) -> Rule:
    def rule(x: np.ndarray) -> np.ndarray:
        return predict_probs(fm, mu, cache.F, cache.h, x).probs

    return rule


def deterministic_rule(fm: FeatureMap, mu: np.ndarray) -> Rule:
    def rule(x: np.ndarray) -> np.ndarray:
        probs = np.zeros(fm.n_classes)
        probs[predict_deterministic(fm, mu, x) - 1] = 1.0
        return probs

    return rule
