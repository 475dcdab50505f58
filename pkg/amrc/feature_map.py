"""Feature mappings Phi(x, y) = e_y (x) Psi(x) with linear or random Fourier
instance features.
"""
import itertools
import logging
import typing

import numpy as np
from scipy.spatial.distance import pdist

from amrc.errors import InputError

logger = logging.getLogger(__name__)

LINEAR = "linear"
RFF = "rff"
INSTANCE_MAPS = (LINEAR, RFF)

# Instances used by the median-distance scale heuristic
MEDIAN_HEURISTIC_SAMPLES = 50

Labels = typing.Iterable[int]


def median_heuristic_scale(instances: np.ndarray) -> float:
    """Return the RFF scale 1 / (2 s^2) where s is the median pairwise
    Euclidean distance among the first 50 instances.
    """
    sample = np.atleast_2d(np.asarray(instances, dtype=float))[
        :MEDIAN_HEURISTIC_SAMPLES
    ]
    if sample.shape[0] < 2:
        return 1.0
    median = float(np.median(pdist(sample)))
    if median <= 0.0:
        logger.warning("All heuristic instances coincide; using rff scale 1.0")
        return 1.0
    return 1.0 / (2.0 * median ** 2)


class InstanceMapConfig:
    """Instance map Psi. Build with :meth:`linear` or :meth:`rff`.

    :param str kind: "linear" or "rff".
    :param int input_dim: Raw instance dimension.
    :param int rff_dim: Number D of random vectors (rff only).
    :param float rff_scale: Covariance scale gamma of the random vectors.
    :param int seed: Seed the random vectors are drawn from.
    """

    def __init__(
        self,
        kind: str,
        input_dim: int,
        rff_dim: typing.Optional[int] = None,
        rff_scale: typing.Optional[float] = None,
        seed: int = 0,
    ) -> None:
        if kind not in INSTANCE_MAPS:
            raise InputError(f'Invalid instance map: "{kind}"')
        if input_dim < 1:
            raise InputError("input_dim must be positive")
        self.kind = kind
        self.input_dim = int(input_dim)
        self.seed = seed
        self.rff_dim = None
        self.rff_scale = None
        self.rff_vectors: typing.Optional[np.ndarray] = None
        if kind == RFF:
            if not rff_dim or rff_dim < 1:
                raise InputError("rff_dim must be a positive integer")
            if rff_scale is None or rff_scale <= 0:
                raise InputError("rff_scale must be positive")
            self.rff_dim = int(rff_dim)
            self.rff_scale = float(rff_scale)
            rng = np.random.default_rng(seed)
            vectors = rng.normal(
                0.0, np.sqrt(self.rff_scale), size=(self.rff_dim, self.input_dim)
            )
            vectors.setflags(write=False)
            self.rff_vectors = vectors
            self.d = 2 * self.rff_dim
        else:
            self.d = self.input_dim

    def __repr__(self) -> str:
        if self.kind == RFF:
            return (
                f"InstanceMapConfig(kind='rff', input_dim={self.input_dim}, "
                f"rff_dim={self.rff_dim}, rff_scale={self.rff_scale!r}, "
                f"seed={self.seed})"
            )
        return f"InstanceMapConfig(kind='linear', input_dim={self.input_dim})"

    @classmethod
    def linear(cls, input_dim: int) -> "InstanceMapConfig":
        return cls(LINEAR, input_dim)

    @classmethod
    def rff(
        cls,
        input_dim: int,
        rff_dim: int = 200,
        rff_scale: typing.Optional[float] = None,
        seed: int = 0,
        instances: typing.Optional[np.ndarray] = None,
    ) -> "InstanceMapConfig":
        """Random Fourier features. When ``rff_scale`` is None it is computed
        from ``instances`` with :func:`median_heuristic_scale`.
        """
        if rff_scale is None:
            if instances is None:
                raise InputError("rff_scale or instances is required")
            rff_scale = median_heuristic_scale(instances)
            logger.info(f"Median heuristic rff scale: {rff_scale:.6g}")
        return cls(RFF, input_dim, rff_dim=rff_dim, rff_scale=rff_scale, seed=seed)


def psi(config: InstanceMapConfig, x: typing.Any) -> np.ndarray:
    """Instance features Psi(x) of dimension ``config.d``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (config.input_dim,):
        raise InputError(
            f"Instance has shape {x.shape}, expected ({config.input_dim},)"
        )
    if config.kind == LINEAR:
        return x.copy()
    projections = config.rff_vectors @ x
    return np.concatenate([np.cos(projections), np.sin(projections)])


def label_subsets(
    n_classes: int, max_size: typing.Optional[int] = None
) -> typing.List[typing.Tuple[int, ...]]:
    """Nonempty label subsets ordered by size, then lexicographically.
    Labels are 1-based.
    """
    largest = n_classes if max_size is None else min(max_size, n_classes)
    return [
        subset
        for size in range(1, largest + 1)
        for subset in itertools.combinations(range(1, n_classes + 1), size)
    ]


class FeatureMap:
    """Phi(x, y): block ``y`` (1-based) of length ``d`` holds Psi(x), the other
    blocks are zero, so component ``d * (y - 1) + r`` is ``Psi_r(x)``.

    :param InstanceMapConfig instance_map: The instance map Psi.
    :param int n_classes: Number of labels, at least 2.
    :param int max_subset_size: Largest label subset enumerated by
        :func:`subset_rows`. None enumerates every nonempty subset.
    """

    def __init__(
        self,
        instance_map: InstanceMapConfig,
        n_classes: int,
        max_subset_size: typing.Optional[int] = None,
    ) -> None:
        if n_classes < 2:
            raise InputError("n_classes must be at least 2")
        if max_subset_size is not None and max_subset_size < 1:
            raise InputError("max_subset_size must be positive")
        self.instance_map = instance_map
        self.n_classes = int(n_classes)
        self.d = instance_map.d
        self.m = self.n_classes * self.d
        self.max_subset_size = max_subset_size
        self.subsets = label_subsets(self.n_classes, max_subset_size)
        # Row c holds 1{y in C_c} / |C_c|
        weights = np.zeros((len(self.subsets), self.n_classes))
        for row, subset in enumerate(self.subsets):
            weights[row, [y - 1 for y in subset]] = 1.0 / len(subset)
        weights.setflags(write=False)
        self.subset_weights = weights
        self.subset_h = np.array([1.0 / len(subset) for subset in self.subsets])
        self.subset_h.setflags(write=False)
        if max_subset_size is not None and max_subset_size < self.n_classes:
            logger.warning(
                f"Label subsets capped at size {max_subset_size} "
                f"({len(self.subsets)} rows per instance)"
            )

    def __repr__(self) -> str:
        return (
            f"FeatureMap({self.instance_map!r}, n_classes={self.n_classes}, m={self.m})"
        )

    @property
    def labels(self) -> range:
        return range(1, self.n_classes + 1)

    def label_of(self, index: int) -> int:
        """Label (1-based) that component ``index`` (0-based) belongs to."""
        return index // self.d + 1

    def component_labels(self) -> np.ndarray:
        return np.repeat(np.arange(1, self.n_classes + 1), self.d)

    def scores(self, x: typing.Any, mu: np.ndarray) -> np.ndarray:
        """Phi(x, y)^T mu for every label y."""
        return np.asarray(mu, dtype=float).reshape(self.n_classes, self.d) @ psi(
            self.instance_map, x
        )

    def check_label(self, y: int) -> None:
        if not 1 <= y <= self.n_classes:
            raise InputError(f"Label {y} outside 1..{self.n_classes}")


def phi(fm: FeatureMap, x: typing.Any, y: int) -> np.ndarray:
    """Phi(x, y) = e_y (x) Psi(x)."""
    fm.check_label(y)
    out = np.zeros(fm.m)
    start = fm.d * (y - 1)
    out[start : start + fm.d] = psi(fm.instance_map, x)
    return out


def subset_row(
    fm: FeatureMap, x: typing.Any, subset: Labels
) -> typing.Tuple[np.ndarray, float]:
    """Affine piece of phi for the pair (x, C): f = sum_{y in C} Phi(x, y) / |C|
    and h = 1 / |C|.
    """
    labels = sorted(set(subset))
    if not labels:
        raise InputError("Label subset must be nonempty")
    for y in labels:
        fm.check_label(y)
    features = psi(fm.instance_map, x)
    f = np.zeros(fm.m)
    for y in labels:
        start = fm.d * (y - 1)
        f[start : start + fm.d] = features / len(labels)
    return f, 1.0 / len(labels)


def subset_rows(fm: FeatureMap, x: typing.Any) -> typing.Tuple[np.ndarray, np.ndarray]:
    """Rows (F, h) of :func:`subset_row` for every enumerated subset of labels,
    in the order of ``fm.subsets``.
    """
    features = psi(fm.instance_map, x)
    weights = fm.subset_weights[:, :, np.newaxis]
    F = (weights * features[np.newaxis, np.newaxis, :]).reshape(len(fm.subsets), fm.m)
    return F, fm.subset_h.copy()
