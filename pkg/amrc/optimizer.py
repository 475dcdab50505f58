"""Accelerated subgradient learning of classifier parameters.

Solves min_mu 1 - tau' mu + phi(mu) + lambda' |mu| where phi is approximated
locally by the pointwise maximum of the affine pieces f_i' mu - h_i kept in a
:class:`SubgradientCache`, warm-started from the previous parameters.
"""
import logging
import typing

import numpy as np

from amrc.errors import InputError, StateError
from amrc.feature_map import FeatureMap, subset_rows

logger = logging.getLogger(__name__)

try:
    import numba
except ImportError:
    NUMBA_AVAILABLE = False
else:
    NUMBA_AVAILABLE = True

DEFAULT_CACHE_SIZE = 100
DEFAULT_ITERATIONS = 2000
DEFAULT_ORACLE_ITERATIONS = 5000


def _speed_up(func: typing.Callable) -> typing.Callable:
    """JIT-compile ``func`` with numba when it is installed."""
    if NUMBA_AVAILABLE:
        return numba.njit(func)
    return func


@_speed_up
def _row_max(F, h, mu):
    scores = np.dot(F, mu) - h
    row = np.argmax(scores)
    return scores[row], row


@_speed_up
def _asm_iteration(mu, mu_bar, tau, lam, F, h, l):
    value, row = _row_max(F, h, mu)
    step = 1.0 / (l + 1.0) ** 1.5
    theta = 2.0 / (l + 1.0)
    theta_next = 2.0 / (l + 2.0)
    mu_bar_next = mu + step * (tau - F[row] - lam * np.sign(mu))
    mu_next = mu_bar_next + theta_next * (1.0 / theta - 1.0) * (mu_bar_next - mu_bar)
    return mu_bar_next, mu_next, row, value


@_speed_up
def _asm_solve(mu0, tau, lam, F, h, iterations):
    mu = mu0.copy()
    mu_bar = mu0.copy()
    used = np.empty(iterations, dtype=np.int64)
    best = np.inf
    for l in range(1, iterations + 1):
        mu_bar, mu_next, row, value = _asm_iteration(mu, mu_bar, tau, lam, F, h, l)
        current = 1.0 - np.dot(tau, mu) + value + np.dot(lam, np.abs(mu))
        if current < best:
            best = current
        used[l - 1] = row
        mu = mu_next
    return mu, used, best


def _as_rows(F: typing.Any, h: typing.Any) -> typing.Tuple[np.ndarray, np.ndarray]:
    F = np.ascontiguousarray(np.atleast_2d(np.asarray(F, dtype=float)))
    h = np.ascontiguousarray(np.asarray(h, dtype=float).reshape(-1))
    if F.shape[0] != h.shape[0]:
        raise InputError(f"F has {F.shape[0]} rows but h has {h.shape[0]} entries")
    if F.shape[0] == 0 or F.size == 0:
        raise StateError("No affine pieces available to evaluate phi")
    return F, h


def _as_vector(value: typing.Any) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(value, dtype=float).reshape(-1))


class SubgradientCache:
    """Affine pieces (F, h) of the local approximation of phi.

    :param F: Matrix with one piece f_i' per row.
    :param h: Offsets h_i.
    :param int capacity: Number N of rows kept between steps.
    """

    def __init__(self, F: np.ndarray, h: np.ndarray, capacity: int) -> None:
        if capacity < 1:
            raise InputError("cache capacity must be positive")
        if F.shape[0] != h.shape[0]:
            raise InputError("F and h must have the same number of rows")
        self.F = F
        self.h = h
        self.capacity = int(capacity)

    def __repr__(self) -> str:
        return f"SubgradientCache(rows={len(self)}, capacity={self.capacity})"

    def __len__(self) -> int:
        return self.F.shape[0]

    @classmethod
    def empty(cls, m: int, capacity: int = DEFAULT_CACHE_SIZE) -> "SubgradientCache":
        return cls(np.zeros((0, m)), np.zeros(0), capacity)

    def extended(
        self, F: np.ndarray, h: np.ndarray
    ) -> typing.Tuple[np.ndarray, np.ndarray]:
        """Working rows: the cached rows followed by ``F``, ``h``."""
        return (
            np.ascontiguousarray(np.vstack([self.F, F])),
            np.ascontiguousarray(np.concatenate([self.h, h])),
        )

    def recent(
        self, F: np.ndarray, h: np.ndarray, used: typing.Sequence[int]
    ) -> "SubgradientCache":
        """Cache of the N most recently used rows of (F, h) in iteration order.
        Rows with identical content keep only their latest use.
        """
        seen_rows: typing.Set[int] = set()
        seen_keys: typing.Set[bytes] = set()
        keep: typing.List[int] = []
        for row in reversed(used):
            if len(keep) == self.capacity:
                break
            if row in seen_rows:
                continue
            seen_rows.add(row)
            key = F[row].tobytes() + h[row : row + 1].tobytes()
            if key in seen_keys:
                continue
            seen_keys.add(key)
            keep.append(int(row))
        keep.reverse()
        return SubgradientCache(F[keep], h[keep], self.capacity)


class ClassifierState:
    """Parameters ``mu``, minimax risk and cache after a learning step."""

    def __init__(
        self,
        mu: np.ndarray,
        minimax_risk: float,
        cache: SubgradientCache,
        best_objective: typing.Optional[float] = None,
        working_rows: int = 0,
    ) -> None:
        self.mu = mu
        self.minimax_risk = minimax_risk
        self.cache = cache
        self.best_objective = (
            minimax_risk if best_objective is None else best_objective
        )
        self.working_rows = working_rows

    def __repr__(self) -> str:
        return (
            f"ClassifierState(minimax_risk={self.minimax_risk:.6g}, "
            f"cache={self.cache!r})"
        )

    @classmethod
    def initial(
        cls, fm: FeatureMap, capacity: int = DEFAULT_CACHE_SIZE
    ) -> "ClassifierState":
        """mu = 0, whose worst-case error is 1 - 1/|Y|."""
        return cls(
            np.zeros(fm.m),
            1.0 - 1.0 / fm.n_classes,
            SubgradientCache.empty(fm.m, capacity),
        )


def varphi_local(
    F: typing.Any, h: typing.Any, mu: typing.Any
) -> typing.Tuple[float, int]:
    """max_i f_i' mu - h_i and the first row attaining it."""
    F, h = _as_rows(F, h)
    value, row = _row_max(F, h, _as_vector(mu))
    return float(value), int(row)


def objective(
    mu: typing.Any, tau: typing.Any, lam: typing.Any, F: typing.Any, h: typing.Any
) -> float:
    """1 - tau' mu + max{F mu - h} + lambda' |mu|."""
    mu = _as_vector(mu)
    value, _ = varphi_local(F, h, mu)
    return float(1.0 - np.dot(tau, mu) + value + np.dot(lam, np.abs(mu)))


def asm_step(
    mu: typing.Any,
    mu_bar: typing.Any,
    tau: typing.Any,
    lam: typing.Any,
    F: typing.Any,
    h: typing.Any,
    l: int,
) -> typing.Tuple[np.ndarray, np.ndarray, int]:
    """Iteration ``l`` of the accelerated subgradient method.

    Returns (mu_bar^(l+1), mu^(l+1), row used as subgradient of phi) with step
    sizes a_l = (l + 1)^(-3/2) and theta_l = 2 / (l + 1). ``mu_bar`` is the
    previous base iterate mu_bar^(l).
    """
    if l < 1:
        raise InputError("iteration index must be at least 1")
    F, h = _as_rows(F, h)
    mu_bar_next, mu_next, row, _ = _asm_iteration(
        _as_vector(mu), _as_vector(mu_bar), _as_vector(tau), _as_vector(lam), F, h, l
    )
    return mu_bar_next, mu_next, int(row)


def optimize(
    fm: FeatureMap,
    mu_prev: typing.Any,
    tau: typing.Any,
    lam: typing.Any,
    x_prev: typing.Any,
    cache: SubgradientCache,
    iterations: int = DEFAULT_ITERATIONS,
) -> ClassifierState:
    """Learn mu_t and R(U_t) from the new uncertainty set.

    The subset rows of ``x_prev`` are appended to the cached rows, the method
    runs ``iterations`` steps from ``mu_prev`` and the returned cache keeps the
    N most recently used rows.

    With few working rows the local problem can be unbounded below. A final
    objective below 0 marks that case: ``mu_prev`` is kept and the reported
    risk, an error probability, is clipped at 0.
    """
    if iterations < 1:
        raise InputError("iterations must be at least 1")
    tau = _as_vector(tau)
    lam = _as_vector(lam)
    mu_prev = _as_vector(mu_prev)
    new_F, new_h = subset_rows(fm, x_prev)
    F, h = cache.extended(new_F, new_h)
    mu, used, best = _asm_solve(mu_prev, tau, lam, F, h, iterations)
    value = objective(mu, tau, lam, F, h)
    best = min(float(best), value)
    if value < 0.0:
        logger.info(
            f"ASM: local objective {value:.6g} is unbounded below with "
            f"{F.shape[0]} working rows; keeping the previous parameters"
        )
        mu = mu_prev.copy()
        value = objective(mu, tau, lam, F, h)
    risk = max(value, 0.0)
    logger.debug(
        f"ASM: {F.shape[0]} working rows, final objective {value:.6g}, "
        f"best {best:.6g}"
    )
    return ClassifierState(
        mu,
        risk,
        cache.recent(F, h, used),
        best_objective=best,
        working_rows=F.shape[0],
    )


def oracle_minimax(
    tau_true: typing.Any,
    F_full: typing.Any,
    h_full: typing.Any,
    iterations: int = DEFAULT_ORACLE_ITERATIONS,
    mu0: typing.Optional[typing.Any] = None,
) -> typing.Tuple[np.ndarray, float]:
    """Optimal minimax rule for an exactly known mean vector: runs the same
    method with lambda = 0 over the full set of pieces ``F_full``, ``h_full``.
    Returns (mu_inf, R_inf) with R_inf clipped at 0.
    """
    F, h = _as_rows(F_full, h_full)
    tau = _as_vector(tau_true)
    lam = np.zeros_like(tau)
    start = np.zeros_like(tau) if mu0 is None else _as_vector(mu0)
    mu, _, _ = _asm_solve(start, tau, lam, F, h, iterations)
    return mu, max(objective(mu, tau, lam, F, h), 0.0)
