"""Performance guarantees: instantaneous error-probability bounds and the
accumulated-mistake bound that holds with probability at least 1 - delta.
"""
import math
import typing

import numpy as np

from amrc.errors import InputError

DEFAULT_DELTA = 0.05


def _covers(tau_true: np.ndarray, tau_hat: np.ndarray, lam: np.ndarray) -> bool:
    return bool(np.all(lam >= np.abs(tau_true - tau_hat)))


def alpha(
    tau_true: typing.Any, tau_hat: typing.Any, lam: typing.Any, mu: typing.Any
) -> float:
    """|| |tau - tau_hat| - lambda ||_inf ||mu||_1, or 0 when lambda covers
    the estimation error componentwise.
    """
    tau_true, tau_hat, lam, mu = (
        np.asarray(v, dtype=float) for v in (tau_true, tau_hat, lam, mu)
    )
    if _covers(tau_true, tau_hat, lam):
        return 0.0
    gap = np.abs(np.abs(tau_true - tau_hat) - lam).max()
    return float(gap * np.abs(mu).sum())


def beta(
    tau_true: typing.Any,
    tau_hat: typing.Any,
    lam: typing.Any,
    mu: typing.Any,
    mu_inf: typing.Any,
) -> float:
    """(||tau - tau_hat||_inf + ||lambda||_inf) ||mu_inf - mu||_1. When lambda
    covers the estimation error, 2 ||lambda||_inf ||mu_inf||_1 is also valid and
    the smaller of the two is returned.
    """
    tau_true, tau_hat, lam, mu, mu_inf = (
        np.asarray(v, dtype=float) for v in (tau_true, tau_hat, lam, mu, mu_inf)
    )
    lam_norm = float(np.abs(lam).max()) if lam.size else 0.0
    general = (float(np.abs(tau_true - tau_hat).max()) + lam_norm) * float(
        np.abs(mu_inf - mu).sum()
    )
    if _covers(tau_true, tau_hat, lam):
        return min(general, 2.0 * lam_norm * float(np.abs(mu_inf).sum()))
    return general


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise InputError(f"delta must be in (0, 1), got {delta}")


def azuma_term(steps: int, delta: float) -> float:
    """sqrt(2 T log(1 / delta))."""
    _check_delta(delta)
    return math.sqrt(2.0 * steps * math.log(1.0 / delta))


def mistake_bound(
    risks: typing.Sequence[float],
    delta: float = DEFAULT_DELTA,
    per_step: bool = False,
    alphas: typing.Optional[typing.Sequence[float]] = None,
) -> float:
    """sum_t R(U_t) + sum_t alpha_t + sqrt(2 T log(1 / delta)).

    :param bool per_step: Divide the bound by T.
    :param alphas: Optional alpha_t terms; taken as 0 when omitted.

    For the deterministic rule pass the risks through
    :func:`deterministic_risk_bound` first.
    """
    _check_delta(delta)
    steps = len(risks)
    if steps < 1:
        raise InputError("At least one risk value is required")
    total = math.fsum(risks) + (math.fsum(alphas) if alphas else 0.0)
    total += azuma_term(steps, delta)
    return total / steps if per_step else total


def deterministic_risk_bound(risk: float) -> float:
    """Error-probability bound of the argmax rule, min(1, 2 R)."""
    return min(1.0, 2.0 * risk)


class BoundRecord:
    def __init__(
        self,
        t: int,
        R_U: float,
        cumulative_bound: float,
        delta: float,
    ) -> None:
        self.t = t
        self.R_U = R_U
        self.cumulative_bound = cumulative_bound
        self.delta = delta

    def __repr__(self) -> str:
        return (
            f"BoundRecord(t={self.t}, R_U={self.R_U:.6g}, "
            f"cumulative_bound={self.cumulative_bound:.6g})"
        )


class AccumulatedBound:
    """Running per-step mistake bound, O(1) work per step."""

    def __init__(self, delta: float = DEFAULT_DELTA) -> None:
        _check_delta(delta)
        self.delta = delta
        self.steps = 0
        self.risk_sum = 0.0

    def push(self, risk: float) -> BoundRecord:
        self.steps += 1
        self.risk_sum += risk
        bound = (self.risk_sum + azuma_term(self.steps, self.delta)) / self.steps
        return BoundRecord(self.steps, risk, bound, self.delta)
