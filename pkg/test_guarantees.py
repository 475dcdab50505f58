import math

import numpy as np
import pytest

from amrc.errors import InputError
from amrc.guarantees import (
    AccumulatedBound,
    alpha,
    beta,
    deterministic_risk_bound,
    mistake_bound,
)


def test_alpha_zero_when_confidence_covers_error():
    assert alpha([1.0, 2.0], [0.9, 2.3], [0.1, 0.3], [4.0, -1.0]) == 0.0


def test_alpha_example():
    assert alpha([0.2], [0.0], [0.1], [2.0]) == pytest.approx(0.2)


def test_alpha_zero_parameters():
    assert alpha([0.5, -0.5], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]) == 0.0


def test_beta_zero_at_optimal_parameters():
    assert beta([0.5], [0.0], [0.1], [1.5], [1.5]) == 0.0


def test_beta_zero_with_exact_mean():
    assert beta([0.3, 0.1], [0.3, 0.1], [0.0, 0.0], [1.0, 2.0], [-1.0, 0.5]) == 0.0


def test_beta_example():
    assert beta([0.1], [0.0], [0.2], [0.0], [1.0]) == pytest.approx(0.3)


def test_beta_covered_case_can_be_tighter():
    # General (0.1 + 0.2) * 3 = 0.9; covered 2 * 0.2 * 1 = 0.4
    assert beta([0.1], [0.0], [0.2], [-2.0], [1.0]) == pytest.approx(0.4)


def test_alpha_and_beta_nonnegative():
    rng = np.random.default_rng(0)
    for _ in range(500):
        tau, tau_hat, mu, mu_inf = rng.normal(size=(4, 5))
        lam = rng.uniform(0, 1, size=5)
        assert alpha(tau, tau_hat, lam, mu) >= 0
        assert beta(tau, tau_hat, lam, mu, mu_inf) >= 0


def test_mistake_bound_per_step_example():
    bound = mistake_bound([0.2] * 100, delta=0.05, per_step=True)
    assert bound == pytest.approx(0.2 + math.sqrt(2 * math.log(20) / 100), abs=1e-12)
    assert bound == pytest.approx(0.4448, abs=1e-4)


def test_mistake_bound_single_step():
    assert mistake_bound([0.5], delta=math.exp(-0.5)) == pytest.approx(1.5)


def test_mistake_bound_approaches_risk_sum():
    risks = [0.1, 0.4, 0.3]
    assert mistake_bound(risks, delta=1 - 1e-12) == pytest.approx(0.8, abs=1e-5)


def test_mistake_bound_with_alpha_terms():
    plain = mistake_bound([0.2, 0.2], delta=0.1)
    assert mistake_bound([0.2, 0.2], delta=0.1, alphas=[0.05, 0.1]) == pytest.approx(
        plain + 0.15
    )


def test_mistake_bound_for_deterministic_rule():
    azuma = math.sqrt(2 * 4 * math.log(20))
    risks = [deterministic_risk_bound(r) for r in [0.1, 0.1, 0.6, 0.6]]
    assert mistake_bound(risks) == pytest.approx(0.2 + 0.2 + 1.0 + 1.0 + azuma)


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.5, 2.0])
def test_mistake_bound_rejects_invalid_delta(delta):
    with pytest.raises(InputError):
        mistake_bound([0.1], delta=delta)


def test_mistake_bound_needs_risks():
    with pytest.raises(InputError):
        mistake_bound([], delta=0.05)


@pytest.mark.parametrize(("risk", "expected"), [(0.1, 0.2), (0.5, 1.0), (0.8, 1.0)])
def test_deterministic_risk_bound(risk, expected):
    assert deterministic_risk_bound(risk) == pytest.approx(expected)


def test_accumulated_bound_matches_formula():
    rng = np.random.default_rng(1)
    risks = rng.uniform(0, 1, size=40)
    acc = AccumulatedBound(delta=0.05)
    for t, risk in enumerate(risks, start=1):
        record = acc.push(risk)
        assert record.t == t
        assert record.cumulative_bound == pytest.approx(
            mistake_bound(risks[:t], 0.05, per_step=True)
        )
        assert record.cumulative_bound >= risks[:t].mean()
        assert record.R_U == risk
