import numpy as np
import pytest

from amrc.errors import DegenerateVarianceError, InputError, InternalError
from amrc.feature_map import FeatureMap, InstanceMapConfig, phi
from amrc.tracker import (
    ComponentTracker,
    KinematicModel,
    LabelWindow,
    NoiseState,
    TrackerState,
    assemble_tau_lambda,
    estimate_noise,
    track_step,
    transition_matrix,
    unidimensional_track_step,
    update_component,
    update_label_probs,
)


def textbook_kalman(eta, sigma, Q, r2, H, observation):
    """Measurement update of the prior followed by the time update."""
    if observation is not None:
        K = sigma[:, 0] / (sigma[0, 0] + r2)
        eta = eta + K * (observation - eta[0])
        sigma = sigma - np.outer(K, sigma[0, :])
    return H @ eta, H @ sigma @ H.T + Q


def random_psd(rng, size):
    A = rng.normal(size=(size, size))
    return A @ A.T + 0.1 * np.eye(size)


def linear_fm(n_classes=2, input_dim=1):
    return FeatureMap(InstanceMapConfig.linear(input_dim), n_classes)


@pytest.mark.parametrize(
    ("order", "expected"),
    [
        (0, [[1.0]]),
        (1, [[1.0, 1.0], [0.0, 1.0]]),
        (2, [[1.0, 1.0, 0.5], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]),
    ],
)
def test_transition_matrix(order, expected):
    assert transition_matrix(order).tolist() == expected


def test_transition_matrix_with_step():
    assert transition_matrix(2, delta=2.0).tolist() == [
        [1.0, 2.0, 2.0],
        [0.0, 1.0, 2.0],
        [0.0, 0.0, 1.0],
    ]


def test_transition_matrix_rejects_negative_order():
    with pytest.raises(InputError):
        transition_matrix(-1)


def test_update_component_scalar_example():
    tr = ComponentTracker([0.5], [[1.0]], [[0.0]], r2=1.0)
    model = KinematicModel(0)
    assert tr.gain(model).tolist() == [0.5]
    updated = update_component(tr, model, observation=1.0)
    assert updated.eta_hat.tolist() == pytest.approx([0.75])
    assert updated.sigma_hat.tolist() == pytest.approx([[0.5]])
    # The input tracker is left untouched
    assert tr.eta_hat.tolist() == [0.5]


def test_update_component_without_observation_is_prediction():
    rng = np.random.default_rng(1)
    model = KinematicModel(2)
    sigma = random_psd(rng, 3)
    Q = random_psd(rng, 3)
    tr = ComponentTracker(rng.normal(size=3), sigma, Q, r2=0.7)
    updated = update_component(tr, model)
    assert np.allclose(updated.eta_hat, model.H @ tr.eta_hat)
    assert np.allclose(updated.sigma_hat, model.H @ sigma @ model.H.T + Q)


def test_update_component_matches_textbook_kalman():
    rng = np.random.default_rng(2020)
    for _ in range(1000):
        order = int(rng.integers(0, 3))
        model = KinematicModel(order)
        size = order + 1
        eta = rng.normal(size=size)
        sigma = random_psd(rng, size)
        Q = random_psd(rng, size)
        r2 = float(rng.uniform(0.01, 3.0))
        observation = float(rng.normal()) if rng.random() < 0.8 else None
        tr = ComponentTracker(eta, sigma, Q, r2=r2)
        updated = update_component(tr, model, observation=observation)
        expected_eta, expected_sigma = textbook_kalman(
            eta, sigma, Q, r2, model.H, observation
        )
        assert np.allclose(updated.eta_hat, expected_eta, rtol=0, atol=1e-9)
        assert np.allclose(updated.sigma_hat, expected_sigma, rtol=0, atol=1e-9)


def test_update_component_keeps_variances_nonnegative():
    rng = np.random.default_rng(5)
    model = KinematicModel(1)
    tr = ComponentTracker.initial(order=1)
    for _ in range(10000):
        observation = float(rng.normal(scale=3)) if rng.random() < 0.5 else None
        tr = update_component(tr, model, observation=observation)
        assert np.all(np.diag(tr.sigma_hat) >= 0)


def test_gain_with_zero_variance_and_observation():
    tr = ComponentTracker([0.0], [[0.0]], [[0.0]], r2=0.0)
    with pytest.raises(DegenerateVarianceError):
        update_component(tr, KinematicModel(0), observation=1.0)
    # Without an observation the gain is simply zero
    assert update_component(tr, KinematicModel(0)).eta_hat.tolist() == [0.0]


def test_estimate_noise_example():
    tr = ComponentTracker(
        [0.0], [[0.0]], [[0.2]], r2=1.0, noise_state=NoiseState(forgetting=0.5)
    )
    Q, r2, state = estimate_noise(tr, 2.0, KinematicModel(0))
    assert r2 == pytest.approx(2.5)
    # Zero gain leaves only the forgetting factor
    assert Q.tolist() == pytest.approx([[0.1]])
    assert state.updates == 1


def test_estimate_noise_decays_to_floor():
    tr = ComponentTracker.initial(order=1, noise_state=NoiseState(0.3, floor=1e-8))
    for _ in range(60):
        Q, r2, state = estimate_noise(tr, 0.0)
        tr = tr.copy(Q=Q, r2=r2, noise_state=state)
    assert tr.r2 == pytest.approx(1e-8, rel=1e-6)
    assert tr.noise_state.updates == 60


def test_noise_state_validation():
    with pytest.raises(InputError):
        NoiseState(forgetting=1.0)
    with pytest.raises(InputError):
        NoiseState(floor=0.0)


def test_label_window_counts():
    win = LabelWindow(4, 2)
    for y in (1, 1, 2):
        update_label_probs(win, y)
    assert update_label_probs(win, 1).tolist() == [0.75, 0.25]


def test_label_window_evicts_oldest():
    win = LabelWindow(2, 2)
    update_label_probs(win, 1)
    update_label_probs(win, 2)
    assert update_label_probs(win, 2).tolist() == [0.0, 1.0]
    assert list(win.buffer) == [2, 2]


def test_label_window_first_label():
    assert update_label_probs(LabelWindow(200, 3), 1).tolist() == [1.0, 0.0, 0.0]


def test_label_window_rejects_unknown_label():
    with pytest.raises(InputError):
        update_label_probs(LabelWindow(3, 2), 3)


def test_label_probabilities_normalized():
    rng = np.random.default_rng(3)
    win = LabelWindow(7, 4)
    for y in rng.integers(1, 5, size=200):
        probs = update_label_probs(win, int(y))
        assert probs.sum() == pytest.approx(1.0)
        assert np.all((probs >= 0) & (probs <= 1))


@pytest.mark.parametrize(
    ("p", "gamma", "variance", "tau", "lam"),
    [(1.0, 0.7, 0.09, 0.7, 0.3), (0.5, 2.0, 0.0, 1.0, 1.0), (0.0, 1.3, 0.4, 0.0, 0.0)],
)
def test_assemble_tau_lambda(p, gamma, variance, tau, lam):
    trackers = [ComponentTracker([gamma, 0.0], np.diag([variance, 1.0]), np.eye(2))]
    model = assemble_tau_lambda([p, 1.0 - p], trackers)
    assert model.tau_hat.tolist() == pytest.approx([tau])
    assert model.lam.tolist() == pytest.approx([lam])


def test_assemble_tau_lambda_uses_component_labels():
    trackers = [
        ComponentTracker([1.0], [[0.0]], [[0.0]], label=1),
        ComponentTracker([1.0], [[0.0]], [[0.0]], label=2),
    ]
    model = assemble_tau_lambda([0.25, 0.75], trackers)
    assert model.tau_hat.tolist() == pytest.approx([0.25, 0.75])


def test_assemble_tau_lambda_floor():
    trackers = [ComponentTracker([0.0], [[0.0]], [[0.0]])]
    model = assemble_tau_lambda([1.0, 0.0], trackers, lambda_floor=0.05)
    assert model.lam.tolist() == [0.05]


def test_assemble_tau_lambda_negative_radicand():
    trackers = [ComponentTracker([0.0], [[-1.0]], [[0.0]])]
    with pytest.raises(InternalError):
        assemble_tau_lambda([1.0, 0.0], trackers)


def test_track_step_first_step_from_zero_state():
    fm = linear_fm(input_dim=2)
    state = TrackerState(fm)
    model = track_step(state, np.array([1.0, -2.0]), 1)
    assert model.tau_hat[2:].tolist() == [0.0, 0.0]
    assert np.all(model.tau_hat[:2] != 0)
    assert np.all(model.lam >= 0)
    assert state.steps == 1


def test_track_step_unobserved_block_grows_by_process_noise():
    fm = linear_fm()
    state = TrackerState(fm, order=0, process_noise=0.01)
    for step in range(1, 6):
        track_step(state, np.array([0.5]), 1)
        assert state.variance[1] == pytest.approx(1.0 + 0.01 * step)
        assert state.gamma_hat[1] == 0.0


@pytest.mark.parametrize("timing", ["before", "after"])
def test_track_step_matches_component_recursion(timing):
    fm = linear_fm(n_classes=2, input_dim=2)
    state = TrackerState(fm, order=1, window=2, noise_timing=timing)
    model = KinematicModel(1)
    trackers = state.components()
    window = LabelWindow(2, 2)
    stream = [([1.0, 0.5], 1), ([-0.3, 2.0], 2), ([0.7, -1.1], 1)]
    for x, y in stream:
        uncertainty = track_step(state, np.array(x), y)
        probs = update_label_probs(window, y)
        observation = phi(fm, x, y)
        expected = []
        for i, tr in enumerate(trackers):
            if tr.label != y:
                expected.append(update_component(tr, model))
                continue
            innovation = observation[i] - tr.gamma_hat
            Q, r2, noise = estimate_noise(tr, innovation, model)
            if timing == "before":
                tr = tr.copy(Q=Q, r2=r2)
                expected.append(update_component(tr, model, observation[i]))
            else:
                updated = update_component(tr, model, observation[i])
                expected.append(updated.copy(Q=Q, r2=r2))
        trackers = expected
        oracle = assemble_tau_lambda(probs, trackers)
        assert np.allclose(uncertainty.tau_hat, oracle.tau_hat, atol=1e-12)
        assert np.allclose(uncertainty.lam, oracle.lam, atol=1e-12)
    for i, tr in enumerate(trackers):
        assert np.allclose(state.sigma[i], tr.sigma_hat, atol=1e-12)
        assert state.r2[i] == pytest.approx(tr.r2)


def test_unidimensional_track_step_averages_gains():
    fm = linear_fm()
    multi = TrackerState(fm, order=1, noise_timing="after")
    uni = TrackerState(fm, order=1, noise_timing="after")
    track_step(multi, np.array([2.0]), 1)
    unidimensional_track_step(uni, np.array([2.0]), 1)
    # Own gains are [0.5, 0] and 0; the average [0.25, 0] is used by both
    assert multi.eta[0].tolist() == pytest.approx([1.0, 0.0])
    assert uni.eta[0].tolist() == pytest.approx([0.5, 0.0])
    assert uni.eta[1].tolist() == pytest.approx([0.0, 0.0])
    assert multi.variance[1] == pytest.approx(2.01)
    assert uni.variance[0] == pytest.approx(1.76)
    assert uni.variance[1] == pytest.approx(1.76)


def test_tracker_state_invariants():
    rng = np.random.default_rng(11)
    fm = linear_fm(n_classes=3, input_dim=2)
    state = TrackerState(fm, order=2, window=5)
    for _ in range(300):
        x = rng.normal(size=2)
        y = int(rng.integers(1, 4))
        model = track_step(state, x, y)
        assert np.all(model.lam >= 0)
        assert np.all(state.variance >= 0)
        assert state.window.probabilities().sum() == pytest.approx(1.0)
    assert state.eta.shape == (fm.m, 3)
    assert len(state.window) == 5


def test_tracker_state_rejects_invalid_timing():
    with pytest.raises(InputError):
        TrackerState(linear_fm(), noise_timing="during")


def test_component_view():
    fm = linear_fm(n_classes=2, input_dim=3)
    state = TrackerState(fm)
    tr = state.component(4)
    assert tr.label == 2
    assert tr.feature == 1
    assert tr.order == 1
