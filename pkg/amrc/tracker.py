"""Tracking of the time-varying mean vector.

Each component i of the feature mapping has its own kinematic state
(conditional expectation gamma_i and its time derivatives up to order k)
that is tracked with the Kalman recursion written in predicted-state form::

    gain  = 1{y_prev = j} H S e1 / (e1' S e1 + r2)
    eta' = H eta - (gamma - Phi_i(x_prev, y_prev)) gain
    S'   = H S H' + Q - gain e1' S H'

The arithmetic is written over arrays with arbitrary leading dimensions so
the same code drives a single :class:`ComponentTracker` and the stacked
:class:`TrackerState` that holds all m components.
"""
import collections
import logging
import math
import typing

import numpy as np

from amrc.errors import DegenerateVarianceError, InputError, InternalError
from amrc.feature_map import FeatureMap, phi

logger = logging.getLogger(__name__)

NOISE_BEFORE = "before"
NOISE_AFTER = "after"
NOISE_TIMINGS = (NOISE_BEFORE, NOISE_AFTER)

DEFAULT_PROCESS_NOISE = 0.01
DEFAULT_OBS_NOISE = 1.0
DEFAULT_FORGETTING = 0.3
DEFAULT_NOISE_FLOOR = 1e-8

# Rounding slack tolerated under the confidence square root
_SQRT_SLACK = 1e-12


def transition_matrix(order: int, delta: float = 1.0) -> np.ndarray:
    """H = I + sum_{s=1}^{k} delta^s / s! U_s for a k-th order kinematic model."""
    if order < 0:
        raise InputError("order must be nonnegative")
    if delta <= 0:
        raise InputError("delta must be positive")
    H = np.eye(order + 1)
    for s in range(1, order + 1):
        H += (delta ** s / math.factorial(s)) * np.eye(order + 1, k=s)
    return H


class KinematicModel:
    def __init__(self, order: int = 1, delta: float = 1.0) -> None:
        self.order = int(order)
        self.delta = float(delta)
        self.H = transition_matrix(self.order, self.delta)
        self.H.setflags(write=False)

    def __repr__(self) -> str:
        return f"KinematicModel(order={self.order}, delta={self.delta})"

    @property
    def size(self) -> int:
        return self.order + 1


class NoiseState:
    """Forgetting-factor settings and update count of the noise estimator."""

    def __init__(
        self,
        forgetting: float = DEFAULT_FORGETTING,
        floor: float = DEFAULT_NOISE_FLOOR,
        updates: int = 0,
    ) -> None:
        if not 0.0 < forgetting < 1.0:
            raise InputError("forgetting factor must be in (0, 1)")
        if floor <= 0:
            raise InputError("noise floor must be positive")
        self.forgetting = float(forgetting)
        self.floor = float(floor)
        self.updates = updates

    def __repr__(self) -> str:
        return (
            f"NoiseState(forgetting={self.forgetting}, floor={self.floor}, "
            f"updates={self.updates})"
        )


# Array kernels


def _predicted_cross(H: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """H S e1, which equals (e1' S H')' for symmetric S."""
    return sigma[..., :, 0] @ H.T


def _gains(
    H: np.ndarray, sigma: np.ndarray, r2: np.ndarray, matched: np.ndarray
) -> np.ndarray:
    variance = sigma[..., 0, 0] + r2
    degenerate = np.logical_and(matched, variance == 0)
    if np.any(degenerate):
        raise DegenerateVarianceError(
            "Zero innovation variance e1' S e1 + r2 with an observation present"
        )
    safe = np.where(variance == 0, 1.0, variance)
    weight = np.where(matched, 1.0 / safe, 0.0)
    return _predicted_cross(H, sigma) * weight[..., np.newaxis]


def _propagate(
    H: np.ndarray,
    eta: np.ndarray,
    sigma: np.ndarray,
    Q: np.ndarray,
    gain: np.ndarray,
    observation: np.ndarray,
) -> typing.Tuple[np.ndarray, np.ndarray]:
    residual = eta[..., 0] - observation
    eta_new = eta @ H.T - residual[..., np.newaxis] * gain
    cross = _predicted_cross(H, sigma)
    sigma_new = (
        H @ sigma @ H.T + Q - gain[..., :, np.newaxis] * cross[..., np.newaxis, :]
    )
    sigma_new = 0.5 * (sigma_new + np.swapaxes(sigma_new, -1, -2))
    return eta_new, sigma_new


def _adapt_noise(
    Q: np.ndarray,
    r2: np.ndarray,
    sigma: np.ndarray,
    gain: np.ndarray,
    innovation: np.ndarray,
    matched: np.ndarray,
    noise: NoiseState,
) -> typing.Tuple[np.ndarray, np.ndarray]:
    rho = noise.forgetting
    residual_var = np.maximum(innovation ** 2 - sigma[..., 0, 0], noise.floor)
    r2_new = rho * r2 + (1.0 - rho) * residual_var
    correction = gain * innovation[..., np.newaxis]
    Q_new = rho * Q + (1.0 - rho) * (
        correction[..., :, np.newaxis] * correction[..., np.newaxis, :]
    )
    r2_out = np.where(matched, r2_new, r2)
    Q_out = np.where(np.asarray(matched)[..., np.newaxis, np.newaxis], Q_new, Q)
    return Q_out, r2_out


class ComponentTracker:
    """Kinematic state of one feature component.

    :param eta_hat: State estimate (gamma and its derivatives).
    :param sigma_hat: MSE matrix of ``eta_hat``.
    :param Q: Process-noise covariance.
    :param float r2: Observation-noise variance.
    :param NoiseState noise_state: Noise estimator settings.
    :param int label: Label j (1-based) of the component.
    :param int feature: Instance feature r (0-based) of the component.
    """

    def __init__(
        self,
        eta_hat: typing.Any,
        sigma_hat: typing.Any,
        Q: typing.Any,
        r2: float = DEFAULT_OBS_NOISE,
        noise_state: typing.Optional[NoiseState] = None,
        label: int = 1,
        feature: int = 0,
    ) -> None:
        self.eta_hat = np.array(eta_hat, dtype=float)
        self.sigma_hat = np.array(sigma_hat, dtype=float)
        self.Q = np.array(Q, dtype=float)
        self.r2 = float(r2)
        self.noise_state = noise_state or NoiseState()
        self.label = label
        self.feature = feature
        size = self.eta_hat.shape[0]
        if self.sigma_hat.shape != (size, size) or self.Q.shape != (size, size):
            raise InputError("sigma_hat and Q must be square with the size of eta_hat")
        if self.r2 < 0:
            raise InputError("r2 must be nonnegative")

    def __repr__(self) -> str:
        return (
            f"ComponentTracker(label={self.label}, feature={self.feature}, "
            f"gamma={self.gamma_hat:.6g}, var={self.variance:.6g}, r2={self.r2:.6g})"
        )

    @classmethod
    def initial(
        cls,
        order: int = 1,
        process_noise: float = DEFAULT_PROCESS_NOISE,
        r2: float = DEFAULT_OBS_NOISE,
        noise_state: typing.Optional[NoiseState] = None,
        label: int = 1,
        feature: int = 0,
    ) -> "ComponentTracker":
        size = order + 1
        return cls(
            np.zeros(size),
            np.eye(size),
            process_noise * np.eye(size),
            r2,
            noise_state=noise_state,
            label=label,
            feature=feature,
        )

    @property
    def order(self) -> int:
        return self.eta_hat.shape[0] - 1

    @property
    def gamma_hat(self) -> float:
        return float(self.eta_hat[0])

    @property
    def variance(self) -> float:
        return float(self.sigma_hat[0, 0])

    def gain(self, model: KinematicModel, observed: bool = True) -> np.ndarray:
        """Gain vector of the recursion; zero when nothing is observed."""
        return _gains(
            model.H, self.sigma_hat, np.asarray(self.r2), np.asarray(observed)
        )

    def copy(self, **changes: typing.Any) -> "ComponentTracker":
        fields = {
            "eta_hat": self.eta_hat,
            "sigma_hat": self.sigma_hat,
            "Q": self.Q,
            "r2": self.r2,
            "noise_state": NoiseState(
                self.noise_state.forgetting,
                self.noise_state.floor,
                self.noise_state.updates,
            ),
            "label": self.label,
            "feature": self.feature,
        }
        fields.update(changes)
        return ComponentTracker(**fields)


def update_component(
    tr: ComponentTracker,
    model: KinematicModel,
    observation: typing.Optional[float] = None,
    gain: typing.Optional[np.ndarray] = None,
) -> ComponentTracker:
    """One step of the recursion. ``observation`` is Phi_i(x_prev, y_prev)
    when the arriving label matches the component's label, otherwise None.
    ``gain`` overrides the component's own gain vector.
    """
    observed = observation is not None
    if gain is None:
        gain = tr.gain(model, observed)
    value = np.asarray(observation if observed else 0.0, dtype=float)
    eta, sigma = _propagate(model.H, tr.eta_hat, tr.sigma_hat, tr.Q, gain, value)
    return tr.copy(eta_hat=eta, sigma_hat=sigma)


def estimate_noise(
    tr: ComponentTracker,
    innovation: float,
    model: typing.Optional[KinematicModel] = None,
) -> typing.Tuple[np.ndarray, float, NoiseState]:
    """Residual-based forgetting-factor update of (Q, r2) from the innovation
    d = observation - gamma_hat::

        r2 <- rho r2 + (1 - rho) max(d^2 - e1' S e1, floor)
        Q  <- rho Q  + (1 - rho) (gain d)(gain d)'
    """
    model = model or KinematicModel(tr.order)
    gain = tr.gain(model, observed=True)
    Q, r2 = _adapt_noise(
        tr.Q,
        np.asarray(tr.r2),
        tr.sigma_hat,
        gain,
        np.asarray(float(innovation)),
        np.asarray(True),
        tr.noise_state,
    )
    state = tr.noise_state
    return Q, float(r2), NoiseState(state.forgetting, state.floor, state.updates + 1)


class LabelWindow:
    """The W latest labels with running per-label counts."""

    def __init__(self, window: int, n_classes: int) -> None:
        if window < 1:
            raise InputError("window must be positive")
        self.window = int(window)
        self.n_classes = int(n_classes)
        self.buffer: typing.Deque[int] = collections.deque(maxlen=self.window)
        self.counts = np.zeros(self.n_classes, dtype=np.int64)

    def __repr__(self) -> str:
        return f"LabelWindow(window={self.window}, buffer={list(self.buffer)!r})"

    def __len__(self) -> int:
        return len(self.buffer)

    def probabilities(self) -> np.ndarray:
        if not self.buffer:
            return np.full(self.n_classes, 1.0 / self.n_classes)
        return self.counts / len(self.buffer)


def update_label_probs(win: LabelWindow, y_new: int) -> np.ndarray:
    """Push ``y_new`` and return the windowed label probabilities. Before W
    labels have arrived the counts are divided by the current buffer length.
    """
    if not 1 <= y_new <= win.n_classes:
        raise InputError(f"Label {y_new} outside 1..{win.n_classes}")
    if len(win.buffer) == win.window:
        win.counts[win.buffer[0] - 1] -= 1
    win.buffer.append(y_new)
    win.counts[y_new - 1] += 1
    return win.probabilities()


class UncertaintyModel:
    """Mean estimate ``tau_hat`` and confidence ``lam`` of the uncertainty set."""

    def __init__(self, tau_hat: np.ndarray, lam: np.ndarray) -> None:
        self.tau_hat = np.asarray(tau_hat, dtype=float)
        self.lam = np.asarray(lam, dtype=float)

    def __repr__(self) -> str:
        return f"UncertaintyModel(m={self.tau_hat.shape[0]})"


class TrackerState:
    """Stacked states of all m components plus the label window.

    Arrays: ``eta`` (m, k+1), ``sigma`` (m, k+1, k+1), ``Q`` (m, k+1, k+1),
    ``r2`` (m,), ``labels`` (m,) with the 1-based label of each component.
    """

    def __init__(
        self,
        fm: FeatureMap,
        order: int = 1,
        window: int = 200,
        process_noise: float = DEFAULT_PROCESS_NOISE,
        init_obs_noise: float = DEFAULT_OBS_NOISE,
        forgetting: float = DEFAULT_FORGETTING,
        noise_floor: float = DEFAULT_NOISE_FLOOR,
        noise_timing: str = NOISE_BEFORE,
        lambda_floor: float = 0.0,
    ) -> None:
        if noise_timing not in NOISE_TIMINGS:
            raise InputError(f'Invalid noise timing: "{noise_timing}"')
        if process_noise < 0 or init_obs_noise < 0 or lambda_floor < 0:
            raise InputError("noise variances and lambda floor must be nonnegative")
        self.fm = fm
        self.model = KinematicModel(order)
        self.noise = NoiseState(forgetting, noise_floor)
        self.noise_timing = noise_timing
        self.lambda_floor = float(lambda_floor)
        size = self.model.size
        m = fm.m
        self.eta = np.zeros((m, size))
        self.sigma = np.tile(np.eye(size), (m, 1, 1))
        self.Q = np.tile(process_noise * np.eye(size), (m, 1, 1))
        self.r2 = np.full(m, float(init_obs_noise))
        self.labels = fm.component_labels()
        self.window = LabelWindow(window, fm.n_classes)
        self.steps = 0

    def __repr__(self) -> str:
        return (
            f"TrackerState(m={self.fm.m}, order={self.model.order}, "
            f"window={self.window.window}, steps={self.steps})"
        )

    @property
    def gamma_hat(self) -> np.ndarray:
        return self.eta[:, 0]

    @property
    def variance(self) -> np.ndarray:
        return self.sigma[:, 0, 0]

    def component(self, index: int) -> ComponentTracker:
        """Copy of component ``index`` (0-based) as a :class:`ComponentTracker`."""
        return ComponentTracker(
            self.eta[index],
            self.sigma[index],
            self.Q[index],
            float(self.r2[index]),
            noise_state=NoiseState(
                self.noise.forgetting, self.noise.floor, self.noise.updates
            ),
            label=int(self.labels[index]),
            feature=index % self.fm.d,
        )

    def components(self) -> typing.List[ComponentTracker]:
        return [self.component(i) for i in range(self.fm.m)]


def assemble_tau_lambda(
    probs: typing.Any,
    trackers: typing.Union[TrackerState, typing.Sequence[ComponentTracker]],
    lambda_floor: float = 0.0,
) -> UncertaintyModel:
    """tau_i = p_j gamma_i and lambda_i = sqrt(p_j (gamma_i^2 (1 - p_j) + e1' S_i e1))
    where j is the label of component i.
    """
    probs = np.asarray(probs, dtype=float)
    if isinstance(trackers, TrackerState):
        gamma = trackers.gamma_hat
        variance = trackers.variance
        labels = trackers.labels
    else:
        gamma = np.array([tr.gamma_hat for tr in trackers])
        variance = np.array([tr.variance for tr in trackers])
        labels = np.array([tr.label for tr in trackers])
    p = probs[labels - 1]
    tau_hat = p * gamma
    radicand = p * (gamma ** 2 * (1.0 - p) + variance)
    if np.any(radicand < -_SQRT_SLACK):
        worst = int(np.argmin(radicand))
        raise InternalError(
            f"Negative confidence radicand {radicand[worst]:.3g} at component {worst}"
        )
    lam = np.sqrt(np.maximum(radicand, 0.0))
    if lambda_floor > 0:
        lam = np.maximum(lam, lambda_floor)
    return UncertaintyModel(tau_hat, lam)


def _track(
    state: TrackerState, x_prev: typing.Any, y_prev: int, unidimensional: bool
) -> UncertaintyModel:
    fm = state.fm
    probs = update_label_probs(state.window, y_prev)
    observation = phi(fm, x_prev, y_prev)
    matched = state.labels == y_prev
    H = state.model.H
    innovation = np.where(matched, observation - state.eta[:, 0], 0.0)
    gain = _gains(H, state.sigma, state.r2, matched)
    if state.noise_timing == NOISE_BEFORE:
        state.Q, state.r2 = _adapt_noise(
            state.Q, state.r2, state.sigma, gain, innovation, matched, state.noise
        )
        gain = _gains(H, state.sigma, state.r2, matched)
    own_gain = gain
    prior_sigma = state.sigma
    if unidimensional:
        gain = np.broadcast_to(gain.mean(axis=0), gain.shape)
    state.eta, state.sigma = _propagate(
        H, state.eta, state.sigma, state.Q, gain, observation
    )
    if state.noise_timing == NOISE_AFTER:
        state.Q, state.r2 = _adapt_noise(
            state.Q, state.r2, prior_sigma, own_gain, innovation, matched, state.noise
        )
    state.noise.updates += 1
    state.steps += 1
    logger.debug(
        f"Tracked step {state.steps}: label {y_prev}, probs {np.round(probs, 4)}"
    )
    return assemble_tau_lambda(probs, state, state.lambda_floor)


def track_step(
    state: TrackerState, x_prev: typing.Any, y_prev: int
) -> UncertaintyModel:
    """Update the label window and every component with the revealed pair,
    then return the new uncertainty model. Mutates ``state``.
    """
    return _track(state, x_prev, y_prev, unidimensional=False)


def unidimensional_track_step(
    state: TrackerState, x_prev: typing.Any, y_prev: int
) -> UncertaintyModel:
    """As :func:`track_step`, but every component uses the average of the m
    gain vectors, so that the estimate adapts with a single scalar rate.
    """
    return _track(state, x_prev, y_prev, unidimensional=True)
