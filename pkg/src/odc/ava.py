"""Adaptive VoI threshold controller.

The threshold is the control input of a first-order linear system whose
output is the per-slot energy consumption::

    c(t+1) = a c(t) + b R(t) + g w(t) + w(t+1)

The coefficients are identified online by normalised gradient descent on the
parameter vector ``theta = (a + g, b, g)`` with features
``phi = (c(t), R(t), -e_h(t))``, and the threshold follows the
certainty-equivalence tracking law.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

DEFAULT_THETA0 = (0.5, -1.0, 0.0)
DEFAULT_STEP_SIZE = 0.1
B_CEILING = -1e-6


class DegenerateEstimate(ArithmeticError):
    """The identified input gain ``b`` is zero, so the control law is undefined."""


def control_law(a: float, b: float, g: float, e_h: float, c: float) -> float:
    """Tracking threshold ``[e_h - (a + b) c + g e_h] / b``, clamped at 0."""
    if b == 0:
        raise DegenerateEstimate("control law undefined for b = 0")
    value = (e_h - (a + b) * c + g * e_h) / b
    return value if value > 0.0 else 0.0


def gradient_update(theta, phi, observed_next: float, step_size: float) -> np.ndarray:
    """One normalised-gradient step of ``theta`` toward ``observed_next``.

    Returns a new array; ``theta`` is untouched. A zero feature vector leaves
    the estimate unchanged.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    norm_sq = float(phi @ phi)
    if norm_sq == 0.0:
        return theta.copy()
    innovation = observed_next - float(phi @ theta)
    return theta + step_size * phi * innovation / norm_sq


def project_gain(theta: np.ndarray) -> np.ndarray:
    # keeps b strictly negative so the control law stays defined
    if theta[1] >= B_CEILING:
        theta = theta.copy()
        theta[1] = B_CEILING
    return theta


@dataclass
class ControllerState:
    theta_hat: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_THETA0))
    phi: np.ndarray | None = None
    step_size: float = DEFAULT_STEP_SIZE
    threshold: float = 0.0
    theta0: tuple[float, float, float] = DEFAULT_THETA0
    steps: int = 0
    remaining_sq: float = 0.0
    harvest_sq: float = 0.0

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step size must be positive")
        self.theta_hat = np.asarray(self.theta_hat, dtype=float)

    @property
    def coefficients(self) -> tuple[float, float, float]:
        """Current ``(a, b, g)`` decoded from the parameter vector."""
        t = self.theta_hat
        return float(t[0] - t[2]), float(t[1]), float(t[2])

    @property
    def tracking_metric(self) -> float:
        """Running mean of ``[E(t) - c(t)]^2``."""
        return self.remaining_sq / self.steps if self.steps else 0.0

    @property
    def harvest_tracking_metric(self) -> float:
        """Running mean of ``[e_h(t) - c(t)]^2``."""
        return self.harvest_sq / self.steps if self.steps else 0.0


def ava_step(state: ControllerState, e_h: float, c: float, remaining: float | None = None) -> float:
    """Close one slot and return the threshold for the next.

    ``e_h`` is this slot's harvest and ``c`` the consumption just observed;
    ``remaining`` (the stored energy) feeds the tracking-metric report only.
    The estimate is first corrected with ``c`` against the previous feature
    vector. The new threshold is then computed, and the feature vector
    records it because that threshold is the input that will drive the next
    slot's consumption. Mutates ``state``.
    """
    if state.phi is None:
        state.theta_hat = np.array(state.theta0, dtype=float)
    else:
        state.theta_hat = project_gain(
            gradient_update(state.theta_hat, state.phi, c, state.step_size))
    a, b, g = state.coefficients
    try:
        threshold = control_law(a, b, g, e_h, c)
    except DegenerateEstimate:
        state.theta_hat = np.array(state.theta0, dtype=float)
        a, b, g = state.coefficients
        threshold = control_law(a, b, g, e_h, c)
    state.phi = np.array([c, threshold, -e_h], dtype=float)
    state.threshold = threshold
    state.steps += 1
    if remaining is not None:
        state.remaining_sq += (remaining - c) ** 2
    state.harvest_sq += (e_h - c) ** 2
    return threshold


def simulate_linear_system(a: float, b: float, g: float, steps: int, noise_std: float = 0.0,
                           seed: int = 0, control_amplitude: float = 0.75):
    """Roll out the consumption system under a binary +-amplitude input.

    The random binary input is persistently exciting and keeps the feature
    norm away from zero, where normalised steps would amplify the noise.

    The third feature is the negated one-step prediction ``c(t) - w(t)``,
    which is the quantity the tracking law drives onto the harvest. With it,
    ``phi^T theta`` equals ``c(t+1)`` up to the fresh noise ``w(t+1)``.

    Returns ``(features, targets)`` where row ``t`` of ``features`` is
    ``(c(t), R(t), -(c(t) - w(t)))`` and ``targets[t] = c(t+1)``.
    """
    rng = np.random.default_rng(seed)
    control = control_amplitude * rng.choice((-1.0, 1.0), size=steps)
    noise = rng.normal(0.0, noise_std, size=steps + 1) if noise_std > 0 else np.zeros(steps + 1)
    c = np.empty(steps + 1)
    c[0] = noise[0]
    for t in range(steps):
        c[t + 1] = a * c[t] + b * control[t] + g * noise[t] + noise[t + 1]
    features = np.column_stack([c[:-1], control, -(c[:-1] - noise[:-1])])
    return features, c[1:]


class AVAController(RegressorMixin, BaseEstimator):
    """Online identification of the consumption system plus the threshold law.

    ``partial_fit`` consumes one slot at a time the way a node would;
    ``fit`` runs the same normalised-gradient recursion over a recorded
    feature matrix ``(c, R, -e_h)`` and next-slot consumption targets.

    Parameters
    ----------
    step_size : float
        Gradient step ``mu``.
    theta0 : tuple of float
        Initial ``(a + g, b, g)``; ``b`` must be negative.
    """

    def __init__(self, step_size=DEFAULT_STEP_SIZE, theta0=DEFAULT_THETA0):
        self.step_size = step_size
        self.theta0 = theta0

    def _validate_params(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if len(self.theta0) != 3:
            raise ValueError("theta0 must have three components")

    def fit(self, X, y):
        self._validate_params()
        X, y = check_X_y(X, y, dtype=float)
        if X.shape[1] != 3:
            raise ValueError("features must have three columns (c, R, -e_h)")
        theta = np.array(self.theta0, dtype=float)
        for phi, target in zip(X, y):
            theta = project_gain(gradient_update(theta, phi, target, self.step_size))
        self.theta_ = theta
        self.n_features_in_ = 3
        return self

    def partial_fit(self, e_h: float, c: float, remaining: float | None = None):
        if not hasattr(self, "state_"):
            self._validate_params()
            self.state_ = ControllerState(step_size=self.step_size, theta0=tuple(self.theta0))
            self.n_features_in_ = 3
        self.threshold_ = ava_step(self.state_, e_h, c, remaining)
        self.theta_ = self.state_.theta_hat.copy()
        return self

    def predict(self, X):
        """Predicted next-slot consumption ``phi^T theta``."""
        check_is_fitted(self, "theta_")
        X = check_array(X, dtype=float)
        return X @ self.theta_

    def threshold(self, e_h: float, c: float) -> float:
        """Threshold the current estimate would issue for ``(e_h, c)``."""
        check_is_fitted(self, "theta_")
        t = self.theta_
        return control_law(t[0] - t[2], t[1], t[2], e_h, c)
