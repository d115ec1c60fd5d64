"""Online Gaussian predictive model for one price stream.

A scalar random-walk Kalman filter (identity state and observation maps)
supplies the predictive density for the next price. The conformity score of
a candidate price is that density scaled so its maximum is 1/2, which makes
thresholds comparable across streams regardless of variance. Both noise
scales are learned online by gradient descent on the predictive negative
log-likelihood, in log-parameterization so variances stay positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .intervals import EMPTY, FULL_LINE, Interval


@dataclass(frozen=True)
class KalmanScoreState:
    """Predictive state for one source: Gaussian mean/variance plus noise scales.

    ``w_bar`` and ``v_bar`` are the logs of the state-noise and
    observation-noise standard deviations. ``w_bar`` is clamped from below by
    ``w_bar_floor`` after every noise update so the filter never becomes too
    confident to track a regime change.
    """

    mu: float
    sigma2: float
    w_bar: float
    v_bar: float
    gamma_noise: float = 1e-3
    w_bar_floor: float = -math.inf

    def __post_init__(self) -> None:
        if not self.sigma2 > 0:
            raise ValueError(f"state variance must be positive, got {self.sigma2}")
        if self.w_bar < self.w_bar_floor:
            raise ValueError(f"w_bar {self.w_bar} below its floor {self.w_bar_floor}")
        if self.gamma_noise < 0:
            raise ValueError(f"noise learning rate must be >= 0, got {self.gamma_noise}")


def initial_state(
    mu: float,
    sigma2: float = 1.0,
    w_bar: float = 4.6,
    v_bar: float | None = None,
    gamma_noise: float = 1e-3,
    w_bar_floor: float | None = None,
) -> KalmanScoreState:
    """Build a fresh state; by default v_bar = w_bar and the floor pins w_bar at its start value."""
    if v_bar is None:
        v_bar = w_bar
    if w_bar_floor is None:
        w_bar_floor = w_bar
    return KalmanScoreState(
        mu=mu,
        sigma2=sigma2,
        w_bar=w_bar,
        v_bar=v_bar,
        gamma_noise=gamma_noise,
        w_bar_floor=w_bar_floor,
    )


def predictive_params(state: KalmanScoreState) -> tuple[float, float]:
    """Mean and total variance of the one-step-ahead predictive Gaussian."""
    w2 = math.exp(2.0 * state.w_bar)
    v2 = math.exp(2.0 * state.v_bar)
    return state.mu, state.sigma2 + w2 + v2


def score(state: KalmanScoreState, y: float) -> float:
    """Conformity score of candidate price y, in (0, 1/2].

    The predictive density at y divided by twice its maximum: exactly 1/2 at
    y = mu, strictly decreasing in |y - mu|.
    """
    mu, var = predictive_params(state)
    return 0.5 * math.exp(-((y - mu) ** 2) / (2.0 * var))


def level_set(state: KalmanScoreState, tau: float) -> Interval:
    """All prices whose score is at least tau, via the Gaussian closed form.

    tau = 0 accepts every price (full line); tau above the score maximum of
    1/2 accepts none.
    """
    if tau < 0:
        raise ValueError(f"threshold must be >= 0, got {tau}")
    if tau == 0.0:
        return FULL_LINE
    c = -2.0 * math.log(2.0 * tau)
    if c < 0:
        return EMPTY
    mu, var = predictive_params(state)
    half = math.sqrt(var) * math.sqrt(c)
    return Interval(mu - half, mu + half)


def kalman_update(state: KalmanScoreState, y: float) -> KalmanScoreState:
    """Condition the state on an observed price y.

    Standard scalar Kalman correction with gain
    K = (sigma2 + w^2) / (sigma2 + w^2 + v^2): the mean moves toward y by a
    fraction K, the variance contracts by (1 - K).
    """
    w2 = math.exp(2.0 * state.w_bar)
    v2 = math.exp(2.0 * state.v_bar)
    prior_var = state.sigma2 + w2
    gain = prior_var / (prior_var + v2)
    return replace(
        state,
        mu=state.mu + gain * (y - state.mu),
        sigma2=(1.0 - gain) * prior_var,
    )


def noise_gradients(state: KalmanScoreState, y: float) -> tuple[float, float]:
    """Exact gradients of the predictive negative log-likelihood at y.

    Returns (d/d w_bar, d/d v_bar) of -ln N(y; mu, xi^2) where
    xi^2 = sigma2 + e^{2 w_bar} + e^{2 v_bar}.
    """
    w = math.exp(state.w_bar)
    v = math.exp(state.v_bar)
    xi = math.sqrt(state.sigma2 + w * w + v * v)
    common = 1.0 / xi - (y - state.mu) ** 2 / xi**3
    grad_w = common * (w / xi) * w
    grad_v = common * (v / xi) * v
    return grad_w, grad_v


def noise_update(state: KalmanScoreState, y: float) -> KalmanScoreState:
    """One gradient-descent step on both log noise scales, then clamp w_bar."""
    grad_w, grad_v = noise_gradients(state, y)
    new_w_bar = state.w_bar - state.gamma_noise * grad_w
    new_v_bar = state.v_bar - state.gamma_noise * grad_v
    return replace(
        state,
        w_bar=max(new_w_bar, state.w_bar_floor),
        v_bar=new_v_bar,
    )
