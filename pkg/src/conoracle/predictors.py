"""Per-source interval predictors: the calibrated one and the one-sigma baseline.

A predictor follows a strict predict-then-observe cycle: the interval for a
step is read off the current state before the step's price touches any state.
The Kalman mean is seeded lazily from the first observed price, so until then
a predictor emits the empty interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from . import kalman, mvp
from .intervals import EMPTY, Interval


class PredictorKind(str, Enum):
    MVP_KALMAN = "mvp-kalman"
    SIGMA_BPS = "sigma-bps"


@dataclass(frozen=True)
class KalmanSettings:
    """Initialization knobs for the per-source predictive model."""

    sigma2_0: float = 1.0
    w_bar: float = 4.6
    v_bar: float | None = None
    w_bar_floor: float | None = None
    gamma_noise: float = 1e-3


@dataclass(frozen=True, eq=False)
class BasePredictor:
    kind: PredictorKind
    settings: KalmanSettings
    score_state: kalman.KalmanScoreState | None
    mvp_state: mvp.MvpState | None

    def __post_init__(self) -> None:
        if self.kind is PredictorKind.MVP_KALMAN and self.mvp_state is None:
            raise ValueError("mvp-kalman predictor needs an MVP state")


def make_predictor(
    kind: PredictorKind,
    alpha_k: float,
    settings: KalmanSettings | None = None,
    m: int = 100,
    eta: float = 5.0,
    r: int = 1000,
    tau_max: float = 1.0,
    seed: int = 0,
) -> BasePredictor:
    """Build an uninitialized predictor; the first observation seeds the mean."""
    settings = settings or KalmanSettings()
    mvp_state = None
    if kind is PredictorKind.MVP_KALMAN:
        mvp_state = mvp.initial_mvp_state(
            alpha_k=alpha_k, m=m, eta=eta, r=r, tau_max=tau_max, seed=seed
        )
    return BasePredictor(kind=kind, settings=settings, score_state=None, mvp_state=mvp_state)


def predict(p: BasePredictor) -> Interval:
    """The interval for the current step; never mutates state."""
    if p.score_state is None:
        return EMPTY
    if p.kind is PredictorKind.MVP_KALMAN:
        return kalman.level_set(p.score_state, p.mvp_state.tau)
    mu, var = kalman.predictive_params(p.score_state)
    sd = math.sqrt(var)
    return Interval(mu - sd, mu + sd)


def observe(p: BasePredictor, y: float) -> BasePredictor:
    """Advance the predictor with the step's observed price.

    The coverage outcome is judged against the interval that predict() would
    have returned for this step; the threshold is updated on that outcome
    first, then the noise scales, then the Kalman state.
    """
    covered = predict(p).contains(y)
    new_mvp = p.mvp_state
    if p.kind is PredictorKind.MVP_KALMAN:
        new_mvp = mvp.mvp_update(p.mvp_state, covered)
    if p.score_state is None:
        s = p.settings
        state = kalman.initial_state(
            mu=y,
            sigma2=s.sigma2_0,
            w_bar=s.w_bar,
            v_bar=s.v_bar,
            gamma_noise=s.gamma_noise,
            w_bar_floor=s.w_bar_floor,
        )
    else:
        state = kalman.kalman_update(kalman.noise_update(p.score_state, y), y)
    return replace(p, score_state=state, mvp_state=new_mvp)
