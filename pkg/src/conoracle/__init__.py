"""Byzantine-robust streaming price consensus.

Per-source adaptive conformal interval predictors (a Kalman-filter score with
online threshold calibration) are fused into a consensus interval that keeps
its coverage target even when up to beta_hat of the K sources are arbitrarily
manipulated. Ships with a constant-product AMM market simulator, a CSV replay
harness, evaluation metrics, a CLI, and an HTTP service.
"""

from .intervals import (
    EMPTY,
    FULL_LINE,
    ConsensusConfig,
    Interval,
    consensus_interval,
    consensus_membership,
    default_beta_hat,
    inflate,
)
from .kalman import (
    KalmanScoreState,
    initial_state,
    kalman_update,
    level_set,
    noise_update,
    predictive_params,
    score,
)
from .mvp import MvpState, bin_index, f_potential, initial_mvp_state, mvp_update
from .predictors import (
    BasePredictor,
    KalmanSettings,
    PredictorKind,
    make_predictor,
    observe,
    predict,
)

__version__ = "0.1.0"

__all__ = [
    "EMPTY",
    "FULL_LINE",
    "ConsensusConfig",
    "Interval",
    "consensus_interval",
    "consensus_membership",
    "default_beta_hat",
    "inflate",
    "KalmanScoreState",
    "initial_state",
    "kalman_update",
    "level_set",
    "noise_update",
    "predictive_params",
    "score",
    "MvpState",
    "bin_index",
    "f_potential",
    "initial_mvp_state",
    "mvp_update",
    "BasePredictor",
    "KalmanSettings",
    "PredictorKind",
    "make_predictor",
    "observe",
    "predict",
    "__version__",
]
