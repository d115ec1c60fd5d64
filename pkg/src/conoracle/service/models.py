"""Request/response schemas for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from ..intervals import Interval
from ..metrics import StepRecord


class IntervalOut(BaseModel):
    kind: Literal["bounded", "empty", "full"]
    lo: float | None = None
    hi: float | None = None

    @classmethod
    def from_interval(cls, iv: Interval) -> "IntervalOut":
        if iv.is_bounded:
            return cls(kind="bounded", lo=iv.lo, hi=iv.hi)
        return cls(kind="empty" if iv.is_empty else "full")


class StepOut(BaseModel):
    timestamp: int
    labels: dict[str, float]
    base_pre: list[IntervalOut]
    base_post: list[IntervalOut]
    consensus: IntervalOut
    pseudo_label: float
    miscover: bool
    size: float | None
    idk: bool

    @classmethod
    def from_record(cls, rec: StepRecord) -> "StepOut":
        return cls(
            timestamp=rec.timestamp,
            labels=rec.labels,
            base_pre=[IntervalOut.from_interval(iv) for iv in rec.base_pre],
            base_post=[IntervalOut.from_interval(iv) for iv in rec.base_post],
            consensus=IntervalOut.from_interval(rec.consensus),
            pseudo_label=rec.pseudo_label,
            miscover=rec.miscover,
            size=rec.size,
            idk=rec.idk,
        )


class PredictorSpec(BaseModel):
    kind: Literal["mvp-kalman", "sigma-bps"] = "mvp-kalman"
    sigma2_0: float = Field(default=1.0, gt=0)
    w_bar: float = 4.6
    v_bar: float | None = None
    w_bar_floor: float | None = None
    gamma_noise: float = Field(default=1e-3, ge=0)


class MvpSpec(BaseModel):
    m: int = Field(default=100, ge=2)
    eta: float = Field(default=5.0, gt=0)
    r: int = Field(default=1000, ge=1)
    tau_max: float = Field(default=1.0, gt=0)


class SessionSpec(BaseModel):
    """A streaming oracle session: one predictor per named source."""

    sources: list[str] = Field(min_length=1)
    alpha: float = Field(default=0.01, gt=0, lt=1)
    beta_hat: int | None = None
    nu: float | Literal["zero", "first-tick-spread"] = 0.0
    seed: int = 0
    predictor: PredictorSpec = PredictorSpec()
    mvp: MvpSpec = MvpSpec()


class SessionCreated(BaseModel):
    session_id: str
    sources: list[str]
    beta_hat: int


class TickIn(BaseModel):
    timestamp: int
    prices: dict[str, float] = Field(min_length=1)


class RunRequest(BaseModel):
    """A batch run; `config` uses the same schema as the CLI config file."""

    config: dict
    out_dir: str | None = None


class RunResponse(BaseModel):
    summary: dict
    paths: dict[str, str]
    out_dir: str
