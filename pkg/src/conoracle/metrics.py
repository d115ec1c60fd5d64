"""Evaluation statistics over replay records, plus the reference baselines.

The consensus label is unobservable, so coverage is judged against the median
of the per-source labels at each step. Empty consensus intervals always count
as misses and are tallied as "no consensus" (IDK) rather than entering the
size distribution; full-line intervals never miss and are tallied as
unbounded.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .intervals import Interval

SIZE_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class StepRecord:
    """Everything recorded for one replay step."""

    timestamp: int
    labels: dict[str, float]
    base_pre: tuple[Interval, ...]
    base_post: tuple[Interval, ...]
    consensus: Interval
    pseudo_label: float
    miscover: bool
    size: float | None
    idk: bool


def pseudo_label(prices: Sequence[float]) -> float:
    """Median of the step's source prices (mean of the middle two when even)."""
    if not prices:
        raise ValueError("cannot take the median of no prices")
    return statistics.median(prices)


def miscoverage_rate(flags: Sequence[bool]) -> float:
    if not flags:
        raise ValueError("need at least one step")
    return sum(1.0 for f in flags if f) / len(flags)


def running_miscoverage(flags: Sequence[bool]) -> list[float]:
    """Prefix miscoverage rates, one value per step."""
    out = []
    misses = 0
    for t, f in enumerate(flags, start=1):
        misses += 1 if f else 0
        out.append(misses / t)
    return out


def set_size(iv: Interval) -> float | None:
    """Interval length; None for empty (excluded), inf for the full line."""
    if iv.is_empty:
        return None
    if iv.is_full:
        return math.inf
    return iv.hi - iv.lo


def twap(c0: float, c1: float, t0: float, t1: float) -> float:
    """Time-weighted average price from two cumulative-price readings."""
    if t1 <= t0:
        raise ValueError(f"window must have positive length, got t0={t0}, t1={t1}")
    return (c1 - c0) / (t1 - t0)


def sliding_twap(
    timestamps: Sequence[int], prices: Sequence[float], window: float
) -> list[float | None]:
    """Sliding-window TWAP series over irregular ticks.

    The spot is held constant between ticks. Entries are None until a full
    window of history exists.
    """
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    if len(timestamps) != len(prices):
        raise ValueError("timestamps and prices must have equal length")
    ts = list(timestamps)
    cum = [0.0]
    for i in range(1, len(ts)):
        cum.append(cum[-1] + prices[i - 1] * (ts[i] - ts[i - 1]))

    out: list[float | None] = []
    left = 0  # window starts move forward only, so this pointer never backtracks
    for j in range(len(ts)):
        start = ts[j] - window
        if start < ts[0]:
            out.append(None)
            continue
        while left + 1 < len(ts) and ts[left + 1] <= start:
            left += 1
        # cumulative price at `start`, linear between ticks (spot held constant)
        c_start = cum[left] + prices[left] * (start - ts[left])
        out.append(twap(c_start, cum[j], start, ts[j]))
    return out


def _rate(flags: list[bool]) -> float | None:
    return miscoverage_rate(flags) if flags else None


def summarize(records: Sequence[StepRecord], warmup: int = 0) -> dict:
    """Aggregate a run: miscoverage, IDK/unbounded fractions, size stats, series.

    The first `warmup` steps are excluded from the post-warmup figures; both
    the full-run and post-warmup numbers are reported.
    """
    if not records:
        raise ValueError("need at least one record")
    flags = [r.miscover for r in records]
    idks = [r.idk for r in records]
    fulls = [r.consensus.is_full for r in records]
    sizes = [r.size for r in records if r.size is not None]

    size_stats = None
    if sizes:
        arr = np.asarray(sizes)
        size_stats = {
            "count": len(sizes),
            "mean": float(arr.mean()),
            "quantiles": {
                str(q): float(np.quantile(arr, q)) for q in SIZE_QUANTILES
            },
        }

    return {
        "steps": len(records),
        "warmup": warmup,
        "miscoverage": _rate(flags),
        "miscoverage_post_warmup": _rate(flags[warmup:]),
        "idk_fraction": _rate(idks),
        "idk_fraction_post_warmup": _rate(idks[warmup:]),
        "unbounded_fraction": _rate(fulls),
        "size": size_stats,
        "running_miscoverage": running_miscoverage(flags),
        "median_series": [r.pseudo_label for r in records],
    }
