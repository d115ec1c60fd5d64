"""Tick ingestion and the predict-then-observe replay loop.

A tick carries one timestamp and the prices of whichever sources reported at
that moment. Replay drives one predictor per source: intervals are taken
before the tick's prices touch any state, a missing source contributes the
empty interval (it gets no benefit of the doubt in the vote), and only
present sources are observed afterwards.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .intervals import (
    EMPTY,
    ConsensusConfig,
    Interval,
    consensus_interval,
    inflate,
)
from .metrics import StepRecord, pseudo_label, set_size
from .predictors import BasePredictor, observe, predict

FIRST_TICK_SPREAD = "first-tick-spread"


@dataclass(frozen=True)
class Tick:
    """Prices observed at one instant; at least one source must be present."""

    timestamp: int
    prices: dict[str, float]

    def __post_init__(self) -> None:
        if not self.prices:
            raise ValueError(f"tick at {self.timestamp} has no sources")


class FeedFormatError(ValueError):
    """Malformed feed input, pointing at the offending row/column."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.row = row
        self.column = column


def read_sources(path: str | Path) -> list[str]:
    """Source names from a tick file's header, in column order."""
    with Path(path).open(newline="") as fh:
        try:
            header = next(csv.reader(fh))
        except StopIteration:
            raise FeedFormatError("file is empty") from None
    if len(header) < 2:
        raise FeedFormatError("header needs a timestamp column plus at least one source")
    return [name.strip() for name in header[1:]]


def read_csv(path: str | Path) -> list[Tick]:
    """Parse a tick file: header `timestamp,<source>,...`, empty cells = missing.

    Rejects unparsable numbers, non-increasing or duplicate timestamps, and
    rows with no prices, naming the offending row and column.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FeedFormatError("file is empty") from None
        if len(header) < 2:
            raise FeedFormatError("header needs a timestamp column plus at least one source")
        sources = [name.strip() for name in header[1:]]
        if len(set(sources)) != len(sources):
            raise FeedFormatError("duplicate source names in header")

        ticks: list[Tick] = []
        last_ts: int | None = None
        for row_num, row in enumerate(reader, start=1):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            if len(row) != len(header):
                raise FeedFormatError(
                    f"expected {len(header)} cells, got {len(row)}", row=row_num
                )
            raw_ts = row[0].strip()
            try:
                ts = int(raw_ts)
            except ValueError:
                raise FeedFormatError(
                    f"unparsable timestamp {raw_ts!r}", row=row_num, column=header[0]
                ) from None
            if last_ts is not None and ts == last_ts:
                raise FeedFormatError(f"duplicate timestamp {ts}", row=row_num)
            if last_ts is not None and ts < last_ts:
                raise FeedFormatError(
                    f"timestamp {ts} not increasing (previous {last_ts})", row=row_num
                )
            prices: dict[str, float] = {}
            for name, cell in zip(sources, row[1:]):
                cell = cell.strip()
                if cell == "":
                    continue
                try:
                    prices[name] = float(cell)
                except ValueError:
                    raise FeedFormatError(
                        f"unparsable number {cell!r}", row=row_num, column=name
                    ) from None
            if not prices:
                raise FeedFormatError("no source has a price", row=row_num)
            ticks.append(Tick(timestamp=ts, prices=prices))
            last_ts = ts
    return ticks


def write_csv(path: str | Path, sources: Sequence[str], ticks: Sequence[Tick]) -> None:
    """Write ticks in the same schema read_csv accepts."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", *sources])
        for tick in ticks:
            writer.writerow(
                [tick.timestamp]
                + [
                    repr(tick.prices[s]) if s in tick.prices else ""
                    for s in sources
                ]
            )


class ReplayEngine:
    """Incremental replay: one predictor per source, one record per tick.

    nu may be a number or the "first-tick-spread" policy, in which case the
    margin is fixed to max - min of the first tick's prices.
    """

    def __init__(
        self,
        sources: Sequence[str],
        predictors: Mapping[str, BasePredictor],
        beta_hat: int,
        nu: float | str = 0.0,
    ):
        if set(sources) != set(predictors):
            raise ValueError("predictors must cover exactly the declared sources")
        self.sources = list(sources)
        self.predictors = dict(predictors)
        self.beta_hat = beta_hat
        self._nu_policy = nu
        self.nu: float | None = nu if isinstance(nu, (int, float)) else None
        if isinstance(nu, str) and nu != FIRST_TICK_SPREAD:
            raise ValueError(f"unknown nu policy {nu!r}")
        self.records: list[StepRecord] = []
        self._last_ts: int | None = None
        # validate eagerly so a bad beta_hat fails at construction
        ConsensusConfig(k=len(self.sources), beta_hat=beta_hat)

    def step(self, tick: Tick) -> StepRecord:
        if self._last_ts is not None and tick.timestamp <= self._last_ts:
            raise FeedFormatError(
                f"timestamp {tick.timestamp} not increasing (previous {self._last_ts})"
            )
        unknown = set(tick.prices) - set(self.sources)
        if unknown:
            raise FeedFormatError(f"unknown sources in tick: {sorted(unknown)}")
        if self.nu is None:
            self.nu = max(tick.prices.values()) - min(tick.prices.values())
        cfg = ConsensusConfig(k=len(self.sources), beta_hat=self.beta_hat, nu=self.nu)

        base_pre: list[Interval] = []
        for name in self.sources:
            if name in tick.prices:
                base_pre.append(predict(self.predictors[name]))
            else:
                base_pre.append(EMPTY)
        base_post = [inflate(iv, self.nu) for iv in base_pre]
        consensus = consensus_interval(base_post, cfg)

        labels = {name: tick.prices[name] for name in self.sources if name in tick.prices}
        pseudo = pseudo_label(list(labels.values()))
        width = set_size(consensus)
        record = StepRecord(
            timestamp=tick.timestamp,
            labels=labels,
            base_pre=tuple(base_pre),
            base_post=tuple(base_post),
            consensus=consensus,
            pseudo_label=pseudo,
            miscover=not consensus.contains(pseudo),
            size=width if consensus.is_bounded else None,
            idk=consensus.is_empty,
        )
        self.records.append(record)

        for name, price in labels.items():
            self.predictors[name] = observe(self.predictors[name], price)
        self._last_ts = tick.timestamp
        return record


def replay(
    ticks: Sequence[Tick],
    predictors: Mapping[str, BasePredictor],
    cfg: ConsensusConfig,
    sources: Sequence[str] | None = None,
) -> list[StepRecord]:
    """Replay a tick sequence through per-source predictors; returns all records."""
    engine = ReplayEngine(
        sources=list(sources) if sources is not None else list(predictors),
        predictors=predictors,
        beta_hat=cfg.beta_hat,
        nu=cfg.nu,
    )
    for tick in ticks:
        engine.step(tick)
    return engine.records
