"""Closed price intervals and Byzantine-robust interval consensus.

A consensus interval contains every candidate price voted for by at least
``K - beta_hat`` of the K per-source intervals, so up to ``beta_hat``
arbitrarily manipulated sources cannot steer it on their own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

_BOUNDED = "bounded"
_EMPTY = "empty"
_FULL = "full"


@dataclass(frozen=True)
class Interval:
    """A closed interval [lo, hi], the empty set, or the whole real line.

    Use the module constants EMPTY / FULL_LINE or ``Interval(lo, hi)``;
    the ``kind`` field is managed internally.
    """

    lo: float = math.nan
    hi: float = math.nan
    kind: str = _BOUNDED

    def __post_init__(self) -> None:
        if self.kind == _BOUNDED:
            if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
                raise ValueError(f"bounded interval needs finite endpoints, got [{self.lo}, {self.hi}]")
            if self.lo > self.hi:
                raise ValueError(f"interval endpoints out of order: [{self.lo}, {self.hi}]")

    @property
    def is_empty(self) -> bool:
        return self.kind == _EMPTY

    @property
    def is_full(self) -> bool:
        return self.kind == _FULL

    @property
    def is_bounded(self) -> bool:
        return self.kind == _BOUNDED

    def contains(self, y: float) -> bool:
        if self.kind == _EMPTY:
            return False
        if self.kind == _FULL:
            return True
        return self.lo <= y <= self.hi

    def endpoints(self) -> Iterator[float]:
        if self.kind == _BOUNDED:
            yield self.lo
            yield self.hi

    def __repr__(self) -> str:
        if self.kind == _EMPTY:
            return "Interval.EMPTY"
        if self.kind == _FULL:
            return "Interval.FULL_LINE"
        return f"Interval({self.lo!r}, {self.hi!r})"


EMPTY = Interval(kind=_EMPTY)
FULL_LINE = Interval(kind=_FULL)


@dataclass(frozen=True)
class ConsensusConfig:
    """Voting parameters: K sources, at most beta_hat of them adversarial."""

    k: int
    beta_hat: int
    nu: float = 0.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"need at least one source, got k={self.k}")
        if not 0 <= self.beta_hat < self.k:
            raise ValueError(f"beta_hat must satisfy 0 <= beta_hat < k, got {self.beta_hat} with k={self.k}")
        if self.nu < 0:
            raise ValueError(f"inflation margin must be >= 0, got {self.nu}")

    @property
    def votes_needed(self) -> int:
        return self.k - self.beta_hat


def default_beta_hat(k: int) -> int:
    """Default adversary budget: assume up to half of the sources are bad."""
    return k // 2


def inflate(iv: Interval, nu: float) -> Interval:
    """Widen a bounded interval symmetrically by margin nu about its midpoint."""
    if nu < 0:
        raise ValueError(f"inflation margin must be >= 0, got {nu}")
    if not iv.is_bounded:
        return iv
    mid = (iv.lo + iv.hi) / 2.0
    half = mid - iv.lo
    return Interval(mid - (half + nu), mid + (half + nu))


def consensus_membership(y: float, ivs: Sequence[Interval], cfg: ConsensusConfig) -> bool:
    """Exact voting predicate: does y lie in at least K - beta_hat intervals?

    This is the brute-force reference the interval construction is checked
    against.
    """
    if len(ivs) != cfg.k:
        raise ValueError(f"expected {cfg.k} intervals, got {len(ivs)}")
    votes = sum(1 for iv in ivs if iv.contains(y))
    return votes >= cfg.votes_needed


def consensus_interval(ivs: Sequence[Interval], cfg: ConsensusConfig) -> Interval:
    """Combine K per-source intervals into one consensus interval.

    Candidate prices are the finite endpoints of the inputs; the result spans
    all candidates that win the vote. Because membership between two winning
    endpoints can only be at least as strong, this over-approximates the exact
    voted set. Full-line inputs vote for everything; if they alone reach the
    vote threshold the consensus is the full line. Empty if no candidate wins.
    """
    if len(ivs) != cfg.k:
        raise ValueError(f"expected {cfg.k} intervals, got {len(ivs)}")
    n_full = sum(1 for iv in ivs if iv.is_full)
    if n_full >= cfg.votes_needed:
        return FULL_LINE
    winners = [
        y
        for iv in ivs
        for y in iv.endpoints()
        if consensus_membership(y, ivs, cfg)
    ]
    if not winners:
        return EMPTY
    return Interval(min(winners), max(winners))
