"""Constant-product AMM pools and a seeded multi-pool market simulation.

Each step applies, in order: any queued adversary reversal, one random trader
swap, arbitrage passes that pull outlier pools toward the cross-pool
geometric mid, and any scheduled adversary swap. Scheduling the adversary
after arbitrage means a manipulated spot survives into the step's recorded
prices and is corrected (or reversed) only on the next step, which mimics an
atomic manipulation.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

from ._rng import borrow_rng
from .feeds import Tick


@dataclass(frozen=True)
class Pool:
    """One constant-product pool; spot price of token X is reserve_y / reserve_x."""

    reserve_x: float
    reserve_y: float
    fee: float = 0.0

    def __post_init__(self) -> None:
        if self.reserve_x <= 0 or self.reserve_y <= 0:
            raise ValueError(f"reserves must be positive, got ({self.reserve_x}, {self.reserve_y})")
        if not 0 <= self.fee < 1:
            raise ValueError(f"fee must be in [0, 1), got {self.fee}")


def spot_price(p: Pool) -> float:
    return p.reserve_y / p.reserve_x


def swap_x_for_y(p: Pool, dx: float) -> tuple[float, Pool]:
    """Sell dx of token X into the pool; returns (dy received, new pool)."""
    if dx <= 0:
        raise ValueError(f"swap amount must be positive, got {dx}")
    effective = dx * (1.0 - p.fee)
    dy = p.reserve_y - p.reserve_x * p.reserve_y / (p.reserve_x + effective)
    return dy, replace(p, reserve_x=p.reserve_x + dx, reserve_y=p.reserve_y - dy)


def swap_y_for_x(p: Pool, dy: float) -> tuple[float, Pool]:
    """Sell dy of token Y into the pool; returns (dx received, new pool)."""
    if dy <= 0:
        raise ValueError(f"swap amount must be positive, got {dy}")
    effective = dy * (1.0 - p.fee)
    dx = p.reserve_x - p.reserve_x * p.reserve_y / (p.reserve_y + effective)
    return dx, replace(p, reserve_x=p.reserve_x - dx, reserve_y=p.reserve_y + dy)


def borrowable(deposit: float, price: float, collateral_ratio_pct: float) -> float:
    """Loanable amount for a deposit priced at `price` under a percent collateral ratio."""
    if collateral_ratio_pct <= 0:
        raise ValueError(f"collateral ratio must be positive, got {collateral_ratio_pct}")
    return deposit * price * 100.0 / collateral_ratio_pct


@dataclass(frozen=True)
class AdversarySwap:
    """One scheduled manipulation: sell `amount` of `side` into pool `pool` at `step`.

    With reverse=True the received amount is swapped back at the start of the
    next step, restoring the pool before any other agent acts.
    """

    step: int
    pool: int
    amount: float
    side: str = "x"
    reverse: bool = False

    def __post_init__(self) -> None:
        if self.side not in ("x", "y"):
            raise ValueError(f"side must be 'x' or 'y', got {self.side!r}")
        if self.amount <= 0:
            raise ValueError(f"swap amount must be positive, got {self.amount}")


@dataclass(frozen=True)
class SimConfig:
    n_pools: int
    steps: int
    seed: int = 0
    init_reserve_x: float = 10_000.0
    init_reserve_y: float = 1_000_000.0
    fee: float = 0.0
    trader_fraction: float = 0.003
    trader_sigma: float = 1.0
    trader_max_fraction: float = 0.1
    arb_tolerance: float = 0.002
    arb_max_rounds: int = 10
    adversary: tuple[AdversarySwap, ...] = ()

    def __post_init__(self) -> None:
        if self.n_pools < 1:
            raise ValueError(f"need at least one pool, got {self.n_pools}")
        if self.steps < 1:
            raise ValueError(f"need at least one step, got {self.steps}")
        for swap in self.adversary:
            if not 1 <= swap.step <= self.steps:
                raise ValueError(f"adversary step {swap.step} outside [1, {self.steps}]")
            if not 0 <= swap.pool < self.n_pools:
                raise ValueError(f"adversary pool index {swap.pool} outside [0, {self.n_pools})")


@dataclass(frozen=True, eq=False)
class World:
    """Simulation state between steps; carried by value, seeded RNG included."""

    pools: tuple[Pool, ...]
    rng_state: tuple
    pending: tuple[tuple[int, int, float, str], ...] = field(default=())


def initial_world(cfg: SimConfig) -> World:
    pools = tuple(
        Pool(cfg.init_reserve_x, cfg.init_reserve_y, cfg.fee) for _ in range(cfg.n_pools)
    )
    return World(pools=pools, rng_state=random.Random(cfg.seed).getstate())


def _move_spot_to(p: Pool, target: float) -> Pool:
    # Product-preserving reserve shift; stands in for an exact-size arb trade.
    k = p.reserve_x * p.reserve_y
    return replace(p, reserve_x=math.sqrt(k / target), reserve_y=math.sqrt(k * target))


def step(world: World, cfg: SimConfig, t: int) -> tuple[World, tuple[float, ...]]:
    """Advance one step; returns the new world and all post-step spot prices."""
    if not 1 <= t <= cfg.steps:
        raise ValueError(f"step {t} outside [1, {cfg.steps}]")
    pools = list(world.pools)
    rng = borrow_rng(world.rng_state)

    pending = []
    for due, pool_idx, amount, side in world.pending:
        if due != t:
            pending.append((due, pool_idx, amount, side))
            continue
        if side == "x":
            _, pools[pool_idx] = swap_x_for_y(pools[pool_idx], amount)
        else:
            _, pools[pool_idx] = swap_y_for_x(pools[pool_idx], amount)

    if cfg.trader_fraction > 0:
        idx = rng.randrange(cfg.n_pools)
        fraction = min(
            math.exp(rng.gauss(math.log(cfg.trader_fraction), cfg.trader_sigma)),
            cfg.trader_max_fraction,
        )
        if rng.random() < 0.5:
            _, pools[idx] = swap_x_for_y(pools[idx], pools[idx].reserve_x * fraction)
        else:
            _, pools[idx] = swap_y_for_x(pools[idx], pools[idx].reserve_y * fraction)

    if cfg.n_pools > 1:
        for _ in range(cfg.arb_max_rounds):
            spots = [spot_price(p) for p in pools]
            mid = math.exp(sum(math.log(s) for s in spots) / len(spots))
            deviation, worst = max(
                (abs(s - mid) / mid, i) for i, s in enumerate(spots)
            )
            if deviation <= cfg.arb_tolerance:
                break
            pools[worst] = _move_spot_to(pools[worst], mid)

    for swap in cfg.adversary:
        if swap.step != t:
            continue
        if swap.side == "x":
            received, pools[swap.pool] = swap_x_for_y(pools[swap.pool], swap.amount)
            back_side = "y"
        else:
            received, pools[swap.pool] = swap_y_for_x(pools[swap.pool], swap.amount)
            back_side = "x"
        if swap.reverse:
            pending.append((t + 1, swap.pool, received, back_side))

    new_world = World(
        pools=tuple(pools), rng_state=rng.getstate(), pending=tuple(pending)
    )
    return new_world, tuple(spot_price(p) for p in pools)


def source_name(i: int) -> str:
    return f"pool{i + 1}"


def simulate(cfg: SimConfig) -> list[Tick]:
    """Run the whole simulation; one tick per step, timestamps 1..steps."""
    world = initial_world(cfg)
    names = [source_name(i) for i in range(cfg.n_pools)]
    ticks = []
    for t in range(1, cfg.steps + 1):
        world, prices = step(world, cfg, t)
        ticks.append(Tick(timestamp=t, prices=dict(zip(names, prices))))
    return ticks
