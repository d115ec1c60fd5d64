"""Online threshold calibration for prediction sets (single-group MVP).

The score threshold tau lives on a grid of r*m points. The range [0, tau_max]
is cut into m buckets; each bucket accumulates how often predictions made
from it were covered, relative to the target miscoverage rate alpha_k. After
every outcome the algorithm recomputes per-bucket pressure weights and moves
tau to the first sign change of adjacent weights, randomizing between the two
neighbouring grid points in proportion to their weight magnitudes. Buckets
that miss too often push tau down (larger sets); buckets that cover too often
push it up.

tau is stored as an integer number of grid units measured downward from
tau_max. Bucket assignment therefore never goes through floating point, which
keeps trajectories bit-reproducible and immune to edge rounding.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

import numpy as np

from ._rng import borrow_rng

# exp overflows near 710; weight signs and branchings are unchanged by capping.
_WEIGHT_ARG_CAP = 50.0


@dataclass(frozen=True, eq=False)
class MvpState:
    """Calibration state for one source.

    ``n`` counts visits per bucket, ``v`` accumulates (alpha_k - err) per
    bucket. ``tau_units`` is the current threshold position in grid units of
    tau_max/(r*m), measured down from tau_max: 0 means tau = tau_max and r*m
    means tau = 0, and it alone decides bucket membership. The random
    generator state is carried by value so that identical seeds and update
    sequences give bit-identical trajectories.
    """

    m: int
    tau_max: float
    eta: float
    r: int
    alpha_k: float
    n: np.ndarray
    v: np.ndarray
    tau: float
    tau_units: int
    rng_state: tuple


def initial_mvp_state(
    alpha_k: float,
    m: int = 100,
    eta: float = 5.0,
    r: int = 1000,
    tau_max: float = 1.0,
    seed: int = 0,
    strict_eta: bool = False,
) -> MvpState:
    """Fresh state with zeroed counters and tau = 0 (accept-everything prior).

    ``strict_eta`` enforces the learning-rate band sqrt(ln m / 6.8 m) <= eta
    <= sqrt(ln m / 6.6 m) under which the worst-case calibration bound is
    proved; the default eta = 5 is the empirically safe choice.
    """
    if m < 2:
        raise ValueError(f"need at least two threshold buckets, got m={m}")
    if r < 1:
        raise ValueError(f"grid refinement must be >= 1, got r={r}")
    if not 0 < alpha_k < 1:
        raise ValueError(f"target miscoverage must be in (0, 1), got {alpha_k}")
    if tau_max <= 0:
        raise ValueError(f"tau_max must be positive, got {tau_max}")
    if strict_eta:
        lo, hi = calibration_eta_range(m)
        if not lo <= eta <= hi:
            raise ValueError(f"eta={eta} outside strict range [{lo:.6f}, {hi:.6f}] for m={m}")
    rng = random.Random(seed)
    return MvpState(
        m=m,
        tau_max=tau_max,
        eta=eta,
        r=r,
        alpha_k=alpha_k,
        n=np.zeros(m),
        v=np.zeros(m),
        tau=0.0,
        tau_units=r * m,
        rng_state=rng.getstate(),
    )


def calibration_eta_range(m: int) -> tuple[float, float]:
    """Learning-rate band for which the worst-case calibration bound holds."""
    return math.sqrt(math.log(m) / (6.8 * m)), math.sqrt(math.log(m) / (6.6 * m))


def f_potential(n: float) -> float:
    """Visit-count potential sqrt((n+1) * log2(n+2)^2) used to damp weights."""
    if n < 0:
        raise ValueError(f"visit count must be >= 0, got {n}")
    return math.sqrt((n + 1.0) * math.log2(n + 2.0) ** 2)


def bin_index(state: MvpState, tau: float) -> int:
    """1-based bucket of a threshold value: bucket i spans [tau_max*(i-1)/m, tau_max*i/m).

    The last bucket is closed, so tau = tau_max maps to m.
    """
    if not 0 <= tau <= state.tau_max:
        raise ValueError(f"threshold must be in [0, {state.tau_max}], got {tau}")
    if tau >= state.tau_max:
        return state.m
    return int(tau * state.m / state.tau_max) + 1


def _bucket_of_units(state: MvpState, units: int) -> int:
    # 0-based bucket counted down from tau_max; grid point i*r sits at the
    # bottom edge of bucket i, matching the scan indices below.
    return min(units // state.r, state.m - 1)


def mvp_update(state: MvpState, covered: bool) -> MvpState:
    """Record one coverage outcome for the current tau and emit the next tau.

    The outcome must refer to the prediction made with ``state.tau``. Buckets
    are indexed in the direction the threshold formula walks (down from
    tau_max), so the weight scan and the accumulators line up.
    """
    err = 0.0 if covered else 1.0
    here = _bucket_of_units(state, state.tau_units)
    n = state.n.copy()
    v = state.v.copy()
    n[here] += 1.0
    v[here] += state.alpha_k - err

    f = np.sqrt((n + 1.0) * np.log2(n + 2.0) ** 2)
    arg = np.clip(state.eta * v / f, -_WEIGHT_ARG_CAP, _WEIGHT_ARG_CAP)
    w = np.exp(arg) - np.exp(-arg)

    rng = borrow_rng(state.rng_state)

    sign_changes = np.nonzero(w[1:] * w[:-1] <= 0.0)[0]
    if sign_changes.size:
        i = int(sign_changes[0]) + 1
        total = abs(w[i]) + abs(w[i - 1])
        b = 1.0 if total == 0.0 else abs(w[i]) / total
        if rng.random() <= b:
            units = i * state.r - 1
        else:
            units = i * state.r
        # tau_max != 1 can push the printed mapping outside [0, tau_max]
        raw = 1.0 - state.tau_max * units / (state.r * state.m)
        tau = min(max(raw, 0.0), state.tau_max)
    elif bool(np.any(w > 0.0)):
        units = 0
        tau = state.tau_max
    else:
        units = state.r * state.m
        tau = 0.0

    return replace(state, n=n, v=v, tau=tau, tau_units=units, rng_state=rng.getstate())
