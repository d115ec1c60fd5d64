"""Shared helper for value-semantic use of the stdlib Mersenne generator."""

from __future__ import annotations

import random
import threading

_scratch = threading.local()


def borrow_rng(state_tuple: tuple) -> random.Random:
    """Per-thread scratch generator loaded with the caller's state.

    Constructing random.Random seeds from the OS, which would dominate the
    cost of small state updates; callers keep value semantics by storing
    getstate() tuples and loading them into this reusable instance.
    """
    rng = getattr(_scratch, "rng", None)
    if rng is None:
        rng = _scratch.rng = random.Random()
    rng.setstate(state_tuple)
    return rng
