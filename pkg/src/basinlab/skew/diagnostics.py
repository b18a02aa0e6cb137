"""Fiber Lyapunov exponents and the statistical ergodicity diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from basinlab import _rng
from basinlab.symbolic import Word, baker_apply, shift_word
from basinlab.skew import _kernels as K
from basinlab.skew.core import CatalogEntry, SkewSystem, start_row

MIN_STEPS = 1000
BLOCKS = 50


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    stderr: float
    n: int

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.value - target) <= k * self.stderr

    def __str__(self) -> str:
        return f"{self.value:.6g} +- {self.stderr:.2g} (n={self.n})"


def _from_blocks(sums: np.ndarray, per: int) -> LyapunovEstimate:
    means = sums / per
    blocks = len(means)
    return LyapunovEstimate(float(means.mean()), float(means.std(ddof=1) / math.sqrt(blocks)),
                            per * blocks)


def fiber_lyapunov(system: SkewSystem, entry: CatalogEntry | str, n: int, seed: int = 0,
                   blocks: int = BLOCKS) -> LyapunovEstimate:
    """Birkhoff average of the log fiber derivative along the invariant fiber point ``entry``.

    The base point is drawn from the seeded start stream; ``n`` is rounded down
    to a multiple of ``blocks``.
    """
    if n < MIN_STEPS:
        raise ValueError(f"n={n} is below {MIN_STEPS} steps; the estimate would be too noisy")
    if blocks < 10:
        raise ValueError("at least 10 blocks are needed for the standard error")
    if isinstance(entry, str):
        entry = system.catalog[system.catalog_index(entry)]
    if entry.kind != "point":
        raise ValueError(f"catalog entry {entry.name} is not a fiber-invariant point")
    stream = _rng.Stream(seed, _rng.STREAM_START, 0)
    w, e1, e2 = stream.uniform(), stream.uniform(), stream.uniform()
    y = entry.center[1] if len(entry.center) > 1 else 0.0
    starts = start_row(w, entry.center[0], y, e1, e2)[None, :]
    per = n // blocks
    sums = K.lyapunov_kernel(system.pid, system.par, system.ipar, starts,
                             np.uint64(_rng.as_seed(seed)), 0, per * blocks, blocks)[0]
    return _from_blocks(sums, per)


@njit(cache=True)
def _ep_sums(p, key, n, blocks, window):
    # u_i is rebuilt from symbols i..i+window by the inverse branches of E_p,
    # so no precision is lost along the orbit
    per = n // blocks
    out = np.zeros(blocks)
    lp = -math.log(p)
    lq = -math.log(1.0 - p)
    for b in range(blocks):
        acc = 0.0
        for j in range(per):
            i = b * per + j
            u = 0.5
            for k in range(window - 1, -1, -1):
                if _rng.uniform(key, i + k) < p:
                    u = p * u
                else:
                    u = p + (1.0 - p) * u
            acc += lp if u < p else lq
        out[b] = acc
    return out


def ep_lyapunov(p: float, n: int, seed: int = 0, blocks: int = BLOCKS,
                window: int = 64) -> LyapunovEstimate:
    """Lyapunov exponent of the base map E_p along a Lebesgue-typical orbit."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0,1), got {p}")
    if n < MIN_STEPS:
        raise ValueError(f"n={n} is below {MIN_STEPS} steps; the estimate would be too noisy")
    key = np.uint64(_rng.derive(_rng.as_seed(seed), np.uint64(_rng.STREAM_BASE), np.uint64(0)))
    per = n // blocks
    return _from_blocks(_ep_sums(p, key, per * blocks, blocks, window), per)


def chi_apply(eta: Word, omega: Word) -> tuple[Word, Word]:
    """chi(eta, omega) = (sigma eta, sigma^{eta_0} omega); eta is read as signs (1 -> +1)."""
    if not omega.two_sided:
        raise ValueError("omega must be a two-sided word")
    e0 = eta.signs()[0] if eta.origin_offset == 0 else 2 * eta[0] - 1
    return shift_word(eta, 1), shift_word(omega, e0)


def j_apply(p: float, x, y, u, v):
    """J(x,y,u,v) = (B_p(x,y), B_{1/2}^{+1}(u,v)) if x < p, else with B_{1/2}^{-1}."""
    x = np.asarray(x, dtype=float)
    forward = x < p
    nx, ny = baker_apply(p, x, y, 1)
    fu, fv = baker_apply(0.5, u, v, 1)
    bu, bv = baker_apply(0.5, u, v, -1)
    nu = np.where(forward, fu, bu)
    nv = np.where(forward, fv, bv)
    if nu.ndim == 0:
        return float(nx), float(ny), float(nu), float(nv)
    return nx, ny, nu, nv


def birkhoff_dispersion(step_map: Callable, observable: Callable, starts, n: int) -> float:
    """Standard deviation across starts of the n-step Birkhoff averages.

    ``starts`` is a tuple of coordinate arrays (one entry per start);
    ``step_map`` maps such a tuple to the next one and ``observable`` maps it
    to an array of values.
    """
    state = tuple(np.asarray(c, dtype=float) for c in starts)
    m = len(state[0])
    if m < 20:
        raise ValueError(f"need at least 20 starts, got {m}")
    if n < 1:
        raise ValueError("n must be positive")
    acc = np.zeros(m)
    for _ in range(n):
        acc += observable(state)
        state = tuple(np.asarray(c) for c in step_map(state))
    return float(np.std(acc / n, ddof=1))
