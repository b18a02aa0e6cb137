"""Invariant graphs of thick-attractor pairs: pullbacks, thickness and complement probes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit, prange

from basinlab import _rng
from basinlab.errors import BasinlabError, InconclusiveError
from basinlab.maps1d import Map1D, f, f_inv, validate_family
from basinlab.symbolic import Cylinder, Word

from basinlab.attract.basins import Z99

MONOTONE_TOL = 1e-12
POSITIVE = 1e-6
TAIL_TOL = 1e-4
# traces are checked for monotonicity up to this depth (the check is quadratic in depth)
TRACE_DEPTH = 128


@dataclass(frozen=True)
class GraphSample:
    prefix: Word
    X: float
    trace: np.ndarray

    @property
    def depth(self) -> int:
        return len(self.trace) - 1


@njit(cache=True)
def _compose(fid0, q0, fid1, q1, past, k, x):
    # f_{past[0]} o f_{past[1]} o ... o f_{past[k-1]} (x); past[j] = omega_{-(j+1)}
    for j in range(k - 1, -1, -1):
        if past[j] == 0:
            x = f(fid0, q0, x)
        else:
            x = f(fid1, q1, x)
    return x


@njit(cache=True)
def _compose_inv(fid0, q0, fid1, q1, future, k, x):
    # f^-1_{future[0]} o ... o f^-1_{future[k-1]} (x)
    for j in range(k - 1, -1, -1):
        if future[j] == 0:
            x = f_inv(fid0, q0, x)
        else:
            x = f_inv(fid1, q1, x)
    return x


@njit(cache=True)
def _trace(fid0, q0, fid1, q1, past, depth, l):
    out = np.empty(depth + 1)
    for k in range(depth + 1):
        out[k] = _compose(fid0, q0, fid1, q1, past, k, l)
    return out


@njit(cache=True, parallel=True)
def _pullback_batch(fid0, q0, fid1, q1, keys, depths, l, trace_depth):
    # X_l at each requested depth; past symbol -(j+1) of word t comes from keys[t].
    # Also the largest increase along the trace up to trace_depth (O(trace_depth^2)).
    n = keys.shape[0]
    dmax = max(depths.max(), trace_depth)
    out = np.empty((n, depths.shape[0]))
    worst = np.full(n, -np.inf)
    for t in prange(n):
        past = np.empty(dmax, dtype=np.int64)
        for j in range(dmax):
            past[j] = _rng.symbol(np.uint64(keys[t]), -(j + 1), 2)
        for d in range(depths.shape[0]):
            out[t, d] = _compose(fid0, q0, fid1, q1, past, depths[d], l)
        prev = l
        for k in range(1, trace_depth + 1):
            x = _compose(fid0, q0, fid1, q1, past, k, l)
            worst[t] = max(worst[t], x - prev)
            prev = x
    return out, worst


def _pair(f0: Map1D, f1: Map1D):
    validate_family(f0, f1).raise_if_failed()
    if f0.family not in ("ThickF0", "AltF0"):
        raise BasinlabError(f"pullback graphs need a thick pair, got {f0.family}+{f1.family}")
    return f0.fid, f0.q, f1.fid, f1.q, f1.param("l"), f1.param("r")


def past_symbols(omega: Word, depth: int) -> np.ndarray:
    """omega_{-1}, omega_{-2}, ..., omega_{-depth}.

    A two-sided word is read at negative indices; a one-sided word is read as
    the finite past (omega_{-n}, ..., omega_{-1}), so its last symbol is omega_{-1}.
    """
    if omega.two_sided:
        return np.array([omega[-(j + 1)] for j in range(depth)], dtype=np.int64)
    if len(omega) < depth:
        raise ValueError(f"word of length {len(omega)} is shorter than depth {depth}")
    syms = omega.as_array()
    return syms[::-1][:depth].copy()


def pullback_graph(f0: Map1D, f1: Map1D, omega: Word, depth: int) -> GraphSample:
    """X_l at depth n: f_{omega_{-1}} o ... o f_{omega_{-n}} (l), with the full trace."""
    fid0, q0, fid1, q1, l, _ = _pair(f0, f1)
    past = past_symbols(omega, depth)
    trace = _trace(fid0, q0, fid1, q1, past, depth, l)
    jump = float(np.max(np.diff(trace))) if depth > 0 else 0.0
    if jump > MONOTONE_TOL:
        raise BasinlabError(f"pullback trace increases by {jump:.3g}; the pair is not a thick pair")
    x = float(trace[-1])
    if not 0.0 <= x <= l:
        raise BasinlabError(f"X_l = {x} left [0, l]")
    prefix = Word(tuple(int(s) for s in past[::-1]), 2)
    return GraphSample(prefix, x, trace)


def repeller_graph(f0: Map1D, f1: Map1D, future: Sequence[int], depth: int) -> float:
    """X_r at depth n: f^-1_{omega_0} o ... o f^-1_{omega_{n-1}} (r)."""
    fid0, q0, fid1, q1, _, r = _pair(f0, f1)
    fut = np.asarray(future, dtype=np.int64)[:depth]
    return float(_compose_inv(fid0, q0, fid1, q1, fut, len(fut), r))


@dataclass(frozen=True)
class ThicknessEstimate:
    mean_ratio: float
    ci: tuple[float, float]
    positive_fraction: float
    values: np.ndarray
    l: float
    depth: int
    tail_change: float
    max_trace_increase: float

    @property
    def measure(self) -> float:
        """Estimate of the measure of Lambda_l (mean of X_l)."""
        return self.mean_ratio * self.l

    def phi(self, x):
        """Empirical distribution function of X_l."""
        return np.searchsorted(self.values, np.asarray(x, dtype=float), side="right") / len(self.values)


def word_keys(seed: int, n_words: int) -> np.ndarray:
    return _rng.trajectory_keys(seed, _rng.STREAM_BASE, n_words)


def thickness_estimate(f0: Map1D, f1: Map1D, n_words: int, depth: int, seed: int = 0,
                       check_tail: bool = True) -> ThicknessEstimate:
    """Monte Carlo over nu_{1/2} words of X_l(omega); E[X_l] is the measure of Lambda_l.

    The tail check compares X_l at depth-10 and depth word by word and requires
    the mean absolute change to stay below 1e-4.
    """
    if depth < 40:
        raise ValueError(f"depth must be at least 40, got {depth}")
    fid0, q0, fid1, q1, l, _ = _pair(f0, f1)
    depths = np.array([depth - 10, depth], dtype=np.int64)
    xs, worst = _pullback_batch(fid0, q0, fid1, q1, word_keys(seed, n_words), depths, l,
                                min(depth, TRACE_DEPTH))
    tail = float(np.mean(np.abs(xs[:, 1] - xs[:, 0])))
    if check_tail and tail >= TAIL_TOL:
        raise InconclusiveError(f"X_l moved by {tail:.3g} between depth {depth - 10} and {depth};"
                                f" increase depth")
    vals = xs[:, 1] / l
    mean = float(vals.mean())
    rad = Z99 * float(vals.std(ddof=1)) / np.sqrt(n_words)
    return ThicknessEstimate(mean, (mean - rad, mean + rad), float(np.mean(xs[:, 1] > POSITIVE)),
                             np.sort(xs[:, 1]), l, depth, tail, float(worst.max()))


@dataclass(frozen=True)
class Ball:
    """Cylinder on omega_0 .. omega_{m-1} times a fiber interval."""

    cylinder: Cylinder
    interval: tuple[float, float]


@njit(cache=True)
def _probe(fid0, q0, fid1, q1, fixed, a, b, depth, key, tries, margin, l, r):
    m = fixed.shape[0]
    past = np.empty(depth, dtype=np.int64)
    fut = np.empty(depth, dtype=np.int64)
    biases = np.array([0.5, 0.7, 0.9, 0.99])
    c = 0
    for t in range(tries):
        bias = biases[t % 4]
        for j in range(depth):
            past[j] = 0 if _rng.uniform(key, c) < bias else 1
            c += 1
            if j < m:
                fut[j] = fixed[j]
            else:
                fut[j] = 0 if _rng.uniform(key, c) < bias else 1
                c += 1
        x = a + (b - a) * _rng.uniform(key, c)
        c += 1
        xl = _compose(fid0, q0, fid1, q1, past, depth, l)
        xr = _compose_inv(fid0, q0, fid1, q1, fut, depth, r)
        if xl + margin < x < xr - margin:
            return True, x, xl, xr
    return False, 0.0, 0.0, 0.0


@dataclass(frozen=True)
class ProbeResult:
    ball: Ball
    passed: bool
    witness: tuple[float, float, float] | None  # (x, X_l, X_r)


def complement_density_probe(f0: Map1D, f1: Map1D, balls: Sequence[Ball], depth: int = 60,
                             seed: int = 0, tries: int = 400,
                             margin: float = POSITIVE) -> list[ProbeResult]:
    """Look in every ball for a point strictly between the two graphs.

    Free past and future symbols are drawn with a bias towards 0 that grows over
    the attempts; the fiber coordinate is uniform in the ball's interval.
    """
    fid0, q0, fid1, q1, l, r = _pair(f0, f1)
    out = []
    keys = _rng.trajectory_keys(seed, _rng.STREAM_AUX, len(balls))
    for i, ball in enumerate(balls):
        fixed = ball.cylinder.fixed_symbols.as_array()
        a, b = ball.interval
        ok, x, xl, xr = _probe(fid0, q0, fid1, q1, fixed, float(a), float(b), depth,
                               np.uint64(keys[i]), tries, margin, l, r)
        out.append(ProbeResult(ball, bool(ok), (x, xl, xr) if ok else None))
    return out
