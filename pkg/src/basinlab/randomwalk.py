"""Random walks along orbits with position-dependent step probabilities.

A walk at ``x`` moves to ``f(x)`` with probability ``p(x)`` and to ``f^{-1}(x)``
otherwise.  Along a single orbit this is a nearest-neighbour walk on the orbit
index, which is what :class:`DiscreteChain` stores.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit, prange
from scipy.linalg import solve_banded

from basinlab import _rng
from basinlab.errors import ConstructionError, ConvergenceError
from basinlab.maps1d import Map1D, apply
from basinlab.symbolic import Word

PROFILE_KINDS = {"Constant": 0, "Cosine": 1, "PiecewiseLinear": 2}


@njit(cache=True)
def prof_eval(kind, q, x):
    """p(x) for profile ``kind`` with parameter vector ``q``."""
    if kind == 0:
        return q[0]
    if kind == 1:
        # 1/2 - b cos(2 pi x), with cos(2 pi x) = sin(2 pi x + pi/2)
        t = 2.0 * x + 0.5
        n = np.floor(t + 0.5)
        s = math.sin(math.pi * (t - n))
        if n % 2.0 != 0.0:
            s = -s
        return 0.5 - q[0] * s
    pl, pr, l, r = q[0], q[1], q[2], q[3]
    if x <= l:
        return pl
    if x >= r:
        return pr
    return pl + (pr - pl) * (x - l) / (r - l)


@dataclass(frozen=True)
class ProbProfile:
    """Step probability p(x) of moving forward along the orbit.

    ``Constant(p)``, ``Cosine(b)`` meaning 1/2 - b cos(2 pi x), and
    ``PiecewiseLinear(p_l, p_r, l, r)``.
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        want = {"Constant": 1, "Cosine": 1, "PiecewiseLinear": 4}
        if self.kind not in want:
            raise ConstructionError(f"unknown profile {self.kind!r}")
        if len(self.params) != want[self.kind]:
            raise ConstructionError(f"{self.kind} takes {want[self.kind]} parameters")
        if self.kind == "Constant" and not 0.0 < self.params[0] < 1.0:
            raise ConstructionError(f"Constant profile needs p in (0,1), got {self.params[0]}")
        if self.kind == "Cosine" and not 0.0 < self.params[0] < 0.5:
            raise ConstructionError(f"Cosine profile needs b in (0,1/2), got {self.params[0]}")
        if self.kind == "PiecewiseLinear":
            pl, pr, l, r = self.params
            if not (0.0 < pl < 1.0 and 0.0 < pr < 1.0):
                raise ConstructionError("PiecewiseLinear values must lie in (0,1)")
            if not 0.0 <= l < r <= 1.0:
                raise ConstructionError("PiecewiseLinear needs 0 <= l < r <= 1")

    @classmethod
    def constant(cls, p: float) -> "ProbProfile":
        return cls("Constant", (p,))

    @classmethod
    def cosine(cls, b: float) -> "ProbProfile":
        return cls("Cosine", (b,))

    @classmethod
    def piecewise_linear(cls, p_l: float, p_r: float, l: float, r: float) -> "ProbProfile":
        return cls("PiecewiseLinear", (p_l, p_r, l, r))

    @property
    def kid(self) -> int:
        return PROFILE_KINDS[self.kind]

    @property
    def q(self) -> np.ndarray:
        out = np.zeros(4)
        out[: len(self.params)] = self.params
        return out

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        out = _prof_array(self.kid, self.q, np.ascontiguousarray(arr.reshape(-1))).reshape(arr.shape)
        return float(out) if arr.ndim == 0 else out

    def signed(self, a: int, x):
        """p_a(x): p(x) for a = +1, 1 - p(x) for a = -1."""
        v = self(x)
        return v if a == 1 else 1.0 - v


@njit(cache=True)
def _prof_array(kind, q, xs):
    out = np.empty_like(xs)
    for i in range(xs.shape[0]):
        out[i] = prof_eval(kind, q, xs[i])
    return out


def walk_step(f: Map1D, p: ProbProfile, x: float, stream: _rng.Stream) -> tuple[int, float]:
    """One step of the walk; consumes exactly one uniform variate of ``stream``."""
    eta = 1 if stream.uniform() < p(x) else -1
    return eta, apply(f, x, eta)


def _as_signs(a) -> tuple[int, ...]:
    if isinstance(a, Word):
        return a.signs()
    signs = tuple(int(s) for s in a)
    if any(s not in (-1, 1) for s in signs):
        raise ValueError("sign words use the symbols -1 and +1")
    return signs


def zeta_cylinder(f: Map1D, p: ProbProfile, x: float, a) -> float:
    """Probability that the walk from ``x`` performs the signs ``a`` first.

    ``a`` is a sequence over {-1, +1} or a binary :class:`Word` (0 read as -1).
    """
    prob = 1.0
    for s in _as_signs(a):
        prob *= p.signed(s, x)
        x = apply(f, x, s)
    return prob


@dataclass
class DiscreteChain:
    """Nearest-neighbour chain on orbit sites.

    ``up[k]`` is the probability of moving from site k to k+1.  With
    ``boundary='absorbing'`` the first and last sites absorb; with ``'cyclic'``
    site indices wrap around.
    """

    sites: np.ndarray
    up: np.ndarray
    boundary: str = "absorbing"
    origin: int = 0

    def __post_init__(self):
        self.sites = np.asarray(self.sites, dtype=float)
        self.up = np.asarray(self.up, dtype=float)
        if self.sites.shape != self.up.shape or self.sites.ndim != 1:
            raise ValueError("sites and up-weights must be 1-D arrays of equal length")
        if self.boundary not in ("absorbing", "cyclic"):
            raise ValueError("boundary must be 'absorbing' or 'cyclic'")
        inner = self.up[1:-1] if self.boundary == "absorbing" else self.up
        if len(self.sites) < (3 if self.boundary == "absorbing" else 2):
            raise ValueError("chain too short")
        if np.any((inner <= 0.0) | (inner >= 1.0)):
            raise ValueError("transition weights must lie in (0,1)")

    def __len__(self) -> int:
        return len(self.sites)

    def weight(self, k: int, a: int) -> float:
        w = self.up[k % len(self)]
        return w if a == 1 else 1.0 - w

    def zeta(self, k: int, a) -> float:
        """Cylinder probability of the signs ``a`` for the walk started at site k."""
        n = len(self)
        prob = 1.0
        for s in _as_signs(a):
            if self.boundary == "absorbing" and not 0 < k < n - 1:
                raise IndexError("walk left the chain through an absorbing end")
            prob *= self.weight(k, s)
            k = (k + s) % n if self.boundary == "cyclic" else k + s
        return prob

    def to_rows(self, mass: np.ndarray | None = None):
        for k in range(len(self)):
            row = [k - self.origin, self.sites[k], self.up[k]]
            if mass is not None:
                row.append(mass[k])
            yield row


@dataclass(frozen=True)
class StationaryMeasure:
    mass: np.ndarray
    residual: float
    sweeps: int = 0


def absorption_solve(chain: DiscreteChain) -> np.ndarray:
    """Probability of absorption at the last site, for every site of the chain.

    Solves P(k) = up_k P(k+1) + (1 - up_k) P(k-1) with P(first)=0, P(last)=1.
    The returned array covers all sites, ends included.
    """
    if chain.boundary != "absorbing":
        raise ValueError("absorption_solve needs an absorbing chain")
    w = chain.up[1:-1]
    m = len(w)
    # banded form of -(1-w_k) P_{k-1} + P_k - w_k P_{k+1} = rhs
    ab = np.zeros((3, m))
    ab[0, 1:] = -w[:-1]
    ab[1, :] = 1.0
    ab[2, :-1] = -(1.0 - w[1:])
    rhs = np.zeros(m)
    rhs[-1] = w[-1]
    inner = solve_banded((1, 1), ab, rhs)
    assert np.all(np.isfinite(inner)), "singular absorption system"
    return np.concatenate([[0.0], inner, [1.0]])


def build_orbit_chain(f: Map1D, p: ProbProfile, x0: float, M: int = 50) -> DiscreteChain:
    """Chain on the orbit sites f^n(x0), n = -M..M, with absorbing ends.

    The right end stands for the attracting fixed point, the left end for the
    repelling one.  Far orbit points may coincide with a pole in floating point;
    that does not affect the chain, whose weights only depend on p at the sites.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    if abs(apply(f, x0, 1) - x0) <= 1e-9:
        raise ConstructionError(f"x0={x0} is within 1e-9 of a fixed point of {f.to_config()}")
    fwd = [x0]
    bwd = []
    x = x0
    for _ in range(M):
        x = apply(f, x, 1)
        fwd.append(x)
    x = x0
    for _ in range(M):
        x = apply(f, x, -1)
        bwd.append(x)
    sites = np.array(bwd[::-1] + fwd)
    return DiscreteChain(sites, p(sites), "absorbing", origin=M)


def rotation_chain(n: int, p: ProbProfile) -> DiscreteChain:
    """Cyclic chain on the orbit k/n of the circle rotation by 1/n."""
    sites = np.arange(n) / n
    return DiscreteChain(sites, p(sites), "cyclic")


def transfer(chain: DiscreteChain, m: np.ndarray) -> np.ndarray:
    """Markov transfer of mass on a cyclic chain: the right side of the stationarity equation."""
    w = chain.up
    return np.roll(w * m, 1) + np.roll((1.0 - w) * m, -1)


def stationary_power_iteration(chain: DiscreteChain, tol: float = 1e-12,
                               max_sweeps: int = 100_000) -> StationaryMeasure:
    """Stationary measure of a cyclic chain by power iteration from uniform.

    Iterates the lazy operator (I + T)/2, which has the same fixed points as T
    but no period-two oscillation on even cycles.  The residual reported is the
    L1 defect of T itself.
    """
    if chain.boundary != "cyclic":
        raise ValueError("stationary_power_iteration needs a cyclic chain")
    m = np.full(len(chain), 1.0 / len(chain))
    res = float(np.abs(transfer(chain, m) - m).sum())
    sweeps = 0
    while res >= tol and sweeps < max_sweeps:
        m = 0.5 * (m + transfer(chain, m))
        m /= m.sum()
        sweeps += 1
        if sweeps % 16 == 0 or sweeps == max_sweeps:
            res = float(np.abs(transfer(chain, m) - m).sum())
    res = float(np.abs(transfer(chain, m) - m).sum())
    if res >= tol:
        raise ConvergenceError(f"power iteration stopped at residual {res:.3g}", res)
    return StationaryMeasure(m, res, sweeps)


def sign_words(depth: int):
    return itertools.product((-1, 1), repeat=depth)


def verify_proposition(chain: DiscreteChain, m: np.ndarray, depth: int = 3) -> tuple[float, float]:
    """(stationarity residual, invariance residual) of a candidate measure m.

    The invariance residual is the largest |mu_m(G^-1(C x {j})) - mu_m(C x {j})|
    over sign cylinders C of depth 0..``depth`` and sites j, where mu_m is the
    measure integrating the walk's cylinder probabilities against m.
    """
    if chain.boundary != "cyclic":
        raise ValueError("verify_proposition needs a cyclic chain")
    m = np.asarray(m, dtype=float)
    n = len(chain)
    stat = float(np.abs(transfer(chain, m) - m).sum())
    w = chain.up
    inv = 0.0
    for d in range(depth + 1):
        for word in sign_words(d):
            z = np.array([chain.zeta(k, word) for k in range(n)])
            direct = m * z
            # preimage of C x {j}: from j-1 with a forward step, from j+1 with a backward step
            pre = (np.roll(m * w, 1) + np.roll(m * (1.0 - w), -1)) * z
            inv = max(inv, float(np.max(np.abs(pre - direct))))
    return stat, inv


@njit(cache=True, parallel=True)
def _mc_absorb(up, start, keys, max_steps):
    n = keys.shape[0]
    last = up.shape[0] - 1
    out = np.zeros(n, dtype=np.int64)
    for t in prange(n):
        key = np.uint64(keys[t])
        k = start
        i = 0
        while 0 < k < last and i < max_steps:
            if _rng.uniform(key, i) < up[k]:
                k += 1
            else:
                k -= 1
            i += 1
        if k == last:
            out[t] = 1
        elif k == 0:
            out[t] = -1
    return out


def monte_carlo_absorption(chain: DiscreteChain, start: int, trials: int, seed: int,
                           max_steps: int = 10_000_000) -> tuple[float, float]:
    """Fraction of walks from ``start`` absorbed at the last site, and its binomial stderr."""
    keys = _rng.trajectory_keys(seed, _rng.STREAM_AUX, trials)
    res = _mc_absorb(np.ascontiguousarray(chain.up), int(start), keys, max_steps)
    hits = int(np.sum(res == 1))
    frac = hits / trials
    return frac, math.sqrt(max(frac * (1.0 - frac), 1e-300) / trials)


def perturb(m: np.ndarray, eps: float = 0.01) -> np.ndarray:
    """m(k)(1 + eps (-1)^k), the alternating perturbation used for negative checks."""
    k = np.arange(len(m))
    return m * (1.0 + eps * (-1.0) ** k)


def site_of(chain: DiscreteChain, n: int) -> int:
    """Array index of orbit index n."""
    return chain.origin + n


def absorption_at(f: Map1D, p: ProbProfile, x0: float, M: int = 50) -> float:
    chain = build_orbit_chain(f, p, x0, M)
    return float(absorption_solve(chain)[chain.origin])


def truncation_drift(f: Map1D, p: ProbProfile, x0: float, m_lo: int = 40, m_hi: int = 60) -> float:
    return abs(absorption_at(f, p, x0, m_hi) - absorption_at(f, p, x0, m_lo))


def as_profile(spec: Sequence | ProbProfile) -> ProbProfile:
    if isinstance(spec, ProbProfile):
        return spec
    kind, *params = spec
    return ProbProfile(kind, tuple(params))
