"""Constraint-validated one-dimensional diffeomorphism families.

Families (domain in brackets):

* ``NorthSouth(a)`` [circle]: ``x + a sin(2 pi x)``; repeller 0, attractor 1/2.
* ``KanFiber(u)`` [interval]: ``x + cos(2 pi u)/32 * x(1-x)`` with frozen base point u.
* ``ThickF0(c0)``, ``ThickF1(l, r, c1)`` [interval]: the thick attractor/repeller pair.
* ``AltF0(m, c0)``, ``AltF1(l, r, c1)`` [interval]: the pair with two thick attractors.
* ``PhiShift(a, sign, l, r)`` [interval]: push up (sign=+1) or down (sign=-1) on (l, r),
  identity elsewhere.
* ``Block(c, t_fix, blocks)`` [circle]: identity outside ``blocks`` equal sub-arcs,
  inside each arc a map with one attracting fixed point at relative position t_fix.

Evaluation kernels are compiled with numba and shared with the trajectory engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from basinlab.errors import ConstructionError, ConvergenceError

FAMILIES = {
    "NorthSouth": (0, ("a",)),
    "KanFiber": (1, ("u",)),
    "ThickF0": (2, ("c0",)),
    "ThickF1": (3, ("l", "r", "c1")),
    "AltF0": (4, ("m", "c0")),
    "AltF1": (5, ("l", "r", "c1")),
    "PhiShift": (6, ("a", "sign", "l", "r")),
    "Block": (7, ("c", "t_fix", "blocks")),
}
CIRCLE_FAMILIES = {"NorthSouth", "Block"}

NEWTON_TOL = 1e-12
NEWTON_MAXIT = 60

# block layout inside each of the K arcs: active part [BLOCK_LO, BLOCK_HI] of the arc
BLOCK_LO = 0.1
BLOCK_HI = 0.9


@njit(cache=True)
def sinpi(t):
    """sin(pi t) with exact zeros at integers."""
    n = np.floor(t + 0.5)
    r = t - n
    s = math.sin(math.pi * r)
    if n % 2.0 != 0.0:
        return -s
    return s


@njit(cache=True)
def cospi(t):
    return sinpi(t + 0.5)


@njit(cache=True)
def _bump(t):
    # 16 t^2 (1-t)^2 on [0,1], zero outside
    if t <= 0.0 or t >= 1.0:
        return 0.0
    return 16.0 * t * t * (1.0 - t) * (1.0 - t)


@njit(cache=True)
def _dbump(t):
    if t <= 0.0 or t >= 1.0:
        return 0.0
    return 32.0 * t * (1.0 - t) * (1.0 - 2.0 * t)


@njit(cache=True)
def _blk(t, c, a):
    # local ingredient map: t - c t^2 (1-t)^2 (t - a)
    return t - c * t * t * (1.0 - t) * (1.0 - t) * (t - a)


@njit(cache=True)
def _dblk(t, c, a):
    q = t * t * (1.0 - t) * (1.0 - t)
    dq = 2.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
    return 1.0 - c * (dq * (t - a) + q)


@njit(cache=True)
def _wrap(x):
    y = x - np.floor(x)
    if y >= 1.0:
        y = 0.0
    return y


@njit(cache=True)
def f_lift(fid, q, x):
    """Forward map; circle families return an unreduced lift."""
    if fid == 0:
        return x + q[0] * sinpi(2.0 * x)
    if fid == 1:
        return x + cospi(2.0 * q[0]) / 32.0 * x * (1.0 - x)
    if fid == 2:
        return x - q[0] * x * (1.0 - x)
    if fid == 3:
        return x + q[2] * x * (x - q[0]) * (x - q[1]) * (1.0 - x)
    if fid == 4:
        return x + q[1] * x * (x - q[0]) * (1.0 - x)
    if fid == 5:
        d = x - q[1]
        return x - q[2] * x * (x - q[0]) * d * d * (1.0 - x)
    if fid == 6:
        w = q[3] - q[2]
        return x + q[1] * q[0] * w * _bump((x - q[2]) / w)
    if fid == 7:
        k = q[2]
        y = x * k
        i = np.floor(y)
        t = (y - i - BLOCK_LO) / (BLOCK_HI - BLOCK_LO)
        if t <= 0.0 or t >= 1.0:
            return x
        t2 = _blk(t, q[0], q[1])
        return (i + BLOCK_LO + (BLOCK_HI - BLOCK_LO) * t2) / k
    return np.nan


@njit(cache=True)
def df(fid, q, x):
    if fid == 0:
        return 1.0 + 2.0 * math.pi * q[0] * cospi(2.0 * x)
    if fid == 1:
        return 1.0 + cospi(2.0 * q[0]) / 32.0 * (1.0 - 2.0 * x)
    if fid == 2:
        return 1.0 - q[0] * (1.0 - 2.0 * x)
    if fid == 3:
        l, r = q[0], q[1]
        # d/dx of x(x-l)(x-r)(1-x)
        a = x * (x - l)
        b = (x - r) * (1.0 - x)
        da = 2.0 * x - l
        db = (1.0 - x) - (x - r)
        return 1.0 + q[2] * (da * b + a * db)
    if fid == 4:
        m = q[0]
        # d/dx of x(x-m)(1-x) = -3x^2 + 2(1+m)x - m
        return 1.0 + q[1] * (-3.0 * x * x + 2.0 * (1.0 + m) * x - m)
    if fid == 5:
        l, r = q[0], q[1]
        a = x * (x - l) * (1.0 - x)
        da = (x - l) * (1.0 - x) + x * (1.0 - x) - x * (x - l)
        d = x - r
        return 1.0 - q[2] * (da * d * d + a * 2.0 * d)
    if fid == 6:
        w = q[3] - q[2]
        return 1.0 + q[1] * q[0] * _dbump((x - q[2]) / w)
    if fid == 7:
        k = q[2]
        y = _wrap(x) * k
        i = np.floor(y)
        t = (y - i - BLOCK_LO) / (BLOCK_HI - BLOCK_LO)
        if t <= 0.0 or t >= 1.0:
            return 1.0
        return _dblk(t, q[0], q[1])
    return np.nan


@njit(cache=True)
def is_circle(fid):
    return fid == 0 or fid == 7


@njit(cache=True)
def f(fid, q, x):
    y = f_lift(fid, q, x)
    if is_circle(fid):
        return _wrap(y)
    return y


@njit(cache=True)
def _newton(fid, q, y, lo, hi, x0):
    # safeguarded Newton for the increasing lift on [lo, hi]
    x = x0
    for _ in range(NEWTON_MAXIT):
        g = f_lift(fid, q, x) - y
        if g == 0.0:
            return x
        if g > 0.0:
            hi = x
        else:
            lo = x
        d = df(fid, q, x)
        step = g / d if d > 0.0 else np.inf
        xn = x - step
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) < NEWTON_TOL:
            # one more Newton correction from the converged iterate
            g2 = f_lift(fid, q, xn) - y
            d2 = df(fid, q, xn)
            if d2 > 0.0:
                xc = xn - g2 / d2
                if lo <= xc <= hi:
                    return xc
            return xn
        x = xn
    return np.nan


@njit(cache=True)
def f_inv(fid, q, y):
    if fid == 0:
        a = abs(q[0])
        yy = _wrap(y)
        x = _newton(fid, q, yy, yy - a - 1e-15, yy + a + 1e-15, yy)
        return _wrap(x)
    if fid == 7:
        k = q[2]
        yy = _wrap(y)
        z = yy * k
        i = np.floor(z)
        t = (z - i - BLOCK_LO) / (BLOCK_HI - BLOCK_LO)
        if t <= 0.0 or t >= 1.0:
            return yy
        lo = (i + BLOCK_LO) / k
        hi = (i + BLOCK_HI) / k
        return _wrap(_newton(fid, q, yy, lo, hi, yy))
    if fid == 6:
        if y <= q[2] or y >= q[3]:
            return y
        return _newton(fid, q, y, q[2], q[3], y)
    if y <= 0.0 or y >= 1.0:
        return y
    return _newton(fid, q, y, 0.0, 1.0, y)


@njit(cache=True)
def apply_k(fid, q, x, power):
    if power > 0:
        return f(fid, q, x)
    return f_inv(fid, q, x)


@njit(cache=True)
def _apply_array(fid, q, xs, power):
    out = np.empty_like(xs)
    for i in range(xs.shape[0]):
        out[i] = apply_k(fid, q, xs[i], power)
    return out


@njit(cache=True)
def _deriv_array(fid, q, xs):
    out = np.empty_like(xs)
    for i in range(xs.shape[0]):
        out[i] = df(fid, q, xs[i])
    return out


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    witness: float

    def __str__(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} (witness {self.witness:.6g})"


@dataclass(frozen=True)
class ValidationReport:
    family: str
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def raise_if_failed(self) -> "ValidationReport":
        if not self.passed:
            names = "; ".join(str(c) for c in self.failures)
            raise ConstructionError(f"{self.family}: {names}", self.failures)
        return self

    def render(self) -> str:
        return "\n".join([f"validation {self.family}"] + [f"  {c}" for c in self.checks])


@dataclass(frozen=True)
class Map1D:
    """An orientation-preserving diffeomorphism from one of the named families.

    Construct through :meth:`make` or the helper constructors; construction runs
    :func:`validate_family` and refuses parameterizations that fail it.
    """

    family: str
    params: tuple[float, ...]
    report: ValidationReport = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConstructionError(f"unknown map family {self.family!r}")
        names = FAMILIES[self.family][1]
        if len(self.params) != len(names):
            raise ConstructionError(f"{self.family} takes parameters {names}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        report = validate_family(self)
        report.raise_if_failed()
        object.__setattr__(self, "report", report)

    @classmethod
    def make(cls, family: str, **params) -> "Map1D":
        names = FAMILIES[family][1]
        missing = [n for n in names if n not in params]
        if missing:
            raise ConstructionError(f"{family} missing parameters {missing}")
        return cls(family, tuple(params[n] for n in names))

    @property
    def fid(self) -> int:
        return FAMILIES[self.family][0]

    @property
    def q(self) -> np.ndarray:
        out = np.zeros(4)
        out[: len(self.params)] = self.params
        return out

    @property
    def circle(self) -> bool:
        return self.family in CIRCLE_FAMILIES

    def param(self, name: str) -> float:
        return self.params[FAMILIES[self.family][1].index(name)]

    def __call__(self, x):
        return apply(self, x, +1)

    def inverse(self, x):
        return apply(self, x, -1)

    def to_config(self) -> str:
        names = FAMILIES[self.family][1]
        return f"{self.family}(" + ", ".join(f"{n}={v!r}" for n, v in zip(names, self.params)) + ")"


def north_south(a: float = 0.1) -> Map1D:
    return Map1D("NorthSouth", (a,))


def kan_fiber(u: float) -> Map1D:
    return Map1D("KanFiber", (u,))


def thick_f0(c0: float = 0.2) -> Map1D:
    return Map1D("ThickF0", (c0,))


def thick_f1(l: float = 0.3, r: float = 0.7, c1: float = 1.5) -> Map1D:
    return Map1D("ThickF1", (l, r, c1))


def alt_f0(m: float = 0.5, c0: float = 0.25) -> Map1D:
    return Map1D("AltF0", (m, c0))


def alt_f1(l: float = 0.3, r: float = 0.7, c1: float = 3.0) -> Map1D:
    return Map1D("AltF1", (l, r, c1))


def phi_shift(a: float = 0.25, sign: int = 1, l: float = 0.3, r: float = 0.7) -> Map1D:
    return Map1D("PhiShift", (a, sign, l, r))


def block_map(c: float = 3.0, t_fix: float = 0.35, blocks: int = 2) -> Map1D:
    return Map1D("Block", (c, t_fix, blocks))


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def apply(m: Map1D, x, power: int = 1):
    """Evaluate ``m`` (power=+1) or its inverse (power=-1)."""
    if power not in (1, -1):
        raise ValueError("power must be +1 or -1")
    arr, scalar = _as_array(x)
    flat = np.ascontiguousarray(arr.reshape(-1))
    if not m.circle and np.any((flat < 0.0) | (flat > 1.0)):
        raise ValueError(f"{m.family} is defined on [0,1]")
    out = _apply_array(m.fid, m.q, flat, power)
    if np.any(np.isnan(out)):
        bad = flat[np.isnan(out)][0]
        raise ConvergenceError(
            f"inverse of {m.to_config()} did not converge at y={bad!r} "
            f"within {NEWTON_MAXIT} iterations")
    out = out.reshape(arr.shape)
    return float(out) if scalar else out


def deriv(m: Map1D, x):
    arr, scalar = _as_array(x)
    out = _deriv_array(m.fid, m.q, np.ascontiguousarray(arr.reshape(-1))).reshape(arr.shape)
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# validation

GRID = 10_000


def _grid(lo=0.0, hi=1.0, n=GRID):
    return np.linspace(lo, hi, n + 1)[1:-1]


def _raw_eval(fid, q, xs):
    return _apply_array(fid, q, np.ascontiguousarray(xs), 1)


def _sign_check(name, fid, q, lo, hi, sign, circle=False):
    xs = _grid(lo, hi, 2000)
    d = np.array([f_lift(fid, q, x) for x in xs]) - xs if circle else _raw_eval(fid, q, xs) - xs
    witness = float(np.min(sign * d))
    return Check(name, witness > 0.0, witness)


def _single_checks(m: Map1D) -> list[Check]:
    fid, q, p = m.fid, m.q, m.params
    xs = _grid()
    d = _deriv_array(fid, q, xs)
    checks = [Check("strictly increasing on the grid", float(d.min()) > 0.0, float(d.min()))]
    fam = m.family
    if fam == "NorthSouth":
        a = p[0]
        checks.append(Check("a in (0, 1/(2 pi))", 0.0 < a < 1.0 / (2 * math.pi), a))
        checks.append(Check("f(0) = 0", f(fid, q, 0.0) == 0.0, f(fid, q, 0.0)))
        checks.append(Check("f(1/2) = 1/2", f(fid, q, 0.5) == 0.5, f(fid, q, 0.5)))
        checks.append(_sign_check("f > x on (0,1/2)", fid, q, 0.0, 0.5, 1, True))
        checks.append(_sign_check("f < x on (1/2,1)", fid, q, 0.5, 1.0, -1, True))
        checks.append(Check("deriv(p_N) > 1", df(fid, q, 0.0) > 1.0, df(fid, q, 0.0)))
        checks.append(Check("deriv(p_S) < 1", df(fid, q, 0.5) < 1.0, df(fid, q, 0.5)))
    elif fam == "KanFiber":
        checks.append(Check("boundary 0 fixed", f(fid, q, 0.0) == 0.0, f(fid, q, 0.0)))
        checks.append(Check("boundary 1 fixed", f(fid, q, 1.0) == 1.0, f(fid, q, 1.0)))
    elif fam == "ThickF0":
        checks.append(Check("c0 in (0,1)", 0.0 < p[0] < 1.0, p[0]))
        checks.append(_sign_check("f0 < x on (0,1)", fid, q, 0.0, 1.0, -1))
    elif fam == "ThickF1":
        l, r, _ = p
        checks.append(Check("0 < l < r < 1", 0.0 < l < r < 1.0, r - l))
        if 0.0 < l < r < 1.0:
            checks.append(Check("f1(l) = l", f(fid, q, l) == l, f(fid, q, l) - l))
            checks.append(Check("f1(r) = r", f(fid, q, r) == r, f(fid, q, r) - r))
            checks.append(_sign_check("f1 > x on (0,l)", fid, q, 0.0, l, 1))
            checks.append(_sign_check("f1 < x on (l,r)", fid, q, l, r, -1))
            checks.append(_sign_check("f1 > x on (r,1)", fid, q, r, 1.0, 1))
    elif fam == "AltF0":
        m_ = p[0]
        checks.append(Check("0 < m < 1", 0.0 < m_ < 1.0, m_))
        if 0.0 < m_ < 1.0:
            checks.append(Check("f0(m) = m", f(fid, q, m_) == m_, f(fid, q, m_) - m_))
            checks.append(_sign_check("f0 < x on (0,m)", fid, q, 0.0, m_, -1))
            checks.append(_sign_check("f0 > x on (m,1)", fid, q, m_, 1.0, 1))
    elif fam == "AltF1":
        l, r, _ = p
        checks.append(Check("0 < l < r < 1", 0.0 < l < r < 1.0, r - l))
        if 0.0 < l < r < 1.0:
            checks.append(Check("f1(l) = l", f(fid, q, l) == l, f(fid, q, l) - l))
            checks.append(Check("f1(r) = r (tangential)", f(fid, q, r) == r and df(fid, q, r) == 1.0,
                                df(fid, q, r) - 1.0))
            checks.append(_sign_check("f1 > x on (0,l)", fid, q, 0.0, l, 1))
            checks.append(_sign_check("f1 < x on (l,r)", fid, q, l, r, -1))
            checks.append(_sign_check("f1 < x on (r,1)", fid, q, r, 1.0, -1))
    elif fam == "PhiShift":
        a, sign, l, r = p
        checks.append(Check("sign is +1 or -1", sign in (1.0, -1.0), sign))
        checks.append(Check("0 <= l < r <= 1", 0.0 <= l < r <= 1.0, r - l))
        if sign in (1.0, -1.0) and 0.0 <= l < r <= 1.0:
            checks.append(Check("a > 0", a > 0.0, a))
            checks.append(_sign_check("push direction on (l,r)", fid, q, l, r, sign))
            outside = np.concatenate([_grid(0.0, l, 200), _grid(r, 1.0, 200)])
            dev = float(np.max(np.abs(_raw_eval(fid, q, outside) - outside))) if outside.size else 0.0
            checks.append(Check("identity outside (l,r)", dev == 0.0, dev))
    elif fam == "Block":
        c, t_fix, k = p
        checks.append(Check("blocks is a positive integer", k >= 1 and k == int(k), k))
        checks.append(Check("0 < t_fix < 1", 0.0 < t_fix < 1.0, t_fix))
        if k >= 1 and k == int(k) and 0.0 < t_fix < 1.0:
            ts = _grid(0.0, t_fix, 500)
            up = min(_blk(t, c, t_fix) - t for t in ts)
            ts = _grid(t_fix, 1.0, 500)
            down = min(t - _blk(t, c, t_fix) for t in ts)
            checks.append(Check("pushes toward t_fix inside each block", min(up, down) > 0.0,
                                min(up, down)))
    return checks


def block_interval(t_lo: float, t_hi: float, i: int, k: int) -> tuple[float, float]:
    """Absolute sub-arc of block ``i`` (of ``k``) between relative positions."""
    span = BLOCK_HI - BLOCK_LO
    return (i + BLOCK_LO + span * t_lo) / k, (i + BLOCK_LO + span * t_hi) / k


def _pair_checks(f0: Map1D, f1: Map1D) -> list[Check]:
    checks = []
    pair = (f0.family, f1.family)
    if pair == ("ThickF0", "ThickF1"):
        l, r, _ = f1.params
        p0 = deriv(f0, 0.0) * deriv(f1, 0.0)
        p1 = deriv(f0, 1.0) * deriv(f1, 1.0)
        checks.append(Check("f0'(0) f1'(0) > 1", p0 > 1.0, p0))
        checks.append(Check("f0'(1) f1'(1) < 1 (inverse product at 1 > 1)", p1 < 1.0, p1))
        img = max(f0(l), f1(l))
        checks.append(Check("I_l = [0,l] forward invariant", img <= l, l - img))
        inv = min(f0.inverse(r), f1.inverse(r))
        checks.append(Check("I_r = [r,1] invariant under inverses", inv >= r, inv - r))
    elif pair == ("AltF0", "AltF1"):
        l, r, _ = f1.params
        p0 = deriv(f0, 0.0) * deriv(f1, 0.0)
        p1 = deriv(f0, 1.0) * deriv(f1, 1.0)
        checks.append(Check("f0'(0) f1'(0) > 1", p0 > 1.0, p0))
        checks.append(Check("f0'(1) f1'(1) > 1", p1 > 1.0, p1))
        checks.append(Check("l < m < r", l < f0.params[0] < r, f0.params[0]))
        img = max(f0(l), f1(l))
        checks.append(Check("[0,l] forward invariant", img <= l, l - img))
        low = min(f0(r), f1(r))
        checks.append(Check("[r,1] forward invariant", low >= r, low - r))
    elif pair == ("Block", "Block"):
        c0, a0, k0 = f0.params
        c1, a1, k1 = f1.params
        checks.append(Check("same block layout", k0 == k1, k1 - k0))
        checks.append(Check("t_fix(f0) < t_fix(f1)", a0 < a1, a1 - a0))
        lo_img = min(_blk(a0, c0, a0), _blk(a0, c1, a1))
        hi_img = max(_blk(a1, c0, a0), _blk(a1, c1, a1))
        checks.append(Check("[t_fix0, t_fix1] invariant under both maps",
                            lo_img >= a0 and hi_img <= a1, min(lo_img - a0, a1 - hi_img)))
    else:
        checks.append(Check(f"known pair {pair}", False, float("nan")))
    return checks


def validate_family(m: Map1D, partner: Map1D | None = None) -> ValidationReport:
    """Check the constraints of ``m`` and, with ``partner``, of the pair (m, partner)."""
    checks = _single_checks(m)
    name = m.family
    if partner is not None:
        checks += _pair_checks(m, partner)
        name = f"{m.family}+{partner.family}"
    return ValidationReport(name, tuple(checks))
