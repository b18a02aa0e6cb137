"""Continuous-time machinery: fixed-step RK4, the cat-map suspension flow and
flows on the fiber driven by an observable of the base.

The base manifold is the suspension of the torus automorphism A = (2,1;1,1)
under the constant roof 1.  Torus coordinates are kept as integers on the
2^-53 grid so that A and its inverse act exactly; the roof coordinate is a
float advanced at unit speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from basinlab.errors import ConstructionError
from basinlab.maps1d import Check, ValidationReport, cospi, sinpi

SCALE = 1 << 53
_INV_SCALE = 1.0 / SCALE

# vector fields
FIELDS = {"circle_gradient": 0, "torus_gradient": 1, "linear_test": 2}
# default torus field coefficients: v(x) = sin(2 pi x)(alpha + beta cos(2 pi x))
TORUS_ALPHA = 1.0
TORUS_BETA = -0.8
# offsets from an equilibrium below which the circle field is treated as linear
LINEAR_BAND = 1e-8


@njit(cache=True)
def circle_field(x):
    """pi sin(2 pi x): p_N = 0 repelling, p_S = 1/2 attracting."""
    return math.pi * sinpi(2.0 * x)


@njit(cache=True)
def circle_field_d(x):
    return 2.0 * math.pi * math.pi * cospi(2.0 * x)


@njit(cache=True)
def torus_comp(x, alpha, beta):
    return sinpi(2.0 * x) * (alpha + beta * cospi(2.0 * x))


@njit(cache=True)
def torus_comp_d(x, alpha, beta):
    c = cospi(2.0 * x)
    s = sinpi(2.0 * x)
    return 2.0 * math.pi * (c * (alpha + beta * c) - beta * s * s)


@njit(cache=True)
def rk4_circle(x, t, nsub):
    """Flow of the circle field for time t with nsub equal substeps (lift, not reduced)."""
    if t == 0.0 or circle_field(x) == 0.0:
        # every stage vanishes at an equilibrium
        return x
    h = t / nsub
    m = 0.5 * math.floor(2.0 * x + 0.5)
    d = x - m
    if abs(d) < LINEAR_BAND:
        # the field is linear to relative 1e-16 here: apply RK4's stability polynomial
        z = h * circle_field_d(m)
        d1 = d * (1.0 + z * (1.0 + z / 2.0 * (1.0 + z / 3.0 * (1.0 + z / 4.0)))) ** nsub
        if abs(d1) < LINEAR_BAND:
            return m + d1
    for _ in range(nsub):
        k1 = circle_field(x)
        k2 = circle_field(x + 0.5 * h * k1)
        k3 = circle_field(x + 0.5 * h * k2)
        k4 = circle_field(x + h * k3)
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


@njit(cache=True)
def rk4_circle_var(x, t, nsub):
    """Flow of the circle field together with the log of its derivative."""
    if t == 0.0:
        return x, 0.0
    h = t / nsub
    lg = 0.0
    for _ in range(nsub):
        k1 = circle_field(x)
        l1 = circle_field_d(x)
        x2 = x + 0.5 * h * k1
        k2 = circle_field(x2)
        l2 = circle_field_d(x2)
        x3 = x + 0.5 * h * k2
        k3 = circle_field(x3)
        l3 = circle_field_d(x3)
        x4 = x + h * k3
        k4 = circle_field(x4)
        l4 = circle_field_d(x4)
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        lg = lg + h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
    return x, lg


@njit(cache=True)
def rk4_torus(x, y, t, nsub, alpha, beta):
    """Flow of the separable torus gradient field (each coordinate is independent)."""
    if t == 0.0:
        return x, y
    h = t / nsub
    for _ in range(nsub):
        a1 = torus_comp(x, alpha, beta)
        b1 = torus_comp(y, alpha, beta)
        a2 = torus_comp(x + 0.5 * h * a1, alpha, beta)
        b2 = torus_comp(y + 0.5 * h * b1, alpha, beta)
        a3 = torus_comp(x + 0.5 * h * a2, alpha, beta)
        b3 = torus_comp(y + 0.5 * h * b2, alpha, beta)
        a4 = torus_comp(x + h * a3, alpha, beta)
        b4 = torus_comp(y + h * b3, alpha, beta)
        x = x + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        y = y + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    return x, y


@njit(cache=True)
def rk4_tcomp(x, t, nsub, alpha, beta):
    """One coordinate of the separable torus field flowed for time t."""
    if t == 0.0:
        return x
    h = t / nsub
    for _ in range(nsub):
        k1 = torus_comp(x, alpha, beta)
        k2 = torus_comp(x + 0.5 * h * k1, alpha, beta)
        k3 = torus_comp(x + 0.5 * h * k2, alpha, beta)
        k4 = torus_comp(x + h * k3, alpha, beta)
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


@njit(cache=True)
def rk4_tcomp_var(x, t, nsub, alpha, beta):
    if t == 0.0:
        return x, 0.0
    h = t / nsub
    lg = 0.0
    for _ in range(nsub):
        k1 = torus_comp(x, alpha, beta)
        l1 = torus_comp_d(x, alpha, beta)
        x2 = x + 0.5 * h * k1
        k2 = torus_comp(x2, alpha, beta)
        l2 = torus_comp_d(x2, alpha, beta)
        x3 = x + 0.5 * h * k2
        k3 = torus_comp(x3, alpha, beta)
        l3 = torus_comp_d(x3, alpha, beta)
        x4 = x + h * k3
        k4 = torus_comp(x4, alpha, beta)
        l4 = torus_comp_d(x4, alpha, beta)
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        lg = lg + h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
    return x, lg


@njit(cache=True)
def rk4_linear(x, t, nsub):
    h = t / nsub
    for _ in range(nsub):
        k1 = -x
        k2 = -(x + 0.5 * h * k1)
        k3 = -(x + 0.5 * h * k2)
        k4 = -(x + h * k3)
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


@njit(cache=True)
def wrap(x):
    y = x - np.floor(x)
    if y >= 1.0:
        y = 0.0
    return y


def n_substeps(t: float, h: float) -> int:
    return max(1, math.ceil(abs(t) / h - 1e-12))


@dataclass(frozen=True)
class FlowSpec:
    """A named vector field with the RK4 substep ``h``.

    ``circle_gradient``: x' = pi sin(2 pi x) on the circle.
    ``torus_gradient``: (x', y') = (v(x), v(y)) with v(x) = sin(2 pi x)(alpha + beta cos 2 pi x).
    ``linear_test``: x' = -x on the line.
    """

    field: str = "circle_gradient"
    h: float = 0.01
    alpha: float = TORUS_ALPHA
    beta: float = TORUS_BETA

    def __post_init__(self):
        if self.field not in FIELDS:
            raise ConstructionError(f"unknown vector field {self.field!r}")
        if not 0.0 < self.h <= 0.1:
            raise ConstructionError(f"integrator step must lie in (0, 0.1], got {self.h}")
        if self.field == "torus_gradient" and not abs(self.beta) < abs(self.alpha):
            raise ConstructionError("torus field needs |beta| < |alpha| (equilibria only at 0, 1/2)")

    @property
    def equilibria(self):
        if self.field == "circle_gradient":
            return {"p_N": 0.0, "p_S": 0.5}
        if self.field == "torus_gradient":
            return {"source": (0.0, 0.0), "saddle_x": (0.5, 0.0), "saddle_y": (0.0, 0.5),
                    "sink": (0.5, 0.5)}
        return {"origin": 0.0}

    def torus_eigen(self) -> tuple[float, float]:
        """Eigenvalue of one coordinate at 0 and at 1/2."""
        return (2 * math.pi * (self.alpha + self.beta), -2 * math.pi * (self.alpha - self.beta))


def integrate(spec: FlowSpec, x, t: float):
    """Time-t map of the flow by classical RK4 with ceil(|t|/h) equal substeps."""
    if not abs(t) < 1e6:
        raise ValueError("|t| must be below 1e6")
    n = n_substeps(t, spec.h)
    if spec.field == "circle_gradient":
        return float(wrap(rk4_circle(float(x), float(t), n)))
    if spec.field == "torus_gradient":
        x0, y0 = x
        a, b = rk4_torus(float(x0), float(y0), float(t), n, spec.alpha, spec.beta)
        return float(wrap(a)), float(wrap(b))
    return float(rk4_linear(float(x), float(t), n))


def integrate_log_derivative(x: float, t: float, h: float = 0.01) -> tuple[float, float]:
    """Circle-field flow and log of its derivative (variational equation)."""
    x1, lg = rk4_circle_var(float(x), float(t), n_substeps(t, h))
    return float(wrap(x1)), float(lg)


# ---------------------------------------------------------------------------
# suspension base

@njit(cache=True)
def cat_fwd(a, b):
    return (2 * a + b) % SCALE, (a + b) % SCALE


@njit(cache=True)
def cat_inv(a, b):
    return (a - b) % SCALE, (2 * b - a) % SCALE


def to_grid(v: float) -> int:
    return int(round(float(v) * SCALE)) % SCALE


def from_grid(a: int) -> float:
    return a * _INV_SCALE


def _mat_mul(m, n):
    return ((m[0] * n[0] + m[1] * n[2]) % SCALE, (m[0] * n[1] + m[1] * n[3]) % SCALE,
            (m[2] * n[0] + m[3] * n[2]) % SCALE, (m[2] * n[1] + m[3] * n[3]) % SCALE)


def cat_power(k: int):
    """A^k mod 2^53 as a flat 2x2 tuple (Python integers, any sign of k)."""
    base = (2, 1, 1, 1) if k >= 0 else (1, SCALE - 1, SCALE - 1, 2)
    k = abs(k)
    out = (1, 0, 0, 1)
    while k:
        if k & 1:
            out = _mat_mul(out, base)
        base = _mat_mul(base, base)
        k >>= 1
    return out


@dataclass(frozen=True)
class SuspensionPoint:
    """Point (v1, v2, s) of the suspension; v on the 2^-53 grid, s in [0,1)."""

    v1: float
    v2: float
    s: float

    def __post_init__(self):
        for name in ("v1", "v2", "s"):
            val = float(getattr(self, name))
            if not 0.0 <= val < 1.0:
                val = float(wrap(val))
            object.__setattr__(self, name, val)
        object.__setattr__(self, "v1", from_grid(to_grid(self.v1)))
        object.__setattr__(self, "v2", from_grid(to_grid(self.v2)))

    @property
    def grid(self) -> tuple[int, int]:
        return to_grid(self.v1), to_grid(self.v2)


def suspension_flow(pt: SuspensionPoint, t: float) -> SuspensionPoint:
    """Advance the roof coordinate by t; each crossing of s = 1 applies A."""
    if t < -1e6:
        raise ValueError("t must be at least -1e6")
    total = pt.s + t
    k = math.floor(total)
    s = total - k
    if s >= 1.0:
        s, k = 0.0, k + 1
    m = cat_power(k)
    a, b = pt.grid
    a, b = (m[0] * a + m[1] * b) % SCALE, (m[2] * a + m[3] * b) % SCALE
    return SuspensionPoint(from_grid(a), from_grid(b), s)


@njit(cache=True)
def _flow_arrays(a, b, s, t):
    n = a.shape[0]
    oa = np.empty(n, dtype=np.int64)
    ob = np.empty(n, dtype=np.int64)
    os_ = np.empty(n)
    for i in range(n):
        total = s[i] + t
        k = np.int64(np.floor(total))
        sn = total - k
        if sn >= 1.0:
            sn = 0.0
            k += 1
        x, y = a[i], b[i]
        if k >= 0:
            for _ in range(k):
                x, y = cat_fwd(x, y)
        else:
            for _ in range(-k):
                x, y = cat_inv(x, y)
        oa[i], ob[i], os_[i] = x, y, sn
    return oa, ob, os_


def suspension_flow_arrays(v1, v2, s, t: float):
    """Vectorized suspension flow for moderate |t| (crossings applied one by one)."""
    a = np.round(np.asarray(v1, dtype=float) * SCALE).astype(np.int64) % SCALE
    b = np.round(np.asarray(v2, dtype=float) * SCALE).astype(np.int64) % SCALE
    oa, ob, os_ = _flow_arrays(a, b, np.asarray(s, dtype=float), float(t))
    return oa * _INV_SCALE, ob * _INV_SCALE, os_


# ---------------------------------------------------------------------------
# observables on the suspension (times a fiber correction)

ZETAS = {"constant": 0, "roof_cosine": 1, "thm8": 2}
ZETA_PARAMS = {"constant": ("c",), "roof_cosine": ("a", "delta"), "thm8": ("delta",)}


@njit(cache=True)
def height(x):
    """h(x) = (1 - cos 2 pi x)/2, with h(p_N) = 0 and h(p_S) = 1."""
    return 0.5 * (1.0 - cospi(2.0 * x))


@njit(cache=True)
def _eta0(v1, v2):
    return cospi(2.0 * v1) + cospi(2.0 * v2)


@njit(cache=True)
def zeta_eval(kind, q, a, b, s, x):
    """zeta(u, x) at u = (a, b, s) with integer torus coordinates a, b."""
    if kind == 0:
        return q[0]
    if kind == 1:
        return q[0] + cospi(2.0 * s) + q[1] * (height(x) - 0.5)
    # blend eta0(v) into eta0(Av) along the roof so the observable is continuous
    a2, b2 = cat_fwd(a, b)
    w = s - sinpi(2.0 * s) / (2.0 * math.pi)
    e = (1.0 - w) * _eta0(a * _INV_SCALE, b * _INV_SCALE) + w * _eta0(a2 * _INV_SCALE, b2 * _INV_SCALE)
    return e + q[0] * (height(x) - 0.5)


@njit(cache=True)
def _coupled_segment(kind, q, a, b, s0, x, length, h):
    # RK4 for x' = zeta(a, b, s0 + tau, x) g(x) on a piece without roof crossing
    n = max(1, np.int64(np.ceil(abs(length) / h - 1e-12)))
    dt = length / n
    for i in range(n):
        s = s0 + i * dt
        k1 = zeta_eval(kind, q, a, b, s, x) * circle_field(x)
        xm = x + 0.5 * dt * k1
        k2 = zeta_eval(kind, q, a, b, s + 0.5 * dt, xm) * circle_field(xm)
        xm = x + 0.5 * dt * k2
        k3 = zeta_eval(kind, q, a, b, s + 0.5 * dt, xm) * circle_field(xm)
        xe = x + dt * k3
        k4 = zeta_eval(kind, q, a, b, s + dt, xe) * circle_field(xe)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return wrap(x)


@njit(cache=True)
def coupled_advance(kind, q, a, b, s, x, t, h):
    """Advance base and fiber by time t (either sign); returns (a, b, s, x)."""
    rem = t
    while rem != 0.0:
        if rem > 0.0:
            seg = 1.0 - s
            if rem < seg:
                x = _coupled_segment(kind, q, a, b, s, x, rem, h)
                s = s + rem
                rem = 0.0
            else:
                x = _coupled_segment(kind, q, a, b, s, x, seg, h)
                a, b = cat_fwd(a, b)
                s = 0.0
                rem -= seg
        else:
            if s == 0.0:
                a, b = cat_inv(a, b)
                s = 1.0
            seg = -s
            if rem > seg:
                x = _coupled_segment(kind, q, a, b, s, x, rem, h)
                s = s + rem
                rem = 0.0
            else:
                x = _coupled_segment(kind, q, a, b, s, x, seg, h)
                s = 0.0
                rem -= seg
    if s >= 1.0:
        a, b = cat_fwd(a, b)
        s = 0.0
    return a, b, s, x


@njit(cache=True)
def _simpson_segment(kind, q, a, b, s0, x, length, h, acc, comp):
    n = max(1, np.int64(np.ceil(abs(length) / h - 1e-12)))
    dt = length / n
    for i in range(n):
        s = s0 + i * dt
        piece = dt / 6.0 * (zeta_eval(kind, q, a, b, s, x)
                            + 4.0 * zeta_eval(kind, q, a, b, s + 0.5 * dt, x)
                            + zeta_eval(kind, q, a, b, s + dt, x))
        # Kahan summation
        yk = piece - comp
        tk = acc + yk
        comp = (tk - acc) - yk
        acc = tk
    return acc, comp


@njit(cache=True)
def tau_kernel(kind, q, a, b, s, x, t, h):
    """Integral of zeta(u(r), x) over r in [0, t] along the base orbit (fiber frozen at x)."""
    acc = 0.0
    comp = 0.0
    rem = t
    while rem != 0.0:
        if rem > 0.0:
            seg = 1.0 - s
            if rem < seg:
                acc, comp = _simpson_segment(kind, q, a, b, s, x, rem, h, acc, comp)
                rem = 0.0
            else:
                acc, comp = _simpson_segment(kind, q, a, b, s, x, seg, h, acc, comp)
                a, b = cat_fwd(a, b)
                s = 0.0
                rem -= seg
        else:
            if s == 0.0:
                a, b = cat_inv(a, b)
                s = 1.0
            seg = -s
            if rem > seg:
                acc, comp = _simpson_segment(kind, q, a, b, s, x, rem, h, acc, comp)
                rem = 0.0
            else:
                acc, comp = _simpson_segment(kind, q, a, b, s, x, seg, h, acc, comp)
                s = 0.0
                rem -= seg
    return acc


@dataclass(frozen=True)
class Zeta:
    """Observable zeta(u, x) on the suspension times the circle fiber.

    * ``constant(c)``: zeta = c.
    * ``roof_cosine(a, delta)``: a + cos(2 pi s) + delta (h(x) - 1/2).
    * ``thm8(delta)``: eta_c(v, s) + delta (h(x) - 1/2), where eta_c blends
      eta0(v) = cos 2 pi v1 + cos 2 pi v2 into eta0(Av) along the roof.

    Observables with ``delta`` > 0 couple to the fiber and must satisfy the two
    attractor hypotheses (see :func:`zeta_checks`); base-only observables
    (delta = 0 or constant) are pure time changes.
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ZETAS:
            raise ConstructionError(f"unknown observable {self.kind!r}")
        if len(self.params) != len(ZETA_PARAMS[self.kind]):
            raise ConstructionError(f"{self.kind} takes parameters {ZETA_PARAMS[self.kind]}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @property
    def kid(self) -> int:
        return ZETAS[self.kind]

    @property
    def q(self) -> np.ndarray:
        out = np.zeros(4)
        out[: len(self.params)] = self.params
        return out

    @property
    def coupled(self) -> bool:
        return self.kind != "constant" and self.params[-1] != 0.0

    def __call__(self, pt: SuspensionPoint, x: float = 0.0) -> float:
        a, b = pt.grid
        return float(zeta_eval(self.kid, self.q, a, b, pt.s, float(x)))

    def mean(self, x: float = 0.0, n: int = 24) -> float:
        """Integral over the suspension (Lebesgue) at fiber point x, by a midpoint grid."""
        g = (np.arange(n) + 0.5) / n
        total = 0.0
        for v1 in g:
            for v2 in g:
                a, b = to_grid(v1), to_grid(v2)
                for s in g:
                    total += zeta_eval(self.kid, self.q, a, b, s, x)
        return total / n ** 3


# designated periodic orbits of the suspension flow: (name, torus points, period)
PERIODIC_ORBITS = {
    "fixed circle over (0,0)": [(0.0, 0.0)],
    "period-2 orbit {(4/5,3/5),(1/5,2/5)}": [(0.8, 0.6), (0.2, 0.4)],
}


def _orbit_values(z: Zeta, orbit, xs, samples: int = 64) -> np.ndarray:
    vals = []
    for v1, v2 in orbit:
        a, b = to_grid(v1), to_grid(v2)
        for s in np.arange(samples) / samples:
            for x in xs:
                vals.append(zeta_eval(z.kid, z.q, a, b, s, x))
    return np.array(vals)


def zeta_checks(z: Zeta) -> ValidationReport:
    """Hypotheses for the two-attractor flow, or the drift condition for a time change."""
    checks = []
    if not z.coupled:
        m = z.mean()
        checks.append(Check("time change has nonzero mean", abs(m) > 1e-9, m))
        return ValidationReport(f"zeta {z.kind}", tuple(checks))
    xs = np.linspace(0.0, 1.0, 65)
    names = list(PERIODIC_ORBITS)
    pos = _orbit_values(z, PERIODIC_ORBITS[names[0]], xs)
    neg = _orbit_values(z, PERIODIC_ORBITS[names[1]], xs)
    checks.append(Check(f"zeta > 0 on q1 = {names[0]} x N", float(pos.min()) > 0.0, float(pos.min())))
    checks.append(Check(f"zeta < 0 on q2 = {names[1]} x N", float(neg.max()) < 0.0, float(neg.max())))
    ms = z.mean(0.5)
    mn = z.mean(0.0)
    checks.append(Check("integral of zeta(u, p_S) > 0", ms > 0.0, ms))
    checks.append(Check("integral of zeta(u, p_N) < 0", mn < 0.0, mn))
    return ValidationReport(f"zeta {z.kind}", tuple(checks))


class CoupledFlow:
    """The skew flow (u, x) -> (psi_t u, x') with x' = zeta(u, x) g(x)."""

    def __init__(self, zeta: Zeta, h: float = 0.01):
        if not 0.0 < h <= 0.1:
            raise ConstructionError(f"integrator step must lie in (0, 0.1], got {h}")
        self.zeta = zeta
        self.h = h
        self.report = zeta_checks(zeta).raise_if_failed()

    def step(self, pt: SuspensionPoint, x: float, dt: float) -> tuple[SuspensionPoint, float]:
        return coupled_step(self.zeta, (pt, x), dt, self.h)


def coupled_step(zeta: Zeta, state, dt: float, h: float = 0.01):
    """Advance (SuspensionPoint, fiber x) by time dt with the shared substep h."""
    pt, x = state
    if dt == 0.0:
        return pt, float(x)
    a, b = pt.grid
    a, b, s, x1 = coupled_advance(zeta.kid, zeta.q, a, b, pt.s, float(x), float(dt), h)
    return SuspensionPoint(from_grid(a), from_grid(b), s), float(x1)


def tau_accumulate(eta: Zeta, pt: SuspensionPoint, t: float, h: float = 0.01) -> float:
    """tau(t) = integral of eta along the base orbit (composite Simpson, Kahan-summed)."""
    a, b = pt.grid
    return float(tau_kernel(eta.kid, eta.q, a, b, pt.s, 0.0, float(t), h))


def time_one_map(zeta: Zeta, state, h: float = 0.01):
    return coupled_step(zeta, state, 1.0, h)


def example7_eta(a: float = 0.2) -> Zeta:
    """eta(v, s) = a + cos(2 pi s), a base-only observable with mean a."""
    return Zeta("roof_cosine", (a, 0.0))


def roof_cosine_tau(a: float, s0: float, t: float) -> float:
    """Closed form of tau for the roof cosine observable."""
    return a * t + (math.sin(2 * math.pi * (s0 + t)) - math.sin(2 * math.pi * s0)) / (2 * math.pi)
