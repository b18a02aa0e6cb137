"""Preset skew-product systems, their construction-time hypothesis checks and
single-trajectory stepping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from basinlab import _rng
from basinlab.errors import ConstructionError
from basinlab.flows import Zeta, height, rk4_tcomp_var, zeta_checks
from basinlab.maps1d import (Check, Map1D, ValidationReport, alt_f0, alt_f1, block_interval,
                             block_map, north_south, phi_shift, thick_f0, thick_f1,
                             validate_family)
from basinlab.randomwalk import ProbProfile
from basinlab.skew import _kernels as K

# prefix depth of the base-axis coordinate for shift bases, per alphabet size
PREFIX_DEPTH = {2: 40, 4: 26}
# digit window of the expanding base E_L, per L
WINDOW = {3: 33, 5: 22}


@dataclass(frozen=True)
class PresetSpec:
    pid: int
    defaults: dict[str, Any]
    summary: str
    base_axis: str
    fiber_dim: int
    counterexample: dict[str, Any]


PRESETS: dict[str, PresetSpec] = {
    "kan": PresetSpec(K.KAN, {"amp": 1 / 32, "capture_radius": 1e-3},
                      "u -> 3u mod 1, x -> x + amp cos(2 pi u) x(1-x) on the annulus",
                      "u", 1, {"amp": 1.5}),
    "thm2_walk": PresetSpec(K.THM2, {"a": 0.1, "profile": "Cosine", "b": 0.2, "p": 0.6,
                                     "capture_radius": 1e-3},
                            "random walk x -> f^(+-1)(x) along orbits of a north-south map",
                            "U0", 1, {"profile": "Constant", "p": 0.4}),
    "thm3_flowtime": PresetSpec(K.THM3, {"delta": 0.2, "L": 3, "nsub": 100, "capture_radius": 1e-3},
                                "(u,x) -> (Lu mod 1, phi_{s(u,x)}(x)), s = cos 2 pi u + delta(h(x)-1/2)",
                                "u", 1, {"delta": 3.0}),
    "thm4_multi": PresetSpec(K.THM4, {"k": 4, "L": 5, "alpha": 1.0, "beta": -0.8,
                                      "halfwidth": 0.05, "nsub": 100, "capture_radius": 1e-3},
                             "(u,z) -> (5u mod 1, h_i phi_{t(u)} h_i^-1 z) on the 2-torus",
                             "u", 2, {"beta": 0.0}),
    "thm5_ifs": PresetSpec(K.THM5, {"k": 4, "alpha": 1.0, "beta": -0.8, "nsub": 100,
                                    "capture_radius": 1e-3},
                           "IFS of the four conjugated time-one maps psi_i, equal weights",
                           "omega", 2, {"beta": 0.0}),
    "thick41": PresetSpec(K.THICK41, {"c0": 0.2, "l": 0.3, "r": 0.7, "c1": 1.5},
                          "(omega,x) -> (sigma omega, f_{omega_0}(x)), thick attractor/repeller pair",
                          "omega", 1, {"c0": 0.9}),
    "thick42_walk": PresetSpec(K.THICK42, {"c0": 0.2, "l": 0.3, "r": 0.7, "c1": 1.5,
                                           "p_l": 0.7, "p_r": 0.3},
                               "random walk along orbits of the thick pair, p = p_l on I_l, p_r on I_r",
                               "omega", 1, {"p_l": 0.4}),
    "thick431_alt": PresetSpec(K.THICK431, {"m": 0.5, "c0": 0.25, "l": 0.3, "r": 0.7, "c1": 3.0,
                                            "phi_a": 0.25, "p": 0.7},
                               "walk along the two-thick-attractor IFS composed with phi_xi",
                               "omega", 1, {"c1": 1.0}),
    "thick432_product": PresetSpec(K.THICK432, {"c": 3.0, "t0": 0.35, "t1": 0.65, "K1": 2, "K2": 2,
                                                "shear": 0.05, "p": 0.7},
                                   "product of two block IFS on the 2-torus with shears h_0..h_3",
                                   "omega", 2, {"t0": 0.65, "t1": 0.35}),
    "example7_flow": PresetSpec(K.EX7, {"a": 0.2, "h": 0.01, "capture_radius": 1e-3},
                                "time-one map of x' = eta(u) g(x), eta = a + cos(2 pi s)",
                                "s", 1, {"a": -0.2}),
    "thm8_flow": PresetSpec(K.THM8, {"zeta": "thm8", "delta": 0.2, "h": 0.01,
                                     "capture_radius": 1e-3},
                            "time-one map of x' = zeta(u,x) g(x) over the cat-map suspension",
                            "s", 1, {"zeta": "roof_cosine"}),
}


@dataclass(frozen=True)
class CatalogEntry:
    """A candidate attractor: a fiber point with capture radius, or a fiber box."""

    name: str
    kind: str  # "point" or "box"
    center: tuple[float, ...] = ()
    radius: float = 1e-3
    circle: bool = True
    box: tuple[tuple[float, float], ...] = ()

    def row(self) -> np.ndarray:
        out = np.zeros(8)
        if self.kind == "box":
            out[0] = K.CAT_BOX
            for d, (lo, hi) in enumerate(self.box):
                out[4 + 2 * d], out[5 + 2 * d] = lo, hi
        else:
            out[0] = K.CAT_CIRCLE_POINT if self.circle else K.CAT_LINE_POINT
            out[1] = self.radius
            for d, c in enumerate(self.center):
                out[2 + d] = c
        return out


@dataclass
class SkewSystem:
    preset: str
    params: dict[str, Any]
    pid: int
    par: np.ndarray
    ipar: np.ndarray
    catalog: list[CatalogEntry]
    fiber_dim: int
    base_axis: str
    reports: list[ValidationReport] = field(default_factory=list)
    maps: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    @property
    def cat_array(self) -> np.ndarray:
        return np.array([c.row() for c in self.catalog])

    def with_catalog(self, catalog: list[CatalogEntry]) -> "SkewSystem":
        return SkewSystem(self.preset, self.params, self.pid, self.par, self.ipar, catalog,
                          self.fiber_dim, self.base_axis, self.reports, self.maps, self.seed)

    @property
    def fiber_circle(self) -> bool:
        return self.pid not in (K.KAN, K.THICK41, K.THICK42, K.THICK431)

    def catalog_index(self, name: str) -> int:
        for i, c in enumerate(self.catalog):
            if c.name == name:
                return i
        raise KeyError(f"no catalog entry {name!r} in {self.preset}")

    def render_checks(self) -> str:
        return "\n".join(r.render() for r in self.reports)


@dataclass
class SystemState:
    """One trajectory: integer part ``ist`` = [n, S_n, base...], real part ``st`` = [s_n, x, y]."""

    st: np.ndarray
    ist: np.ndarray

    @property
    def n(self) -> int:
        return int(self.ist[0])

    @property
    def S(self) -> int:
        return int(self.ist[1])

    @property
    def x(self) -> float:
        return float(self.st[1])

    @property
    def y(self) -> float:
        return float(self.st[2])

    def fiber(self, dim: int = 1):
        return self.x if dim == 1 else (self.x, self.y)

    def copy(self) -> "SystemState":
        return SystemState(self.st.copy(), self.ist.copy())


# ---------------------------------------------------------------------------
# construction


def _merge(preset: str, params: dict | None) -> dict:
    if preset not in PRESETS:
        raise ConstructionError(f"unknown preset {preset!r}; known: {sorted(PRESETS)}")
    spec = PRESETS[preset]
    merged = dict(spec.defaults)
    for key, val in (params or {}).items():
        if key not in spec.defaults:
            raise ConstructionError(f"preset {preset} has no parameter {key!r}")
        default = spec.defaults[key]
        if isinstance(default, str):
            merged[key] = str(val)
        elif isinstance(default, int) and not isinstance(default, bool):
            if float(val) != int(float(val)):
                raise ConstructionError(f"parameter {key} must be an integer, got {val}")
            merged[key] = int(float(val))
        else:
            merged[key] = float(val)
    return merged


def _map_par(m: Map1D) -> list[float]:
    return [float(m.fid)] + list(m.q)


def _el_ipar(L: int) -> np.ndarray:
    if L not in WINDOW:
        raise ConstructionError(f"expanding base supports L in {sorted(WINDOW)}, got {L}")
    k = WINDOW[L]
    return np.array([L, L ** (k - 1), L ** k], dtype=np.int64)


def _shift_ipar(k: int) -> np.ndarray:
    d = PREFIX_DEPTH[k]
    return np.array([k, d, k ** d], dtype=np.int64)


def _quad_grid(n: int = 4096) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def _check(name, ok, witness) -> Check:
    return Check(name, bool(ok), float(witness))


def _build_kan(p):
    amp = p["amp"]
    us = _quad_grid()
    checks = [
        _check("0 < amp < 1 (fiber maps are diffeomorphisms)", 0.0 < amp < 1.0, amp),
    ]
    if 0.0 < amp < 1.0:
        lo = float(np.mean(np.log(1.0 + amp * np.cos(2 * np.pi * us))))
        hi = float(np.mean(np.log(1.0 - amp * np.cos(2 * np.pi * us))))
        checks += [_check("integral of log f_u'(0) du < 0", lo < 0.0, lo),
                   _check("integral of log f_u'(1) du < 0", hi < 0.0, hi)]
    rep = ValidationReport("kan", tuple(checks))
    r = p["capture_radius"]
    cat = [CatalogEntry("lower", "point", (0.0,), r, circle=False),
           CatalogEntry("upper", "point", (1.0,), r, circle=False)]
    return np.array([amp]), _el_ipar(3), cat, [rep], {}


def _build_thm2(p):
    f = north_south(p["a"])
    if p["profile"] == "Cosine":
        prof = ProbProfile.cosine(p["b"])
    elif p["profile"] == "Constant":
        prof = ProbProfile.constant(p["p"])
    else:
        raise ConstructionError(f"thm2_walk profile must be Cosine or Constant, got {p['profile']}")
    ps, pn = prof(0.5), prof(0.0)
    rep = ValidationReport("thm2_walk", (
        _check("p(p_S) > 1/2", ps > 0.5, ps),
        _check("p(p_N) < 1/2", pn < 0.5, pn),
    ))
    par = np.array(_map_par(f) + [float(prof.kid)] + list(prof.q))
    r = p["capture_radius"]
    cat = [CatalogEntry("p_N", "point", (0.0,), r), CatalogEntry("p_S", "point", (0.5,), r)]
    return par, np.zeros(1, dtype=np.int64), cat, [f.report, rep], {"f": f, "profile": prof}


def s_function(delta: float, u, x):
    return np.cos(2 * np.pi * np.asarray(u)) + delta * (0.5 * (1 - np.cos(2 * np.pi * np.asarray(x))) - 0.5)


def _build_thm3(p):
    delta, L = p["delta"], int(p["L"])
    q1, q2 = 0.5, 0.0
    xs = np.linspace(0.0, 1.0, 257)
    us = _quad_grid()
    s1 = s_function(delta, q1, xs)
    s2 = s_function(delta, q2, xs)
    i_n = float(np.mean(s_function(delta, us, 0.0)))
    i_s = float(np.mean(s_function(delta, us, 0.5)))
    checks = [
        _check("q1 = 1/2 is fixed by E_L", (L * q1) % 1.0 == q1, (L * q1) % 1.0 - q1),
        _check("q2 = 0 is fixed by E_L", (L * q2) % 1.0 == q2, (L * q2) % 1.0 - q2),
        _check("s(q1, x) < 0 for all x", s1.max() < 0.0, s1.max()),
        _check("s(q2, x) > 0 for all x", s2.min() > 0.0, s2.min()),
        _check("integral of s(u, p_N) du < 0", i_n < 0.0, i_n),
        _check("integral of s(u, p_S) du > 0", i_s > 0.0, i_s),
    ]
    if p["nsub"] < 1:
        checks.append(_check("nsub >= 1", False, p["nsub"]))
    rep = ValidationReport("thm3_flowtime", tuple(checks))
    r = p["capture_radius"]
    cat = [CatalogEntry("p_N", "point", (0.0,), r), CatalogEntry("p_S", "point", (0.5,), r)]
    return np.array([delta, float(p["nsub"])]), _el_ipar(L), cat, [rep], {}


EQUILIBRIA = [(0.5, 0.5), (0.0, 0.5), (0.5, 0.0), (0.0, 0.0)]


def _torus_log_norm(x, y, t, nsub, alpha, beta) -> float:
    _, la = rk4_tcomp_var(x, t, nsub, alpha, beta)
    _, lb = rk4_tcomp_var(y, t, nsub, alpha, beta)
    return max(la, lb)


def _translated(i: int, j: int) -> tuple[float, float]:
    """h_i^-1(s_j) for the translation h_i."""
    tx, ty = K.TRANS[i]
    sx, sy = EQUILIBRIA[j]
    return (sx - tx) % 1.0, (sy - ty) % 1.0


def _torus_common_checks(p) -> list[Check]:
    alpha, beta = p["alpha"], p["beta"]
    checks = [_check("k = 4 equilibria (translations by half periods)", p["k"] == 4, p["k"]),
              _check("|beta| < |alpha| (equilibria exactly at 0, 1/2)", abs(beta) < abs(alpha),
                     abs(alpha) - abs(beta))]
    sink = -2 * math.pi * (alpha - beta)
    checks.append(_check("s_1 = (1/2,1/2) is a sink of the flow", sink < 0.0, sink))
    return checks


def _build_thm4(p):
    alpha, beta, hw, nsub, L = p["alpha"], p["beta"], p["halfwidth"], int(p["nsub"]), int(p["L"])
    k = int(p["k"])
    checks = _torus_common_checks(p)
    checks.append(_check("E_L has at least k fixed points", L - 1 >= k, L - 1 - k))
    checks.append(_check("intervals J_i are disjoint", 0.0 < hw < 0.5 / max(k, 1), hw))
    ok = all(c.passed for c in checks) and k == L - 1
    if ok:
        us = _quad_grid(8192)
        for j in range(k):
            total = 0.0
            for u in us:
                for i in range(k):
                    tt = K._bump(u, i / k, hw)
                    if tt > 0.0:
                        x, y = _translated(i, j)
                        total += _torus_log_norm(x, y, tt, nsub, alpha, beta)
            val = total / len(us)
            checks.append(_check(f"integral of log||Df_u(s_{j + 1})|| du < 0", val < 0.0, val))
    elif k != L - 1:
        checks.append(_check("k = L - 1 (fixed points q_i = (i-1)/k)", False, L - 1 - k))
    rep = ValidationReport("thm4_multi", tuple(checks))
    r = p["capture_radius"]
    cat = [CatalogEntry(f"s_{j + 1}", "point", EQUILIBRIA[j], r) for j in range(4)]
    par = np.array([alpha, beta, hw, float(nsub), float(k)])
    return par, _el_ipar(L), cat, [rep], {}


def _build_thm5(p):
    alpha, beta, nsub = p["alpha"], p["beta"], int(p["nsub"])
    checks = _torus_common_checks(p)
    if all(c.passed for c in checks):
        for j in range(4):
            val = sum(_torus_log_norm(*_translated(i, j), 1.0, nsub, alpha, beta) for i in range(4)) / 4
            checks.append(_check(f"(1/k) sum_i ln||Dpsi_i(s_{j + 1})|| < 0", val < 0.0, val))
    rep = ValidationReport("thm5_ifs", tuple(checks))
    r = p["capture_radius"]
    cat = [CatalogEntry(f"s_{j + 1}", "point", EQUILIBRIA[j], r) for j in range(4)]
    return np.array([alpha, beta, float(nsub)]), _shift_ipar(4), cat, [rep], {}


def _thick_pair(p):
    f0 = thick_f0(p["c0"])
    f1 = thick_f1(p["l"], p["r"], p["c1"])
    return f0, f1, validate_family(f0, f1).raise_if_failed()


def _build_thick41(p):
    f0, f1, rep = _thick_pair(p)
    l, r = p["l"], p["r"]
    cat = [CatalogEntry("Lambda_l", "box", box=((0.0, l),)),
           CatalogEntry("Lambda_r", "box", box=((r, 1.0),))]
    return (np.array(_map_par(f0) + _map_par(f1)), _shift_ipar(2), cat, [rep],
            {"f0": f0, "f1": f1})


def _build_thick42(p):
    f0, f1, rep = _thick_pair(p)
    l, r = p["l"], p["r"]
    checks = (_check("p_l > 1/2", p["p_l"] > 0.5, p["p_l"]),
              _check("p_r < 1/2", p["p_r"] < 0.5, p["p_r"]),
              _check("0 < p_r, p_l < 1", 0 < p["p_l"] < 1 and 0 < p["p_r"] < 1, p["p_l"]))
    walk = ValidationReport("thick42_walk", checks)
    prof = None
    if walk.passed:
        prof = ProbProfile.piecewise_linear(p["p_l"], p["p_r"], l, r)
    walk.raise_if_failed()
    cat = [CatalogEntry("I_l", "box", box=((0.0, l),)), CatalogEntry("I_r", "box", box=((r, 1.0),))]
    par = np.array(_map_par(f0) + _map_par(f1) + [float(prof.kid)] + list(prof.q))
    return par, _shift_ipar(2), cat, [rep, walk], {"f0": f0, "f1": f1, "profile": prof}


def _build_thick431(p):
    f0 = alt_f0(p["m"], p["c0"])
    f1 = alt_f1(p["l"], p["r"], p["c1"])
    rep = validate_family(f0, f1).raise_if_failed()
    l, r = p["l"], p["r"]
    phi0 = phi_shift(p["phi_a"], 1, l, r)
    phi1 = phi_shift(p["phi_a"], -1, l, r)
    walk = ValidationReport("thick431_alt", (
        _check("1/2 < p < 1", 0.5 < p["p"] < 1.0, p["p"]),
    )).raise_if_failed()
    cat = [CatalogEntry("Lambda_l", "box", box=((0.0, l),)),
           CatalogEntry("Lambda_r", "box", box=((r, 1.0),))]
    par = np.array(_map_par(f0) + _map_par(f1) + _map_par(phi0) + _map_par(phi1) + [p["p"]])
    return (par, _shift_ipar(2), cat, [rep, phi0.report, phi1.report, walk],
            {"f0": f0, "f1": f1, "phi0": phi0, "phi1": phi1})


def _strips(t0, t1, k):
    return [block_interval(t0, t1, i, k) for i in range(k)]


def _max_dist(strips) -> float:
    xs = np.linspace(0.0, 1.0, 4097)
    lo = np.array([s[0] for s in strips])
    hi = np.array([s[1] for s in strips])
    return max(K._circ_dist_set(x, lo, hi, len(strips)) for x in xs)


def _build_thick432(p):
    k1, k2 = int(p["K1"]), int(p["K2"])
    f0 = block_map(p["c"], p["t0"], k1)
    f1 = block_map(p["c"], p["t1"], k1)
    g0 = block_map(p["c"], p["t0"], k2)
    g1 = block_map(p["c"], p["t1"], k2)
    rep_f = validate_family(f0, f1).raise_if_failed()
    rep_g = validate_family(g0, g1).raise_if_failed()
    istrips = _strips(p["t0"], p["t1"], k1)
    jstrips = _strips(p["t0"], p["t1"], k2)
    norm_i, norm_j = _max_dist(istrips), _max_dist(jstrips)
    checks = (
        _check("1/2 < p < 1", 0.5 < p["p"] < 1.0, p["p"]),
        _check("0 < shear <= 0.1 (near-identity h_i)", 0.0 < p["shear"] <= 0.1, p["shear"]),
    )
    rep = ValidationReport("thick432_product", checks).raise_if_failed()
    par = (_map_par(f0) + _map_par(f1) + _map_par(g0) + _map_par(g1)
           + [p["shear"], p["p"], float(k2), float(k1), norm_j, norm_i])
    for lo, hi in jstrips:
        par += [lo, hi]
    for lo, hi in istrips:
        par += [lo, hi]
    cat = [CatalogEntry(f"I_{i + 1}xJ_{j + 1}", "box", box=(istrips[i], jstrips[j]))
           for i in range(k1) for j in range(k2)]
    return (np.array(par), _shift_ipar(2), cat, [rep_f, rep_g, rep],
            {"f0": f0, "f1": f1, "g0": g0, "g1": g1, "I": istrips, "J": jstrips})


def _build_flow(p, pid):
    if pid == K.EX7:
        zeta = Zeta("roof_cosine", (p["a"], 0.0))
        rep = zeta_checks(zeta)
        m = zeta.mean()
        rep = ValidationReport("example7_flow", rep.checks + (
            _check("integral of eta > 0 (p_S attracts)", m > 0.0, m),))
        names = ["p_S"]
    else:
        if p["zeta"] == "thm8":
            zeta = Zeta("thm8", (p["delta"],))
        elif p["zeta"] == "roof_cosine":
            zeta = Zeta("roof_cosine", (0.0, p["delta"]))
        else:
            raise ConstructionError(f"thm8_flow zeta must be thm8 or roof_cosine, got {p['zeta']}")
        rep = zeta_checks(zeta)
        if not zeta.coupled:
            rep = ValidationReport(rep.family, rep.checks + (
                _check("zeta couples to the fiber (delta != 0)", False, 0.0),))
        names = ["p_N", "p_S"]
    if not 0.0 < p["h"] <= 0.1:
        rep = ValidationReport(rep.family, rep.checks + (_check("0 < h <= 0.1", False, p["h"]),))
    r = p["capture_radius"]
    centers = {"p_N": 0.0, "p_S": 0.5}
    cat = [CatalogEntry(nm, "point", (centers[nm],), r) for nm in names]
    par = np.array([float(zeta.kid)] + list(zeta.q) + [p["h"]])
    return par, np.zeros(1, dtype=np.int64), cat, [rep], {"zeta": zeta}


_BUILDERS = {
    K.KAN: _build_kan, K.THM2: _build_thm2, K.THM3: _build_thm3, K.THM4: _build_thm4,
    K.THM5: _build_thm5, K.THICK41: _build_thick41, K.THICK42: _build_thick42,
    K.THICK431: _build_thick431, K.THICK432: _build_thick432,
}


def build_system(preset: str, params: dict | None = None, seed: int = 0,
                 verify_catalog: bool = True) -> SkewSystem:
    """Instantiate a preset; raises ConstructionError naming any failed hypothesis."""
    p = _merge(preset, params)
    spec = PRESETS[preset]
    if spec.pid in (K.EX7, K.THM8):
        par, ipar, cat, reports, maps = _build_flow(p, spec.pid)
    else:
        par, ipar, cat, reports, maps = _BUILDERS[spec.pid](p)
    for rep in reports:
        rep.raise_if_failed()
    system = SkewSystem(preset, p, spec.pid, np.ascontiguousarray(par, dtype=float),
                        np.ascontiguousarray(ipar, dtype=np.int64), cat, spec.fiber_dim,
                        spec.base_axis, list(reports), maps, int(seed))
    if verify_catalog:
        rep = check_catalog(system)
        system.reports.append(rep)
        rep.raise_if_failed()
    return system


def check_catalog(system: SkewSystem, trials: int = 8) -> ValidationReport:
    """Every catalog point is invariant under one system step (within 1e-9);
    every catalog box is invariant under the forward fiber maps."""
    checks = []
    for idx, entry in enumerate(system.catalog):
        if entry.kind == "point":
            worst = 0.0
            aux = _rng.Stream(system.seed, _rng.STREAM_AUX, idx)
            for t in range(trials):
                w = aux.uniform()
                y = entry.center[1] if len(entry.center) > 1 else 0.0
                state = initial_state(system, w, entry.center[0], y, seed=system.seed, index=t,
                                      extra=(w, 1.0 - w))
                nxt = step(system, state)
                for d, c in enumerate(entry.center):
                    dist = abs(nxt.st[1 + d] - c)
                    if entry.circle:
                        dist = min(dist, 1.0 - dist)
                    worst = max(worst, dist)
            checks.append(_check(f"catalog {entry.name} invariant under one step", worst <= 1e-9, worst))
        else:
            worst = _box_defect(system, entry)
            checks.append(_check(f"catalog {entry.name} invariant under the forward fiber maps",
                                 worst <= 1e-9, worst))
    return ValidationReport(f"{system.preset} catalog", tuple(checks))


def _box_defect(system: SkewSystem, entry: CatalogEntry) -> float:
    maps = system.maps
    worst = 0.0
    if system.fiber_dim == 1:
        (lo, hi), = entry.box
        fwd = [maps["f0"], maps["f1"]]
        if "phi0" in maps:
            fwd += [maps["phi0"], maps["phi1"]]
        for m in fwd:
            for x in np.linspace(lo, hi, 33):
                v = m(float(x))
                worst = max(worst, lo - v, v - hi)
        if system.pid in (K.THICK41, K.THICK42) and entry.box[0][1] == 1.0:
            # I_r is invariant under the inverse maps instead
            worst = 0.0
            for m in fwd:
                for x in np.linspace(lo, hi, 33):
                    v = m.inverse(float(x))
                    worst = max(worst, lo - v, v - hi)
        return worst
    (xlo, xhi), (ylo, yhi) = entry.box
    for m in (maps["f0"], maps["f1"]):
        for x in np.linspace(xlo, xhi, 33):
            v = m(float(x))
            worst = max(worst, xlo - v, v - xhi)
    for m in (maps["g0"], maps["g1"]):
        for y in np.linspace(ylo, yhi, 33):
            v = m(float(y))
            worst = max(worst, ylo - v, v - yhi)
    # shears vanish on the squares: x-shears on the J strips, y-shears on the I strips
    jlo = np.array([s[0] for s in maps["J"]])
    jhi = np.array([s[1] for s in maps["J"]])
    ilo = np.array([s[0] for s in maps["I"]])
    ihi = np.array([s[1] for s in maps["I"]])
    for y in np.linspace(ylo, yhi, 33):
        worst = max(worst, K._circ_dist_set(y, jlo, jhi, len(jlo)))
    for x in np.linspace(xlo, xhi, 33):
        worst = max(worst, K._circ_dist_set(x, ilo, ihi, len(ilo)))
    return worst


# ---------------------------------------------------------------------------
# states and stepping


def start_row(w: float, x: float, y: float = 0.0, e1: float = 0.0, e2: float = 0.0) -> np.ndarray:
    return np.array([w, x, y, e1, e2], dtype=float)


def initial_state(system: SkewSystem, base: float | None, x: float, y: float = 0.0,
                  seed: int | None = None, index: int = 0, extra=None) -> SystemState:
    """State at base-axis value ``base`` (None: random) and fiber point (x, y).

    The base-axis value is u for expanding bases, the real coding the first
    symbols of omega for shift bases, the first step variate U_0 for the
    north-south walk and the roof coordinate s for flows.  ``extra`` holds the
    torus coordinates of the suspension base.
    """
    seed = system.seed if seed is None else seed
    stream = _rng.Stream(seed, _rng.STREAM_START, index)
    if base is None:
        base = stream.uniform()
    e1, e2 = extra if extra is not None else (stream.uniform(), stream.uniform())
    st = np.zeros(K.NF)
    ist = np.zeros(K.NI, dtype=np.int64)
    K.init_state(system.pid, system.par, system.ipar, start_row(base, x, y, e1, e2),
                 np.uint64(_rng.as_seed(seed)), index, st, ist)
    return SystemState(st, ist)


def step(system: SkewSystem, state: SystemState) -> SystemState:
    """One application of the system map (returns a new state)."""
    out = state.copy()
    K.step(system.pid, system.par, system.ipar, out.st, out.ist, False)
    return out


def iterate(system: SkewSystem, state: SystemState, n: int) -> SystemState:
    out = state.copy()
    for _ in range(n):
        K.step(system.pid, system.par, system.ipar, out.st, out.ist, False)
    return out


def s_value(system: SkewSystem, u: float, x: float) -> float:
    """The flow-time function s(u, x) of the flow-time preset."""
    if system.pid != K.THM3:
        raise ConstructionError(f"preset {system.preset} has no flow-time fiber")
    return float(math.cos(2 * math.pi * u) + system.params["delta"] * (height(x) - 0.5))


def sn_total(state: SystemState) -> float:
    return float(state.st[0])


def accumulate(system: SkewSystem, starts: np.ndarray, n: int, seed: int | None = None) -> np.ndarray:
    """(s_n, S_n) after n steps for every start row (trajectory index = row index)."""
    seed = system.seed if seed is None else seed
    return K.sn_kernel(system.pid, system.par, system.ipar,
                       np.ascontiguousarray(np.atleast_2d(starts), dtype=float),
                       np.uint64(_rng.as_seed(seed)), 0, n)
