"""Compiled per-trajectory stepping for every preset.

Presets are dispatched on an integer id so that all kernels can be cached.
State layout: ``ist = [n, S_n, ...]`` (integers, keys stored as int64 bit
patterns) and ``st = [s_n, x, y]`` (reals).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from basinlab import _rng
from basinlab.flows import (circle_field_d, coupled_advance, height, rk4_circle, rk4_circle_var,
                            rk4_tcomp, rk4_tcomp_var, tau_kernel, wrap)
from basinlab.maps1d import df, f, f_inv
from basinlab.randomwalk import prof_eval

KAN, THM2, THM3, THM4, THM5, THICK41, THICK42, THICK431, THICK432, EX7, THM8 = range(11)

NI = 7  # integer state length
NF = 3  # real state length
# catalog row: [type, radius, c0, c1, lo0, hi0, lo1, hi1]
CAT_CIRCLE_POINT, CAT_LINE_POINT, CAT_BOX = 0, 1, 2

# translations (x, y) conjugating the torus flow for the four equilibria
TRANS = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]])

STREAMS_SHIFT = (_rng.STREAM_BASE, _rng.STREAM_ZETA, _rng.STREAM_ETA, _rng.STREAM_XI)


@njit(cache=True)
def _sym(P, D, k, key, i):
    """Symbol i of a shift point whose symbols 0..D-1 are the base-k digits of P."""
    if 0 <= i < D:
        return (P // (k ** (D - 1 - i))) % k
    return _rng.symbol(np.uint64(key), i, k)


@njit(cache=True)
def _el_u(ist, ipar):
    return ist[2] / ipar[2]


@njit(cache=True)
def _el_advance(ist, ipar):
    # E_L on the digit window: drop the leading digit, append a fresh one
    # the leading digit is estimated in floating point (W < 2^53 is exact) and
    # corrected, which avoids a slow 64-bit integer division on the serial chain
    d = _rng.symbol(np.uint64(ist[4]), ist[3], ipar[0])
    W = ist[2]
    top = ipar[1]
    lead = np.int64(np.float64(W) / np.float64(top))
    if lead * top > W:
        lead -= 1
    elif (lead + 1) * top <= W:
        lead += 1
    ist[2] = (W - lead * top) * ipar[0] + d
    ist[3] += 1


@njit(cache=True)
def _bump(u, q, hw):
    d = abs(u - q)
    d = min(d, 1.0 - d)
    if d >= hw:
        return 0.0
    r = d / hw
    return math.exp(1.0 - 1.0 / (1.0 - r * r))


@njit(cache=True)
def _circ_dist_set(x, lo, hi, m):
    # circle distance from x to a union of m intervals [lo_i, hi_i]
    best = 1.0
    for i in range(m):
        if lo[i] <= x <= hi[i]:
            return 0.0
        d1 = abs(x - lo[i])
        d1 = min(d1, 1.0 - d1)
        d2 = abs(x - hi[i])
        d2 = min(d2, 1.0 - d2)
        best = min(best, d1, d2)
    return best


@njit(cache=True)
def _torus_flow(x, y, tt, nsub, alpha, beta, i, want):
    tx = TRANS[i, 0]
    ty = TRANS[i, 1]
    a = wrap(x - tx)
    b = wrap(y - ty)
    if want:
        a, la = rk4_tcomp_var(a, tt, nsub, alpha, beta)
        b, lb = rk4_tcomp_var(b, tt, nsub, alpha, beta)
        ld = max(la, lb)
    else:
        a = rk4_tcomp(a, tt, nsub, alpha, beta)
        b = rk4_tcomp(b, tt, nsub, alpha, beta)
        ld = 0.0
    return wrap(a + tx), wrap(b + ty), ld


@njit(cache=True)
def _map(par, off, x, power):
    fid = np.int64(par[off])
    q = par[off + 1: off + 5]
    if power > 0:
        return f(fid, q, x)
    return f_inv(fid, q, x)


@njit(cache=True)
def _logd(par, off, x, power):
    # log derivative of f (power=+1, at x) or of f^-1 (power=-1, at x)
    fid = np.int64(par[off])
    q = par[off + 1: off + 5]
    if power > 0:
        return math.log(df(fid, q, x))
    return -math.log(df(fid, q, f_inv(fid, q, x)))


@njit(cache=True)
def step(pid, par, ipar, st, ist, want):
    """Advance one trajectory in place; returns the fiber log-derivative if ``want``."""
    ld = 0.0
    n = ist[0]
    if pid == KAN:
        u = _el_u(ist, ipar)
        x = st[1]
        c = math.cos(2.0 * math.pi * u) * par[0]
        if want:
            ld = math.log(1.0 + c * (1.0 - 2.0 * x))
        st[1] = x + c * x * (1.0 - x)
        _el_advance(ist, ipar)
    elif pid == THM2:
        x = st[1]
        pr = prof_eval(np.int64(par[5]), par[6:10], x)
        if n == 0 and st[2] >= 0.0:
            w = st[2]
        else:
            w = _rng.uniform(np.uint64(ist[2]), n)
        eta = 1 if w < pr else -1
        if want:
            ld = _logd(par, 0, x, eta)
        st[1] = _map(par, 0, x, eta)
        ist[1] += eta
    elif pid == THM3:
        u = _el_u(ist, ipar)
        x = st[1]
        s = math.cos(2.0 * math.pi * u) + par[0] * (height(x) - 0.5)
        nsub = np.int64(par[1])
        if want:
            x1, ld = rk4_circle_var(x, s, nsub)
        else:
            x1 = rk4_circle(x, s, nsub)
        st[1] = wrap(x1)
        st[0] += s
        _el_advance(ist, ipar)
    elif pid == THM4:
        u = _el_u(ist, ipar)
        hw = par[2]
        k = np.int64(par[4])
        for i in range(k):
            tt = _bump(u, i / k, hw)
            if tt > 0.0:
                st[1], st[2], ld = _torus_flow(st[1], st[2], tt, np.int64(par[3]),
                                               par[0], par[1], i, want)
                st[0] += tt
                break
        _el_advance(ist, ipar)
    elif pid == THM5:
        i = _sym(ist[2], ipar[1], 4, ist[3], n)
        st[1], st[2], ld = _torus_flow(st[1], st[2], 1.0, np.int64(par[2]), par[0], par[1],
                                       i, want)
    elif pid == THICK41:
        a = _sym(ist[2], ipar[1], 2, ist[3], n)
        x = st[1]
        off = 5 * a
        if want:
            ld = _logd(par, off, x, 1)
        st[1] = _map(par, off, x, 1)
    elif pid == THICK42 or pid == THICK431:
        x = st[1]
        if pid == THICK42:
            pr = prof_eval(np.int64(par[10]), par[11:15], x)
        else:
            pr = par[20]
        c = ist[1]
        if _rng.uniform(np.uint64(ist[4]), n) < pr:
            a = _sym(ist[2], ipar[1], 2, ist[3], c)
            eta = 1
        else:
            a = _sym(ist[2], ipar[1], 2, ist[3], c - 1)
            eta = -1
        if want:
            ld = _logd(par, 5 * a, x, eta)
        x = _map(par, 5 * a, x, eta)
        ist[1] += eta
        if pid == THICK431:
            xi = _rng.symbol(np.uint64(ist[5]), n, 2)
            off = 10 + 5 * xi
            if want:
                ld += _logd(par, off, x, 1)
            x = _map(par, off, x, 1)
        st[1] = x
    elif pid == THICK432:
        x = st[1]
        y = st[2]
        c = ist[1]
        if _rng.uniform(np.uint64(ist[5]), n) < par[21]:
            a = _sym(ist[2], ipar[1], 2, ist[3], c)
            b = _rng.symbol(np.uint64(ist[4]), c, 2)
            eta = 1
        else:
            a = _sym(ist[2], ipar[1], 2, ist[3], c - 1)
            b = _rng.symbol(np.uint64(ist[4]), c - 1, 2)
            eta = -1
        x = _map(par, 5 * a, x, eta)
        y = _map(par, 10 + 5 * b, y, eta)
        ist[1] += eta
        xi = _rng.symbol(np.uint64(ist[6]), n, 4)
        amp = par[20]
        m = np.int64(par[22])
        lo = par[26: 26 + 2 * m: 2]
        hi = par[27: 27 + 2 * m: 2]
        if xi < 2:
            # x-shears vanish on the horizontal strips T x J_j
            w = _circ_dist_set(y, lo, hi, m) / par[24]
            sh = amp * w * w
            x = wrap(x + sh if xi == 0 else x - sh)
        else:
            mx = np.int64(par[23])
            lx = par[26 + 2 * m: 26 + 2 * m + 2 * mx: 2]
            hx = par[27 + 2 * m: 27 + 2 * m + 2 * mx: 2]
            w = _circ_dist_set(x, lx, hx, mx) / par[25]
            sh = amp * w * w
            y = wrap(y + sh if xi == 2 else y - sh)
        st[1] = x
        st[2] = y
    elif pid == EX7 or pid == THM8:
        if want:
            # exact on invariant fiber points, where x stays put: g'(x) times the integrated zeta
            ld = circle_field_d(st[1]) * tau_kernel(np.int64(par[0]), par[1:5], ist[2], ist[3],
                                                    st[2], st[1], 1.0, par[5])
        a, b, s, x = coupled_advance(np.int64(par[0]), par[1:5], ist[2], ist[3], st[2], st[1],
                                     1.0, par[5])
        ist[2] = a
        ist[3] = b
        st[2] = s
        st[1] = x
        st[0] += 1.0
    ist[0] = n + 1
    return ld


@njit(cache=True)
def init_state(pid, par, ipar, row, seed, t, st, ist):
    """Start trajectory ``t`` from ``row = [w, x, y, e1, e2]`` (w = base-axis value)."""
    for i in range(NI):
        ist[i] = 0
    st[0] = 0.0
    st[1] = row[1]
    st[2] = row[2]
    w = row[0]
    sd = np.uint64(seed)
    tt = np.uint64(t)
    if pid == KAN or pid == THM3 or pid == THM4:
        W = np.int64(w * ipar[2])
        if W >= ipar[2]:
            W = ipar[2] - 1
        ist[2] = W
        ist[4] = np.int64(_rng.derive(sd, np.uint64(_rng.STREAM_BASE), tt))
    elif pid == THM2:
        st[2] = w
        ist[2] = np.int64(_rng.derive(sd, np.uint64(_rng.STREAM_ETA), tt))
    elif pid == EX7 or pid == THM8:
        st[2] = w
        ist[2] = np.int64(row[3] * 9007199254740992.0)
        ist[3] = np.int64(row[4] * 9007199254740992.0)
    else:
        P = np.int64(w * ipar[2])
        if P >= ipar[2]:
            P = ipar[2] - 1
        ist[2] = P
        ist[3] = np.int64(_rng.derive(sd, np.uint64(_rng.STREAM_BASE), tt))
        ist[4] = np.int64(_rng.derive(sd, np.uint64(_rng.STREAM_ZETA), tt))
        ist[5] = np.int64(_rng.derive(sd, np.uint64(_rng.STREAM_ETA), tt))
        ist[6] = np.int64(_rng.derive(sd, np.uint64(_rng.STREAM_XI), tt))
        if pid == THICK42 or pid == THICK431:
            # layout [n, S, P, key_omega, key_eta, key_xi]
            ist[4] = ist[5]
            ist[5] = ist[6]
            ist[6] = 0


@njit(cache=True)
def locate(cat, st, fdim):
    """Index of the first catalog region containing the fiber point, or -1."""
    for k in range(cat.shape[0]):
        typ = np.int64(cat[k, 0])
        inside = True
        for d in range(fdim):
            v = st[1 + d]
            if typ == CAT_BOX:
                if v < cat[k, 4 + 2 * d] or v > cat[k, 5 + 2 * d]:
                    inside = False
            else:
                dist = abs(v - cat[k, 2 + d])
                if typ == CAT_CIRCLE_POINT:
                    dist = min(dist, 1.0 - dist)
                if dist >= cat[k, 1]:
                    inside = False
        if inside:
            return k
    return -1


@njit(cache=True, parallel=True)
def classify_kernel(pid, par, ipar, cat, fdim, starts, seed, offset, horizon, dwell):
    n = starts.shape[0]
    out = np.full(n, -1, dtype=np.int64)
    when = np.zeros(n, dtype=np.int64)
    for t in prange(n):
        st = np.zeros(NF)
        ist = np.zeros(NI, dtype=np.int64)
        init_state(pid, par, ipar, starts[t], seed, offset + t, st, ist)
        cur = -1
        run = 0
        for k in range(horizon):
            step(pid, par, ipar, st, ist, False)
            c = locate(cat, st, fdim)
            if c >= 0 and c == cur:
                run += 1
            else:
                cur = c
                run = 1 if c >= 0 else 0
            if run >= dwell:
                out[t] = cur
                when[t] = k + 1
                break
    return out, when


@njit(cache=True, parallel=True)
def occupancy_kernel(pid, par, ipar, fdim, starts, seed, offset, n_steps, burn_in, nbins,
                     centered, nchunks):
    """Fiber occupancy after burn-in, as integer counts on nbins cells per coordinate.

    With ``centered`` the cells are centered on the grid points k/nbins and wrap
    around (circle fibers); otherwise cell k is [k/nbins, (k+1)/nbins).
    """
    n = starts.shape[0]
    cells = nbins ** fdim
    acc = np.zeros((nchunks, cells), dtype=np.int64)
    shift = 0.5 if centered else 0.0
    for c in prange(nchunks):
        st = np.zeros(NF)
        ist = np.zeros(NI, dtype=np.int64)
        for t in range(c, n, nchunks):
            init_state(pid, par, ipar, starts[t], seed, offset + t, st, ist)
            for k in range(n_steps):
                step(pid, par, ipar, st, ist, False)
                if k >= burn_in:
                    idx = 0
                    for d in range(fdim):
                        b = np.int64(math.floor(st[1 + d] * nbins + shift))
                        if centered:
                            b = b % nbins
                        elif b >= nbins:
                            b = nbins - 1
                        elif b < 0:
                            b = 0
                        idx = idx * nbins + b
                    acc[c, idx] += 1
    return acc.sum(axis=0)


@njit(cache=True, parallel=True)
def band_fraction_kernel(pid, par, ipar, starts, seed, offset, n_steps, burn_in, lo, hi):
    """Per trajectory: fraction of post-burn-in steps with lo < x < hi."""
    n = starts.shape[0]
    out = np.zeros(n)
    for t in prange(n):
        st = np.zeros(NF)
        ist = np.zeros(NI, dtype=np.int64)
        init_state(pid, par, ipar, starts[t], seed, offset + t, st, ist)
        cnt = 0
        for k in range(n_steps):
            step(pid, par, ipar, st, ist, False)
            if k >= burn_in and lo < st[1] < hi:
                cnt += 1
        out[t] = cnt / max(1, n_steps - burn_in)
    return out


@njit(cache=True, parallel=True)
def lyapunov_kernel(pid, par, ipar, starts, seed, offset, n, nblocks):
    """Block sums of fiber log-derivatives; one row per start."""
    m = starts.shape[0]
    out = np.zeros((m, nblocks))
    per = n // nblocks
    for t in prange(m):
        st = np.zeros(NF)
        ist = np.zeros(NI, dtype=np.int64)
        init_state(pid, par, ipar, starts[t], seed, offset + t, st, ist)
        for b in range(nblocks):
            acc = 0.0
            for _ in range(per):
                acc += step(pid, par, ipar, st, ist, True)
            out[t, b] = acc
    return out


@njit(cache=True, parallel=True)
def sn_kernel(pid, par, ipar, starts, seed, offset, n):
    """(s_n, S_n) after n steps for each start."""
    m = starts.shape[0]
    out = np.zeros((m, 2))
    for t in prange(m):
        st = np.zeros(NF)
        ist = np.zeros(NI, dtype=np.int64)
        init_state(pid, par, ipar, starts[t], seed, offset + t, st, ist)
        for _ in range(n):
            step(pid, par, ipar, st, ist, False)
        out[t, 0] = st[0]
        out[t, 1] = ist[1]
    return out


@njit(cache=True)
def run_path(pid, par, ipar, row, seed, t, n):
    """Fiber coordinates along one trajectory (n+1 rows, including the start)."""
    st = np.zeros(NF)
    ist = np.zeros(NI, dtype=np.int64)
    init_state(pid, par, ipar, row, seed, t, st, ist)
    out = np.zeros((n + 1, NF))
    out[0] = st
    for k in range(n):
        step(pid, par, ipar, st, ist, False)
        out[k + 1] = st
    return out
