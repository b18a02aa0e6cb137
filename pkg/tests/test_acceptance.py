"""Acceptance suite: one test per criterion, each reported as PASS/FAIL in the terminal summary."""

import json
import math
import os
import subprocess
import sys
import textwrap
import time

import numba
import numpy as np
import pytest

from basinlab.attract import (Axis, GridSpec, band_fractions, basin_grid, classify_starts,
                              grid_starts, intermingled_verdict, thickness_estimate)
from basinlab.config import parse_config
from basinlab.errors import ConstructionError
from basinlab.flows import suspension_flow_arrays
from basinlab.maps1d import thick_f0, thick_f1
from basinlab.randomwalk import (ProbProfile, perturb, rotation_chain, stationary_power_iteration,
                                 verify_proposition)
from basinlab.runner import run
from basinlab.skew import (PRESETS, birkhoff_dispersion, build_system, ep_lyapunov,
                           fiber_lyapunov, j_apply)
from basinlab.symbolic import baker_apply, ep_apply
from helpers import cells_within, occupancy


def test_kan_intermingled(criterion):
    kan = build_system("kan", {"capture_radius": 1e-6})
    grid = GridSpec.of(Axis("base", 0.0, 1.0, 16), Axis("x", 0.1, 0.9, 16))
    t0 = time.perf_counter()
    report = basin_grid(kan, grid, 200, 100_000, seed=1)
    elapsed = time.perf_counter() - t0
    v = intermingled_verdict(report)
    criterion(1, "Kan intermingled basins (16x16 grid, 200/cell, horizon 1e5)", [
        ("global verdict", v.status == "pass", f"{v.status}, totals {report.totals()}"),
        ("margin >= 0.01", v.margin >= 0.01, f"margin {v.margin:.4f}"),
        ("runtime (reported, not gated)", True,
         f"{elapsed:.0f} s on {numba.get_num_threads()} thread(s); target < 120 s on 4 workers"),
    ])


WALK = """
    [run]
    preset = thm2_walk
    analysis = walk
    seed = 2

    [analysis]
    x0 = 0.25
    trials = 10000
    chain_m = 50
"""


def test_thm2_oracle(criterion, tmp_path):
    s = run(parse_config(textwrap.dedent(WALK)), str(tmp_path)).summary
    criterion(2, "random walk along orbits against the orbit-chain oracle (x=0.25, 1e4 walks)", [
        ("MC within 3 sigma", abs(s["z_score"]) < 3,
         f"MC {s['mc_p_S']:.4f} +- {s['mc_stderr']:.4f}, oracle {s['oracle_P']:.5f},"
         f" z = {s['z_score']:.2f}, undecided {s['undecided']}"),
        ("truncation drift M=40..60 < 1e-3", s["truncation_drift"] < 1e-3,
         f"{s['truncation_drift']:.2e}"),
    ])


def test_proposition(criterion):
    checks = []
    for label, prof in (("Constant(0.5)", ProbProfile.constant(0.5)),
                        ("Cosine(0.2)", ProbProfile.cosine(0.2))):
        chain = rotation_chain(64, prof)
        mass = stationary_power_iteration(chain, 1e-12).mass
        stat, inv = verify_proposition(chain, mass, 3)
        pstat, pinv = verify_proposition(chain, perturb(mass), 3)
        checks += [
            (f"{label} stationary residual < 1e-12", stat < 1e-12, f"{stat:.2e}"),
            (f"{label} invariance residual < 1e-10", inv < 1e-10, f"{inv:.2e}"),
            (f"{label} perturbed residuals > 1e-4", pstat > 1e-4 and pinv > 1e-4,
             f"{pstat:.2e}, {pinv:.2e}"),
        ]
    criterion(3, "stationary measure <-> invariant measure identity on the 64-site chain", checks)


def test_lyapunov(criterion):
    thm3 = fiber_lyapunov(build_system("thm3_flowtime"), "p_S", 100_000, seed=1)
    target3 = -2 * math.pi ** 2 * 0.1
    kan = fiber_lyapunov(build_system("kan"), "lower", 10_000_000, seed=1)
    target_kan = math.log((1 + math.sqrt(1 - (1 / 32) ** 2)) / 2)
    ep = ep_lyapunov(1 / 3, 1_000_000, seed=1)
    target_ep = math.log(3) / 3 + 2 * math.log(1.5) / 3
    criterion(4, "fiber and base Lyapunov exponents against analytic values", [
        ("thm3 at p_S within 5%", abs(thm3.value - target3) <= 0.05 * abs(target3),
         f"{thm3} vs {target3:.4f}"),
        ("Kan boundary within 3 stderr", abs(kan.value - target_kan) <= 3 * kan.stderr,
         f"{kan} vs {target_kan:.6e}"),
        ("E_1/3 within 2%", abs(ep.value - target_ep) <= 0.02 * target_ep, f"{ep} vs {target_ep:.4f}"),
    ])


def test_thickness(criterion):
    f0, f1 = thick_f0(), thick_f1()
    # tail check off so that each sub-claim is assessed on its own
    est = thickness_estimate(f0, f1, 10_000, 60, seed=1, check_tail=False)
    deep = thickness_estimate(f0, f1, 10_000, 120, seed=1, check_tail=False)
    shift = abs(deep.measure - est.measure)
    lo, hi = est.ci[0] * est.l, est.ci[1] * est.l
    criterion(5, "thick attractor of the default pair (depth 60, 1e4 words)", [
        ("X_l > 1e-6 for >= 99% of words", est.positive_fraction >= 0.99,
         f"{est.positive_fraction:.4f}"),
        ("mean X_l stable under depth doubling (1e-4)", shift <= 1e-4,
         f"mean {est.measure:.5f} at depth 60, {deep.measure:.5f} at depth 120"),
        ("99% CI inside (0, l)", 0 < lo and hi < est.l, f"[{lo:.5f}, {hi:.5f}] in (0, {est.l})"),
        ("pullback traces monotone", est.max_trace_increase <= 0.0,
         f"largest step {est.max_trace_increase:.3g}"),
    ])


def test_dichotomy(criterion):
    system = build_system("thick42_walk")
    grid = GridSpec.of(Axis("x", 0.35, 0.65, 6))
    starts = grid_starts(grid, 1667, seed=1)
    middle = float(band_fractions(system, starts, 3000, 1000, 0.3, 0.7, seed=1).mean())
    ids, _ = classify_starts(system, starts, 100_000, seed=1)
    cell = np.minimum(((starts[:, 1] - 0.35) / 0.05).astype(int), 5)
    il, ir = system.catalog_index("I_l"), system.catalog_index("I_r")
    freq = np.array([[np.mean(ids[cell == c] == k) for k in (il, ir)] for c in range(6)])
    criterion(6, "two thick attractors with intermingled basins (1e4 starts, x in [0.35,0.65])", [
        ("occupancy of (l, r) after burn-in < 5%", middle < 0.05, f"{middle:.4f}"),
        ("both classes >= 0.02 in every 0.05 bin", bool(np.all(freq >= 0.02)),
         f"min I_l {freq[:, 0].min():.3f}, min I_r {freq[:, 1].min():.3f},"
         f" undecided {int(np.sum(ids < 0))}"),
    ])


def test_flow_layer(criterion, tmp_path):
    cfg = parse_config("[run]\npreset = example7_flow\nanalysis = flow\nseed = 3\n")
    s = run(cfg, str(tmp_path)).summary
    rel = abs(s["tau_over_t"] - s["quadrature_mean"]) / abs(s["quadrature_mean"])
    rng = np.random.default_rng(7)
    pts = suspension_flow_arrays(*rng.random((3, 1_000_000)), 10.0)
    ok, worst = cells_within(occupancy(pts, 8))
    criterion(7, "coupled flow, time change and suspension volume", [
        ("time-change identity to 1e-4 (100 starts, t=100)", s["max_difference"] < 1e-4,
         f"max difference {s['max_difference']:.2e}"),
        ("tau(1e4)/1e4 within 2% of quadrature", rel < 0.02,
         f"{s['tau_over_t']:.6f} vs {s['quadrature_mean']:.6f}"),
        ("suspension volume within 4 sigma (1e6 samples)", ok, f"worst cell {worst:.2f} sigma"),
    ])


def test_measure_models(criterion):
    rng = np.random.default_rng(11)
    baker_ok, baker_worst = cells_within(occupancy(baker_apply(0.3, *rng.random((2, 1_000_000)), 1), 8))
    ep_ok, ep_worst = cells_within(occupancy([ep_apply(1 / 3, rng.random(1_000_000))], 16))
    starts = tuple(rng.random((4, 50)))
    obs = lambda s: (s[0] < 0.6).astype(float)  # noqa: E731
    disp = birkhoff_dispersion(lambda s: j_apply(0.6, *s), obs, starts, 100_000)
    criterion(8, "Lebesgue invariance of the symbolic models and the J ergodicity diagnostic", [
        ("baker B_0.3 grid test (4 sigma)", baker_ok, f"worst cell {baker_worst:.2f} sigma"),
        ("E_1/3 grid test (4 sigma)", ep_ok, f"worst cell {ep_worst:.2f} sigma"),
        ("J dispersion < 0.01 (p=0.6, 50 starts, n=1e5)", disp < 0.01, f"{disp:.5f}"),
    ])


def test_construction_gates(criterion):
    checks = []
    for name, spec in PRESETS.items():
        try:
            build_system(name)
            default_ok, note = True, "defaults build"
        except ConstructionError as exc:
            default_ok, note = False, f"defaults rejected: {exc}"
        try:
            build_system(name, spec.counterexample)
            bad_ok, bad_note = False, f"counterexample {spec.counterexample} accepted"
        except ConstructionError:
            bad_ok, bad_note = True, f"counterexample {spec.counterexample} rejected"
        checks.append((name, default_ok and bad_ok, f"{note}; {bad_note}"))
    criterion(9, "construction-time hypothesis checks on every preset", checks)


GRID_RUN = """
    [run]
    preset = kan
    analysis = basin_grid
    seed = 11

    [grid]
    base = 0, 1, 4
    x = 0.1, 0.9, 4

    [analysis]
    samples = 50
    horizon = 20000
"""

OCCUPANCY_RUN = """
    [run]
    preset = thm4_multi
    analysis = limitset
    seed = 11

    [analysis]
    horizon = 20000
    occupancy_steps = 2000
"""


def _cli_run(config, out, threads):
    env = dict(os.environ, BASINLAB_THREADS=str(threads))
    proc = subprocess.run([sys.executable, "-m", "basinlab.cli", "run", str(config), "--out", str(out)],
                          env=env, capture_output=True, text=True, timeout=1200)
    assert proc.returncode in (0, 4), proc.stderr
    files = json.loads((out / "manifest.json").read_text())["outputs"]
    return {name: (out / name).read_bytes() for name in files}


def test_reproducible(criterion, tmp_path):
    checks = []
    for label, text in (("basin grid", GRID_RUN), ("occupancy", OCCUPANCY_RUN)):
        cfg = tmp_path / f"{label.replace(' ', '_')}.ini"
        cfg.write_text(textwrap.dedent(text))
        a = _cli_run(cfg, tmp_path / f"{cfg.stem}_a", 1)
        b = _cli_run(cfg, tmp_path / f"{cfg.stem}_b", 1)
        c = _cli_run(cfg, tmp_path / f"{cfg.stem}_c", 2)
        checks += [
            (f"{label}: two runs byte-identical", a == b, ", ".join(sorted(a))),
            (f"{label}: 1 vs 2 workers byte-identical", a == c, ", ".join(sorted(c))),
        ]
    criterion(10, "reproducibility of CSV/PGM outputs", checks)
