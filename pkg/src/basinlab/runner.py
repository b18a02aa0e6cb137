"""Executes a RunConfig: builds the preset, runs the analysis, writes CSV/PGM and a manifest."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from basinlab import __version__, _rng
from basinlab.attract import (basin_grid, classify_starts, grid_starts, GridSpec,
                              intermingled_verdict, likely_limit_estimate, min_attractor_support,
                              thickness_estimate)
from basinlab.attract.basins import fmt
from basinlab.config import RunConfig
from basinlab.errors import ConfigError, InconclusiveError
from basinlab.flows import FlowSpec, SuspensionPoint, coupled_step, integrate, tau_accumulate
from basinlab.randomwalk import (absorption_at, perturb, rotation_chain, stationary_power_iteration,
                                 truncation_drift, verify_proposition)
from basinlab.skew import build_system, fiber_lyapunov

log = logging.getLogger("basinlab")


@dataclass
class RunManifest:
    config: dict[str, Any]
    version: str
    outputs: dict[str, str]
    wall_time: float
    status: str
    summary: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "config": self.config, "version": self.version, "outputs": self.outputs,
            "wall_time_s": round(self.wall_time, 3), "status": self.status,
            "summary": self.summary,
        }, indent=2, sort_keys=True) + "\n"


class _Outputs:
    def __init__(self, root: Path, cfg: RunConfig):
        self.root = root
        self.cfg = cfg
        self.files: dict[str, str] = {}
        root.mkdir(parents=True, exist_ok=True)

    def header(self) -> str:
        c = self.cfg
        return f"# basinlab preset={c.preset} seed={c.seed} analysis={c.analysis}\n"

    def write(self, name: str, text: str) -> None:
        data = text.encode("utf-8")
        (self.root / name).write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def table(self, name: str, columns: list[str], rows: list[list[Any]]) -> None:
        lines = [self.header().rstrip("\n"), ",".join(columns)]
        for row in rows:
            lines.append(",".join(_cell(v) for v in row))
        self.write(name, "\n".join(lines) + "\n")


def _cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def _basin_grid(cfg, system, out):
    o = cfg.options
    report = basin_grid(system, cfg.grid, o["samples"], o["horizon"], cfg.seed, o["dwell"])
    out.write("basins.csv", report.csv_text())
    out.write("basins.pgm", report.pgm_text())
    summary: dict[str, Any] = {"totals": report.totals()}
    status = "ok"
    if len(report.names) >= 2:
        verdict = intermingled_verdict(report)
        summary.update(verdict=verdict.status, margin=verdict.margin, pair=list(verdict.pair))
        if verdict.status == "inconclusive":
            status = "inconclusive"
    return status, summary


def _lyapunov(cfg, system, out):
    o = cfg.options
    name = o["entry"] or next((c.name for c in system.catalog if c.kind == "point"), "")
    if not name:
        raise ConfigError([f"preset {cfg.preset} has no fiber-invariant point for a Lyapunov estimate"])
    try:
        entry = system.catalog[system.catalog_index(name)]
    except KeyError:
        raise ConfigError([f"[analysis] entry {name!r} is not in the catalog of {cfg.preset}"]) from None
    if entry.kind != "point":
        raise ConfigError([f"[analysis] entry {name!r} is a region, not an invariant point"])
    est = fiber_lyapunov(system, entry, o["n"], cfg.seed, o["blocks"])
    out.table("lyapunov.csv", ["entry", "n", "blocks", "value", "stderr"],
              [[name, est.n, o["blocks"], est.value, est.stderr]])
    return "ok", {"entry": name, "value": est.value, "stderr": est.stderr}


def _walk(cfg, system, out):
    o = cfg.options
    x0 = o["x0"]
    starts = grid_starts(GridSpec(()), o["trials"], cfg.seed)
    starts[:, 1] = x0
    starts[:, 0] = -1.0  # the first step variate comes from the trajectory's own stream
    ids, _ = classify_starts(system, starts, o["horizon"], o["dwell"], cfg.seed)
    s_idx = system.catalog_index("p_S")
    frac = float(np.mean(ids == s_idx))
    undecided = int(np.sum(ids < 0))
    stderr = math.sqrt(max(frac * (1 - frac), 1e-300) / o["trials"])
    cols = ["x0", "trials", "mc_p_S", "mc_stderr", "undecided"]
    row: list[Any] = [x0, o["trials"], frac, stderr, undecided]
    summary: dict[str, Any] = {"mc_p_S": frac, "mc_stderr": stderr, "undecided": undecided}
    if o["oracle"]:
        f, p = system.maps["f"], system.maps["profile"]
        oracle = absorption_at(f, p, x0, o["chain_m"])
        drift = truncation_drift(f, p, x0)
        z = (frac - oracle) / stderr
        cols += ["oracle_P", "chain_M", "truncation_drift", "z_score"]
        row += [oracle, o["chain_m"], drift, z]
        summary.update(oracle_P=oracle, truncation_drift=drift, z_score=z)
    out.table("walk.csv", cols, [row])
    return "ok", summary


def _stationary(cfg, system, out):
    o = cfg.options
    chain = rotation_chain(o["sites"], system.maps["profile"])
    meas = stationary_power_iteration(chain, o["tol"])
    stat, inv = verify_proposition(chain, meas.mass, o["depth"])
    pstat, pinv = verify_proposition(chain, perturb(meas.mass), o["depth"])
    out.table("stationary.csv", ["site", "x", "mass"],
              [[k, k / o["sites"], meas.mass[k]] for k in range(o["sites"])])
    out.table("proposition.csv", ["measure", "stationarity_residual", "invariance_residual"],
              [["stationary", stat, inv], ["perturbed_1pct", pstat, pinv]])
    return "ok", {"sweeps": meas.sweeps, "stationarity_residual": stat, "invariance_residual": inv,
                  "perturbed": [pstat, pinv]}


def _thickness(cfg, system, out):
    o = cfg.options
    f0, f1 = system.maps["f0"], system.maps["f1"]
    try:
        est = thickness_estimate(f0, f1, o["words"], o["depth"], cfg.seed, o["check_tail"])
    except InconclusiveError as exc:
        out.table("thickness.csv", ["depth", "words", "status", "reason"],
                  [[o["depth"], o["words"], "inconclusive", str(exc).replace(",", ";")]])
        return "inconclusive", {"reason": str(exc)}
    out.table("thickness.csv",
              ["depth", "words", "mean_ratio", "measure", "ci_lo", "ci_hi", "positive_fraction",
               "tail_change", "max_trace_increase"],
              [[est.depth, o["words"], est.mean_ratio, est.measure, est.ci[0], est.ci[1],
                est.positive_fraction, est.tail_change, est.max_trace_increase]])
    xs = np.linspace(0.0, est.l, 31)
    out.table("phi.csv", ["x", "Phi"], [[x, p] for x, p in zip(xs, est.phi(xs))])
    return "ok", {"mean_ratio": est.mean_ratio, "ci": list(est.ci),
                  "positive_fraction": est.positive_fraction}


def _flow(cfg, system, out):
    o = cfg.options
    zeta = system.maps["zeta"]
    h = system.params["h"]
    spec = FlowSpec("circle_gradient", h)
    stream = _rng.Stream(cfg.seed, _rng.STREAM_START, 0)
    rows = []
    worst = 0.0
    for _ in range(o["starts"]):
        v1, v2, s, x = stream.uniforms(4)
        pt = SuspensionPoint(v1, v2, s)
        _, xc = coupled_step(zeta, (pt, x), o["t"], h)
        tau = tau_accumulate(zeta, pt, o["t"], h)
        xt = integrate(spec, x, tau)
        d = abs(xc - xt)
        d = min(d, 1.0 - d)
        worst = max(worst, d)
        rows.append([v1, v2, s, x, xc, xt, d, tau])
    out.table("time_change.csv", ["v1", "v2", "s", "x0", "x_coupled", "x_time_changed",
                                  "difference", "tau"], rows)
    pt = SuspensionPoint(*stream.uniforms(3))
    big = tau_accumulate(zeta, pt, o["tau_t"], h)
    mean = zeta.mean()
    out.table("tau.csv", ["t", "tau", "tau_over_t", "quadrature_mean", "relative_error"],
              [[o["tau_t"], big, big / o["tau_t"], mean, abs(big / o["tau_t"] - mean) / abs(mean)]])
    return "ok", {"max_difference": worst, "tau_over_t": big / o["tau_t"], "quadrature_mean": mean}


def _limitset(cfg, system, out):
    o = cfg.options
    est = likely_limit_estimate(system, o["samples"], o["horizon"], cfg.seed, o["dwell"])
    rows = [[nm, fr] for nm, fr in est.frequencies.items()] + [["unexplained", est.unexplained]]
    out.table("limitset.csv", ["attractor", "frequency"], rows)
    summary: dict[str, Any] = {"members": list(est.members), "unexplained": est.unexplained}
    if o["occupancy_steps"] > 0:
        occ = min_attractor_support(system, o["samples"], o["occupancy_steps"] + o["burn_in"],
                                    o["burn_in"], o["nbins"], cfg.seed)
        marg = occ.marginal()
        out.table("occupancy.csv", ["cell", "center", "mass"],
                  [[k, c, m] for k, (c, m) in enumerate(zip(occ.centers, marg))])
        summary["support_cells"] = [int(c) for c in occ.support]
    return "ok", summary


_ANALYSES = {
    "basin_grid": _basin_grid, "lyapunov": _lyapunov, "walk": _walk, "stationary": _stationary,
    "thickness": _thickness, "flow": _flow, "limitset": _limitset,
}


def run(cfg: RunConfig, out_dir: str | None = None) -> RunManifest:
    """Run the configured analysis; construction failures propagate as ConstructionError."""
    t0 = time.perf_counter()
    system = build_system(cfg.preset, cfg.params, cfg.seed)
    log.info("%s", system.render_checks())
    out = _Outputs(Path(out_dir or cfg.output), cfg)
    status, summary = _ANALYSES[cfg.analysis](cfg, system, out)
    manifest = RunManifest(cfg.echo(), __version__, dict(out.files), time.perf_counter() - t0,
                           status, _plain(summary))
    (out.root / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    log.info("%s %s: %s -> %s", cfg.preset, cfg.analysis, status, out.root)
    return manifest


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj
