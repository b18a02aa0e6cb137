"""Run configuration: an INI document with [run], [params], [grid] and [analysis] sections.

Example::

    [run]
    preset = kan
    analysis = basin_grid
    seed = 1

    [params]
    capture_radius = 1e-6

    [grid]
    base = 0, 1, 16
    x = 0.1, 0.9, 16

    [analysis]
    samples = 200
    horizon = 100000

``[grid]`` lines are ``axis = lo, hi, cells`` with axis one of base, x, y.
Keys left out of ``[params]`` and ``[analysis]`` take the documented defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Any

from basinlab.attract.basins import Axis, GridSpec
from basinlab.errors import ConfigError, ConstructionError
from basinlab.skew.core import PRESETS, build_system

ANALYSES: dict[str, dict[str, Any]] = {
    "basin_grid": {"samples": 200, "horizon": 10000, "dwell": 100},
    "lyapunov": {"entry": "", "n": 100000, "blocks": 50},
    "walk": {"x0": 0.25, "trials": 10000, "horizon": 100000, "dwell": 100, "oracle": True,
             "chain_m": 50},
    "stationary": {"sites": 64, "depth": 3, "tol": 1e-12},
    "thickness": {"words": 10000, "depth": 60, "check_tail": True},
    "flow": {"starts": 100, "t": 100.0, "tau_t": 10000.0},
    "limitset": {"samples": 1000, "horizon": 100000, "dwell": 100, "occupancy_steps": 0,
                 "burn_in": 1000, "nbins": 64},
}

# analyses tied to particular presets
ANALYSIS_PRESETS = {
    "walk": ("thm2_walk",),
    "stationary": ("thm2_walk",),
    "thickness": ("thick41",),
    "flow": ("example7_flow",),
}

# positive integer options
_POSITIVE = {"samples", "horizon", "dwell", "n", "blocks", "trials", "chain_m", "sites", "words",
             "depth", "starts", "nbins"}

SEED_MAX = 2 ** 64 - 1


@dataclass
class RunConfig:
    preset: str
    analysis: str
    seed: int
    params: dict[str, Any]
    options: dict[str, Any]
    grid: GridSpec = field(default_factory=lambda: GridSpec(()))
    output: str = "out"

    def with_seed(self, seed: int) -> "RunConfig":
        return RunConfig(self.preset, self.analysis, check_seed(seed), dict(self.params),
                         dict(self.options), self.grid, self.output)

    def echo(self) -> dict[str, Any]:
        return {
            "preset": self.preset, "analysis": self.analysis, "seed": self.seed,
            "params": dict(self.params), "options": dict(self.options),
            "grid": [[a.name, a.lo, a.hi, a.n] for a in self.grid.axes],
        }


def check_seed(seed) -> int:
    try:
        val = int(str(seed).strip())
    except ValueError:
        raise ConfigError([f"seed must be an integer, got {seed!r}"]) from None
    if not 0 <= val <= SEED_MAX:
        raise ConfigError([f"seed must be a 64-bit unsigned integer, got {val}"])
    return val


def _coerce(key: str, raw: str, default: Any, errors: list[str], where: str):
    text = raw.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if isinstance(default, int):
            val = float(text)
            if val != int(val):
                raise ValueError
            return int(val)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError:
        errors.append(f"[{where}] {key} = {raw!r} is not a valid {type(default).__name__}")
        return default


def parse_config(text: str, check_construction: bool = True) -> RunConfig:
    """Parse and validate a config document; raises ConfigError listing every problem."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"malformed config: {exc}"]) from None
    errors: list[str] = []
    for sec in cp.sections():
        if sec not in ("run", "params", "grid", "analysis"):
            errors.append(f"unknown section [{sec}]")
    if not cp.has_section("run"):
        raise ConfigError(errors + ["missing section [run]"])
    run = cp["run"]
    for key in run:
        if key not in ("preset", "analysis", "seed", "output"):
            errors.append(f"[run] unknown key {key!r}")
    preset = run.get("preset", "").strip()
    analysis = run.get("analysis", "").strip()
    if not preset:
        errors.append("[run] missing required key 'preset'")
    elif preset not in PRESETS:
        errors.append(f"[run] unknown preset {preset!r}; known: {', '.join(PRESETS)}")
    if not analysis:
        errors.append("[run] missing required key 'analysis'")
    elif analysis not in ANALYSES:
        errors.append(f"[run] unknown analysis {analysis!r}; known: {', '.join(ANALYSES)}")
    seed = 0
    if "seed" not in run:
        errors.append("[run] missing required key 'seed'")
    else:
        try:
            seed = check_seed(run["seed"])
        except ConfigError as exc:
            errors += [f"[run] {e}" for e in exc.errors]
    output = run.get("output", "out").strip() or "out"

    params: dict[str, Any] = {}
    if preset in PRESETS:
        defaults = PRESETS[preset].defaults
        if cp.has_section("params"):
            for key, raw in cp["params"].items():
                if key not in defaults:
                    errors.append(f"[params] preset {preset} has no parameter {key!r};"
                                  f" known: {', '.join(defaults)}")
                    continue
                params[key] = _coerce(key, raw, defaults[key], errors, "params")
        if analysis in ANALYSIS_PRESETS and preset not in ANALYSIS_PRESETS[analysis]:
            errors.append(f"analysis {analysis} needs preset {' or '.join(ANALYSIS_PRESETS[analysis])}")

    options: dict[str, Any] = {}
    if analysis in ANALYSES:
        spec = ANALYSES[analysis]
        options = dict(spec)
        if cp.has_section("analysis"):
            for key, raw in cp["analysis"].items():
                if key not in spec:
                    errors.append(f"[analysis] {analysis} has no option {key!r};"
                                  f" known: {', '.join(spec)}")
                    continue
                options[key] = _coerce(key, raw, spec[key], errors, "analysis")
        for key, val in options.items():
            if key in _POSITIVE and val < 1:
                errors.append(f"[analysis] {key} must be positive, got {val}")
        if analysis == "basin_grid" and options["samples"] < 50:
            errors.append(f"[analysis] samples must be at least 50, got {options['samples']}")
        if analysis == "limitset" and options["samples"] < 1000:
            errors.append(f"[analysis] samples must be at least 1000, got {options['samples']}")
        if "dwell" in options and "horizon" in options and options["dwell"] > options["horizon"]:
            errors.append("[analysis] dwell must not exceed horizon")
        if analysis == "lyapunov" and options["n"] < 1000:
            errors.append(f"[analysis] n must be at least 1000, got {options['n']}")
        if analysis == "thickness" and options["depth"] < 40:
            errors.append(f"[analysis] depth must be at least 40, got {options['depth']}")

    axes = []
    if cp.has_section("grid"):
        for key, raw in cp["grid"].items():
            parts = [p.strip() for p in raw.split(",")]
            try:
                if len(parts) != 3:
                    raise ValueError("expected lo, hi, cells")
                axes.append(Axis(key, float(parts[0]), float(parts[1]), int(parts[2])))
            except ValueError as exc:
                errors.append(f"[grid] {key} = {raw!r}: {exc}")
    if analysis != "basin_grid" and axes:
        errors.append(f"[grid] is only used by basin_grid, not {analysis}")
    grid = GridSpec(tuple(axes))

    if errors:
        raise ConfigError(errors)
    cfg = RunConfig(preset, analysis, seed, params, options, grid, output)
    if check_construction:
        try:
            build_system(preset, params, seed)
        except ConstructionError as exc:
            raise ConfigError([f"construction check failed: {exc}"]) from None
    return cfg


def load_config(path: str, check_construction: bool = True) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from None
    except UnicodeDecodeError:
        raise ConfigError([f"{path} is not UTF-8 text"]) from None
    return parse_config(text, check_construction)
