"""Skew-product systems over shift, expanding and suspension bases."""

from basinlab.skew.core import (EQUILIBRIA, PRESETS, CatalogEntry, PresetSpec, SkewSystem,
                                SystemState, accumulate, build_system, check_catalog,
                                initial_state, iterate, s_function, s_value, sn_total, start_row,
                                step)
from basinlab.skew.diagnostics import (LyapunovEstimate, birkhoff_dispersion, chi_apply,
                                       ep_lyapunov, fiber_lyapunov, j_apply)

__all__ = [
    "accumulate", "EQUILIBRIA", "PRESETS", "CatalogEntry", "PresetSpec", "SkewSystem", "SystemState",
    "build_system", "check_catalog", "initial_state", "iterate", "s_function", "s_value",
    "sn_total", "start_row", "step", "LyapunovEstimate", "birkhoff_dispersion", "chi_apply",
    "ep_lyapunov", "fiber_lyapunov", "j_apply",
]
