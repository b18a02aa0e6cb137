"""Attractor-side analysis: basins, limit sets, invariant graphs and thickness."""

from basinlab.attract.basins import (Axis, BasinReport, GridSpec, LimitSetEstimate, Occupancy,
                                     Verdict, band_fractions, basin_grid, classify_orbit,
                                     classify_starts, grid_starts, intermingled_verdict,
                                     likely_limit_estimate, min_attractor_support, single_start,
                                     wilson, with_radius)
from basinlab.attract.graphs import (Ball, GraphSample, ProbeResult, ThicknessEstimate,
                                     complement_density_probe, pullback_graph, repeller_graph,
                                     thickness_estimate)

__all__ = [
    "Axis", "BasinReport", "GridSpec", "LimitSetEstimate", "Occupancy", "Verdict",
    "band_fractions", "basin_grid", "classify_orbit", "classify_starts", "grid_starts",
    "intermingled_verdict", "likely_limit_estimate", "min_attractor_support", "single_start",
    "wilson", "with_radius", "Ball", "GraphSample", "ProbeResult", "ThicknessEstimate",
    "complement_density_probe", "pullback_graph", "repeller_graph", "thickness_estimate",
]
