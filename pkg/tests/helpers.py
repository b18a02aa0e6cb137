"""Shared statistical helpers for the test suite."""

import numpy as np


def cells_within(counts, n_sigma=4.0):
    """True when every cell count is within n_sigma binomial deviations of uniform."""
    counts = np.asarray(counts).ravel()
    n = counts.sum()
    p = 1.0 / counts.size
    sd = np.sqrt(n * p * (1 - p))
    return bool(np.all(np.abs(counts - n * p) <= n_sigma * sd)), float(np.max(np.abs(counts - n * p)) / sd)


def occupancy(points, bins):
    """Histogram of points in [0,1)^d on a regular grid with ``bins`` cells per axis."""
    pts = np.column_stack(points)
    idx = np.minimum((pts * bins).astype(int), bins - 1)
    flat = np.ravel_multi_index(idx.T, (bins,) * pts.shape[1])
    return np.bincount(flat, minlength=bins ** pts.shape[1])
