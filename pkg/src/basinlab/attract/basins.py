"""Orbit classification, basin grids and intermingledness verdicts."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import numba
from numba import njit

from basinlab import _rng
from basinlab.skew import _kernels as K
from basinlab.skew.core import SkewSystem, start_row

Z99 = 2.5758293035489004
DWELL = 100
UNDECIDED = -1
PGM_UNDECIDED = 255


def wilson(k, n, z: float = Z99):
    """Wilson score interval for k successes out of n (vectorized)."""
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    safe = np.maximum(n, 1.0)
    ph = k / safe
    den = 1.0 + z * z / safe
    mid = (ph + z * z / (2 * safe)) / den
    rad = z * np.sqrt(ph * (1 - ph) / safe + z * z / (4 * safe * safe)) / den
    lo = np.where(n > 0, np.maximum(mid - rad, 0.0), 0.0)
    hi = np.where(n > 0, np.minimum(mid + rad, 1.0), 1.0)
    return lo, hi


@dataclass(frozen=True)
class Axis:
    """A sampled coordinate: ``name`` is one of base, x, y."""

    name: str
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.name not in ("base", "x", "y"):
            raise ValueError(f"grid axis must be base, x or y, got {self.name!r}")
        if not 0.0 <= self.lo < self.hi <= 1.0:
            raise ValueError(f"axis {self.name} range [{self.lo}, {self.hi}] must lie in [0,1]")
        if self.n < 1:
            raise ValueError(f"axis {self.name} needs at least one cell")

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n + 1)


@dataclass(frozen=True)
class GridSpec:
    axes: tuple[Axis, ...]

    @classmethod
    def of(cls, *axes) -> "GridSpec":
        return cls(tuple(a if isinstance(a, Axis) else Axis(*a) for a in axes))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.n for a in self.axes)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape)) if self.axes else 1

    def cell_bounds(self, cell: int) -> list[tuple[float, float]]:
        idx = np.unravel_index(cell, self.shape) if self.axes else ()
        out = []
        for a, i in zip(self.axes, idx):
            e = a.edges
            out.append((float(e[i]), float(e[i + 1])))
        return out


_COLUMN = {"base": 0, "x": 1, "y": 2}


@njit(cache=True)
def _raw_rows(keys):
    rows = np.empty((keys.shape[0], 5))
    for t in range(keys.shape[0]):
        k = np.uint64(keys[t])
        for j in range(5):
            rows[t, j] = _rng.uniform(k, j)
    return rows


def grid_starts(grid: GridSpec, samples: int, seed: int) -> np.ndarray:
    """Start rows [w, x, y, e1, e2]; sample j of cell c uses start-stream trajectory c*samples+j.

    Coordinates on a grid axis are uniform in the cell, all others uniform on [0,1).
    """
    total = grid.n_cells * samples
    rows = _raw_rows(_rng.trajectory_keys(seed, _rng.STREAM_START, total))
    for d, axis in enumerate(grid.axes):
        stride = int(np.prod(grid.shape[d + 1:]))
        cell_idx = (np.arange(total) // samples // stride) % axis.n
        e = axis.edges
        col = _COLUMN[axis.name]
        rows[:, col] = e[cell_idx] + rows[:, col] * (e[cell_idx + 1] - e[cell_idx])
    return rows


def classify_starts(system: SkewSystem, starts: np.ndarray, horizon: int, dwell: int = DWELL,
                    seed: int | None = None, offset: int = 0):
    """Catalog index (or -1) and capture step for every start row."""
    if not horizon >= dwell >= 1:
        raise ValueError(f"need horizon >= dwell >= 1, got horizon={horizon}, dwell={dwell}")
    seed = system.seed if seed is None else seed
    return K.classify_kernel(system.pid, system.par, system.ipar, system.cat_array,
                             system.fiber_dim, np.ascontiguousarray(starts, dtype=float),
                             _rng.as_seed(seed), offset, horizon, dwell)


def classify_orbit(system: SkewSystem, start, horizon: int, capture_radius: float | None = None,
                   dwell: int = DWELL, seed: int | None = None, index: int = 0) -> str | None:
    """Name of the catalog attractor capturing the orbit of ``start`` (a start row), or None."""
    if capture_radius is not None:
        system = with_radius(system, capture_radius)
    row = np.asarray(start, dtype=float).reshape(1, 5)
    ids, _ = classify_starts(system, row, horizon, dwell, seed, index)
    return None if ids[0] < 0 else system.catalog[ids[0]].name


def with_radius(system: SkewSystem, radius: float) -> SkewSystem:
    from dataclasses import replace
    return system.with_catalog([replace(c, radius=radius) if c.kind == "point" else c
                                for c in system.catalog])


@dataclass
class BasinReport:
    """Per-cell capture counts; column j < len(names) counts catalog entry j, the last column undecided."""

    preset: str
    seed: int
    grid: GridSpec
    names: list[str]
    counts: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def samples(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def undecided(self) -> np.ndarray:
        return self.counts[:, -1]

    def fractions(self) -> np.ndarray:
        return self.counts / np.maximum(self.samples, 1)[:, None]

    def bounds(self):
        return wilson(self.counts, self.samples[:, None])

    def column(self, name: str) -> int:
        if name == "undecided":
            return len(self.names)
        return self.names.index(name)

    def merge(self, other: "BasinReport") -> "BasinReport":
        if other.grid != self.grid or other.names != self.names:
            raise ValueError("reports differ in grid or catalog")
        return BasinReport(self.preset, self.seed, self.grid, self.names, self.counts + other.counts,
                           dict(self.meta))

    def totals(self) -> dict[str, int]:
        tot = self.counts.sum(axis=0)
        return {name: int(c) for name, c in zip(self.names + ["undecided"], tot)}

    def csv_text(self, analysis: str = "basin_grid") -> str:
        buf = io.StringIO()
        buf.write(f"# basinlab preset={self.preset} seed={self.seed} analysis={analysis}"
                  f" confidence=wilson99\n")
        cols = ["cell"]
        for a in self.grid.axes:
            cols += [f"{a.name}_lo", f"{a.name}_hi"]
        cols.append("samples")
        labels = self.names + ["undecided"]
        for nm in labels:
            cols += [f"count_{nm}", f"frac_{nm}", f"ci_lo_{nm}", f"ci_hi_{nm}"]
        buf.write(",".join(cols) + "\n")
        frac = self.fractions()
        lo, hi = self.bounds()
        for c in range(self.grid.n_cells):
            row = [str(c)]
            for b0, b1 in self.grid.cell_bounds(c):
                row += [fmt(b0), fmt(b1)]
            row.append(str(int(self.samples[c])))
            for j in range(len(labels)):
                row += [str(int(self.counts[c, j])), fmt(frac[c, j]), fmt(lo[c, j]), fmt(hi[c, j])]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def pgm_text(self) -> str:
        """P2 raster, one pixel per cell (last axis horizontal).

        Gray level is 254 times the fraction of the first catalog entry; 255 marks
        cells where undecided orbits are the majority.
        """
        shape = self.grid.shape if self.grid.axes else (1,)
        if len(shape) == 1:
            shape = (1,) + shape
        rows, cols = shape[0], int(np.prod(shape[1:]))
        frac = self.fractions()
        gray = np.rint(254 * frac[:, 0]).astype(int)
        gray[self.undecided * 2 > self.samples] = PGM_UNDECIDED
        lines = [
            "P2",
            f"# basinlab preset={self.preset} seed={self.seed} gray=254*frac_{self.names[0]}"
            f" {PGM_UNDECIDED}=undecided-dominated",
            f"{cols} {rows}",
            "255",
        ]
        img = gray.reshape(rows, cols)
        lines += [" ".join(str(v) for v in r) for r in img]
        return "\n".join(lines) + "\n"


def fmt(v: float) -> str:
    return "%.17g" % float(v)


def basin_grid(system: SkewSystem, grid: GridSpec, samples_per_cell: int, horizon: int,
               seed: int | None = None, dwell: int = DWELL) -> BasinReport:
    """Classify ``samples_per_cell`` seeded starts in every grid cell."""
    if samples_per_cell < 50:
        raise ValueError(f"samples_per_cell must be at least 50, got {samples_per_cell}")
    seed = system.seed if seed is None else seed
    starts = grid_starts(grid, samples_per_cell, seed)
    ids, when = classify_starts(system, starts, horizon, dwell, seed)
    ncat = len(system.catalog)
    cols = np.where(ids < 0, ncat, ids)
    cells = np.arange(len(ids)) // samples_per_cell
    counts = np.zeros((grid.n_cells, ncat + 1), dtype=np.int64)
    np.add.at(counts, (cells, cols), 1)
    meta = {"horizon": horizon, "dwell": dwell, "samples_per_cell": samples_per_cell,
            "median_capture_step": float(np.median(when[ids >= 0])) if np.any(ids >= 0) else None}
    return BasinReport(system.preset, seed, grid, [c.name for c in system.catalog], counts, meta)


@dataclass(frozen=True)
class Verdict:
    pair: tuple[str, str]
    cells: tuple[str, ...]
    status: str  # pass | fail | inconclusive
    margin: float

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def intermingled_verdict(report: BasinReport, pair: Sequence[str] | None = None) -> Verdict:
    """Both basins' 99% lower confidence bounds must be positive in every cell.

    A cell whose orbits are all undecided is inconclusive; undecided orbits never
    count as evidence for either basin.
    """
    if pair is None:
        if len(report.names) < 2:
            raise ValueError("intermingledness needs two catalog attractors")
        pair = report.names[:2]
    a, b = (report.column(p) for p in pair)
    lo, _ = report.bounds()
    decided = report.samples - report.undecided
    cells = []
    for c in range(report.grid.n_cells):
        if decided[c] == 0:
            cells.append("inconclusive")
        elif lo[c, a] > 0.0 and lo[c, b] > 0.0:
            cells.append("pass")
        else:
            cells.append("fail")
    if "fail" in cells:
        status = "fail"
    elif "inconclusive" in cells:
        status = "inconclusive"
    else:
        status = "pass"
    margin = float(min(lo[:, a].min(), lo[:, b].min()))
    return Verdict(tuple(pair), tuple(cells), status, margin)


@dataclass(frozen=True)
class LimitSetEstimate:
    members: tuple[str, ...]
    frequencies: dict[str, float]
    unexplained: float
    n: int


def likely_limit_estimate(system: SkewSystem, n_samples: int, horizon: int,
                          seed: int | None = None, dwell: int = DWELL) -> LimitSetEstimate:
    """Catalog attractors that capture Lebesgue-sampled orbits, plus the uncaptured mass."""
    if n_samples < 1000:
        raise ValueError(f"n_samples must be at least 1000, got {n_samples}")
    seed = system.seed if seed is None else seed
    starts = grid_starts(GridSpec(()), n_samples, seed)
    ids, _ = classify_starts(system, starts, horizon, dwell, seed)
    freqs = {c.name: float(np.mean(ids == i)) for i, c in enumerate(system.catalog)}
    members = tuple(nm for nm, fr in freqs.items() if fr > 0.0)
    return LimitSetEstimate(members, freqs, float(np.mean(ids < 0)), n_samples)


@dataclass(frozen=True)
class Occupancy:
    """Time-averaged fiber occupancy on an nbins (per fiber coordinate) grid.

    Circle fibers use cells centered on k/nbins, so that fixed points at 0 and
    1/2 each fall in a single cell.
    """

    hist: np.ndarray
    nbins: int
    threshold: float
    centered: bool = False

    @property
    def mass(self) -> np.ndarray:
        return self.hist / max(1, self.hist.sum())

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.mass > self.threshold)

    def marginal(self) -> np.ndarray:
        """Mass per cell of the first fiber coordinate."""
        return self.mass.reshape(self.nbins, -1).sum(axis=1)

    @property
    def centers(self) -> np.ndarray:
        k = np.arange(self.nbins)
        return k / self.nbins if self.centered else (k + 0.5) / self.nbins

    def mass_in(self, lo: float, hi: float) -> float:
        """Marginal mass of the cells whose centers lie in (lo, hi)."""
        centers = self.centers
        return float(self.marginal()[(centers > lo) & (centers < hi)].sum())


def min_attractor_support(system: SkewSystem, n_orbits: int, n_steps: int, burn_in: int,
                          nbins: int = 64, seed: int | None = None,
                          threshold: float = 1e-4) -> Occupancy:
    """Occupancy histogram of the time-averaged pushforward of Lebesgue starts."""
    if not 0 <= burn_in < n_steps:
        raise ValueError("need 0 <= burn_in < n_steps")
    seed = system.seed if seed is None else seed
    starts = grid_starts(GridSpec(()), n_orbits, seed)
    hist = K.occupancy_kernel(system.pid, system.par, system.ipar, system.fiber_dim, starts,
                              _rng.as_seed(seed), 0, n_steps, burn_in, nbins,
                              system.fiber_circle, numba.get_num_threads())
    return Occupancy(hist, nbins, threshold, system.fiber_circle)


def band_fractions(system: SkewSystem, starts: np.ndarray, n_steps: int, burn_in: int,
                   lo: float, hi: float, seed: int | None = None) -> np.ndarray:
    """Per start: fraction of post-burn-in steps with fiber coordinate in (lo, hi)."""
    seed = system.seed if seed is None else seed
    return K.band_fraction_kernel(system.pid, system.par, system.ipar,
                                  np.ascontiguousarray(starts, dtype=float), _rng.as_seed(seed), 0,
                                  n_steps, burn_in, lo, hi)


def single_start(w: float, x: float, y: float = 0.0, e1: float = 0.3, e2: float = 0.7) -> np.ndarray:
    return start_row(w, x, y, e1, e2)
