"""Perturbed raster scans and illumination coverage.

Two jitter laws: rank-one shares one horizontal offset per grid row of
positions and one vertical offset per column; full-rank draws both offsets
independently for every position. Offsets are integers so shifts stay exact
re-indexings.
"""
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class ScanPlan:
    positions: np.ndarray  # (Q, 2) int64, (row, col) of each probe corner
    tau: int
    scheme: str  # rank_one | full_rank | plain_raster
    jitter_bound: int
    seed: int
    grid: tuple = field(default=(0, 0))  # (grid_k, grid_l)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64)
        object.__setattr__(self, "positions", pos)
        if len(np.unique(pos, axis=0)) != len(pos):
            raise ValueError("scan positions are not distinct")

    @property
    def count(self):
        return self.positions.shape[0]


def _grid_base(grid_k, grid_l, tau, start=0):
    ks = np.arange(start, grid_k + start)
    ls = np.arange(start, grid_l + start)
    kk, ll = np.meshgrid(ks, ls, indexing="ij")
    return kk, ll


def make_rank_one(grid_k, grid_l, tau, jitter_bound, seed, start=0) -> ScanPlan:
    """t_kl = tau*(k,l) + (d1_k, d2_l), offsets shared along rows/columns."""
    _check(tau, jitter_bound)
    rng = np.random.default_rng(seed)
    d1 = rng.integers(-jitter_bound, jitter_bound + 1, size=grid_k)
    d2 = rng.integers(-jitter_bound, jitter_bound + 1, size=grid_l)
    kk, ll = _grid_base(grid_k, grid_l, tau, start)
    pos = np.stack([tau * kk + d1[kk - start], tau * ll + d2[ll - start]],
                   axis=-1).reshape(-1, 2)
    scheme = "rank_one" if jitter_bound else "plain_raster"
    return ScanPlan(pos, tau, scheme, jitter_bound, seed, (grid_k, grid_l))


def make_full_rank(grid_k, grid_l, tau, jitter_bound, seed, start=0) -> ScanPlan:
    """t_kl = tau*(k,l) + (d1_kl, d2_kl), offsets independent per position."""
    _check(tau, jitter_bound)
    rng = np.random.default_rng(seed)
    d = rng.integers(-jitter_bound, jitter_bound + 1,
                     size=(grid_k, grid_l, 2))
    kk, ll = _grid_base(grid_k, grid_l, tau, start)
    pos = np.stack([tau * kk, tau * ll], axis=-1) + d
    pos = pos.reshape(-1, 2)
    scheme = "full_rank" if jitter_bound else "plain_raster"
    return ScanPlan(pos, tau, scheme, jitter_bound, seed, (grid_k, grid_l))


def _check(tau, jitter_bound):
    if jitter_bound < 0:
        raise ValueError("jitter_bound must be >= 0")
    if tau <= jitter_bound:
        raise ValueError(f"tau={tau} must exceed jitter_bound={jitter_bound}")


def coverage(plan: ScanPlan, probe_m: int, object_shape, periodic: bool,
             offset=(0, 0)):
    """Per-pixel count of probe footprints covering the grid.

    ``object_shape`` is the full reconstruction grid; ``offset`` shifts the
    plan's positions into that grid (used for dark/bright extended grids).
    Accumulation order is fixed (position-major) so counts are reproducible
    bit-for-bit.
    """
    R, C = object_shape
    cov = np.zeros((R, C), dtype=np.float64)
    for t in plan.positions:
        r0, c0 = int(t[0] + offset[0]), int(t[1] + offset[1])
        rows = np.arange(r0, r0 + probe_m)
        cols = np.arange(c0, c0 + probe_m)
        if periodic:
            cov[np.ix_(rows % R, cols % C)] += 1.0
        else:
            if r0 < 0 or c0 < 0 or r0 + probe_m > R or c0 + probe_m > C:
                raise ValueError(f"footprint at {(r0, c0)} leaves the grid")
            cov[r0:r0 + probe_m, c0:c0 + probe_m] += 1.0
    return cov


def save_plan_csv(plan: ScanPlan, path):
    """CSV with header k,l,tx,ty; one row per position in plan order."""
    gk, gl = plan.grid
    lines = ["k,l,tx,ty"]
    for q, (tx, ty) in enumerate(plan.positions):
        k, l = (q // gl, q % gl) if gl else (q, 0)
        lines.append(f"{k},{l},{tx},{ty}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
