"""Frame-stack operators for one alternating-minimization epoch.

The measurement map is bilinear in (probe, object). Freezing one factor
gives a linear map into the stack of padded, unitary DFT frames whose
normal matrix is diagonal, so the pseudoinverse, the range projection,
and the range reflection all reduce to pixelwise work plus FFTs.
"""
from __future__ import annotations

import logging

import numpy as np

from .fields import dft2, idft2
from .objects import GridSpec
from .scans import ScanPlan

logger = logging.getLogger(__name__)


def _gather_table(plan: ScanPlan, probe_m: int, grid: GridSpec):
    """Flat index of every grid pixel each frame touches, shape (Q, m, m)."""
    height, width = grid.shape
    rows = np.arange(probe_m)
    idx = np.empty((plan.count, probe_m, probe_m), dtype=np.int64)
    for q, (tx, ty) in enumerate(grid.shifted_positions(plan)):
        rr = rows + tx
        cc = rows + ty
        if grid.periodic:
            rr = rr % height
            cc = cc % width
        elif rr[0] < 0 or rr[-1] >= height or cc[0] < 0 or cc[-1] >= width:
            raise ValueError(
                f"footprint at shifted position ({tx}, {ty}) leaves the grid")
        idx[q] = rr[:, None] * width + cc[None, :]
    return idx


class FrameOperator:
    """One side of the bilinear map, with the other factor frozen.

    Built by for_object() (probe frozen, apply() takes an object field on
    the grid) or for_probe() (object frozen, apply() takes an m-by-m probe
    field).  The weight field is the diagonal of the normal matrix; the
    pseudoinverse divides by weight + epsilon, and pixels whose weight
    falls below epsilon are collected in low_weight.
    """

    def __init__(self, plan: ScanPlan, grid: GridSpec, side: str,
                 probe_m: int, pad_factor: int, eps_scale: float):
        if pad_factor < 1:
            raise ValueError("pad_factor must be >= 1")
        self.plan = plan
        self.grid = grid
        self.side = side
        self.probe_m = int(probe_m)
        self.pad_factor = int(pad_factor)
        self._eps_scale = float(eps_scale)
        self._idx = _gather_table(plan, self.probe_m, grid)

    def _finish(self, weight):
        self.weight = weight
        self.epsilon = self._eps_scale * float(weight.max())
        self.low_weight = np.argwhere(weight < self.epsilon)
        if self.low_weight.size:
            logger.debug("%d pixels below pseudoinverse weight epsilon",
                         len(self.low_weight))
        return self

    @classmethod
    def for_object(cls, plan, grid, probe, pad_factor=2, eps_scale=1e-12):
        probe = np.asarray(probe, dtype=complex)
        if probe.ndim != 2 or probe.shape[0] != probe.shape[1]:
            raise ValueError("frozen probe must be square")
        op = cls(plan, grid, "object", probe.shape[0], pad_factor, eps_scale)
        op._probe = probe
        w = np.bincount(
            op._idx.ravel(),
            weights=np.broadcast_to(np.abs(probe) ** 2, op._idx.shape).ravel(),
            minlength=grid.shape[0] * grid.shape[1])
        return op._finish(w.reshape(grid.shape))

    @classmethod
    def for_probe(cls, plan, grid, obj_on_grid, probe_m,
                  pad_factor=2, eps_scale=1e-12):
        obj = np.asarray(obj_on_grid, dtype=complex)
        if obj.shape != grid.shape:
            raise ValueError(f"frozen object shape {obj.shape} does not "
                             f"match grid {grid.shape}")
        op = cls(plan, grid, "probe", probe_m, pad_factor, eps_scale)
        op._obj = obj.ravel()[op._idx]  # (Q, m, m)
        return op._finish(np.sum(np.abs(op._obj) ** 2, axis=0))

    # -- frame geometry ---------------------------------------------------

    @property
    def frame_size(self) -> int:
        return self.pad_factor * self.probe_m

    @property
    def frame_shape(self):
        return (self.plan.count, self.frame_size, self.frame_size)

    # -- the linear map and friends ---------------------------------------

    def apply(self, field) -> np.ndarray:
        field = np.asarray(field, dtype=complex)
        if self.side == "object":
            if field.shape != self.grid.shape:
                raise ValueError(
                    f"object field shape {field.shape} != {self.grid.shape}")
            exit_waves = self._probe[None, :, :] * field.ravel()[self._idx]
        else:
            if field.shape != (self.probe_m, self.probe_m):
                raise ValueError(
                    f"probe field shape {field.shape} != "
                    f"{(self.probe_m, self.probe_m)}")
            exit_waves = field[None, :, :] * self._obj
        return dft2(exit_waves, self.frame_size, self.frame_size)

    def adjoint(self, frames) -> np.ndarray:
        frames = np.asarray(frames, dtype=complex)
        if frames.shape != self.frame_shape:
            raise ValueError(
                f"frame stack shape {frames.shape} != {self.frame_shape}")
        cropped = idft2(frames)[:, :self.probe_m, :self.probe_m]
        if self.side == "object":
            vals = np.conj(self._probe)[None, :, :] * cropped
            # bincount keeps the accumulation order fixed, so adjoints are
            # bit-reproducible regardless of frame count
            size = self.grid.shape[0] * self.grid.shape[1]
            acc = (np.bincount(self._idx.ravel(), vals.real.ravel(), size)
                   + 1j * np.bincount(self._idx.ravel(), vals.imag.ravel(),
                                      size))
            return acc.reshape(self.grid.shape)
        return np.sum(np.conj(self._obj) * cropped, axis=0)

    def pinv(self, frames) -> np.ndarray:
        return self.adjoint(frames) / (self.weight + self.epsilon)

    def project(self, frames) -> np.ndarray:
        return self.apply(self.pinv(frames))

    def reflect(self, frames) -> np.ndarray:
        return 2.0 * self.project(frames) - np.asarray(frames, dtype=complex)


def coverage_counts(plan: ScanPlan, probe_m: int, grid: GridSpec):
    """Per-pixel count of probe footprints covering each grid pixel."""
    idx = _gather_table(plan, probe_m, grid)
    counts = np.bincount(idx.ravel(),
                         minlength=grid.shape[0] * grid.shape[1])
    return counts.reshape(grid.shape)


def measure(probe, object_on_grid, plan: ScanPlan, grid: GridSpec,
            pad_factor: int = 2) -> np.ndarray:
    """Noiseless amplitude data |F(probe, object)| as a (Q, P, P) stack.

    Raises if any interior pixel is never covered by a probe footprint
    (such a pixel is invisible to the data and the inverse problem is
    ill-posed there).  Uncovered margin pixels only get a log entry: the
    bounding-box corners of a jittered scan are legitimately ragged.
    """
    probe = np.asarray(probe, dtype=complex)
    op = FrameOperator.for_object(plan, grid, probe, pad_factor)
    counts = coverage_counts(plan, op.probe_m, grid)
    interior = grid.interior_mask()
    holes = np.argwhere((counts == 0) & interior)
    if holes.size:
        shown = ", ".join(f"({r}, {c})" for r, c in holes[:8])
        more = "" if len(holes) <= 8 else f" and {len(holes) - 8} more"
        raise ValueError(
            f"{len(holes)} interior pixels have no probe coverage: "
            f"{shown}{more}")
    margin_holes = int(((counts == 0) & ~interior).sum())
    if margin_holes:
        logger.info("%d uncovered margin pixels (bounding-box corners)",
                    margin_holes)
    return np.abs(op.apply(np.asarray(object_on_grid, dtype=complex)))
