"""Outer alternating loop: object solve, probe solve, repeat.

Each epoch freezes one factor of the bilinear measurement map and runs a
Douglas-Rachford inner loop on the other.  Both inner solves share the
same frame-stack data b.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .drs import DrsConfig, run_inner
from .metrics import relative_error, relative_residual
from .objects import BoundaryCondition, GridSpec, enforce_bc, \
    reconstruction_grid
from .operators import FrameOperator
from .scans import ScanPlan


class NumericalAbort(RuntimeError):
    """Raised when an iterate stops being finite; carries the epoch index."""

    def __init__(self, epoch: int, what: str):
        super().__init__(f"non-finite values in {what} at epoch {epoch}")
        self.epoch = epoch


@dataclass
class AmdrsConfig:
    drs: DrsConfig = field(default_factory=DrsConfig)
    max_epochs: int = 100
    outer_tol: float = 1e-6
    stagnation_window: int = 5
    rr_tol: float = 1e-11
    enforce: bool | None = None  # None: follow the boundary condition's flag
    seed: int = 0
    object_init: str = "random_phase"
    warm_start: bool = True
    pad_factor: int = 2

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.object_init not in ("random_phase", "zero"):
            raise ValueError(f"unknown object_init {self.object_init!r}")


@dataclass
class RunHistory:
    re: list = field(default_factory=list)
    re2: list = field(default_factory=list)
    rr: list = field(default_factory=list)
    inner_obj: list = field(default_factory=list)
    inner_probe: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    object_final: np.ndarray | None = None
    probe_final: np.ndarray | None = None
    grid: GridSpec | None = None
    stopped_because: str = "max_epochs"

    @property
    def epochs(self) -> int:
        return len(self.rr)

    def write_csv(self, path, comment: str | None = None):
        with open(path, "w", newline="") as fh:
            if comment is not None:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh)
            writer.writerow(["epoch", "re", "re2", "rr",
                             "inner_obj", "inner_probe", "seconds"])
            for i in range(self.epochs):
                writer.writerow([i + 1,
                                 f"{self.re[i]:.12e}", f"{self.re2[i]:.12e}",
                                 f"{self.rr[i]:.12e}",
                                 self.inner_obj[i], self.inner_probe[i],
                                 f"{self.seconds[i]:.6f}"])


def _initial_object(config: AmdrsConfig, grid: GridSpec) -> np.ndarray:
    if config.object_init == "random_phase":
        rng = np.random.default_rng(config.seed)
        return np.exp(2j * np.pi * rng.random(grid.shape))
    # "zero" initializes the *phase* to zero; the object itself is the
    # unit constant.  A literal all-zero field has no phase to update and
    # starves the Gaussian solver.
    return np.ones(grid.shape, dtype=complex)


def amdrs(b, plan: ScanPlan, bc: BoundaryCondition, probe_init,
          config: AmdrsConfig, n: int, truth=None) -> RunHistory:
    """Alternating minimization with DRS inner loops.

    b is the (Q, P, P) amplitude stack, probe_init the starting probe
    estimate, n the interior object extent, truth (optional) the n-by-n
    interior ground truth used only for error reporting.
    """
    probe = np.asarray(probe_init, dtype=complex)
    probe_m = probe.shape[0]
    grid = reconstruction_grid(plan, probe_m, n, bc)
    enforce = bc.enforce if config.enforce is None else config.enforce
    f = _initial_object(config, grid)
    norm_b = np.linalg.norm(b)
    if norm_b == 0:
        raise ValueError("zero-norm data")

    hist = RunHistory(grid=grid)
    u = v = None
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()

        op_a = FrameOperator.for_object(plan, grid, probe,
                                        config.pad_factor)
        if u is None or not config.warm_start:
            u = op_a.apply(f)
        state = run_inner(u, b, op_a, config.drs)
        u = state.u
        f = op_a.pinv(u)
        if not np.all(np.isfinite(f)):
            raise NumericalAbort(epoch, "object estimate")
        if enforce:
            # overwrite the margin only; the warm-started u is kept as is,
            # resetting it measurably slows convergence
            f = enforce_bc(f, bc, grid, force=True)

        op_b = FrameOperator.for_probe(plan, grid, f, probe_m,
                                       config.pad_factor)
        if v is None or not config.warm_start:
            v = op_b.apply(probe)
        vstate = run_inner(v, b, op_b, config.drs)
        v = vstate.u
        probe = op_b.pinv(v)
        if not np.all(np.isfinite(probe)):
            raise NumericalAbort(epoch, "probe estimate")

        rr = relative_residual(np.abs(op_b.apply(probe)), b)
        hist.rr.append(rr)
        hist.inner_obj.append(state.iterations_run)
        hist.inner_probe.append(vstate.iterations_run)
        if truth is not None:
            report = relative_error(truth, grid.interior(f))
            hist.re.append(report.re)
            hist.re2.append(report.re2)
        else:
            hist.re.append(float("nan"))
            hist.re2.append(float("nan"))
        hist.seconds.append(time.perf_counter() - t0)

        if rr < config.rr_tol:
            hist.stopped_because = "rr_tol"
            break
        window = config.stagnation_window
        if len(hist.rr) > window:
            tail = hist.rr[-(window + 1):]
            changes = [abs(tail[i + 1] - tail[i]) / max(tail[i], 1e-300)
                       for i in range(window)]
            if max(changes) < config.outer_tol:
                hist.stopped_because = "stagnation"
                break

    hist.object_final = f
    hist.probe_final = probe
    return hist


def fit_rate(history, metric: str = "re", epoch_window=None) -> float:
    """exp of the least-squares slope of log(metric) against epoch."""
    values = np.asarray(getattr(history, metric), dtype=float)
    if epoch_window is not None:
        start, stop = epoch_window
        values = values[start:stop]
    if values.size < 2:
        raise ValueError("need at least two epochs to fit a rate")
    if np.any(~(values > 0)):
        raise ValueError("metric values must be positive to fit a rate")
    epochs = np.arange(values.size, dtype=float)
    slope = np.polyfit(epochs, np.log(values), 1)[0]
    return float(np.exp(slope))
