"""Douglas-Rachford inner solvers for one side of the blind problem.

Both objectives lead to the same three-line iteration
    y = P u,   z = prox(2y - u),   u' = u + z - y,
where P projects onto the range of the frozen linear operator and prox
acts pixelwise on the frame stack.  The closed forms below fold the
three lines into one update; the tests check the folded and unfolded
versions agree.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import sgn


# -- pixelwise proximal maps ---------------------------------------------

def prox_gaussian(w, b, rho: float):
    """Minimizer of 0.5(|z| - b)^2 + (rho/2)|z - w|^2 over complex z."""
    w = np.asarray(w, dtype=complex)
    return (np.asarray(b) + rho * np.abs(w)) / (1.0 + rho) * sgn(w)


def prox_poisson(w, b, rho: float):
    """Minimizer of |z|^2 - b^2 log|z|^2 + (rho/2)|z - w|^2 over complex z.

    The radial stationarity condition is (2+rho) r^2 - rho|w| r - 2 b^2 = 0;
    the returned magnitude is its positive root.  rho = 0 has no proximal
    interpretation here (the quadratic loses its w coupling), so it is
    rejected; the classical-DR limit lives at the iteration level instead.
    """
    if rho <= 0:
        raise ValueError("prox_poisson requires rho > 0")
    w = np.asarray(w, dtype=complex)
    mag = np.abs(w)
    b = np.asarray(b, dtype=float)
    r = (rho * mag + np.sqrt(rho * rho * mag * mag
                             + 8.0 * (2.0 + rho) * b * b)) / (2.0 * (2.0 + rho))
    return r * sgn(w)


# -- one DRS step per objective -------------------------------------------

def gaussian_drs_step(u, b, reflect, project, rho: float, projected=None):
    """u' = u/(rho+1) + (rho-1)/(rho+1) Pu + b sgn(2Pu - u)/(rho+1).

    rho = 0 reduces to classical Douglas-Rachford: u - Pu + b sgn(Ru).
    Pass projected = P u when the caller already has it; reflect is then
    never invoked (kept in the signature so both steps read the same).
    """
    u = np.asarray(u, dtype=complex)
    y = project(u) if projected is None else projected
    ru = 2.0 * y - u
    return (u + (rho - 1.0) * y + np.asarray(b) * sgn(ru)) / (rho + 1.0)


def poisson_drs_step(u, b, reflect, rho: float, projected=None):
    """u' = u/2 - Ru/(rho+2) + rho/(2rho+4) sqrt(|Ru|^2 + 8(2+rho)b^2/rho^2) sgn(Ru)."""
    if rho <= 0:
        raise ValueError("poisson_drs_step requires rho > 0")
    u = np.asarray(u, dtype=complex)
    ru = reflect(u) if projected is None else 2.0 * projected - u
    b = np.asarray(b, dtype=float)
    mag = np.sqrt(np.abs(ru) ** 2 + (8.0 * (2.0 + rho) / (rho * rho)) * b * b)
    return 0.5 * u - ru / (rho + 2.0) + (rho / (2.0 * rho + 4.0)) * mag * sgn(ru)


# -- inner loop -------------------------------------------------------------

@dataclass
class DrsConfig:
    rho: float = 1.0
    max_inner: int = 60
    rel_tol: float = 1e-4
    objective: str = "gaussian"

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.max_inner < 1:
            raise ValueError("max_inner must be >= 1")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be > 0")
        if self.objective not in ("gaussian", "poisson"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.objective == "poisson" and self.rho == 0:
            raise ValueError("poisson objective requires rho > 0")


@dataclass
class InnerState:
    u: np.ndarray
    residual_history: list = field(default_factory=list)
    iterations_run: int = 0

    def __post_init__(self):
        assert len(self.residual_history) == self.iterations_run + 1


def run_inner(u_init, b, ctx, config: DrsConfig) -> InnerState:
    """Iterate one DRS solver until the projected residual stagnates.

    The monitored quantity is ||  |P u| - b ||_2.  The loop stops when its
    relative decrease falls to rel_tol or below (an increase counts as
    stagnation and is visible in the returned history), or at max_inner.
    """
    u = np.asarray(u_init, dtype=complex)
    b = np.asarray(b, dtype=float)
    y = ctx.project(u)
    res = float(np.linalg.norm(np.abs(y) - b))
    history = [res]
    steps = 0
    for _ in range(config.max_inner):
        if config.objective == "gaussian":
            u = gaussian_drs_step(u, b, ctx.reflect, ctx.project, config.rho,
                                  projected=y)
        else:
            u = poisson_drs_step(u, b, ctx.reflect, config.rho, projected=y)
        y = ctx.project(u)
        new_res = float(np.linalg.norm(np.abs(y) - b))
        history.append(new_res)
        steps += 1
        rel_decrease = (res - new_res) / res if res > 0 else 0.0
        res = new_res
        if rel_decrease <= config.rel_tol:
            break
    return InnerState(u=u, residual_history=history, iterations_run=steps)
