import numpy as np
import pytest

from ptychodrs import (BoundaryCondition, iid_probe, make_rank_one,
                       reconstruction_grid)


@pytest.fixture(scope="session")
def tiny():
    """Dense-checkable instance: 6x6 periodic object, 3x3 probe, 4 frames."""
    n, m = 6, 3
    plan = make_rank_one(2, 2, 3, 0, seed=5)
    bc = BoundaryCondition(kind="periodic")
    grid = reconstruction_grid(plan, m, n, bc)
    probe = iid_probe(m, seed=1)
    rng = np.random.default_rng(2)
    obj = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return {"n": n, "m": m, "plan": plan, "bc": bc, "grid": grid,
            "probe": probe, "obj": obj}


def naive_frames(probe, obj_on_grid, positions, periodic, pad_factor=2):
    """Reference forward map: explicit loops and an explicit DFT matrix."""
    m = probe.shape[0]
    R, C = obj_on_grid.shape
    P = pad_factor * m
    j = np.arange(P)
    F = np.exp(-2j * np.pi * np.outer(j, j) / P) / np.sqrt(P)
    out = np.zeros((len(positions), P, P), dtype=complex)
    for q, (tx, ty) in enumerate(positions):
        padded = np.zeros((P, P), dtype=complex)
        for p1 in range(m):
            for p2 in range(m):
                r, c = tx + p1, ty + p2
                if periodic:
                    r, c = r % R, c % C
                padded[p1, p2] = probe[p1, p2] * obj_on_grid[r, c]
        out[q] = F @ padded @ F
    return out
