import numpy as np
import pytest

from ptychodrs import ScanPlan, coverage, make_full_rank, make_rank_one
from ptychodrs.operators import coverage_counts
from ptychodrs.objects import BoundaryCondition, reconstruction_grid


def test_rank_one_offsets_are_shared_along_rows_and_columns():
    plan = make_rank_one(4, 5, 10, 3, seed=7)
    pos = plan.positions.reshape(4, 5, 2)
    base_k = 10 * np.arange(4)
    base_l = 10 * np.arange(5)
    d1 = pos[:, :, 0] - base_k[:, None]
    d2 = pos[:, :, 1] - base_l[None, :]
    # one horizontal offset per row of positions, one vertical per column
    assert (d1 == d1[:, :1]).all()
    assert (d2 == d2[:1, :]).all()
    assert np.abs(d1).max() <= 3 and np.abs(d2).max() <= 3
    assert plan.scheme == "rank_one"


def test_full_rank_offsets_vary_within_rows():
    plan = make_full_rank(4, 5, 10, 3, seed=7)
    pos = plan.positions.reshape(4, 5, 2)
    d1 = pos[:, :, 0] - (10 * np.arange(4))[:, None]
    d2 = pos[:, :, 1] - (10 * np.arange(5))[None, :]
    assert np.abs(d1).max() <= 3 and np.abs(d2).max() <= 3
    # with this seed the offsets are not row/column constant
    assert not ((d1 == d1[:, :1]).all() and (d2 == d2[:1, :]).all())
    assert plan.scheme == "full_rank"


def test_zero_jitter_is_a_plain_raster():
    for factory in (make_rank_one, make_full_rank):
        plan = factory(3, 3, 8, 0, seed=0)
        want = 8 * np.stack(np.meshgrid(np.arange(3), np.arange(3),
                                        indexing="ij"), axis=-1).reshape(-1, 2)
        assert np.array_equal(plan.positions, want)
        assert plan.scheme == "plain_raster"


def test_start_shifts_the_raster_origin():
    plan = make_full_rank(3, 3, 8, 0, seed=0, start=-1)
    assert plan.positions.min() == -8
    assert plan.positions.max() == 8


def test_plans_are_deterministic_for_fixed_seed():
    a = make_full_rank(4, 4, 9, 4, seed=11)
    b = make_full_rank(4, 4, 9, 4, seed=11)
    c = make_full_rank(4, 4, 9, 4, seed=12)
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, c.positions)


def test_tau_must_exceed_jitter():
    with pytest.raises(ValueError):
        make_rank_one(2, 2, 3, 3, seed=0)
    with pytest.raises(ValueError):
        make_full_rank(2, 2, 3, 4, seed=0)


def test_duplicate_positions_rejected():
    pos = np.array([[0, 0], [0, 0], [3, 3]])
    with pytest.raises(ValueError):
        ScanPlan(pos, tau=3, scheme="plain_raster", jitter_bound=0, seed=0)


def brute_coverage(positions, m, shape, periodic, offset=(0, 0)):
    cov = np.zeros(shape)
    for tx, ty in positions:
        for p1 in range(m):
            for p2 in range(m):
                r, c = tx + offset[0] + p1, ty + offset[1] + p2
                if periodic:
                    r, c = r % shape[0], c % shape[1]
                cov[r, c] += 1
    return cov


def test_coverage_matches_brute_force_periodic():
    plan = make_full_rank(3, 3, 5, 2, seed=3)
    got = coverage(plan, 7, (15, 15), periodic=True)
    want = brute_coverage(plan.positions, 7, (15, 15), True)
    assert np.array_equal(got, want)


def test_coverage_matches_brute_force_extended_grid():
    plan = make_full_rank(3, 3, 5, 2, seed=3, start=-1)
    bc = BoundaryCondition(kind="dark")
    grid = reconstruction_grid(plan, 7, 15, bc)
    got = coverage(plan, 7, grid.shape, periodic=False, offset=grid.offset)
    want = brute_coverage(plan.positions, 7, grid.shape, False, grid.offset)
    assert np.array_equal(got, want)
    counts = coverage_counts(plan, 7, grid)
    assert np.array_equal(counts, want.astype(counts.dtype))


def test_coverage_rejects_out_of_grid_footprints():
    plan = make_full_rank(3, 3, 5, 2, seed=3, start=-1)
    with pytest.raises(ValueError):
        coverage(plan, 7, (15, 15), periodic=False)  # no offset: falls off
