import numpy as np
import pytest

from ptychodrs import (BoundaryCondition, GridSpec, enforce_bc, extend_truth,
                       make_cib, make_full_rank, make_rpp,
                       reconstruction_grid, synth_images)
from ptychodrs.objects import PHANTOM_ELLIPSES, render_phantom


def test_synth_images_deterministic_eight_bit():
    a1, b1 = synth_images(64, seed=11)
    a2, b2 = synth_images(64, seed=11)
    assert np.array_equal(a1, a2) and np.array_equal(b1, b2)
    for img in (a1, b1):
        assert img.shape == (64, 64)
        assert img.min() >= 0 and img.max() <= 255
        assert np.array_equal(img, np.floor(img))
    assert not np.array_equal(b1, synth_images(64, seed=12)[1])


def test_make_cib_glues_real_and_imaginary():
    a, b = synth_images(32, seed=1)
    obj = make_cib(a, b)
    assert np.array_equal(obj.real, a) and np.array_equal(obj.imag, b)
    ph = np.angle(obj[np.abs(obj) > 0])
    assert ph.min() >= 0.0 and ph.max() <= np.pi / 2 + 1e-12


def test_make_cib_rejects_bad_sources():
    with pytest.raises(ValueError):
        make_cib(-np.ones((4, 4)), np.ones((4, 4)))
    with pytest.raises(ValueError):
        make_cib(np.ones((4, 4)), np.ones((5, 5)))


def membership_oracle(n):
    ax = np.linspace(-1.0, 1.0, n)
    img = np.zeros((n, n))
    for r in range(n):
        for c in range(n):
            x, y = ax[c], -ax[r]
            val = 0.0
            for amp, a, b, x0, y0, deg in PHANTOM_ELLIPSES:
                phi = np.deg2rad(deg)
                xr = (x - x0) * np.cos(phi) + (y - y0) * np.sin(phi)
                yr = -(x - x0) * np.sin(phi) + (y - y0) * np.cos(phi)
                if (xr / a) ** 2 + (yr / b) ** 2 <= 1.0:
                    val += amp
            img[r, c] = min(max(val, 0.0), 1.0)
    return img


def test_render_phantom_matches_membership_oracle():
    n = 48
    assert np.array_equal(render_phantom(n), membership_oracle(n))


def test_render_phantom_has_the_expected_anatomy():
    img = render_phantom(128)
    assert img.min() == 0.0 and img.max() == 1.0
    assert img[64, 64] < 0.5  # interior is darker than the skull shell
    assert img[0, 0] == 0.0  # corners outside the head


def test_make_rpp_magnitude_and_phase():
    rpp = make_rpp(64, seed=3)
    assert np.max(np.abs(np.abs(rpp) - render_phantom(64))) < 1e-12
    live = np.abs(rpp) > 0
    ph = np.angle(rpp[live])
    assert ph.min() < -np.pi / 2 and ph.max() > np.pi / 2  # full circle
    with pytest.raises(ValueError):
        make_rpp(16, seed=0)


def test_boundary_condition_validation_and_margin_value():
    with pytest.raises(ValueError):
        BoundaryCondition(kind="open")
    with pytest.raises(ValueError):
        BoundaryCondition(kind="bright", value=0.0)
    assert BoundaryCondition(kind="dark").margin_value == 0.0
    assert BoundaryCondition(kind="bright", value=255).margin_value == 255.0
    assert BoundaryCondition(kind="periodic").margin_value is None


def test_grid_spec_interior_bookkeeping():
    grid = GridSpec(shape=(10, 12), offset=(2, 3), n=6, periodic=False)
    mask = grid.interior_mask()
    assert mask.sum() == 36
    assert mask[2:8, 3:9].all()
    field = np.arange(120).reshape(10, 12)
    assert np.array_equal(grid.interior(field), field[2:8, 3:9])
    plan = make_full_rank(2, 2, 4, 0, seed=0)
    shifted = grid.shifted_positions(plan)
    assert np.array_equal(shifted, plan.positions + np.array([2, 3]))


def test_reconstruction_grid_periodic_is_the_torus():
    plan = make_full_rank(4, 4, 8, 2, seed=1)
    grid = reconstruction_grid(plan, 12, 32, BoundaryCondition("periodic"))
    assert grid.shape == (32, 32) and grid.offset == (0, 0) and grid.periodic


def test_reconstruction_grid_extends_to_footprint_bounding_box():
    plan = make_full_rank(4, 4, 8, 2, seed=1, start=-1)
    m, n = 12, 32
    grid = reconstruction_grid(plan, m, n, BoundaryCondition("dark"))
    pos = plan.positions
    r0, c0 = min(pos[:, 0].min(), 0), min(pos[:, 1].min(), 0)
    r1 = max(pos[:, 0].max() + m, n)
    c1 = max(pos[:, 1].max() + m, n)
    assert grid.shape == (r1 - r0, c1 - c0)
    assert grid.offset == (-r0, -c0)
    assert not grid.periodic
    # every footprint indexes real pixels
    shifted = grid.shifted_positions(plan)
    assert shifted.min() >= 0
    assert (shifted[:, 0] + m).max() <= grid.shape[0]
    assert (shifted[:, 1] + m).max() <= grid.shape[1]


def test_extend_truth_places_interior_and_fills_margin():
    plan = make_full_rank(3, 3, 8, 2, seed=2, start=-1)
    bc = BoundaryCondition("bright", value=255.0)
    n = 24
    grid = reconstruction_grid(plan, 10, n, bc)
    obj = make_cib(*synth_images(n, seed=4))
    full = extend_truth(obj, bc, grid)
    assert np.array_equal(grid.interior(full), obj)
    assert (full[~grid.interior_mask()] == 255.0 + 0j).all()
    torus = reconstruction_grid(plan, 10, n, BoundaryCondition("periodic"))
    assert np.array_equal(extend_truth(obj, BoundaryCondition("periodic"),
                                       torus), obj)


def test_enforce_bc_overwrites_margin_only_when_enforcing():
    plan = make_full_rank(3, 3, 8, 2, seed=2, start=-1)
    bc_on = BoundaryCondition("dark", enforce=True)
    grid = reconstruction_grid(plan, 10, 24, bc_on)
    rng = np.random.default_rng(0)
    est = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    out = enforce_bc(est, bc_on, grid)
    assert (out[~grid.interior_mask()] == 0.0).all()
    assert np.array_equal(grid.interior(out), grid.interior(est))
    bc_off = BoundaryCondition("dark", enforce=False)
    assert enforce_bc(est, bc_off, grid) is est
    # force overrides the flag in both directions
    assert (enforce_bc(est, bc_off, grid, force=True)
            [~grid.interior_mask()] == 0.0).all()
    assert enforce_bc(est, bc_on, grid, force=False) is est
