"""Test objects, the reconstruction grid, and boundary conditions.

The complex-image object (CIB) is two nonnegative 8-bit images glued as
real + i*imag, so its phase range is [0, pi/2]. The randomly phased
phantom (RPP) is the ten-ellipse head phantom with i.i.d. uniform phases,
the hard case: full phase range and a dark margin inside the interior.

Grid geometry: under the periodic condition the reconstruction grid is the
n x n torus. Dark and bright conditions extend it to the bounding box of
all probe footprints; the pixels outside the n x n interior form the
margin whose true value is known (0, or the bright constant).
"""
from dataclasses import dataclass

import numpy as np

# Ten-ellipse head phantom, the contrast-adjusted parameter set everyone
# renders by default: (intensity, a, b, x0, y0, angle_degrees) on [-1,1]^2.
PHANTOM_ELLIPSES = (
    (1.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.80, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.20, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.20, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.10, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.10, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.10, 0.0230, 0.0230, 0.00, -0.6060, 0.0),
    (0.10, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
)


def synth_images(n: int, seed):
    """Two deterministic 8-bit stand-in images: radial rings and texture."""
    rng = np.random.default_rng(seed)
    y, x = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    r = np.hypot(y - 0.42 * n, x - 0.58 * n)
    a = 0.5 * (1 + np.cos(2 * np.pi * r / (0.18 * n))) * (0.3 + 0.7 * x / n)
    img_a = np.floor(255 * a / a.max())
    z = np.fft.fft2(rng.standard_normal((n, n)))
    fy = np.fft.fftfreq(n)[:, None]
    fx = np.fft.fftfreq(n)[None, :]
    z *= np.exp(-(fy ** 2 + fx ** 2) / (2 * 0.04 ** 2))
    t = np.fft.ifft2(z).real
    t = (t - t.min()) / (t.max() - t.min())
    img_b = np.floor(255 * t)
    return img_a, img_b


def make_cib(image_a, image_b) -> np.ndarray:
    """Complex object image_a + i*image_b from two nonnegative images."""
    image_a = np.asarray(image_a, dtype=np.float64)
    image_b = np.asarray(image_b, dtype=np.float64)
    if image_a.shape != image_b.shape:
        raise ValueError("source images must share a shape")
    if (image_a < 0).any() or (image_b < 0).any():
        raise ValueError("source images must be nonnegative")
    return image_a + 1j * image_b


def render_phantom(n: int) -> np.ndarray:
    """Ten-ellipse phantom on an n x n grid, values clipped to [0, 1]."""
    ax = np.linspace(-1.0, 1.0, n)
    x = ax[None, :]
    y = -ax[:, None]  # row 0 is the top of the head
    img = np.zeros((n, n))
    for amp, a, b, x0, y0, deg in PHANTOM_ELLIPSES:
        phi = np.deg2rad(deg)
        xr = (x - x0) * np.cos(phi) + (y - y0) * np.sin(phi)
        yr = -(x - x0) * np.sin(phi) + (y - y0) * np.cos(phi)
        img += amp * ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0)
    return np.clip(img, 0.0, 1.0)


def make_rpp(n: int, seed) -> np.ndarray:
    """Randomly phased phantom: phantom magnitude, i.i.d. uniform phases."""
    if n < 32:
        raise ValueError("n must be at least 32")
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n, n))
    return render_phantom(n) * np.exp(1j * phases)


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str  # periodic | dark | bright
    value: complex = 0.0  # bright margin value
    enforce: bool = False

    def __post_init__(self):
        if self.kind not in ("periodic", "dark", "bright"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "bright" and abs(self.value) == 0:
            raise ValueError("bright boundary needs a nonzero value")

    @property
    def margin_value(self):
        return {"dark": 0.0 + 0j, "bright": complex(self.value)}.get(self.kind)


@dataclass(frozen=True)
class GridSpec:
    shape: tuple  # extended grid (rows, cols)
    offset: tuple  # interior corner inside the extended grid
    n: int  # interior side length
    periodic: bool

    def interior_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        r0, c0 = self.offset
        mask[r0:r0 + self.n, c0:c0 + self.n] = True
        return mask

    def interior(self, field):
        r0, c0 = self.offset
        return field[r0:r0 + self.n, c0:c0 + self.n]

    def shifted_positions(self, plan):
        return plan.positions + np.asarray(self.offset, dtype=np.int64)


def reconstruction_grid(plan, probe_m: int, n: int,
                        bc: BoundaryCondition) -> GridSpec:
    """Grid the reconstruction lives on.

    Periodic: the torus itself. Dark/bright: the bounding box of every
    probe footprint united with the interior, so overhanging probes index
    real pixels and never wrap.
    """
    if bc.kind == "periodic":
        return GridSpec((n, n), (0, 0), n, True)
    pos = plan.positions
    r0 = min(int(pos[:, 0].min()), 0)
    c0 = min(int(pos[:, 1].min()), 0)
    r1 = max(int(pos[:, 0].max()) + probe_m, n)
    c1 = max(int(pos[:, 1].max()) + probe_m, n)
    return GridSpec((r1 - r0, c1 - c0), (-r0, -c0), n, False)


def extend_truth(obj: np.ndarray, bc: BoundaryCondition,
                 grid: GridSpec) -> np.ndarray:
    """Place the interior object on the grid; fill margin per the BC."""
    if grid.periodic:
        return np.asarray(obj, dtype=np.complex128)
    out = np.full(grid.shape, bc.margin_value, dtype=np.complex128)
    r0, c0 = grid.offset
    out[r0:r0 + grid.n, c0:c0 + grid.n] = obj
    return out


def enforce_bc(estimate: np.ndarray, bc: BoundaryCondition,
               grid: GridSpec, force=None) -> np.ndarray:
    """Overwrite margin pixels with their known value, when enforcing.

    force overrides bc.enforce when not None (the outer loop owns the
    decision there).
    """
    enforcing = bc.enforce if force is None else force
    if grid.periodic or not enforcing:
        return estimate
    out = estimate.copy()
    out[~grid.interior_mask()] = bc.margin_value
    return out
