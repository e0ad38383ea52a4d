"""Probe construction: i.i.d. random phase, correlated variants, PPC inits.

The true probe has unit magnitude at every pixel; only its phase carries
information. Correlated probes are produced by box-averaging the i.i.d.
field on the probe torus and keeping phases only, so the correlation length
shapes the phase profile and nothing else.
"""
import numpy as np

from .fields import sgn


def iid_probe(m: int, seed) -> np.ndarray:
    """Unit-magnitude probe with phases i.i.d. uniform on [0, 2pi)."""
    if m < 1:
        raise ValueError("m must be positive")
    rng = np.random.default_rng(seed)
    return np.exp(2j * np.pi * rng.random((m, m)))


def correlated_probe(m: int, c: float, seed) -> np.ndarray:
    """Box-smoothed probe; c in (0, 1] is the correlation length over m.

    Periodic convolution with the indicator of {max(|k1|,|k2|) <= c*m}.
    Offsets beyond the torus alias back onto it (they are accumulated at
    their wrapped residues), so the kernel keeps growing up to c = 1
    instead of saturating at the half-width of the grid. Each output pixel
    is then renormalized to unit magnitude.
    """
    if not 0 < c <= 1:
        raise ValueError("c must lie in (0, 1]")
    base = iid_probe(m, seed)
    h = int(np.floor(c * m))
    kernel = np.zeros((m, m))
    for k1 in range(-h, h + 1):
        for k2 in range(-h, h + 1):
            kernel[k1 % m, k2 % m] += 1.0
    smooth = np.fft.ifft2(np.fft.fft2(base) * np.fft.fft2(kernel))
    out = sgn(smooth)
    if np.any(np.abs(smooth) == 0):  # box sum exactly cancelled; keep raw phase
        dead = np.abs(smooth) == 0
        out[dead] = base[dead]
    return out


def ppc_init(true_probe: np.ndarray, k, delta: float, seed,
             period: int) -> np.ndarray:
    """PPC(k, delta) initial estimate of ``true_probe``.

    nu(p) = mu(p) * exp(i 2pi k.p / period) * exp(i phi(p)) with phi
    i.i.d. uniform on (-delta*pi, delta*pi). The ramp frequency k is in
    cycles per ``period`` pixels; callers pass the object extent so the
    ramp matches an object-side linear phase. delta <= 1/2 with k = (0,0)
    guarantees the phase constraint Re(conj(nu) * mu) > 0 at every pixel;
    a nonzero k deliberately violates it.
    """
    m = true_probe.shape[0]
    rng = np.random.default_rng(seed)
    p1, p2 = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    ramp = np.exp(2j * np.pi * (k[0] * p1 + k[1] * p2) / period)
    phi = rng.uniform(-delta * np.pi, delta * np.pi, size=(m, m))
    return true_probe * ramp * np.exp(1j * phi)


def ppc_predicate(estimate: np.ndarray, truth: np.ndarray, delta: float):
    """Per-pixel test angle(estimate, truth) < delta*pi plus pass fraction."""
    if estimate.shape != truth.shape:
        raise ValueError("shape mismatch")
    ang = np.abs(np.angle(estimate * np.conj(truth)))
    ok = ang < delta * np.pi
    return ok, float(ok.mean())
