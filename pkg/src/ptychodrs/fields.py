"""Complex 2-D field primitives: the sign map and the unitary padded DFT.

Everything downstream (operators, solvers, stability lab) is built from
these three functions, so their conventions are load-bearing:

* ``sgn(0) = 1``, never 0, so amplitude constraints act on dark pixels too.
* The DFT is unitary (norm preserved) at every padding, which is what keeps
  the normal operators diagonal later on.
"""
import numpy as np
import scipy.fft

_fft_workers = 1


def set_fft_workers(count: int) -> None:
    """Cap the FFT worker threads (1 = serial, the default).

    Worker count only splits frame stacks across threads; per-frame
    transforms are unchanged, so results do not depend on it.
    """
    global _fft_workers
    _fft_workers = max(1, int(count))


def sgn(z):
    """Unit-modulus sign of a complex array; zeros map to 1."""
    z = np.asarray(z)
    a = np.abs(z)
    out = np.ones(z.shape, dtype=np.complex128)
    nz = a > 0
    out[nz] = z[nz] / a[nz]
    return out


def dft2(field, pad_rows=None, pad_cols=None):
    """Zero-pad ``field`` to (pad_rows, pad_cols), then unitary 2-D DFT.

    Energy is preserved exactly: ||dft2(x)|| == ||x|| for every padding.
    Operates on the last two axes, so frame stacks pass through unchanged
    in the leading axis.
    """
    field = np.asarray(field, dtype=np.complex128)
    r, c = field.shape[-2:]
    pr = r if pad_rows is None else int(pad_rows)
    pc = c if pad_cols is None else int(pad_cols)
    if pr < r or pc < c:
        raise ValueError(f"pad ({pr},{pc}) smaller than field ({r},{c})")
    if (pr, pc) != (r, c):
        buf = np.zeros(field.shape[:-2] + (pr, pc), dtype=np.complex128)
        buf[..., :r, :c] = field
        field = buf
    return scipy.fft.fft2(field, axes=(-2, -1), norm="ortho",
                          workers=_fft_workers)


def idft2(field):
    """Inverse of :func:`dft2` on the padded grid (unitary convention).

    Cropping back to the pre-pad shape is the caller's job; the pad size
    is not recorded in the array.
    """
    field = np.asarray(field, dtype=np.complex128)
    return scipy.fft.ifft2(field, axes=(-2, -1), norm="ortho",
                           workers=_fft_workers)
