"""Dense fixed-point analysis on tiny instances.

Everything here trades scale for exactness: operators become explicit
matrices, projections become orthonormal factors, and spectral claims
are checked against full decompositions.  Sizes are guarded so nothing
quietly grows past dense-factorization territory.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .drs import prox_gaussian, prox_poisson
from .fields import sgn
from .operators import FrameOperator

MAX_DENSE_DIM = 4096


@dataclass
class DenseInstance:
    """Explicit matrix form of the object-side operator at a point x."""
    A: np.ndarray        # (N, d) complex, columns = operator on basis fields
    x: np.ndarray        # (N,) evaluation point, |x| > 0 everywhere
    b: np.ndarray        # (N,) nonnegative data amplitudes
    rho: float
    G: np.ndarray        # (N, r) column-orthonormal, G G^H = C C-dagger
    grid_shape: tuple

    @property
    def omega(self):
        return sgn(self.x)

    @property
    def rank(self) -> int:
        return self.G.shape[1]


def _orthonormal_factor(columns, rank_tol=1e-10):
    u, s, _ = np.linalg.svd(columns, full_matrices=False)
    rank = int(np.sum(s > rank_tol * s[0]))
    return u[:, :rank]


def build_dense(probe, obj_on_grid, plan, grid, rho: float = 1.0,
                pad_factor: int = 2, point=None) -> DenseInstance:
    """Densify the object-side operator; evaluate at point (default: the
    noiseless solution frames of (probe, obj))."""
    op = FrameOperator.for_object(plan, grid, probe, pad_factor)
    d = grid.shape[0] * grid.shape[1]
    n_frames = int(np.prod(op.frame_shape))
    if n_frames > MAX_DENSE_DIM or d > MAX_DENSE_DIM:
        raise ValueError(
            f"dense instance too large: {n_frames} frame dims, {d} columns")
    A = np.empty((n_frames, d), dtype=complex)
    basis = np.zeros(d, dtype=complex)
    for j in range(d):
        basis[j] = 1.0
        A[:, j] = op.apply(basis.reshape(grid.shape)).ravel()
        basis[j] = 0.0
    if point is None:
        point = A @ np.asarray(obj_on_grid, dtype=complex).ravel()
    x = np.asarray(point, dtype=complex).ravel()
    b = np.abs(A @ np.asarray(obj_on_grid, dtype=complex).ravel())
    C = sgn(x).conj()[:, None] * A
    return DenseInstance(A=A, x=x, b=b, rho=rho,
                         G=_orthonormal_factor(C), grid_shape=grid.shape)


def jacobian_apply(inst: DenseInstance, eta, at_solution: bool = False):
    """Differential of the Gaussian-DRS update in phase-aligned coordinates.

    General point:  CC'eta - [Re(2CC'eta - eta)
                              + i(I - diag(b/|x|)) Im(2CC'eta - eta)]/(1+rho)
    At a solution (|x| = b) this collapses to
                    CC'eta + Re(eta - 2CC'eta)/(1+rho),
    kept as a separate code path so the collapse itself can be tested.
    """
    absx = np.abs(inst.x)
    if absx.min() < 1e-12:
        raise ValueError("|x| vanishes somewhere; Jacobian hypothesis broken")
    eta = np.asarray(eta, dtype=complex).ravel()
    cc_eta = inst.G @ (inst.G.conj().T @ eta)
    if at_solution:
        return cc_eta + (eta - 2.0 * cc_eta).real / (1.0 + inst.rho)
    t = 2.0 * cc_eta - eta
    damp = 1.0 - inst.b / absx
    return cc_eta - (t.real + 1j * damp * t.imag) / (1.0 + inst.rho)


def real_embedding(apply_fn, dim: int) -> np.ndarray:
    """2*dim x 2*dim real matrix of a real-linear complex-vector map."""
    mat = np.empty((2 * dim, 2 * dim))
    basis = np.zeros(dim, dtype=complex)
    for j in range(dim):
        basis[j] = 1.0
        out = apply_fn(basis.copy())
        mat[:dim, j] = out.real
        mat[dim:, j] = out.imag
        basis[j] = 1j
        out = apply_fn(basis.copy())
        mat[:dim, dim + j] = out.real
        mat[dim:, dim + j] = out.imag
        basis[j] = 0.0
    return mat


def operator_norm(real_matrix, cross_check_tol: float = 1e-8) -> float:
    """Largest singular value, with a power-iteration cross-check."""
    real_matrix = np.asarray(real_matrix, dtype=float)
    top = float(np.linalg.svd(real_matrix, compute_uv=False)[0])
    rng = np.random.default_rng(0)
    v = rng.standard_normal(real_matrix.shape[1])
    v /= np.linalg.norm(v)
    gram = real_matrix.T @ real_matrix
    estimate = 0.0
    for _ in range(10_000):
        w = gram @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        v = w / nw
        new = float(np.sqrt(v @ (gram @ v)))
        if abs(new - estimate) <= 1e-12 * max(1.0, new):
            estimate = new
            break
        estimate = new
    if abs(top - estimate) > cross_check_tol * max(1.0, top):
        raise RuntimeError(
            f"operator norm cross-check failed: svd {top} vs power-iteration "
            f"{estimate}")
    return top


def jacobian_matrix(inst: DenseInstance, at_solution: bool = False):
    n = inst.x.size
    return real_embedding(
        lambda eta: jacobian_apply(inst, eta, at_solution), n)


def drs_update_dense(inst: DenseInstance):
    """The Gaussian-DRS update u -> U(u) with P formed densely from A."""
    w = np.sum(np.abs(inst.A) ** 2, axis=0)
    guard = 1e-12 * w.max()
    proj = inst.A @ (inst.A.conj().T / (w + guard)[:, None])
    rho = inst.rho

    def update(u):
        pu = proj @ u
        return (u / (1.0 + rho) + (rho - 1.0) / (1.0 + rho) * pu
                + inst.b * sgn(2.0 * pu - u) / (1.0 + rho))

    return update


def finite_difference_check(inst: DenseInstance, eps: float = 1e-6,
                            trials: int = 10, seed: int = 0,
                            rel_tol: float = 1e-4) -> dict:
    """Directional derivatives of the actual update vs the Jacobian formula.

    The Jacobian acts in phase-aligned coordinates (eta = conj(omega) * du),
    so each probe direction is conjugated in and the result rotated back out
    before comparing.
    """
    update = drs_update_dense(inst)
    omega = inst.omega
    rng = np.random.default_rng(seed)
    n = inst.x.size
    worst = 0.0
    for _ in range(trials):
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        z /= np.linalg.norm(z)
        fd = (update(inst.x + eps * z) - update(inst.x)) / eps
        predicted = omega * jacobian_apply(inst, np.conj(omega) * z)
        gap = np.linalg.norm(fd - predicted) / max(np.linalg.norm(predicted),
                                                   1e-30)
        worst = max(worst, float(gap))
    return {"max_rel_err": worst, "eps": eps, "trials": trials,
            "passed": bool(worst <= rel_tol)}


def verify_solution_stability(inst: DenseInstance, rho_list) -> dict:
    """Proposition-2 checks at a solution point, for each rho.

    The operator norm never exceeds 1, and the specific direction
    i*b/||b|| attains it.
    """
    if not np.allclose(np.abs(inst.x), inst.b, atol=1e-10):
        raise ValueError("not a solution point: |x| != b")
    rows = []
    for rho in rho_list:
        probe = DenseInstance(A=inst.A, x=inst.x, b=inst.b, rho=float(rho),
                              G=inst.G, grid_shape=inst.grid_shape)
        norm = operator_norm(jacobian_matrix(probe, at_solution=False))
        direction = 1j * inst.b / np.linalg.norm(inst.b)
        attained = float(np.linalg.norm(
            jacobian_apply(probe, direction, at_solution=False)))
        rows.append({
            "rho": float(rho),
            "norm": norm,
            "norm_leq_one": bool(norm <= 1.0 + 1e-8),
            "norm_at_imaginary_data_direction": attained,
            "attains_one": bool(abs(attained - 1.0) <= 1e-8),
        })
    return {"check": "solution_stability", "rows": rows,
            "passed": all(r["norm_leq_one"] and r["attains_one"]
                          for r in rows)}


def find_nonsolution_point(inst: DenseInstance, restarts: int = 1000,
                           seed=0, max_iter: int = 2000) -> dict:
    """Search for a fixed point with nonzero range-complement part.

    Solves b*sgn(x) = Px - rho*P_perp(x) by the natural fixed-point sweep
    x <- P(b sgn x) - (1/rho) P_perp(b sgn x).  Either outcome (found /
    not found) is a legitimate result and is reported as such.
    """
    rho = inst.rho
    if rho <= 0:
        raise ValueError("the construction needs rho > 0")
    basis = _orthonormal_factor(inst.A)
    b = inst.b
    rng = np.random.default_rng(seed)
    n = b.size

    def proj(y):
        return basis @ (basis.conj().T @ y)

    for restart in range(restarts):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x *= np.linalg.norm(b) / np.linalg.norm(x)
        for _ in range(max_iter):
            y = b * sgn(x)
            py = proj(y)
            x_new = py - (y - py) / rho
            if np.linalg.norm(x_new - x) <= 1e-13 * np.linalg.norm(x):
                x = x_new
                break
            x = x_new
        residual = np.linalg.norm(b * sgn(x) - (proj(x) - rho * (x - proj(x))))
        perp = np.linalg.norm(x - proj(x))
        if (residual <= 1e-10 * np.linalg.norm(b)
                and perp > 1e-8 * np.linalg.norm(x)
                and np.abs(x).min() > 1e-12):
            return {"found": True, "restarts_used": restart + 1, "x": x,
                    "residual": float(residual),
                    "perp_norm": float(perp)}
    return {"found": False, "restarts_used": restarts, "x": None,
            "residual": None, "perp_norm": None}


def unstable_direction_report(inst: DenseInstance, grid_points: int = 720) -> dict:
    """At a non-solution fixed point, sweep eta = i(alpha|x| + beta b).

    Expansion happens where rho*beta > alpha; the sweep records the most
    expanding member of the family and the Eq.-consistency of the point:
    CC'|x| = CC'b = rho/(1+rho)|x| + 1/(1+rho) b.
    """
    absx = np.abs(inst.x)
    ccd = lambda v: inst.G @ (inst.G.conj().T @ v)
    lhs = ccd(absx.astype(complex))
    mid = ccd(inst.b.astype(complex))
    rhs = (inst.rho * absx + inst.b) / (1.0 + inst.rho)
    scale = np.linalg.norm(inst.b)
    identity_gap = max(float(np.linalg.norm(lhs - mid)),
                       float(np.linalg.norm(mid - rhs))) / scale

    best = {"ratio": -np.inf}
    for theta in np.linspace(0.0, 2.0 * np.pi, grid_points, endpoint=False):
        alpha, beta = np.cos(theta), np.sin(theta)
        eta = 1j * (alpha * absx + beta * inst.b)
        norm_eta = np.linalg.norm(eta)
        if norm_eta == 0:
            continue
        ratio = float(np.linalg.norm(jacobian_apply(inst, eta)) / norm_eta)
        if ratio > best["ratio"]:
            best = {"ratio": ratio, "alpha": float(alpha),
                    "beta": float(beta)}
    best["expands"] = bool(best["ratio"] > 1.0 + 1e-10)
    best["in_predicted_cone"] = bool(
        inst.rho * best.get("beta", 0.0) > best.get("alpha", 0.0))
    best["fixed_point_identity_gap"] = identity_gap
    return best


# -- block spectrum ---------------------------------------------------------

def block_eigenvalues(lam: float, rho: float):
    """Eigenvalues of the 2x2 spectral block at singular value lam."""
    disc = rho * rho - 4.0 * lam * lam + 4.0 * lam ** 4
    root = np.sqrt(complex(disc))
    base = rho + 2.0 * (1.0 - lam * lam)
    return ((base + root) / (2.0 * (1.0 + rho)),
            (base - root) / (2.0 * (1.0 + rho)))


def block_matrix(lam: float, rho: float) -> np.ndarray:
    lamp = np.sqrt(max(1.0 - lam * lam, 0.0))
    return np.array([
        [1.0 / (1.0 + rho) + (rho - 1.0) / (1.0 + rho) * lam * lam,
         (rho - 1.0) / (1.0 + rho) * lam * lamp],
        [lam * lamp, lamp * lamp],
    ])


def block_spectrum_check(inst: DenseInstance, rho: float | None = None) -> dict:
    """Assemble the stacked-real singular values and compare block spectra
    against the full Jacobian spectrum at a solution point."""
    rho = inst.rho if rho is None else float(rho)
    work = DenseInstance(A=inst.A, x=inst.x, b=inst.b, rho=rho, G=inst.G,
                         grid_shape=inst.grid_shape)
    stacked = np.vstack([work.G.conj().T.real, work.G.conj().T.imag])
    lams = np.linalg.svd(stacked, compute_uv=False)  # 2r values, descending

    r = work.rank
    pair_gap = float(np.max(np.abs(
        lams ** 2 + lams[::-1] ** 2 - 1.0))) if lams.size else 0.0

    formula_gap = 0.0
    block_eigs = []
    for lam in lams:
        numeric = np.linalg.eigvals(block_matrix(lam, rho))
        predicted = np.asarray(block_eigenvalues(lam, rho))
        # match eigenvalue sets regardless of order
        direct = np.max(np.abs(np.sort_complex(numeric)
                               - np.sort_complex(predicted)))
        formula_gap = max(formula_gap, float(direct))
        block_eigs.extend(predicted)
        if np.iscomplex(predicted[0]) and abs(predicted[0].imag) > 1e-12:
            modulus = np.sqrt((1.0 - lam * lam) / (1.0 + rho))
            formula_gap = max(formula_gap,
                              float(abs(abs(predicted[0]) - modulus)))

    n = work.x.size
    full = np.linalg.eigvals(jacobian_matrix(work, at_solution=True))
    predicted_all = np.concatenate([
        np.asarray(block_eigs),
        np.full(n - 2 * r, 1.0 / (1.0 + rho), dtype=complex),
        np.zeros(n - 2 * r, dtype=complex),
    ])
    order = np.lexsort((predicted_all.imag, predicted_all.real))
    order_full = np.lexsort((full.imag, full.real))
    union_gap = float(np.max(np.abs(predicted_all[order] - full[order_full])))

    return {
        "check": "block_spectrum",
        "rho": rho,
        "stacked_singular_values": lams.tolist(),
        "pairing_gap": pair_gap,
        "pairing_holds": bool(pair_gap <= 1e-8),
        "block_formula_gap": formula_gap,
        "block_formula_ok": bool(formula_gap <= 1e-10),
        "spectrum_union_gap": union_gap,
        "spectrum_union_ok": bool(union_gap <= 1e-8),
    }


# -- asymptotic Poisson/Gaussian agreement ---------------------------------

def poisson_gaussian_limit(lambda_list, rho: float = 1.0) -> dict:
    """Total-variation decay of Poisson vs matched Gaussian, plus the prox
    and cost agreements in the high-count regime."""
    lambdas = [float(v) for v in lambda_list]
    if any(v < 100 for v in lambdas):
        raise ValueError("lambda values must be >= 100")
    tv = []
    for lam in lambdas:
        half_width = int(np.ceil(6.0 * np.sqrt(lam)))
        ks = np.arange(max(0, int(lam) - half_width), int(lam) + half_width)
        pois = stats.poisson.pmf(ks, lam)
        gauss = (stats.norm.cdf(ks + 0.5, loc=lam, scale=np.sqrt(lam))
                 - stats.norm.cdf(ks - 0.5, loc=lam, scale=np.sqrt(lam)))
        tv.append(0.5 * float(np.abs(pois - gauss).sum()))
    slope = float(np.polyfit(np.log(lambdas), np.log(tv), 1)[0])

    prox_rows = []
    for lam in lambdas:
        b = np.sqrt(lam)
        w = b + np.linspace(-0.1 * b, 0.1 * b, 21)
        gap = np.abs(prox_poisson(w.astype(complex), b, rho)
                     - prox_gaussian(w.astype(complex), b, rho / 4.0))
        prox_rows.append({"lambda": lam,
                          "max_rel_gap": float(gap.max() / b),
                          "bound": 10.0 / np.sqrt(lam)})

    cost_rows = []
    for lam in lambdas:
        a = np.sqrt(lam)
        s = np.linspace(-1.0, 1.0, 41)
        poisson_cost = (a + s) ** 2 - lam * np.log((a + s) ** 2)
        at_min = lam - lam * np.log(lam)
        surrogate = 2.0 * s ** 2
        gap = np.abs(poisson_cost - at_min - surrogate)
        cost_rows.append({"lambda": lam, "max_gap": float(gap.max()),
                          "bound": 5.0 / np.sqrt(lam)})

    return {
        "check": "poisson_gaussian_limit",
        "lambdas": lambdas,
        "tv_distances": tv,
        "tv_monotone_decreasing": bool(np.all(np.diff(tv) < 0)),
        "decay_exponent": slope,
        "exponent_in_range": bool(-0.7 <= slope <= -0.3),
        "prox_agreement": prox_rows,
        "prox_within_bounds": bool(all(r["max_rel_gap"] <= r["bound"]
                                       for r in prox_rows)),
        "cost_agreement": cost_rows,
        "cost_within_bounds": bool(all(r["max_gap"] <= r["bound"]
                                       for r in cost_rows)),
    }
