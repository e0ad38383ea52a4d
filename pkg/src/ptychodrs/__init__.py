"""Blind ptychography with coded probes.

Simulation of coded-probe diffraction amplitudes, joint object/probe
recovery by alternating minimization with Douglas-Rachford inner loops,
and a dense stability lab for the fixed-point analysis of the update map.
"""
from .config import ConfigError, config_hash, resolve_config
from .drs import (DrsConfig, gaussian_drs_step, poisson_drs_step,
                  prox_gaussian, prox_poisson, run_inner)
from .fields import dft2, idft2, set_fft_workers, sgn
from .metrics import (MetricReport, calibrate_photon_scale, nsr, poissonize,
                      relative_error, relative_residual)
from .objects import (BoundaryCondition, GridSpec, enforce_bc, extend_truth,
                      make_cib, make_rpp, reconstruction_grid, synth_images)
from .operators import FrameOperator, coverage_counts, measure
from .outer import AmdrsConfig, NumericalAbort, RunHistory, amdrs, fit_rate
from .probes import correlated_probe, iid_probe, ppc_init, ppc_predicate
from .scans import ScanPlan, coverage, make_full_rank, make_rank_one
from .stability import (DenseInstance, block_eigenvalues,
                        block_spectrum_check, build_dense,
                        finite_difference_check, find_nonsolution_point,
                        jacobian_apply, jacobian_matrix, operator_norm,
                        poisson_gaussian_limit, unstable_direction_report,
                        verify_solution_stability)

__version__ = "0.1.0"

__all__ = [
    "AmdrsConfig", "BoundaryCondition", "ConfigError", "DenseInstance",
    "DrsConfig", "FrameOperator", "GridSpec", "MetricReport",
    "NumericalAbort", "RunHistory", "ScanPlan", "amdrs",
    "block_eigenvalues", "block_spectrum_check", "build_dense",
    "calibrate_photon_scale", "config_hash", "correlated_probe",
    "coverage", "coverage_counts", "dft2", "enforce_bc", "extend_truth",
    "finite_difference_check", "find_nonsolution_point", "fit_rate",
    "gaussian_drs_step", "idft2", "iid_probe", "jacobian_apply",
    "jacobian_matrix", "make_cib", "make_full_rank", "make_rank_one",
    "make_rpp", "measure", "nsr", "operator_norm", "poisson_drs_step",
    "poisson_gaussian_limit", "poissonize", "ppc_init", "ppc_predicate",
    "prox_gaussian", "prox_poisson", "reconstruction_grid",
    "relative_error", "relative_residual", "resolve_config", "run_inner",
    "set_fft_workers", "sgn", "synth_images", "unstable_direction_report",
    "verify_solution_stability",
]
