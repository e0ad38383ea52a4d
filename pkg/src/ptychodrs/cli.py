"""Batch command-line front end.

Subcommands map one-to-one onto experiment stages: simulate writes the
measurement set, reconstruct runs the solver against it, sweep-noise and
stability are the two canned studies, metrics compares two saved fields.
Every run resolves one config (defaults, then TOML, then --set overrides),
and the sha256 hash of the resolved config is stamped into each output so
results stay traceable. All writes land under --out.

Exit codes: 0 success, 1 config error, 2 numerical abort, 3 verification
failure.
"""
from __future__ import annotations

import argparse
import functools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import fields
from .config import (ConfigError, build_bc, build_object, build_plan,
                     build_probe, config_hash, resolve_config)
from .drs import DrsConfig
from .io import (load_plan, read_ampf, read_cpxf, render_magnitude,
                 render_phase, save_plan, write_ampf, write_cpxf, write_pgm,
                 write_report)
from .metrics import calibrate_photon_scale, nsr, poissonize, relative_error
from .objects import BoundaryCondition, reconstruction_grid, extend_truth
from .operators import measure
from .outer import AmdrsConfig, NumericalAbort, amdrs
from .probes import iid_probe, ppc_init
from .scans import make_rank_one
from .stability import (block_spectrum_check, build_dense,
                        finite_difference_check, find_nonsolution_point,
                        poisson_gaussian_limit, unstable_direction_report,
                        verify_solution_stability)

OK, CONFIG_FAULT, ABORT_FAULT, VERIFY_FAULT = 0, 1, 2, 3

_DATA_SECTIONS = ("seed", "object", "probe", "scan", "bc", "noise")


class VerificationFailure(RuntimeError):
    """A stability-lab hard assertion failed; the CLI maps this to exit 3."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage problems; those are config
    # errors under this tool's contract, so raise and let main() map them.
    def error(self, message):
        raise ConfigError(message)


def _data_hash(cfg: dict) -> str:
    return config_hash({k: cfg[k] for k in _DATA_SECTIONS})


def _solver_config(cfg: dict) -> AmdrsConfig:
    s = cfg["solver"]
    drs = DrsConfig(rho=float(s["rho"]), max_inner=int(s["max_inner"]),
                    rel_tol=float(s["rel_tol"]),
                    objective=str(s["objective"]))
    return AmdrsConfig(drs=drs, max_epochs=int(s["max_epochs"]),
                       outer_tol=float(s["outer_tol"]),
                       rr_tol=float(s["rr_tol"]), seed=int(cfg["seed"]),
                       object_init=str(s["object_init"]),
                       warm_start=bool(s["warm_start"]),
                       pad_factor=int(s["pad_factor"]))


def _simulate_arrays(cfg: dict, force_noiseless: bool = False):
    obj = build_object(cfg)
    probe = build_probe(cfg)
    plan = build_plan(cfg)
    bc = build_bc(cfg)
    n = int(cfg["object"]["n"])
    grid = reconstruction_grid(plan, probe.shape[0], n, bc)
    truth = extend_truth(obj, bc, grid)
    b = measure(probe, truth, plan, grid,
                pad_factor=int(cfg["solver"]["pad_factor"]))
    scale = float(cfg["noise"]["photon_scale"])
    if scale > 0 and not force_noiseless:
        b = poissonize(b, scale, cfg["noise"]["seed"])
    return obj, probe, plan, bc, grid, truth, b


def cmd_simulate(cfg: dict, out: Path) -> int:
    h = config_hash(cfg)
    obj, probe, plan, bc, grid, truth, b = _simulate_arrays(cfg)
    save_plan(plan, out / "plan.csv", extra_meta={"config_hash": h})
    write_cpxf(out / "truth_object.cpxf", truth)
    write_cpxf(out / "truth_probe.cpxf", probe)
    write_ampf(out / "amplitudes.ampf", b)
    write_pgm(out / "object_magnitude.pgm", render_magnitude(obj), comment=h)
    write_pgm(out / "object_phase.pgm", render_phase(obj), comment=h)
    write_report(out / "manifest.json", {
        "command": "simulate",
        "config": cfg,
        "config_hash": h,
        "data_hash": _data_hash(cfg),
        "frames": list(b.shape),
        "grid_shape": list(grid.shape),
    })
    print(f"simulate: {b.shape[0]} frames of {b.shape[1]}x{b.shape[2]}, "
          f"grid {grid.shape[0]}x{grid.shape[1]}, config {h}")
    return OK


def cmd_reconstruct(cfg: dict, data_dir: Path, out: Path) -> int:
    h = config_hash(cfg)
    manifest_path = data_dir / "manifest.json"
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        b = read_ampf(data_dir / "amplitudes.ampf")
        plan = load_plan(data_dir / "plan.csv")
        truth_full = read_cpxf(data_dir / "truth_object.cpxf")
        probe_true = read_cpxf(data_dir / "truth_probe.cpxf")
    except FileNotFoundError as exc:
        raise ConfigError(f"missing simulate output: {exc.filename}")
    if manifest.get("data_hash") != _data_hash(cfg):
        raise ConfigError(
            f"data in {data_dir} was simulated under a different config "
            f"(data hash {manifest.get('data_hash')}, expected "
            f"{_data_hash(cfg)})")

    n = int(cfg["object"]["n"])
    bc = build_bc(cfg)
    pad = int(cfg["solver"]["pad_factor"])
    expected = (plan.count, pad * probe_true.shape[0],
                pad * probe_true.shape[1])
    if tuple(b.shape) != expected:
        raise ConfigError(f"amplitude stack {b.shape} does not match "
                          f"plan/probe/pad dimensions {expected}")
    grid = reconstruction_grid(plan, probe_true.shape[0], n, bc)
    if truth_full.shape != grid.shape:
        raise ConfigError(f"truth grid {truth_full.shape} does not match "
                          f"reconstruction grid {grid.shape}")

    init = cfg["init"]
    probe_init = ppc_init(probe_true, tuple(init["k"]), float(init["delta"]),
                          init["seed"], period=n)
    try:
        hist = amdrs(b, plan, bc, probe_init, _solver_config(cfg), n,
                     truth=grid.interior(truth_full))
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return ABORT_FAULT
    hist.write_csv(out / "history.csv", comment=f"config_hash={h}")
    write_cpxf(out / "final_object.cpxf", hist.object_final)
    write_cpxf(out / "final_probe.cpxf", hist.probe_final)
    interior = grid.interior(hist.object_final)
    write_pgm(out / "estimate_magnitude.pgm", render_magnitude(interior),
              comment=h)
    write_pgm(out / "estimate_phase.pgm", render_phase(interior), comment=h)
    write_report(out / "manifest.json", {
        "command": "reconstruct",
        "config": cfg,
        "config_hash": h,
        "epochs": hist.epochs,
        "stopped_because": hist.stopped_because,
        "final_re": hist.re[-1],
        "final_re2": hist.re2[-1],
        "final_rr": hist.rr[-1],
    })
    print(f"reconstruct: {hist.epochs} epochs ({hist.stopped_because}), "
          f"RE {hist.re[-1]:.3e}, RR {hist.rr[-1]:.3e}, config {h}")
    return OK


def _sweep_point(cfg: dict, indexed_target) -> tuple:
    idx, target = indexed_target
    _, _, plan, bc, _, truth_full, b_clean = _simulate_arrays(
        cfg, force_noiseless=True)
    n = int(cfg["object"]["n"])
    probe_true = build_probe(cfg)
    grid = reconstruction_grid(plan, probe_true.shape[0], n, bc)
    if target > 0:
        scale = calibrate_photon_scale(b_clean, target,
                                       (int(cfg["noise"]["seed"]), idx))
        b = poissonize(b_clean, scale, (int(cfg["noise"]["seed"]), idx, 7919))
        achieved = nsr(b, b_clean)
    else:
        b, achieved = b_clean, 0.0
    init = cfg["init"]
    probe_init = ppc_init(probe_true, tuple(init["k"]), float(init["delta"]),
                          init["seed"], period=n)
    res = {}
    for objective in ("gaussian", "poisson"):
        solver = _solver_config(cfg)
        solver.drs = DrsConfig(rho=solver.drs.rho,
                               max_inner=solver.drs.max_inner,
                               rel_tol=solver.drs.rel_tol,
                               objective=objective)
        solver.max_epochs = min(solver.max_epochs, 100)
        hist = amdrs(b, plan, bc, probe_init, solver, n,
                     truth=grid.interior(truth_full))
        res[objective] = hist.re[-1]
    return achieved, res["gaussian"], res["poisson"]


def cmd_sweep_noise(cfg: dict, out: Path, jobs: int) -> int:
    h = config_hash(cfg)
    targets = [float(t) for t in cfg["noise"]["targets"]]
    for t in targets:
        if not 0 <= t < 1:
            raise ConfigError(f"noise target {t} outside [0, 1)")
    if float(cfg["solver"]["rho"]) <= 0:
        raise ConfigError("sweep-noise runs the poisson objective too; "
                          "solver.rho must be > 0")
    work = list(enumerate(targets))
    point = functools.partial(_sweep_point, cfg)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(point, work))
    else:
        rows = [point(item) for item in work]
    with open(out / "noise_sweep.csv", "w") as fh:
        fh.write(f"# config_hash={h}\n")
        fh.write("nsr,re_gaussian,re_poisson\n")
        for achieved, re_g, re_p in rows:
            fh.write(f"{achieved:.6f},{re_g:.12e},{re_p:.12e}\n")
    write_report(out / "manifest.json", {
        "command": "sweep-noise",
        "config": cfg,
        "config_hash": h,
        "targets": targets,
        "rows": [list(row) for row in rows],
    })
    for (achieved, re_g, re_p), target in zip(rows, targets):
        print(f"nsr target {target:.2f}: achieved {achieved:.4f}, "
              f"RE gaussian {re_g:.3e}, poisson {re_p:.3e}")
    print(f"sweep-noise: {len(rows)} points, config {h}")
    return OK


def cmd_stability(cfg: dict, out: Path) -> int:
    h = config_hash(cfg)
    # fixed tiny instance: everything dense and exhaustively checkable
    n0, m0 = 6, 3
    plan = make_rank_one(2, 2, 3, 0, int(cfg["scan"]["seed"]))
    bc = BoundaryCondition(kind="periodic", value=0.0, enforce=False)
    grid = reconstruction_grid(plan, m0, n0, bc)
    probe = iid_probe(m0, int(cfg["probe"]["seed"]))
    rng = np.random.default_rng(int(cfg["object"]["seed"]))
    obj = rng.standard_normal((n0, n0)) + 1j * rng.standard_normal((n0, n0))
    rho = float(cfg["solver"]["rho"])
    inst = build_dense(probe, obj, plan, grid, rho=max(rho, 1.0))

    report = {"command": "stability", "config_hash": h}
    report["solution_stability"] = verify_solution_stability(
        inst, [0.0, 0.5, 1.0, 2.0, 10.0])
    report["finite_difference"] = finite_difference_check(inst)
    report["block_spectrum"] = block_spectrum_check(inst)
    search = find_nonsolution_point(inst, restarts=200,
                                    seed=int(cfg["seed"]))
    report["nonsolution_search"] = {k: v for k, v in search.items()
                                    if k != "x"}
    if search["found"]:
        at_fp = build_dense(probe, obj, plan, grid, rho=max(rho, 1.0),
                            point=search["x"])
        report["unstable_directions"] = unstable_direction_report(at_fp)
    report["poisson_gaussian_limit"] = poisson_gaussian_limit(
        [1e2, 1e3, 1e4, 1e5])

    hard = {
        "solution_stability": report["solution_stability"]["passed"],
        "finite_difference": report["finite_difference"]["passed"],
        "block_formula": report["block_spectrum"]["block_formula_ok"],
        "spectrum_union": report["block_spectrum"]["spectrum_union_ok"],
        "limit_exponent": report["poisson_gaussian_limit"]
                                ["exponent_in_range"],
        "prox_agreement": report["poisson_gaussian_limit"]
                                ["prox_within_bounds"],
    }
    report["hard_checks"] = hard
    write_report(out / "stability_report.json", report)
    for name, okay in hard.items():
        print(f"  {name}: {'pass' if okay else 'FAIL'}")
    if not all(hard.values()):
        print("stability: verification failure", file=sys.stderr)
        return VERIFY_FAULT
    print(f"stability: all hard checks passed, config {h}")
    return OK


def cmd_metrics(cfg: dict, truth_path: Path, est_path: Path,
                out: Path) -> int:
    h = config_hash(cfg)
    try:
        truth = read_cpxf(truth_path)
        est = read_cpxf(est_path)
    except FileNotFoundError as exc:
        raise ConfigError(f"missing field file: {exc.filename}")
    if truth.shape != est.shape:
        raise ConfigError(f"field shapes differ: {truth.shape} vs "
                          f"{est.shape}")
    report = relative_error(truth, est)
    write_report(out / "metrics.json", {
        "command": "metrics",
        "config_hash": h,
        "re": report.re,
        "re2": report.re2,
        "rr": report.rr,
        "alpha_hat": report.alpha_hat,
        "k_hat": list(report.k_hat),
    })
    print(f"RE {report.re:.6e}  RE2 {report.re2:.6e}  "
          f"k_hat ({report.k_hat[0]:+.4f},{report.k_hat[1]:+.4f})")
    return OK


def _add_common(sub):
    sub.add_argument("--config", default=None, help="TOML config file")
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--seed", type=int, default=None,
                     help="master seed override")
    sub.add_argument("--jobs", type=int, default=1,
                     help="parallel workers for sweeps")
    sub.add_argument("--set", dest="sets", action="append", default=[],
                     metavar="KEY=VALUE", help="config override")


def main(argv=None) -> int:
    parser = _Parser(prog="ptychodrs", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True,
                                 parser_class=_Parser)
    for name in ("simulate", "reconstruct", "sweep-noise", "stability",
                 "metrics"):
        sub = subs.add_parser(name)
        _add_common(sub)
        if name == "reconstruct":
            sub.add_argument("data", help="directory with simulate outputs")
        if name == "metrics":
            sub.add_argument("truth", help="reference field (CPXF)")
            sub.add_argument("estimate", help="estimated field (CPXF)")

    threads = os.environ.get("PTYCHO_DRS_THREADS")
    if threads:
        try:
            fields.set_fft_workers(int(threads))
        except ValueError:
            print(f"ignoring malformed PTYCHO_DRS_THREADS={threads!r}",
                  file=sys.stderr)

    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args.config, args.sets, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        if args.command == "reconstruct":
            return cmd_reconstruct(cfg, Path(args.data), out)
        if args.command == "sweep-noise":
            return cmd_sweep_noise(cfg, out, max(1, int(args.jobs)))
        if args.command == "stability":
            return cmd_stability(cfg, out)
        return cmd_metrics(cfg, Path(args.truth), Path(args.estimate), out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_FAULT
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return ABORT_FAULT
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return VERIFY_FAULT


if __name__ == "__main__":
    sys.exit(main())
