"""Binary field formats, plan round-trips, PGM renders, JSON reports.

CPXF: little-endian "CPXF" magic, u32 rows, u32 cols, then rows*cols
complex values as interleaved float64 (re, im), row-major.
AMPF: "AMPF" magic, u32 count, u32 rows, u32 cols, float64 amplitudes.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .scans import ScanPlan


def write_cpxf(path, field) -> None:
    field = np.asarray(field, dtype=np.complex128)
    if field.ndim != 2:
        raise ValueError("CPXF holds a single 2-D complex field")
    with open(path, "wb") as fh:
        fh.write(b"CPXF")
        fh.write(struct.pack("<II", *field.shape))
        inter = np.empty(field.shape + (2,), dtype="<f8")
        inter[..., 0] = field.real
        inter[..., 1] = field.imag
        fh.write(inter.tobytes())


def read_cpxf(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != b"CPXF":
            raise ValueError(f"{path}: not a CPXF file")
        rows, cols = struct.unpack("<II", fh.read(8))
        raw = np.frombuffer(fh.read(rows * cols * 16), dtype="<f8")
        if raw.size != rows * cols * 2:
            raise ValueError(f"{path}: truncated CPXF payload")
    return (raw[0::2] + 1j * raw[1::2]).reshape(rows, cols)


def write_ampf(path, stack) -> None:
    stack = np.asarray(stack, dtype=float)
    if stack.ndim != 3:
        raise ValueError("AMPF holds a stack of 2-D amplitude frames")
    with open(path, "wb") as fh:
        fh.write(b"AMPF")
        fh.write(struct.pack("<III", *stack.shape))
        fh.write(stack.astype("<f8").tobytes())


def read_ampf(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != b"AMPF":
            raise ValueError(f"{path}: not an AMPF file")
        count, rows, cols = struct.unpack("<III", fh.read(12))
        raw = np.frombuffer(fh.read(count * rows * cols * 8), dtype="<f8")
        if raw.size != count * rows * cols:
            raise ValueError(f"{path}: truncated AMPF payload")
    return raw.reshape(count, rows, cols).copy()


def save_plan(plan: ScanPlan, csv_path, extra_meta: dict | None = None) -> None:
    """Plan CSV (k,l,tx,ty) plus a JSON sidecar holding the metadata."""
    from .scans import save_plan_csv
    save_plan_csv(plan, csv_path)
    sidecar = {
        "tau": plan.tau,
        "scheme": plan.scheme,
        "jitter_bound": plan.jitter_bound,
        "seed": plan.seed,
        "grid": list(plan.grid),
    }
    if extra_meta:
        sidecar.update(_json_safe(extra_meta))
    with open(str(csv_path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_plan(csv_path) -> ScanPlan:
    with open(str(csv_path) + ".json") as fh:
        meta = json.load(fh)
    rows = []
    with open(csv_path) as fh:
        header = fh.readline().strip()
        while header.startswith("#"):
            header = fh.readline().strip()
        if header != "k,l,tx,ty":
            raise ValueError(f"{csv_path}: unexpected header {header!r}")
        for line in fh:
            if line.strip() and not line.startswith("#"):
                rows.append([int(v) for v in line.split(",")])
    positions = np.asarray([[r[2], r[3]] for r in rows], dtype=np.int64)
    return ScanPlan(positions=positions, tau=meta["tau"],
                    scheme=meta["scheme"], jitter_bound=meta["jitter_bound"],
                    seed=meta["seed"], grid=tuple(meta["grid"]))


def write_pgm(path, image, comment: str | None = None) -> None:
    """8-bit binary PGM; input is clipped to [0, 255] and rounded."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("PGM holds a single 2-D image")
    data = np.clip(np.round(image), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        header = "P5\n"
        if comment is not None:
            header += f"# {comment}\n"
        header += f"{image.shape[1]} {image.shape[0]}\n255\n"
        fh.write(header.encode())
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        payload = fh.read()
    # header: magic, width, height, maxval, single whitespace, then raster
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(payload) and payload[pos:pos + 1].isspace():
            pos += 1
        if payload[pos:pos + 1] == b"#":
            while pos < len(payload) and payload[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(payload) and not payload[pos:pos + 1].isspace():
            pos += 1
        fields.append(payload[start:pos])
    pos += 1
    if fields[0] != b"P5":
        raise ValueError(f"{path}: only binary PGM (P5) is supported")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    raster = np.frombuffer(payload, dtype=np.uint8, count=width * height,
                           offset=pos)
    return raster.reshape(height, width).astype(float)


def render_magnitude(field) -> np.ndarray:
    """Magnitude scaled to use the full 8-bit range."""
    mag = np.abs(np.asarray(field))
    top = mag.max()
    return mag * (255.0 / top) if top > 0 else mag


def render_phase(field) -> np.ndarray:
    """Phase mapped from (-pi, pi] onto [0, 255]."""
    ang = np.angle(np.asarray(field, dtype=complex))
    return (ang + np.pi) * (255.0 / (2.0 * np.pi))


def _json_safe(value):
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.complexfloating, complex)):
        return {"re": float(value.real), "im": float(value.imag)}
    return value


def write_report(path, report: dict) -> None:
    """Verification report as stable, numpy-safe JSON."""
    with open(path, "w") as fh:
        json.dump(_json_safe(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
