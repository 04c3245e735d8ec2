"""Flat-file formats: record CSVs + JSON sidecar, report JSON, Wigner CSVs.

Every file is written to a temporary name and renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .config import TomographyConfig
from .fock import FockVector
from .measurement import MeasurementRecord
from .tomography import ReconstructionReport, phase_grid
from .wigner import GridSpec, WignerGrid

SIDECAR = "run.json"
RECORD_HEADER = ["phase_index", "phase", "spin", "k", "count"]
SPIN_NAMES = ("up", "down")


class RecordSetError(ValueError):
    pass


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    return repr(float(x))


def record_to_csv(record: MeasurementRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_HEADER[:-1] + ["weight" if record.exact else "count"])
    for i, spin in enumerate(SPIN_NAMES):
        for k in range(record.kmax + 1):
            v = record.counts[i, k]
            w.writerow([record.phase_index, _fmt(record.phase), spin, k, _fmt(v) if record.exact else int(v)])
    return buf.getvalue()


def record_from_csv(text: str, alpha_mod: float, eta: float, chi=None, phi_d=None) -> MeasurementRecord:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    if header[:-1] != RECORD_HEADER[:-1] or header[-1] not in ("count", "weight"):
        raise RecordSetError(f"unexpected record header {header}")
    exact = header[-1] == "weight"
    if not body:
        raise RecordSetError("record file has no rows")
    kmax = max(int(r[3]) for r in body)
    counts = np.zeros((2, kmax + 1), dtype=float if exact else np.int64)
    phase_index, phase = int(body[0][0]), float(body[0][1])
    for r in body:
        if int(r[0]) != phase_index or float(r[1]) != phase:
            raise RecordSetError("record file mixes phases")
        counts[SPIN_NAMES.index(r[2]), int(r[3])] = float(r[4]) if exact else int(r[4])
    return MeasurementRecord(phase_index, phase, alpha_mod, eta, counts, exact=exact, chi=chi, phi_d=phi_d)


def phase_file(j: int) -> str:
    return f"phase_{j:03d}.csv"


def pulse_file(i: int) -> str:
    return f"pulse_{i:03d}.csv"


def write_records(out_dir, records, cfg: TomographyConfig, replicate: int = 0):
    """Write one CSV per run plus the ``run.json`` sidecar."""
    out_dir = Path(out_dir)
    phase_recs = [r for r in records if not r.is_pulse]
    pulse_recs = [r for r in records if r.is_pulse]
    for r in phase_recs:
        atomic_write(out_dir / phase_file(r.phase_index), record_to_csv(r))
    for r in pulse_recs:
        atomic_write(out_dir / pulse_file(r.phase_index), record_to_csv(r))
    sidecar = {
        "config": cfg.to_dict(),
        "rng": {"seed": cfg.seed, "replicate": replicate, "streams": "SeedSequence(seed, spawn_key=(kind, index, replicate))"},
        "exact": bool(phase_recs[0].exact) if phase_recs else bool(cfg.exact_mode),
        "alpha_mod": cfg.alpha_mod,
        "eta": cfg.eta,
        "phase_files": [phase_file(r.phase_index) for r in phase_recs],
        "pulses": [{"file": pulse_file(r.phase_index), "chi": r.chi, "phi_d": r.phi_d} for r in pulse_recs],
    }
    atomic_write(out_dir / SIDECAR, json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def read_records(run_dir):
    """Load a record set; returns ``(config, records)``."""
    run_dir = Path(run_dir)
    side_path = run_dir / SIDECAR
    if not side_path.exists():
        raise RecordSetError(f"missing sidecar {side_path}")
    side = json.loads(side_path.read_text())
    cfg = TomographyConfig.from_dict(side["config"])
    if side["alpha_mod"] != cfg.alpha_mod or side["eta"] != cfg.eta:
        raise RecordSetError("sidecar |alpha|/eta disagree with its config")
    expected = [phase_file(j) for j in range(cfg.phases)]
    missing = [f for f in expected if not (run_dir / f).exists()]
    if missing:
        raise RecordSetError(f"missing phase files: {', '.join(missing)}")
    if side["phase_files"] != expected:
        raise RecordSetError("sidecar phase list does not match config phase count")
    grid = phase_grid(cfg.phases)
    records = []
    for j, name in enumerate(expected):
        rec = record_from_csv((run_dir / name).read_text(), cfg.alpha_mod, cfg.eta)
        if rec.phase_index != j or abs(rec.phase - grid[j]) > 1e-12:
            raise RecordSetError(f"{name}: phase {rec.phase} (index {rec.phase_index}) does not match grid")
        if rec.exact != side["exact"]:
            raise RecordSetError(f"{name}: exact flag disagrees with sidecar")
        records.append(rec)
    for p in side["pulses"]:
        path = run_dir / p["file"]
        if not path.exists():
            raise RecordSetError(f"missing pulse file {p['file']}")
        records.append(record_from_csv(path.read_text(), cfg.alpha_mod, cfg.eta, p["chi"], p["phi_d"]))
    return cfg, records


def _cplx(a) -> dict:
    a = np.asarray(a, dtype=complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def _uncplx(d) -> np.ndarray:
    return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_to_json(report: ReconstructionReport, cfg: TomographyConfig | None = None) -> str:
    doc = {
        "rho11": _cplx(report.rho11),
        "rho22": _cplx(report.rho22),
        "rho12": _cplx(report.rho12),
        "c1_est": report.c1_est,
        "c2_est": report.c2_est,
        "theta_est": report.theta_est,
        "diagnostics": report.diagnostics,
    }
    if report.psi1 is not None:
        doc["psi1"] = _cplx(report.psi1.amplitudes)
        doc["psi2"] = _cplx(report.psi2.amplitudes)
    if cfg is not None:
        doc["config"] = cfg.to_dict()
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> tuple[ReconstructionReport, dict | None]:
    try:
        doc = json.loads(text)
        blocks = {k: _uncplx(doc[k]) for k in ("rho11", "rho22", "rho12")}
        psi1 = FockVector(_uncplx(doc["psi1"]), strict=False) if "psi1" in doc else None
        psi2 = FockVector(_uncplx(doc["psi2"]), strict=False) if "psi2" in doc else None
        theta = doc["theta_est"]
        report = ReconstructionReport(
            blocks["rho11"], blocks["rho22"], blocks["rho12"],
            float(doc["c1_est"]), float(doc["c2_est"]), float(theta),
            psi1, psi2, doc.get("diagnostics", {}),
        )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ValueError(f"malformed report: {exc}") from exc
    n = blocks["rho11"].shape
    if len(n) != 2 or n[0] != n[1] or blocks["rho22"].shape != n or blocks["rho12"].shape != n:
        raise ValueError("malformed report: block shapes disagree")
    return report, doc.get("config")


def wigner_to_csv(grid: WignerGrid) -> str:
    X, Y = grid.spec.mesh()
    vals = np.asarray(grid.values, dtype=complex)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "re", "im"])
    for x, y, v in zip(X.ravel(), Y.ravel(), vals.ravel()):
        w.writerow([_fmt(x), _fmt(y), _fmt(v.real), _fmt(v.imag)])
    return buf.getvalue()


def write_wigner(out_dir, grids: list[WignerGrid]):
    out_dir = Path(out_dir)
    for g in grids:
        atomic_write(out_dir / f"{g.block}.csv", wigner_to_csv(g))
    spec = grids[0].spec
    meta = {
        "grid": {k: getattr(spec, k) for k in ("x_min", "x_max", "y_min", "y_max", "nx", "ny")},
        "blocks": {g.block: {"file": f"{g.block}.csv", "imag_max": g.imag_max} for g in grids},
    }
    atomic_write(out_dir / "wigner.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_wigner_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return data[:, 0], data[:, 1], data[:, 2] + 1j * data[:, 3]


__all__ = [
    "GridSpec",
    "RecordSetError",
    "atomic_write",
    "read_records",
    "read_wigner_csv",
    "record_from_csv",
    "record_to_csv",
    "report_from_json",
    "report_to_json",
    "write_records",
    "write_wigner",
]
