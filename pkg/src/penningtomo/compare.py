"""Error report of a reconstruction against the configured true state."""

from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import TomographyConfig
from .states import EntangledState
from .tomography import ReconstructionReport, extract_amplitudes, wrap_angle

# tolerance keys understood by ComparisonReport.check
TOLERANCE_KEYS = (
    "rho11_max", "rho22_max", "rho12_max", "imag_rho12_max",
    "c1_rel", "c2_rel", "theta_rel",
)


@dataclass
class ComparisonReport:
    block_max_error: dict
    block_mean_error: dict
    imag_max: dict
    c1_est: float
    c2_est: float
    theta_est: float
    c1_rel_error: float
    c2_rel_error: float
    theta_rel_error: float
    runtime_s: float = 0.0
    failures: list = field(default_factory=list)

    def metrics(self) -> dict:
        return {
            "rho11_max": self.block_max_error["rho11"],
            "rho22_max": self.block_max_error["rho22"],
            "rho12_max": self.block_max_error["rho12"],
            "imag_rho12_max": self.imag_max["rho12"],
            "c1_rel": self.c1_rel_error,
            "c2_rel": self.c2_rel_error,
            "theta_rel": self.theta_rel_error,
        }

    def check(self, tolerances: dict) -> bool:
        self.failures = []
        values = self.metrics()
        for key, tol in tolerances.items():
            if key not in values:
                raise KeyError(f"unknown tolerance {key!r}; expected one of {TOLERANCE_KEYS}")
            if not values[key] < tol:
                self.failures.append(f"{key}={values[key]:.3e} >= {tol:.3e}")
        return not self.failures

    def to_dict(self) -> dict:
        return asdict(self)


def target_blocks(state: EntangledState, nc: int) -> dict:
    """True ``rho11, rho22, rho12`` restricted to the reconstructed ``(nc+1)`` square."""
    a = state.psi1.amplitudes[: nc + 1]
    b = state.psi2.amplitudes[: nc + 1]
    return {"rho11": np.outer(a, a.conj()), "rho22": np.outer(b, b.conj()), "rho12": np.outer(a, b.conj())}


def branch_phases(report: ReconstructionReport, state: EntangledState, nc: int) -> tuple[float, float]:
    """Global phases of the estimated branch vectors relative to the truth.

    Branch vectors are only fixed up to a phase each; the pair (rho12, theta)
    depends on that choice, while ``c2 e^{i theta} |psi2>`` relative to
    ``c1 |psi1>`` does not.
    """
    psi1 = report.psi1 if report.psi1 is not None else extract_amplitudes(report.rho11)
    psi2 = report.psi2 if report.psi2 is not None else extract_amplitudes(report.rho22)
    ov1 = np.vdot(state.psi1.amplitudes[: nc + 1], psi1.amplitudes)
    ov2 = np.vdot(state.psi2.amplitudes[: nc + 1], psi2.amplitudes)
    return cmath.phase(ov1), cmath.phase(ov2)


def compare(report: ReconstructionReport, cfg: TomographyConfig, runtime_s: float = 0.0) -> ComparisonReport:
    state = cfg.true_state()
    nc = report.rho11.shape[0] - 1
    targets = target_blocks(state, nc)
    ph1, ph2 = branch_phases(report, state, nc)
    estimates = {
        "rho11": report.rho11,
        "rho22": report.rho22,
        "rho12": report.rho12 * cmath.exp(-1j * (ph1 - ph2)),
    }
    max_err = {k: float(np.max(np.abs(estimates[k] - targets[k]))) for k in targets}
    mean_err = {k: float(np.mean(np.abs(estimates[k] - targets[k]))) for k in targets}
    imag = {k: float(np.max(np.abs(report.__dict__[k].imag))) for k in targets}
    theta_aligned = wrap_angle(report.theta_est + ph2 - ph1)
    theta_err = abs(wrap_angle(theta_aligned - cfg.theta)) / max(abs(cfg.theta), 1.0)
    return ComparisonReport(
        block_max_error=max_err,
        block_mean_error=mean_err,
        imag_max=imag,
        c1_est=report.c1_est,
        c2_est=report.c2_est,
        theta_est=theta_aligned,
        c1_rel_error=abs(report.c1_est - cfg.c1) / cfg.c1 if cfg.c1 else abs(report.c1_est),
        c2_rel_error=abs(report.c2_est - cfg.c2_mod) / cfg.c2_mod if cfg.c2_mod else abs(report.c2_est),
        theta_rel_error=theta_err if not math.isnan(report.theta_est) else math.inf,
        runtime_s=runtime_s,
    )
