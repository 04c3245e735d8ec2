"""Phase-swept displacement tomography of the two branch density matrices.

For drive ``alpha = |alpha| e^{i phi}`` the number distribution of a branch is
a trigonometric polynomial in ``phi``. Its ``s``-th Fourier coefficient is a
linear image of the ``s``-th superdiagonal ``<m+s|rho|m>``::

    P_s(n) = sum_m G_s[n, m] <m+s|rho|m>,   G_s[n, m] = d[m+s, n] d[m, n]

with ``d`` the real displacement kernel at ``phi = 0``. Each band is
recovered with the left inverse ``M_s = (G_s^T G_s)^{-1} G_s^T``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import TomographyConfig
from .fock import FockVector, real_displacement_matrix
from .measurement import MeasurementRecord, binomial_matrix, empirical_distributions
from .states import DOWN, SPINS, UP, overlap

BINOMIAL_CUT = 1e-14
ANCHOR_MIN = 1e-6
ANCHOR_TIE = 1e-6
OVERLAP_MIN = 1e-6


class ReconstructionError(ValueError):
    """Inversion refused; ``band`` names the Fourier order when relevant."""

    def __init__(self, message: str, band: int | None = None):
        if band is not None:
            message = f"band s={band}: {message}"
        super().__init__(message)
        self.band = band


@dataclass(frozen=True)
class KernelMatrix:
    G: np.ndarray
    s: int
    alpha_mod: float
    eta: float
    N: int
    Nc: int


@dataclass
class ReconstructionReport:
    rho11: np.ndarray
    rho22: np.ndarray
    rho12: np.ndarray
    c1_est: float
    c2_est: float
    theta_est: float
    psi1: FockVector | None = None
    psi2: FockVector | None = None
    diagnostics: dict = field(default_factory=dict)


def phase_grid(K: int) -> np.ndarray:
    return 2 * np.pi * np.arange(K) / K


def fourier_coefficients(probs, s: int, phases=None, nc: int | None = None) -> np.ndarray:
    """Discrete ``(1/K) sum_j P(n, phi_j) exp(i s phi_j)`` over a uniform phase grid.

    ``probs`` has shape ``(K, N + 1)``. With ``nc`` given, grids too coarse
    to separate harmonics up to ``nc`` are rejected.
    """
    probs = np.asarray(probs, dtype=float)
    K = probs.shape[0]
    if nc is not None and K < 2 * nc + 1:
        raise ValueError(f"K={K} phases alias harmonics up to Nc={nc}; need K >= {2 * nc + 1}")
    if phases is None:
        phases = phase_grid(K)
    phases = np.asarray(phases, dtype=float)
    weights = np.exp(1j * s * phases) / K
    return weights @ probs


def _kernel_rows(s: int, alpha_mod: float, nc: int, rows: int) -> np.ndarray:
    d = real_displacement_matrix(alpha_mod, nc + 1, rows)
    m = np.arange(nc + 1 - s)
    return (d[m + s, :] * d[m, :]).T


def build_kernel(s: int, alpha_mod: float, eta: float, N: int, Nc: int) -> KernelMatrix:
    """Band-``s`` kernel mapping ``<m+s|rho|m>`` (m = 0..Nc-s) to ``P_s(k)`` (k = 0..N).

    For ``eta < 1`` the ideal kernel is pushed through binomial thinning; the
    sum over true counts stops once the contribution bound drops below
    ``BINOMIAL_CUT``.
    """
    if not 0 <= s <= Nc:
        raise ValueError(f"band s={s} outside 0..{Nc}")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if N < Nc:
        raise ValueError(f"N={N} must be >= Nc={Nc}")
    if eta == 1.0:
        G = _kernel_rows(s, alpha_mod, Nc, N + 1)
        return KernelMatrix(G, s, alpha_mod, eta, N, Nc)
    cap = max(N, Nc) + 60 + int(math.ceil(10 * alpha_mod**2))
    G_true = _kernel_rows(s, alpha_mod, Nc, cap + 1)
    B = binomial_matrix(eta, N + 1, cap + 1)
    bound = np.max(np.abs(G_true), axis=1) * np.max(B, axis=0)
    keep = np.nonzero(bound >= BINOMIAL_CUT)[0]
    last = max(int(keep[-1]) if keep.size else N, N)
    G = B[:, : last + 1] @ G_true[: last + 1]
    return KernelMatrix(G, s, alpha_mod, eta, N, Nc)


def pseudo_invert(kernel, cond_max: float = 1e10) -> np.ndarray:
    """Left inverse ``(G^T G)^{-1} G^T`` of a full-column-rank kernel.

    Computed through the SVD (identical for full column rank, better rounded
    than forming ``G^T G``). Raises :class:`ReconstructionError` on rank
    deficiency or when ``cond(G^T G)`` exceeds ``cond_max``.
    """
    band = kernel.s if isinstance(kernel, KernelMatrix) else None
    G = kernel.G if isinstance(kernel, KernelMatrix) else np.asarray(kernel, dtype=float)
    sv = np.linalg.svd(G, compute_uv=False)
    if sv.size < G.shape[1] or sv[-1] <= sv[0] * max(G.shape) * np.finfo(float).eps:
        raise ReconstructionError(f"kernel of shape {G.shape} is rank deficient", band)
    cond = (sv[0] / sv[-1]) ** 2
    if cond > cond_max:
        raise ReconstructionError(f"cond(G^T G) = {cond:.3e} exceeds bound {cond_max:.1e}", band)
    return np.linalg.pinv(G)


def kernel_condition(kernel: KernelMatrix) -> float:
    sv = np.linalg.svd(kernel.G, compute_uv=False)
    return float((sv[0] / sv[-1]) ** 2)


def _phase_records(records) -> list:
    recs = [r for r in records if not r.is_pulse]
    if not recs:
        raise ReconstructionError("no displacement records supplied")
    return sorted(recs, key=lambda r: r.phase_index)


def _check_records(recs: list, cfg: TomographyConfig):
    K = len(recs)
    if K < 2 * cfg.nc + 1:
        raise ReconstructionError(f"only {K} phases; need K >= {2 * cfg.nc + 1} for Nc={cfg.nc}")
    idx = [r.phase_index for r in recs]
    if idx != list(range(K)):
        raise ReconstructionError(f"phase indices {idx} are not 0..{K - 1}")
    grid = phase_grid(K)
    for r, phi in zip(recs, grid):
        if abs(r.phase - phi) > 1e-9:
            raise ReconstructionError(f"phase {r.phase} at index {r.phase_index} is off the uniform grid")
        if abs(r.alpha_mod - recs[0].alpha_mod) > 1e-12 or abs(r.eta - recs[0].eta) > 1e-12:
            raise ReconstructionError("records mix different |alpha| or eta")
        if r.kmax < cfg.n:
            raise ReconstructionError(f"record {r.phase_index} stops at k={r.kmax} < N={cfg.n}")


def branch_probabilities(records, spin: str, N: int) -> np.ndarray:
    """Conditional count frequencies, shape ``(K, N + 1)``, for one spin branch."""
    out = []
    for r in records:
        dist = empirical_distributions(r)
        if dist.weight(spin) == 0.0:
            raise ReconstructionError(f"spin-{spin} branch is empty in phase {r.phase_index}")
        out.append(dist.branch(spin)[: N + 1])
    return np.array(out)


def psd_project(rho: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and restore the trace."""
    w, v = np.linalg.eigh(rho)
    tr = w.sum()
    w = np.clip(w, 0.0, None)
    if w.sum() > 0:
        w *= tr / w.sum()
    return (v * w) @ v.conj().T


def reconstruct_block(records, spin: str, cfg: TomographyConfig, diagnostics: dict | None = None) -> np.ndarray:
    """Branch density matrix (``Nc+1`` square) from phase-swept records."""
    if spin not in SPINS:
        raise ValueError(f"unknown spin {spin!r}")
    recs = _phase_records(records)
    _check_records(recs, cfg)
    alpha_mod, eta = recs[0].alpha_mod, recs[0].eta
    probs = branch_probabilities(recs, spin, cfg.n)
    phases = np.array([r.phase for r in recs])
    nc = cfg.nc
    rho = np.zeros((nc + 1, nc + 1), dtype=complex)
    conds, residuals = [], []
    for s in range(nc + 1):
        kernel = build_kernel(s, alpha_mod, eta, cfg.n, nc)
        M = pseudo_invert(kernel, cfg.cond_max)
        ps = fourier_coefficients(probs, s, phases, nc)
        band = M @ ps
        m = np.arange(nc + 1 - s)
        if s == 0:
            rho[m, m] = band.real
        else:
            rho[m + s, m] = band
            rho[m, m + s] = band.conj()
        conds.append(kernel_condition(kernel))
        residuals.append(float(np.linalg.norm(kernel.G @ band - ps)))
    if cfg.psd_projection:
        rho = psd_project(rho)
    if diagnostics is not None:
        diagnostics["condition_numbers"] = conds
        diagnostics["residual_norms"] = residuals
    return rho


def purity_eigenvalue(rho: np.ndarray) -> float:
    """Second-largest eigenvalue relative to the trace (0 for a pure state)."""
    w = np.linalg.eigvalsh(rho)
    tr = w.sum()
    if w.size < 2 or tr == 0:
        return 0.0
    return float(w[-2] / tr)


def extract_amplitudes(rho: np.ndarray, method: str = "anchor") -> FockVector:
    """Pure-state amplitudes of a rank-1 density matrix.

    Anchored on the largest diagonal entry (lowest index among near-ties),
    whose amplitude is taken real and positive. ``method="anchor"`` reads
    every other amplitude off the anchor column; ``method="eigen"`` uses the
    leading eigenvector instead, which pools all columns and is less noisy
    on sampled data. Both agree exactly on rank-1 input.
    """
    rho = np.asarray(rho, dtype=complex)
    diag = rho.diagonal().real
    top = diag.max()
    if top < ANCHOR_MIN:
        raise ReconstructionError(f"largest diagonal element {top:.3e} below {ANCHOR_MIN}")
    anchor = int(np.nonzero(diag >= top * (1 - ANCHOR_TIE))[0][0])
    if method == "anchor":
        a_anchor = math.sqrt(diag[anchor])
        amps = rho[:, anchor] / a_anchor
        amps[anchor] = a_anchor
    elif method == "eigen":
        w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
        amps = v[:, -1] * math.sqrt(max(w[-1], 0.0))
        amps = amps * np.exp(-1j * np.angle(amps[anchor]))
        amps[anchor] = abs(amps[anchor])
    else:
        raise ValueError(f"unknown amplitude method {method!r}")
    return FockVector(amps, strict=False)


def reconstruct_offdiagonal(rho11, rho22, diagnostics: dict | None = None, method: str = "anchor"):
    """Coherence block ``|psi1><psi2|`` of a pure entangled state.

    Returns ``(rho12, psi1, psi2)``. A near-zero branch overlap makes the
    quotient form ``rho11 rho22 / <psi1|psi2>`` ill-posed; the amplitude
    route is still returned, with a warning.
    """
    psi1 = extract_amplitudes(rho11, method)
    psi2 = extract_amplitudes(rho22, method)
    rho12 = np.outer(psi1.amplitudes, psi2.amplitudes.conj())
    ov = overlap(psi1, psi2)
    if abs(ov) < OVERLAP_MIN:
        warnings.warn(f"branch overlap {abs(ov):.2e} < {OVERLAP_MIN}; quotient form ill-posed", RuntimeWarning)
    if diagnostics is not None:
        diagnostics["overlap"] = [ov.real, ov.imag]
        diagnostics["overlap_ill_posed"] = bool(abs(ov) < OVERLAP_MIN)
        diagnostics["purity_eigenvalues"] = [purity_eigenvalue(rho11), purity_eigenvalue(rho22)]
    return rho12, psi1, psi2


def recover_spin_parameters(p_up: float, pbar_list, r: float, beta: float, tol: float = 0.5):
    """``(c1, |c2|, theta)`` from spin populations and pulsed spin-up fractions.

    Each entry of ``pbar_list`` is ``(chi, phi_d, pbar_up)``. A pulse gives::

        pbar = cos^2(chi/2) c1^2 + sin^2(chi/2) |c2|^2
               + sin(chi) r c1 |c2| [S cos(phi_d) - C sin(phi_d)]

    with ``S, C = sin, cos(theta + beta)``. Pulses about two axes fix both
    ``S`` and ``C``; the least-squares pair is passed to ``atan2``, so no
    arcsine branch has to be chosen.
    """
    if not 0.0 < p_up < 1.0:
        raise ValueError(f"p_up must lie strictly inside (0, 1), got {p_up}")
    if r <= 0.0:
        raise ValueError("overlap modulus r = 0: relative phase unobservable")
    c1 = math.sqrt(p_up)
    c2 = math.sqrt(1.0 - p_up)
    rows, rhs = [], []
    for chi, phi_d, pbar in pbar_list:
        scale = math.sin(chi) * r * c1 * c2
        if abs(scale) < 1e-15:
            continue
        y = (pbar - math.cos(chi / 2) ** 2 * c1**2 - math.sin(chi / 2) ** 2 * c2**2) / scale
        if abs(y) > 1.0 + tol:
            raise ValueError(f"pulse (chi={chi}, phi_d={phi_d}): normalized signal {y:.3f} exceeds 1 + {tol}")
        rows.append([math.cos(phi_d), -math.sin(phi_d)])
        rhs.append(y)
    A = np.array(rows)
    if A.shape[0] < 2 or np.linalg.matrix_rank(A) < 2:
        raise ValueError("pulses must probe two independent drive phases (e.g. phi_d = 0 and pi/2)")
    (S, C), *_ = np.linalg.lstsq(A, np.array(rhs), rcond=None)
    theta = wrap_angle(math.atan2(S, C) - beta)
    return c1, c2, theta


def wrap_angle(x: float) -> float:
    """Map to (-pi, pi]."""
    y = math.remainder(x, 2 * math.pi)
    return math.pi if y == -math.pi else y


def pulse_fractions(records) -> list:
    out = []
    for r in records:
        if r.is_pulse:
            dist = empirical_distributions(r)
            out.append((r.chi, r.phi_d, dist.w_up))
    return out


def pooled_spin_up(records) -> float:
    up = total = 0.0
    for r in records:
        if not r.is_pulse:
            up += float(r.counts[0].sum())
            total += float(r.counts.sum())
    return up / total


def reconstruct(records, cfg: TomographyConfig, method: str = "anchor") -> ReconstructionReport:
    """Full pipeline: both branch blocks, the coherence block, spin parameters."""
    diag: dict = {}
    blocks = {}
    for spin, key in ((UP, "rho11"), (DOWN, "rho22")):
        d: dict = {}
        blocks[key] = reconstruct_block(records, spin, cfg, d)
        diag[key] = d
    rho12, psi1, psi2 = reconstruct_offdiagonal(blocks["rho11"], blocks["rho22"], diag, method)
    p_up = pooled_spin_up(records)
    ov = overlap(psi1, psi2)
    pulses = pulse_fractions(records)
    if pulses:
        r, beta = abs(ov), math.atan2(ov.imag, ov.real)
        diag["spin_signal_max"] = max(
            abs(pbar - math.cos(chi / 2) ** 2 * p_up - math.sin(chi / 2) ** 2 * (1 - p_up))
            / abs(math.sin(chi) * r * math.sqrt(p_up * (1 - p_up)))
            for chi, _, pbar in pulses
            if abs(math.sin(chi)) > 1e-15
        )
        # finite-sample signals may overshoot 1; atan2 does not need them bounded
        c1, c2, theta = recover_spin_parameters(p_up, pulses, r, beta, tol=math.inf)
    else:
        c1, c2, theta = math.sqrt(p_up), math.sqrt(1 - p_up), float("nan")
    diag["imag_max"] = {
        "rho11_diag": float(np.max(np.abs(blocks["rho11"].diagonal().imag))),
        "rho22_diag": float(np.max(np.abs(blocks["rho22"].diagonal().imag))),
        "rho12": float(np.max(np.abs(rho12.imag))),
    }
    diag["p_up"] = p_up
    diag["pulses"] = [list(p) for p in pulses]
    return ReconstructionReport(blocks["rho11"], blocks["rho22"], rho12, c1, c2, theta, psi1, psi2, diag)
