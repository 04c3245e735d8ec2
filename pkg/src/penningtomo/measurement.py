"""Joint (spin, cyclotron number) outcome statistics after a displacement drive.

Analytic distributions come from products of displacement elements; the
Monte-Carlo path draws spin, then the true number ``n``, then the detected
count ``k ~ Binomial(n, eta)`` for every event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from .fock import displacement_matrix
from .states import DOWN, UP, EntangledState, RotatedState

STREAM_PHASE = 0
STREAM_PULSE = 1


def cutoff_margin(nc: int, alpha_mod: float) -> int:
    """Extra Fock levels needed to hold a displaced cutoff-``nc`` state."""
    # keeps the lost tail below 1e-13 for nc <= 20, |alpha| <= 1.6
    return 10 + int(math.ceil(8 * alpha_mod * (math.sqrt(nc) + alpha_mod)))


def _check_hermitian(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T), initial=0.0) > tol:
        raise ValueError("density matrix is not Hermitian")
    return rho


def displaced_distribution(rho, alpha: complex, N: int) -> np.ndarray:
    """``P(n) = <n, alpha| rho |n, alpha>`` for ``n = 0..N``.

    ``|n, alpha> = D(alpha)|n>``, so ``P(n) = sum_{k,m} rho[k, m] conj(D[k, n]) D[m, n]``.
    """
    rho = _check_hermitian(rho)
    dim = rho.shape[0]
    if N < dim - 1:
        raise ValueError(f"N={N} is below the state cutoff {dim - 1}")
    D = displacement_matrix(alpha, dim, N + 1)
    p = np.einsum("kn,km,mn->n", D.conj(), rho, D).real
    return p


def binomial_matrix(eta: float, rows: int, cols: int) -> np.ndarray:
    """``B[k, n] = C(n, k) eta^k (1 - eta)^(n - k)`` (zero for ``k > n``)."""
    k = np.arange(rows)[:, None]
    n = np.arange(cols)[None, :]
    return binom.pmf(k, n, eta)


def efficiency_convolve(p, eta: float) -> np.ndarray:
    """Detected-count distribution for per-quantum detection probability ``eta``."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    p = np.asarray(p, dtype=float)
    if eta == 1.0:
        return p.copy()
    return binomial_matrix(eta, p.size, p.size) @ p


@dataclass(frozen=True)
class RngSpec:
    """Seed plus replicate index; one independent stream per run.

    Streams are keyed on ``(kind, index, replicate)`` through
    :class:`numpy.random.SeedSequence`, so the schedule in which runs are
    simulated does not affect their outcomes.
    """

    seed: int
    replicate: int = 0

    def generator(self, index: int, kind: int = STREAM_PHASE) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(kind, index, self.replicate))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass
class MeasurementRecord:
    """Outcome table of one run: ``counts[spin, k]`` with spin 0 = up, 1 = down.

    Exact-mode records hold probabilities (``exact=True``) instead of counts.
    A pulse run carries its spin rotation in ``chi``/``phi_d``.
    """

    phase_index: int
    phase: float
    alpha_mod: float
    eta: float
    counts: np.ndarray
    exact: bool = False
    chi: float | None = None
    phi_d: float | None = None
    total_events: float = field(init=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.ndim != 2 or self.counts.shape[0] != 2:
            raise ValueError("counts must have shape (2, kmax + 1)")
        if np.any(self.counts < 0):
            raise ValueError("negative counts")
        self.total_events = float(self.counts.sum()) if self.exact else int(self.counts.sum())

    @property
    def kmax(self) -> int:
        return self.counts.shape[1] - 1

    @property
    def is_pulse(self) -> bool:
        return self.chi is not None


@dataclass(frozen=True)
class OutcomeDistribution:
    p_up: np.ndarray
    p_down: np.ndarray
    w_up: float
    w_down: float

    def branch(self, spin: str) -> np.ndarray:
        return self.p_up if spin == UP else self.p_down

    def weight(self, spin: str) -> float:
        return self.w_up if spin == UP else self.w_down


def _spinor(state) -> np.ndarray:
    if isinstance(state, EntangledState):
        return state.spinor()
    if isinstance(state, RotatedState):
        return np.stack([state.up, state.down])
    return np.asarray(state, dtype=complex)


def branch_distributions(state, alpha: complex, eta: float, kmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Branch weights and detected-count distributions on ``k = 0..kmax``.

    Returns ``(weights[2], dists[2, kmax + 1])``; each dist is conditional on
    its spin branch.
    """
    spinor = _spinor(state)
    weights = np.sum(np.abs(spinor) ** 2, axis=1)
    weights = weights / weights.sum()
    dists = np.zeros((2, kmax + 1))
    for i in range(2):
        norm = np.vdot(spinor[i], spinor[i]).real
        if norm == 0.0:
            continue
        rho = np.outer(spinor[i], spinor[i].conj()) / norm
        dists[i] = efficiency_convolve(displaced_distribution(rho, alpha, kmax), eta)
    return weights, dists


def sample_events(state, alpha: complex, eta: float, events: int, rng, kmax: int | None = None,
                  phase_index: int = 0, phase: float | None = None) -> MeasurementRecord:
    """Simulate ``events`` repetitions of drive-then-measure on ``state``.

    ``rng`` is a :class:`numpy.random.Generator`. ``kmax`` defaults to the
    state cutoff plus :func:`cutoff_margin`.
    """
    if events < 1:
        raise ValueError("events must be >= 1")
    spinor = _spinor(state)
    nc = spinor.shape[1] - 1
    if kmax is None:
        kmax = nc + cutoff_margin(nc, abs(alpha))
    # true number distribution, eta applied per event below
    weights, true_dists = branch_distributions(spinor, alpha, 1.0, kmax)
    counts = np.zeros((2, kmax + 1), dtype=np.int64)
    n_up = int(rng.binomial(events, min(max(weights[0], 0.0), 1.0)))
    for i, n_branch in enumerate((n_up, events - n_up)):
        if n_branch == 0:
            continue
        p = np.clip(true_dists[i], 0.0, None)
        n_counts = rng.multinomial(n_branch, p / p.sum())
        n_per_event = np.repeat(np.arange(kmax + 1), n_counts)
        k = rng.binomial(n_per_event, eta) if eta < 1.0 else n_per_event
        counts[i] = np.bincount(k, minlength=kmax + 1)
    if phase is None:
        phase = float(np.angle(alpha)) % (2 * np.pi)
    return MeasurementRecord(phase_index, phase, abs(alpha), eta, counts)


def analytic_record(state, alpha: complex, eta: float, kmax: int | None = None,
                    phase_index: int = 0, phase: float | None = None) -> MeasurementRecord:
    """Infinite-statistics record: joint probabilities in place of counts."""
    spinor = _spinor(state)
    nc = spinor.shape[1] - 1
    if kmax is None:
        kmax = nc + cutoff_margin(nc, abs(alpha))
    weights, dists = branch_distributions(spinor, alpha, eta, kmax)
    if phase is None:
        phase = float(np.angle(alpha)) % (2 * np.pi)
    return MeasurementRecord(phase_index, phase, abs(alpha), eta, weights[:, None] * dists, exact=True)


def empirical_distributions(record: MeasurementRecord) -> OutcomeDistribution:
    """Branch weights and per-branch conditional frequencies of a record."""
    total = record.counts.sum()
    if total <= 0:
        raise ValueError("record holds no events")
    branch_totals = record.counts.sum(axis=1).astype(float)
    conds = []
    for i in range(2):
        if branch_totals[i] > 0:
            conds.append(record.counts[i] / branch_totals[i])
        else:
            conds.append(np.zeros(record.kmax + 1))
    w = branch_totals / float(total)
    return OutcomeDistribution(conds[0], conds[1], float(w[0]), float(w[1]))


__all__ = [
    "DOWN",
    "UP",
    "MeasurementRecord",
    "OutcomeDistribution",
    "RngSpec",
    "analytic_record",
    "binomial_matrix",
    "branch_distributions",
    "cutoff_margin",
    "displaced_distribution",
    "efficiency_convolve",
    "empirical_distributions",
    "sample_events",
]
