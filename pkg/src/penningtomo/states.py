"""Entangled cyclotron-spin pure states ``c1|psi1>|up> + c2 e^{i theta}|psi2>|down>``."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from .fock import FockVector, coherent_amplitudes

UP = "up"
DOWN = "down"
SPINS = (UP, DOWN)


def _check_spin(spin: str) -> str:
    if spin not in SPINS:
        raise ValueError(f"spin must be 'up' or 'down', got {spin!r}")
    return spin


@dataclass(frozen=True)
class EntangledState:
    c1: float
    c2_mod: float
    theta: float
    psi1: FockVector
    psi2: FockVector

    def __post_init__(self):
        if self.c1 < 0 or self.c2_mod < 0:
            raise ValueError("c1 and |c2| must be non-negative")
        if abs(self.c1**2 + self.c2_mod**2 - 1.0) > 1e-9:
            raise ValueError(f"c1^2 + |c2|^2 = {self.c1**2 + self.c2_mod**2}, expected 1")
        if self.psi1.cutoff != self.psi2.cutoff:
            raise ValueError("psi1 and psi2 must share one cutoff")

    @property
    def cutoff(self) -> int:
        return self.psi1.cutoff

    @property
    def c2(self) -> complex:
        return self.c2_mod * cmath.exp(1j * self.theta)

    def spinor(self) -> np.ndarray:
        """Array of shape (2, N+1): the up and down cyclotron components."""
        return np.stack([self.c1 * self.psi1.amplitudes, self.c2 * self.psi2.amplitudes])

    def branch(self, spin: str) -> FockVector:
        return self.psi1 if _check_spin(spin) == UP else self.psi2

    def branch_weight(self, spin: str) -> float:
        return self.c1**2 if _check_spin(spin) == UP else self.c2_mod**2


@dataclass(frozen=True)
class SpinRotation:
    """Resonant spin pulse of angle ``chi`` about the axis at azimuth ``phi_d``.

    ``chi = pi/2`` is the quarter-period pulse used for phase recovery.
    """

    chi: float
    phi_d: float = 0.0

    def matrix(self) -> np.ndarray:
        c = math.cos(self.chi / 2)
        s = math.sin(self.chi / 2)
        # cos(chi/2) I - i sin(chi/2) (cos phi_d sx + sin phi_d sy)
        return np.array(
            [[c, -1j * s * cmath.exp(-1j * self.phi_d)], [-1j * s * cmath.exp(1j * self.phi_d), c]]
        )


def build_entangled_state(c1, c2_mod, theta, gamma, xi, N) -> EntangledState:
    """State with coherent branches ``|gamma>`` (up) and ``|gamma e^{i xi}>`` (down)."""
    if N < 0:
        raise ValueError("cutoff N must be >= 0")
    if abs(c1**2 + c2_mod**2 - 1.0) > 1e-9:
        raise ValueError(f"normalization violated: c1^2 + |c2|^2 = {c1**2 + c2_mod**2}")
    psi1 = coherent_amplitudes(gamma, N)
    psi2 = coherent_amplitudes(gamma * cmath.exp(1j * xi), N)
    return EntangledState(float(c1), float(c2_mod), float(theta), psi1, psi2)


def projected_density(state: EntangledState, spin: str) -> np.ndarray:
    """Normalized branch density ``|psi_i><psi_i|`` (weight ``|c_i|^2`` not included)."""
    if state.branch_weight(spin) == 0.0:
        raise ValueError(f"spin-{spin} branch has zero weight; its cyclotron state is undefined")
    return state.branch(spin).density()


def spin_probabilities(state: EntangledState) -> tuple[float, float]:
    return state.c1**2, state.c2_mod**2


def overlap(psi1: FockVector, psi2: FockVector) -> complex:
    """``<psi1|psi2> = r e^{i beta}``."""
    if psi1.cutoff != psi2.cutoff:
        raise ValueError(f"cutoff mismatch: {psi1.cutoff} vs {psi2.cutoff}")
    return complex(np.vdot(psi1.amplitudes, psi2.amplitudes))


@dataclass(frozen=True)
class RotatedState:
    """Spinor after a spin pulse; branches are no longer of the (c1, c2, theta) form."""

    up: np.ndarray
    down: np.ndarray

    @property
    def cutoff(self) -> int:
        return self.up.size - 1

    def norm_squared(self) -> float:
        return float(np.vdot(self.up, self.up).real + np.vdot(self.down, self.down).real)

    def spin_probabilities(self) -> tuple[float, float]:
        pu = float(np.vdot(self.up, self.up).real)
        pd = float(np.vdot(self.down, self.down).real)
        total = pu + pd
        return pu / total, pd / total


def apply_spin_rotation(state, rot: SpinRotation) -> RotatedState:
    """Apply the 2x2 pulse unitary to the spinor of cyclotron components.

    Accepts an :class:`EntangledState` or an already rotated state. The output
    is scaled to unit total norm (the truncated branches can carry slightly
    less than one).
    """
    if isinstance(state, EntangledState):
        spinor = state.spinor()
    else:
        spinor = np.stack([state.up, state.down])
    out = rot.matrix() @ spinor
    norm = math.sqrt(float(np.sum(np.abs(out) ** 2)))
    out = out / norm
    return RotatedState(out[0], out[1])


def pulsed_up_probability(c1, c2_mod, theta, r, beta, chi=math.pi / 2, phi_d=0.0) -> float:
    """Closed-form spin-up probability after a pulse (unit-norm branches).

    ``cos^2(chi/2) c1^2 + sin^2(chi/2) |c2|^2 + sin(chi) r c1 |c2| sin(theta + beta - phi_d)``,
    which reduces to ``(1 + 2 r c1 |c2| sin(theta + beta)) / 2`` for the
    standard quarter-period pulse.
    """
    return (
        math.cos(chi / 2) ** 2 * c1**2
        + math.sin(chi / 2) ** 2 * c2_mod**2
        + math.sin(chi) * r * c1 * c2_mod * math.sin(theta + beta - phi_d)
    )


def with_phase(state: EntangledState, theta: float) -> EntangledState:
    return replace(state, theta=float(theta))
