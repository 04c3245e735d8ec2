"""Wigner-function matrix on a phase-space grid, ``alpha = x + i y``.

Normalized so that ``integral W dx dy = trace(rho)``; the vacuum peaks at
``2/pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import assoc_laguerre, displacement_matrix


@dataclass(frozen=True)
class GridSpec:
    x_min: float = -4.0
    x_max: float = 4.0
    y_min: float = -4.0
    y_max: float = 4.0
    nx: int = 81
    ny: int = 81

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid needs at least one point per axis, got {self.nx}x{self.ny}")
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise ValueError("grid bounds are inverted")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linspace(self.x_min, self.x_max, self.nx), np.linspace(self.y_min, self.y_max, self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.axes()
        return np.meshgrid(x, y, indexing="ij")


@dataclass
class WignerGrid:
    spec: GridSpec
    values: np.ndarray  # shape (nx, ny); complex for the coherence block
    block: str = "W11"
    imag_max: float = 0.0


def _upper_terms(rho: np.ndarray, x, y) -> np.ndarray:
    """``sum_{m >= n} rho[n, m] <m|Pi(alpha)|n>`` with the diagonal counted once."""
    nmax = rho.shape[0] - 1
    z = x + 1j * y
    r2 = x * x + y * y
    gauss = np.exp(-2.0 * r2)
    lf = [math.lgamma(j + 1) for j in range(nmax + 1)]
    out = np.zeros(np.shape(z), dtype=complex)
    for n in range(nmax + 1):
        for m in range(n, nmax + 1):
            c = rho[n, m]
            if c == 0:
                continue
            pref = (-1) ** n * math.exp(0.5 * (lf[n] - lf[m]))
            out += c * pref * (2 * z) ** (m - n) * gauss * assoc_laguerre(n, m - n, 4 * r2)
    return out * (2 / math.pi)


def _lower_terms(rho: np.ndarray, x, y) -> np.ndarray:
    """``sum_{m > n} rho[m, n] <n|Pi(alpha)|m>``; uses ``<n|Pi|m> = conj(<m|Pi|n>)``."""
    strict = np.triu(rho.T, k=1).conj()
    return _upper_terms(strict, x, y).conj()


def wigner_values(rho, x, y) -> np.ndarray:
    """Complex ``W(x, y)`` of an arbitrary (not necessarily Hermitian) block."""
    rho = np.asarray(rho, dtype=complex)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return _upper_terms(rho, x, y) + _lower_terms(rho, x, y)


def wigner_from_density(rho, spec: GridSpec | None = None, block: str = "W11") -> WignerGrid:
    """Evaluate the Wigner function of ``rho`` on ``spec`` (default ``[-4, 4]^2``, 81x81).

    Hermitian input returns real values; ``imag_max`` records the largest
    discarded imaginary part.
    """
    spec = spec or GridSpec()
    rho = np.asarray(rho, dtype=complex)
    X, Y = spec.mesh()
    W = wigner_values(rho, X, Y)
    hermitian = np.allclose(rho, rho.conj().T, atol=1e-12, rtol=0)
    if hermitian:
        return WignerGrid(spec, W.real, block, float(np.max(np.abs(W.imag))))
    return WignerGrid(spec, W, block, 0.0)


def wigner_oracle_point(rho, x: float, y: float, margin: int | None = None) -> complex:
    """Displaced-parity form ``(2/pi) sum_k (-1)^k <k|D(alpha)^dag rho D(alpha)|k>``.

    Built from the displacement kernel; shares no code with the Laguerre
    expansion of :func:`wigner_values`.
    """
    rho = np.asarray(rho, dtype=complex)
    alpha = complex(x, y)
    dim = rho.shape[0]
    if margin is None:
        margin = 30 + int(math.ceil(8 * abs(alpha) * (math.sqrt(dim) + abs(alpha))))
    D = displacement_matrix(alpha, dim, dim + margin)
    parity = (-1.0) ** np.arange(dim + margin)
    displaced_diag = np.einsum("nk,nm,mk->k", D.conj(), rho, D)
    val = (2 / math.pi) * np.sum(parity * displaced_diag)
    return complex(val)


def trapezoid_integral(grid: WignerGrid) -> complex:
    x, y = grid.spec.axes()
    return np.trapezoid(np.trapezoid(grid.values, y, axis=1), x)
