"""Fock-basis kernel: Laguerre polynomials, displacement matrix elements,
truncated coherent states.

Displacement elements use the unitary normalization ``exp(-|alpha|^2 / 2)``
per amplitude, so that columns of ``D(alpha)`` are unit vectors and products
of two elements carry the single ``exp(-|alpha|^2)`` seen in photon-number
probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TRUNCATION_TOL = 1e-12


def assoc_laguerre(nu, k, x):
    """Associated Laguerre polynomial ``L_nu^k(x)``.

    Evaluated with the upward three-term recurrence in ``nu``::

        (n+1) L_{n+1}^k = (2n + 1 + k - x) L_n^k - (n + k) L_{n-1}^k

    Parameters
    ----------
    nu : int
        Degree, ``nu >= 0``.
    k : int
        Order, ``k >= 0``.
    x : float or numpy.ndarray
        Evaluation point(s).

    Returns
    -------
    float or numpy.ndarray
        Same shape as ``x``.
    """
    nu = int(nu)
    k = int(k)
    if nu < 0 or k < 0:
        raise ValueError(f"assoc_laguerre needs nu, k >= 0, got nu={nu}, k={k}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if nu == 0:
        return prev[()] if prev.ndim == 0 else prev
    cur = 1.0 + k - x
    for n in range(1, nu):
        prev, cur = cur, ((2 * n + 1 + k - x) * cur - (n + k) * prev) / (n + 1)
    return cur[()] if cur.ndim == 0 else cur


def _log_prefactor(mu: int, nu: int, modulus: float) -> float:
    # log of sqrt(nu!/mu!) |alpha|^(mu-nu) exp(-|alpha|^2/2)
    out = 0.5 * (math.lgamma(nu + 1) - math.lgamma(mu + 1)) - 0.5 * modulus**2
    if mu > nu:
        out += (mu - nu) * math.log(modulus)
    return out


def displacement_element(m: int, n: int, alpha: complex, cutoff: int | None = None) -> complex:
    """Matrix element ``<m|D(alpha)|n>``.

    ``cutoff`` (if given) bounds the allowed indices.
    """
    m = int(m)
    n = int(n)
    if m < 0 or n < 0:
        raise ValueError(f"negative Fock index ({m}, {n})")
    if cutoff is not None and (m > cutoff or n > cutoff):
        raise ValueError(f"Fock index ({m}, {n}) exceeds cutoff {cutoff}")
    alpha = complex(alpha)
    modulus = abs(alpha)
    mu, nu = max(m, n), min(m, n)
    if modulus == 0.0:
        return complex(1.0 if m == n else 0.0)
    phi = math.atan2(alpha.imag, alpha.real)
    # exp{i(m-n)[phi - pi*H(n-m)]}: sign (-1)^(n-m) below the diagonal
    phase = (m - n) * phi
    sign = -1.0 if (n > m and (n - m) % 2) else 1.0
    mag = math.exp(_log_prefactor(mu, nu, modulus)) * float(assoc_laguerre(nu, mu - nu, modulus**2))
    return complex(sign * mag * math.cos(phase), sign * mag * math.sin(phase))


def real_displacement_matrix(modulus: float, rows: int, cols: int) -> np.ndarray:
    """Real part ``d[m, n]`` of ``<m|D(alpha)|n>`` at ``arg(alpha) = 0``.

    For general ``alpha = |alpha| e^{i phi}`` the full element is
    ``d[m, n] * exp(i (m - n) phi)``. Shape ``(rows, cols)``.
    """
    modulus = float(modulus)
    if modulus < 0:
        raise ValueError("modulus must be non-negative")
    d = np.zeros((rows, cols))
    if modulus == 0.0:
        k = min(rows, cols)
        d[np.arange(k), np.arange(k)] = 1.0
        return d
    x = modulus**2
    lf = np.array([math.lgamma(j + 1) for j in range(max(rows, cols))])
    # fill one diagonal (fixed mu - nu) at a time from a single recurrence sweep
    for diff in range(-(cols - 1), rows):
        order = abs(diff)
        if diff >= 0:
            ms = np.arange(diff, rows)
            ns = ms - diff
            ns = ns[ns < cols]
            ms = ns + diff
        else:
            ns = np.arange(-diff, cols)
            ms = ns + diff
            ms = ms[ms < rows]
            ns = ms - diff
        if ms.size == 0:
            continue
        nus = np.minimum(ms, ns)
        lag = _laguerre_table(int(nus.max()), order, x)[nus]
        logp = 0.5 * (lf[nus] - lf[nus + order]) + order * math.log(modulus) - 0.5 * x
        sign = -1.0 if (diff < 0 and order % 2) else 1.0
        d[ms, ns] = sign * np.exp(logp) * lag
    return d


def _laguerre_table(nu_max: int, k: int, x: float) -> np.ndarray:
    """``[L_0^k(x), ..., L_{nu_max}^k(x)]`` from one recurrence sweep."""
    out = np.empty(nu_max + 1)
    out[0] = 1.0
    if nu_max >= 1:
        out[1] = 1.0 + k - x
    for n in range(1, nu_max):
        out[n + 1] = ((2 * n + 1 + k - x) * out[n] - (n + k) * out[n - 1]) / (n + 1)
    return out


def displacement_matrix(alpha: complex, rows: int, cols: int | None = None) -> np.ndarray:
    """Block ``<m|D(alpha)|n>`` for ``m < rows``, ``n < cols``."""
    cols = rows if cols is None else cols
    alpha = complex(alpha)
    d = real_displacement_matrix(abs(alpha), rows, cols)
    phi = math.atan2(alpha.imag, alpha.real)
    diff = np.arange(rows)[:, None] - np.arange(cols)[None, :]
    return d * np.exp(1j * diff * phi)


@dataclass(frozen=True)
class FockVector:
    """Truncated pure-state amplitudes ``a_0 .. a_N``.

    Not renormalized after truncation; the lost weight is kept in
    :attr:`truncation_mass`. ``strict=False`` skips the norm bound, for
    amplitudes estimated from noisy data.
    """

    amplitudes: np.ndarray
    strict: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError("amplitudes must be a non-empty 1-D array")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        norm = float(np.sum(np.abs(amps) ** 2))
        if self.strict and norm > 1.0 + TRUNCATION_TOL:
            raise ValueError(f"squared norm {norm} exceeds 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def cutoff(self) -> int:
        return self.amplitudes.size - 1

    @property
    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def truncation_mass(self) -> float:
        return 1.0 - self.norm_squared

    def density(self) -> np.ndarray:
        """Outer product ``|psi><psi|``."""
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def __len__(self):
        return self.amplitudes.size


def coherent_amplitudes(gamma: complex, N: int) -> FockVector:
    """Coherent state ``|gamma>`` truncated at ``N`` (no renormalization)."""
    N = int(N)
    if N < 0:
        raise ValueError("cutoff N must be >= 0")
    gamma = complex(gamma)
    n = np.arange(N + 1)
    if gamma == 0:
        amps = np.zeros(N + 1, dtype=complex)
        amps[0] = 1.0
        return FockVector(amps)
    # gamma^n / sqrt(n!) via logs for the modulus, explicit phase
    log_mod = n * math.log(abs(gamma)) - 0.5 * np.array([math.lgamma(k + 1) for k in n]) - 0.5 * abs(gamma) ** 2
    phase = np.exp(1j * n * math.atan2(gamma.imag, gamma.real))
    return FockVector(np.exp(log_mod) * phase)
