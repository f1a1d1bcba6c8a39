"""Spectral state space: shell eigenvalues, Sobolev norms, Galerkin projection.

The diagonal operator has eigenvalues lam_n = k0^2 * lambda^(2n) on shell n,
each shell carrying a 2-vector (real/imaginary part of one spectral mode).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

# lambda^(2*(M+2)) must stay comfortably inside double range; beyond this the
# shell formulas (which reach two shells past the truncation) overflow.
_MAX_LOG_EIGENVALUE = 600.0


@dataclass(frozen=True)
class SpectralParams:
    """Geometric shell spectrum: base wavenumber k0, ratio lam, truncation M."""

    k0: float
    lam: float
    M: int

    def __post_init__(self):
        if not self.k0 > 0:
            raise ValueError(f"k0 must be positive, got {self.k0}")
        if not self.lam > 1:
            raise ValueError(f"shell ratio must exceed 1, got {self.lam}")
        if self.M < 3:
            raise ValueError(f"need at least 3 shells, got M={self.M}")
        if 2 * np.log(self.k0) + 2 * (self.M + 2) * np.log(self.lam) > _MAX_LOG_EIGENVALUE:
            raise ValueError(
                f"M={self.M} at lam={self.lam} puts top eigenvalues outside double range"
            )

    def eigenvalue(self, n: int) -> float:
        """lam_n = k0^2 * lam^(2n) for shell n >= 1."""
        if n < 1:
            raise ValueError(f"shell index must be >= 1, got {n}")
        return self.k0**2 * self.lam ** (2 * n)

    def wavenumber(self, n: int) -> float:
        """k_n = k0 * lam^n; k_n = sqrt(lam_n) for n >= 1."""
        return self.k0 * self.lam**n

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Array of lam_n for n = 1..M."""
        ev = self.k0**2 * self.lam ** (2.0 * np.arange(1, self.M + 1))
        ev.flags.writeable = False
        return ev

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Array of k_n for n = 0..M+2 (the bilinear term reaches k_{M+1})."""
        kn = self.k0 * self.lam ** np.arange(0.0, self.M + 3)
        kn.flags.writeable = False
        return kn


@dataclass(frozen=True)
class SobolevIndex:
    alpha: float

    def __post_init__(self):
        if not np.isfinite(self.alpha):
            raise ValueError("Sobolev index must be finite")


@dataclass(frozen=True)
class ShellState:
    """Truncated velocity configuration: M shells of 2 real components each."""

    params: SpectralParams
    shells: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.shells, dtype=float)
        if arr.shape != (self.params.M, 2):
            raise ValueError(
                f"expected shells of shape ({self.params.M}, 2), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("shell state contains non-finite entries")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "shells", arr)

    @classmethod
    def zero(cls, params: SpectralParams) -> "ShellState":
        return cls(params, np.zeros((params.M, 2)))

    def shell(self, n: int) -> np.ndarray:
        """2-vector of shell n (1-based)."""
        return self.shells[n - 1]


def sobolev_norm(state: ShellState, idx: SobolevIndex | float) -> float:
    """H^alpha norm: sqrt(sum_n lam_n^alpha |x_n|^2)."""
    alpha = idx.alpha if isinstance(idx, SobolevIndex) else float(idx)
    weights = state.params.eigenvalues**alpha
    return float(np.sqrt(np.sum(weights * np.sum(state.shells**2, axis=1))))


def apply_power(state: ShellState, p: float) -> ShellState:
    """Fractional power of the diagonal operator: shell n scaled by lam_n^p."""
    scale = state.params.eigenvalues**p
    return ShellState(state.params, state.shells * scale[:, None])


def project(state: ShellState, m: int) -> ShellState:
    """Galerkin projection: keep shells 1..m, zero the rest. Idempotent."""
    if not 1 <= m <= state.params.M:
        raise ValueError(f"projection level {m} outside 1..{state.params.M}")
    out = state.shells.copy()
    out[m:] = 0.0
    return ShellState(state.params, out)


def hilbert_schmidt_sum(
    params: SpectralParams, alpha: float, beta: float, N: int
) -> tuple[float, bool]:
    """Partial sum of lam_n^(alpha-beta) over n=1..N and its convergence verdict.

    The terms are geometric with ratio lam^(2(alpha-beta)), so the full series
    converges iff alpha < beta (the embedding H^beta in H^alpha is
    Hilbert-Schmidt exactly in that case).
    """
    if N < 1:
        raise ValueError("need at least one term")
    n = np.arange(1, N + 1)
    terms = params.k0 ** (2 * (alpha - beta)) * params.lam ** (2 * n * (alpha - beta))
    return float(np.sum(terms)), alpha < beta
