"""The Gaussian reference measure N(0, (1/nu) A^(-beta)) on shell space.

Provides exact sampling of the M-mode marginal, Monte Carlo expectations,
symbolic shell-interaction polynomials with exact Wick moments, and the
generator of the stochastic dynamics on cylindrical polynomials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sabra import SabraCoefficients, bilinear_kernel
from .spectral import ShellState, SpectralParams
from .wick import GaussPoly, Var


class ObservableDivergedError(RuntimeError):
    def __init__(self, sample_index: int):
        super().__init__(f"observable diverged at sample index {sample_index}")
        self.sample_index = sample_index


@dataclass(frozen=True)
class MeasureParams:
    """(beta, nu) identifying the Gaussian measure with component variance
    1/(nu * lam_n^beta) on each of the two entries of shell n."""

    beta: float
    nu: float
    spectral: SpectralParams

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    def component_variance(self, n: int) -> float:
        return 1.0 / (self.nu * self.spectral.eigenvalue(n) ** self.beta)

    def component_std(self) -> np.ndarray:
        """Per-shell standard deviations, n = 1..M."""
        return 1.0 / np.sqrt(self.nu * self.spectral.eigenvalues**self.beta)

    def variance_of(self, var: Var) -> float:
        """Variance of component (n, i); covariance oracle for Wick sums."""
        return self.component_variance(var[0])


def component_variance(params: MeasureParams, n: int) -> float:
    return params.component_variance(n)


def sample_batch(params: MeasureParams, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, M, 2) array of independent draws from the M-mode marginal."""
    std = params.component_std()
    return rng.standard_normal((count, params.spectral.M, 2)) * std[:, None]


def sample(params: MeasureParams, seed) -> ShellState:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return ShellState(params.spectral, sample_batch(params, 1, rng)[0])


def mc_expectation(f, params: MeasureParams, n_samples: int, seed,
                   chunk: int = 100_000) -> tuple[float, float]:
    """Plain Monte Carlo mean and standard error of f under the measure.

    f maps a batch array (k, M, 2) to k values.  Deterministic given seed.
    """
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        vals = np.asarray(f(sample_batch(params, k, rng)), dtype=float)
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise ObservableDivergedError(done + bad)
        total += vals.sum()
        total_sq += (vals**2).sum()
        done += k
    mean = total / n_samples
    var = max(total_sq / n_samples - mean**2, 0.0)
    return mean, float(np.sqrt(var / n_samples))


# ---------------------------------------------------------------------------
# symbolic shell-interaction polynomials

def b_component_poly(n: int, i: int, coeffs: SabraCoefficients,
                     spectral: SpectralParams, truncate: int | None = None) -> GaussPoly:
    """Component (n, i) of the quadratic interaction as a polynomial in x.

    With truncate=m the inputs are projected to the first m shells (variables
    beyond m become zero), which yields the Galerkin rows.
    """
    if n < 1 or i not in (1, 2):
        raise ValueError(f"invalid component ({n},{i})")
    a, b = coeffs.a, coeffs.b
    k = lambda j: spectral.k0 * spectral.lam**j

    def x(j: int, comp: int) -> GaussPoly:
        if j < 1 or (truncate is not None and j > truncate):
            return GaussPoly.constant(0.0)
        return GaussPoly.variable(j, comp)

    if i == 1:
        poly = (
            a * k(n + 1) * (-x(n + 1, 2) * x(n + 2, 1) + x(n + 1, 1) * x(n + 2, 2))
            + b * k(n) * (-x(n - 1, 2) * x(n + 1, 1) + x(n - 1, 1) * x(n + 1, 2))
            + a * k(n - 1) * (x(n - 1, 2) * x(n - 2, 1) + x(n - 1, 1) * x(n - 2, 2))
            + b * k(n - 1) * (x(n - 2, 2) * x(n - 1, 1) + x(n - 2, 1) * x(n - 1, 2))
        )
    else:
        poly = (
            -a * k(n + 1) * (x(n + 1, 1) * x(n + 2, 1) + x(n + 1, 2) * x(n + 2, 2))
            - b * k(n) * (x(n - 1, 1) * x(n + 1, 1) + x(n - 1, 2) * x(n + 1, 2))
            - a * k(n - 1) * (x(n - 1, 1) * x(n - 2, 1) - x(n - 1, 2) * x(n - 2, 2))
            - b * k(n - 1) * (x(n - 2, 1) * x(n - 1, 1) - x(n - 2, 2) * x(n - 1, 2))
        )
    return poly


def expected_B_component_square(coeffs: SabraCoefficients, params: MeasureParams,
                                n: int, i: int = 1) -> float:
    """Exact Wick value of the second moment of one interaction component."""
    poly = b_component_poly(n, i, coeffs, params.spectral)
    return (poly * poly).expectation(params.variance_of)


def closed_form_B_square(coeffs: SabraCoefficients, params: MeasureParams, n: int) -> float:
    """Independent closed form for n > 2, beta = 1:
    (2/(nu^2 k0^2)) * lam^(-2n) * [a^2 lam^-4 + b^2 + (a+b)^2 lam^4]."""
    a, b, lam = coeffs.a, coeffs.b, coeffs.lam
    nu, k0 = params.nu, params.spectral.k0
    return (2.0 / (nu**2 * k0**2)) * lam ** (-2.0 * n) * (
        a**2 * lam**-4 + b**2 + (a + b) ** 2 * lam**4
    )


def tail_row_polys(coeffs: SabraCoefficients, spectral: SpectralParams,
                   m: int) -> dict[tuple[int, int], GaussPoly]:
    """Nonzero rows of B^m(x,x) - B(x,x) as polynomials (rows m-1 and m)."""
    if m < 3:
        raise ValueError("truncation level must be at least 3")
    rows: dict[tuple[int, int], GaussPoly] = {}
    for n in (m - 1, m):
        for i in (1, 2):
            rows[(n, i)] = (
                b_component_poly(n, i, coeffs, spectral, truncate=m)
                - b_component_poly(n, i, coeffs, spectral)
            )
    return rows


def expected_tail_norm(coeffs: SabraCoefficients, params: MeasureParams, m: int) -> float:
    """Exact Wick value of sum_n E|B^m_n(x,x) - B_n(x,x)|^2; decays like
    k_m^(2-4*beta), hence to zero iff beta > 1/2."""
    total = 0.0
    for poly in tail_row_polys(coeffs, params.spectral, m).values():
        total += (poly * poly).expectation(params.variance_of)
    return total


# ---------------------------------------------------------------------------
# generator on cylindrical polynomials

def _check_resolved(phi: GaussPoly, spectral: SpectralParams):
    if phi.max_shell() > spectral.M - 2:
        raise ValueError(
            f"polynomial touches shell {phi.max_shell()}; truncation M={spectral.M} "
            "resolves interactions only up to shell M-2"
        )


def apply_kolmogorov(phi: GaussPoly, x: ShellState, coeffs: SabraCoefficients,
                     params: MeasureParams) -> float:
    """Generator of the stochastic dynamics applied to phi at the point x:
    sum over components of lam^(1-beta) d2phi - B d1phi - nu lam x d1phi."""
    _check_resolved(phi, params.spectral)
    spectral = params.spectral
    bxx = bilinear_kernel(x.shells, x.shells, coeffs.a, coeffs.b, spectral.wavenumbers)
    total = 0.0
    for n, i in sorted(phi.variables()):
        lam_n = spectral.eigenvalue(n)
        d1 = phi.diff((n, i))
        d1_val = d1.evaluate(x.shells)
        total += lam_n ** (1.0 - params.beta) * d1.diff((n, i)).evaluate(x.shells)
        total -= bxx[n - 1, i - 1] * d1_val
        total -= params.nu * lam_n * x.shells[n - 1, i - 1] * d1_val
    return float(total)


def kolmogorov_split_polys(phi: GaussPoly, coeffs: SabraCoefficients,
                           params: MeasureParams) -> tuple[GaussPoly, GaussPoly]:
    """(Q phi, L phi) as polynomials: Q is the linear Ornstein-Uhlenbeck part,
    L the transport part -sum_n B_n d/dx_n.  Their sum is the full generator."""
    _check_resolved(phi, params.spectral)
    spectral = params.spectral
    qpart = GaussPoly()
    lpart = GaussPoly()
    for n, i in sorted(phi.variables()):
        lam_n = spectral.eigenvalue(n)
        d1 = phi.diff((n, i))
        qpart = qpart + lam_n ** (1.0 - params.beta) * d1.diff((n, i))
        qpart = qpart - params.nu * lam_n * GaussPoly.variable(n, i) * d1
        lpart = lpart - b_component_poly(n, i, coeffs, spectral, truncate=spectral.M) * d1
    return qpart, lpart


def carre_du_champ_poly(phi: GaussPoly, params: MeasureParams) -> GaussPoly:
    """|A^((1-beta)/2) D phi|^2 as a polynomial."""
    out = GaussPoly()
    for n, i in sorted(phi.variables()):
        d1 = phi.diff((n, i))
        out = out + params.spectral.eigenvalue(n) ** (1.0 - params.beta) * d1 * d1
    return out
