"""The Sabra bilinear interaction term and its conservation structure.

Each shell n couples to its neighbours n-2..n+2 through quadratic terms with
coefficients a and b.  The enstrophy-type quadratic invariant S_beta exists
when lam^(2*beta) = -a/(a+b); energy is conserved for any real a, b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import ShellState, SpectralParams, apply_power, project


def beta_from_coefficients(a: float, b: float, lam: float) -> float:
    """Solve lam^(2*beta) = -a/(a+b) for the regularity exponent beta > 0."""
    if not lam > 1:
        raise ValueError(f"shell ratio must exceed 1, got {lam}")
    if a + b == 0:
        raise ValueError("degenerate coefficients: a + b = 0")
    ratio = -a / (a + b)
    if ratio <= 1:
        raise ValueError(f"no positive beta exists: -a/(a+b) = {ratio} <= 1")
    return math.log(ratio) / (2.0 * math.log(lam))


@dataclass(frozen=True)
class SabraCoefficients:
    """Interaction constants (a, b) and the induced invariant exponent beta.

    beta is always recomputed from (a, b, lam) at construction.  Use
    with_forced_beta only for diagnostics that deliberately break the
    S_beta invariance (e.g. residual experiments).
    """

    a: float
    b: float
    lam: float
    beta: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "beta", beta_from_coefficients(self.a, self.b, self.lam))

    @classmethod
    def for_beta(cls, lam: float, beta: float, a: float = 1.0) -> "SabraCoefficients":
        """Coefficients with a given invariant exponent: b = -a*(1 + lam^(-2*beta))."""
        if not beta > 0:
            raise ValueError("beta must be positive")
        return cls(a=a, b=-a * (1.0 + lam ** (-2.0 * beta)), lam=lam)

    @classmethod
    def with_forced_beta(cls, a: float, b: float, lam: float, beta: float) -> "SabraCoefficients":
        obj = object.__new__(cls)
        object.__setattr__(obj, "a", a)
        object.__setattr__(obj, "b", b)
        object.__setattr__(obj, "lam", lam)
        object.__setattr__(obj, "beta", beta)
        return obj


def bilinear_kernel(u: np.ndarray, v: np.ndarray, a: float, b: float,
                    wavenumbers: np.ndarray) -> np.ndarray:
    """Vectorized bilinear term on arrays of shape (..., M, 2).

    Shells outside 1..M are treated as zero; with that zero padding the
    general coupling formula is valid for every row, including n = 1, 2
    (the boundary rows simply lose the terms that reference shell 0 or -1).
    `wavenumbers` must hold k_j for j = 0..M+1 at least.
    """
    M = u.shape[-2]
    shp = u.shape[:-2]
    up = np.zeros(shp + (M + 4, 2))
    vp = np.zeros(shp + (M + 4, 2))
    up[..., 2 : M + 2, :] = u
    vp[..., 2 : M + 2, :] = v

    # shifted views: row j (0-based, shell n=j+1) sees shells n-2..n+2
    u_m2, u_m1 = up[..., 0:M, :], up[..., 1 : M + 1, :]
    u_p1, u_p2 = up[..., 3 : M + 3, :], up[..., 4 : M + 4, :]
    v_m2, v_m1 = vp[..., 0:M, :], vp[..., 1 : M + 1, :]
    v_p1, v_p2 = vp[..., 3 : M + 3, :], vp[..., 4 : M + 4, :]

    k_m1 = wavenumbers[0:M]          # k_{n-1}
    k_0 = wavenumbers[1 : M + 1]     # k_n
    k_p1 = wavenumbers[2 : M + 2]    # k_{n+1}

    w = np.empty(shp + (M, 2))
    w[..., 0] = (
        a * k_p1 * (-u_p1[..., 1] * v_p2[..., 0] + u_p1[..., 0] * v_p2[..., 1])
        + b * k_0 * (-u_m1[..., 1] * v_p1[..., 0] + u_m1[..., 0] * v_p1[..., 1])
        + a * k_m1 * (u_m1[..., 1] * v_m2[..., 0] + u_m1[..., 0] * v_m2[..., 1])
        + b * k_m1 * (u_m2[..., 1] * v_m1[..., 0] + u_m2[..., 0] * v_m1[..., 1])
    )
    w[..., 1] = (
        -a * k_p1 * (u_p1[..., 0] * v_p2[..., 0] + u_p1[..., 1] * v_p2[..., 1])
        - b * k_0 * (u_m1[..., 0] * v_p1[..., 0] + u_m1[..., 1] * v_p1[..., 1])
        - a * k_m1 * (u_m1[..., 0] * v_m2[..., 0] - u_m1[..., 1] * v_m2[..., 1])
        - b * k_m1 * (u_m2[..., 0] * v_m1[..., 0] - u_m2[..., 1] * v_m1[..., 1])
    )
    return w


def evaluate_B(u: ShellState, v: ShellState, coeffs: SabraCoefficients) -> ShellState:
    """Reference evaluation with the boundary rows written out verbatim.

    The n = 1 and n = 2 rows are separate branches; a test asserts that the
    zero-padded general formula (bilinear_kernel) reproduces them.
    """
    if u.params != v.params:
        raise ValueError("u and v must share spectral parameters")
    p = u.params
    M, a, b = p.M, coeffs.a, coeffs.b
    k = p.wavenumbers

    def us(n):
        return u.shells[n - 1] if 1 <= n <= M else np.zeros(2)

    def vs(n):
        return v.shells[n - 1] if 1 <= n <= M else np.zeros(2)

    w = np.zeros((M, 2))
    # n = 1
    u2, v3 = us(2), vs(3)
    w[0, 0] = a * k[2] * (-u2[1] * v3[0] + u2[0] * v3[1])
    w[0, 1] = -a * k[2] * (u2 @ v3)
    # n = 2
    u3, v4, u1 = us(3), vs(4), us(1)
    w[1, 0] = a * k[3] * (-u3[1] * v4[0] + u3[0] * v4[1]) + b * k[2] * (
        -u1[1] * v3[0] + u1[0] * v3[1]
    )
    w[1, 1] = -a * k[3] * (u3 @ v4) - b * k[2] * (u1 @ v3)
    # n > 2
    for n in range(3, M + 1):
        up1, vp2 = us(n + 1), vs(n + 2)
        um1, vp1 = us(n - 1), vs(n + 1)
        vm2, um2, vm1 = vs(n - 2), us(n - 2), vs(n - 1)
        w[n - 1, 0] = (
            a * k[n + 1] * (-up1[1] * vp2[0] + up1[0] * vp2[1])
            + b * k[n] * (-um1[1] * vp1[0] + um1[0] * vp1[1])
            + a * k[n - 1] * (um1[1] * vm2[0] + um1[0] * vm2[1])
            + b * k[n - 1] * (um2[1] * vm1[0] + um2[0] * vm1[1])
        )
        w[n - 1, 1] = (
            -a * k[n + 1] * (up1[0] * vp2[0] + up1[1] * vp2[1])
            - b * k[n] * (um1[0] * vp1[0] + um1[1] * vp1[1])
            - a * k[n - 1] * (um1[0] * vm2[0] - um1[1] * vm2[1])
            - b * k[n - 1] * (um2[0] * vm1[0] - um2[1] * vm1[1])
        )
    return ShellState(p, w)


def evaluate_B_galerkin(u: ShellState, v: ShellState, coeffs: SabraCoefficients,
                        m: int) -> ShellState:
    """Truncated interaction: project inputs to m shells, evaluate, project back."""
    return project(evaluate_B(project(u, m), project(v, m), coeffs), m)


def tail_difference(x: ShellState, coeffs: SabraCoefficients, m: int) -> ShellState:
    """Closed-form truncation error B^m(x,x) - Pi_m B(x,x).

    Only rows m-1 and m are nonzero; they reference shells up to m+2, so the
    state must carry at least m+2 shells.
    """
    p = x.params
    if m + 2 > p.M:
        raise ValueError(f"tail rows at level m={m} need {m + 2} shells, state has {p.M}")
    if m < 3:
        raise ValueError("truncation level must be at least 3")
    a, b, k = coeffs.a, coeffs.b, p.wavenumbers
    s = x.shells
    xm1, xm = s[m - 2], s[m - 1]          # shells m-1, m
    xp1, xp2 = s[m], s[m + 1]             # shells m+1, m+2

    w = np.zeros((p.M, 2))
    w[m - 2, 0] = -a * k[m] * (xm[0] * xp1[1] - xm[1] * xp1[0])
    w[m - 2, 1] = -a * k[m] * (-xm[0] * xp1[0] - xm[1] * xp1[1])
    w[m - 1, 0] = -a * k[m + 1] * (xp1[0] * xp2[1] - xp1[1] * xp2[0]) - b * k[m] * (
        xm1[0] * xp1[1] - xm1[1] * xp1[0]
    )
    w[m - 1, 1] = -a * k[m + 1] * (-xp1[0] * xp2[0] - xp1[1] * xp2[1]) - b * k[m] * (
        -xm1[0] * xp1[0] - xm1[1] * xp1[1]
    )
    return ShellState(p, w)


def trilinear_form(u: ShellState, v: ShellState, w: ShellState,
                   coeffs: SabraCoefficients) -> float:
    """<B(u,v), w> in the plain H inner product."""
    if not (u.params == v.params == w.params):
        raise ValueError("states must share spectral parameters")
    return float(np.sum(evaluate_B(u, v, coeffs).shells * w.shells))


def conservation_residuals(u: ShellState, coeffs: SabraCoefficients) -> tuple[float, float]:
    """(<B(u,u),u>, <B(u,u), A^beta u>): both vanish up to rounding when the
    coefficient condition holds."""
    buu = evaluate_B(u, u, coeffs)
    energy = float(np.sum(buu.shells * u.shells))
    sbeta = float(np.sum(buu.shells * apply_power(u, coeffs.beta).shells))
    return energy, sbeta
