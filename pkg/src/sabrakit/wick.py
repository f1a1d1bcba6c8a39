"""Cylindrical polynomials in the shell components and exact Gaussian moments.

Variables are keyed (n, i): shell n >= 1, component i in {1, 2}.  Moments
under a centered Gaussian with independent components are evaluated by
brute-force enumeration of pair matchings (Isserlis' theorem); every
expectation needed here has degree <= 8, i.e. at most 105 pairings.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

import numpy as np

Var = tuple[int, int]
Monomial = tuple[Var, ...]


class GaussPoly:
    """Sparse polynomial over shell-component variables.

    Terms map a sorted tuple of variables (with repetition) to a real
    coefficient.  Supports the ring operations, partial differentiation,
    batch evaluation on arrays of shape (..., M, 2), and exact expectation
    under a diagonal centered Gaussian.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, float] | None = None):
        self.terms: dict[Monomial, float] = {}
        if terms:
            for mono, c in terms.items():
                if c != 0.0:
                    self.terms[tuple(sorted(mono))] = self.terms.get(tuple(sorted(mono)), 0.0) + c

    @classmethod
    def constant(cls, c: float) -> "GaussPoly":
        return cls({(): c})

    @classmethod
    def variable(cls, n: int, i: int) -> "GaussPoly":
        if n < 1 or i not in (1, 2):
            raise ValueError(f"invalid variable ({n},{i})")
        return cls({((n, i),): 1.0})

    @classmethod
    def monomial(cls, c: float, vars_with_powers: Iterable[tuple[Var, int]]) -> "GaussPoly":
        mono: list[Var] = []
        for var, p in vars_with_powers:
            if p < 0:
                raise ValueError("exponents must be nonnegative")
            mono.extend([var] * p)
        return cls({tuple(sorted(mono)): c})

    def __add__(self, other) -> "GaussPoly":
        if not isinstance(other, GaussPoly):
            other = GaussPoly.constant(float(other))
        out = dict(self.terms)
        for mono, c in other.terms.items():
            out[mono] = out.get(mono, 0.0) + c
        return GaussPoly({m: c for m, c in out.items() if c != 0.0})

    __radd__ = __add__

    def __neg__(self) -> "GaussPoly":
        return GaussPoly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other) -> "GaussPoly":
        return self + (-other if isinstance(other, GaussPoly) else GaussPoly.constant(-float(other)))

    def __rsub__(self, other) -> "GaussPoly":
        return (-self) + other

    def __mul__(self, other) -> "GaussPoly":
        if not isinstance(other, GaussPoly):
            c = float(other)
            return GaussPoly({m: c * v for m, v in self.terms.items()})
        out: dict[Monomial, float] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = tuple(sorted(m1 + m2))
                out[mono] = out.get(mono, 0.0) + c1 * c2
        return GaussPoly(out)

    __rmul__ = __mul__

    def diff(self, var: Var) -> "GaussPoly":
        out: dict[Monomial, float] = {}
        for mono, c in self.terms.items():
            k = mono.count(var)
            if k == 0:
                continue
            reduced = list(mono)
            reduced.remove(var)
            key = tuple(reduced)
            out[key] = out.get(key, 0.0) + c * k
        return GaussPoly(out)

    def variables(self) -> set[Var]:
        return {v for mono in self.terms for v in mono}

    def degree(self) -> int:
        return max((len(m) for m in self.terms), default=0)

    def max_shell(self) -> int:
        return max((v[0] for mono in self.terms for v in mono), default=0)

    def evaluate(self, x: np.ndarray) -> np.ndarray | float:
        """Evaluate on an array of shape (..., M, 2); returns shape (...)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-2])
        for mono, c in self.terms.items():
            term = np.full(x.shape[:-2], c)
            for n, i in mono:
                term = term * x[..., n - 1, i - 1]
            out = out + term
        return out if out.ndim else float(out)

    def expectation(self, variance: Callable[[Var], float]) -> float:
        """Exact mean under independent centered Gaussians with the given
        per-variable variances, via pair-matching enumeration."""
        return sum(c * _gaussian_moment(mono, variance) for mono, c in self.terms.items())


def _gaussian_moment(mono: Monomial, variance: Callable[[Var], float]) -> float:
    if len(mono) == 0:
        return 1.0
    if len(mono) % 2 == 1:
        return 0.0
    return _sum_pairings(list(mono), variance)


def _sum_pairings(vars_left: list[Var], variance: Callable[[Var], float]) -> float:
    if not vars_left:
        return 1.0
    head = vars_left[0]
    total = 0.0
    for j in range(1, len(vars_left)):
        # independent components: only same-variable pairings contribute
        if vars_left[j] != head:
            continue
        cov = variance(head)
        if cov == 0.0:
            continue
        rest = vars_left[1:j] + vars_left[j + 1 :]
        total += cov * _sum_pairings(rest, variance)
    return total
