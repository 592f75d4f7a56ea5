"""Smooth compactly supported test functions ``psi(x) = poly(x) * B(x/R)``.

``B`` is the unit bump, so ``psi`` is supported in ``[-R, R]``.  Derivatives
at the origin are exact: ``B^(n)(0)`` is a rational multiple of ``e^-1``
and the Leibniz rule combines it with the polynomial coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mollifier import _derivative_polys, unit_bump_derivative

__all__ = [
    "TestFunction", "PSI_A", "PSI_B", "PSI_C", "CATALOG",
    "eval_psi", "get_test_function", "psi_derivatives_at_zero",
]


@dataclass(frozen=True)
class TestFunction:
    """``sum_k poly[k] x^k`` times the bump of radius ``support_radius``."""

    __test__ = False  # keep pytest from collecting this class

    name: str
    poly: tuple[float, ...]
    support_radius: float = 4.0

    def __post_init__(self):
        if not self.poly:
            raise ValueError("poly needs at least one coefficient")
        # Pairings assume supp psi covers [-l sigma, l sigma] on every grid.
        if not self.support_radius >= 1:
            raise ValueError("support_radius must be at least 1")

    @property
    def kind(self) -> str:
        pure = self.poly[0] == 1 and all(c == 0 for c in self.poly[1:])
        return "pure-bump" if pure else "polynomial-bump"

    def __call__(self, x):
        return self.derivative(x, 0)

    def eval(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, n: int = 0):
        """n-th derivative by Leibniz over the polynomial and the bump."""
        x = np.asarray(x)
        if not np.issubdtype(x.dtype, np.floating):
            x = x.astype(np.float64)
        dt = x.dtype.type
        R = dt(self.support_radius)
        t = x / R
        p = np.polynomial.Polynomial(self.poly)
        out = np.zeros_like(x)
        for k in range(n + 1):
            pk = p.deriv(k) if k else p
            if pk.coef.size == 1 and pk.coef[0] == 0:
                break
            coef = [dt(c) for c in pk.coef]
            acc = np.full_like(x, coef[-1])
            for c in coef[-2::-1]:
                acc = acc * x + c
            out = out + math.comb(n, k) * acc * unit_bump_derivative(t, n - k) / R ** (n - k)
        return out

    def derivatives_at_zero(self, n_max: int) -> list[float]:
        """Exact ``psi^(n)(0)`` for ``n = 0..n_max``."""
        e_inv = math.exp(-1)
        R = self.support_radius
        out = []
        for n in range(n_max + 1):
            acc = 0.0
            for k in range(min(n, len(self.poly) - 1) + 1):
                # d^k poly at 0 = k! c_k ; bump part B^(n-k)(0)/R^(n-k).
                acc += (math.comb(n, k) * math.factorial(k) * self.poly[k]
                        * _derivative_polys()[n - k][0] / R ** (n - k))
            out.append(acc * e_inv)
        return out

    def mirrored(self) -> "TestFunction":
        """``x -> psi(-x)``."""
        poly = tuple(-c if k % 2 else c for k, c in enumerate(self.poly))
        return TestFunction(self.name + "~", poly, self.support_radius)


PSI_A = TestFunction("psiA", (1.0,))
PSI_B = TestFunction("psiB", (1.0, 1.0, 1.0, 1.0))
PSI_C = TestFunction("psiC", (2.0, -1.0, 0.5, 1.0, 0.0))

CATALOG = {t.name: t for t in (PSI_A, PSI_B, PSI_C)}


def get_test_function(spec: str | Sequence[float], support_radius: float = 4.0) -> TestFunction:
    """Look up ``psiA``/``psiB``/``psiC`` or build one from coefficients.

    ``spec`` may be a catalog name, a sequence of numbers, or a string
    like ``"1,0,2"`` listing polynomial coefficients from degree 0 up.
    """
    if isinstance(spec, str):
        key = spec.strip()
        for name, t in CATALOG.items():
            if key.lower() in (name.lower(), name[-1].lower()):
                return t
        try:
            coefs = tuple(float(c) for c in key.replace(";", ",").split(","))
        except ValueError:
            raise ValueError(
                f"unknown test function {spec!r}; use one of {sorted(CATALOG)} "
                "or comma-separated polynomial coefficients") from None
        return TestFunction(f"poly({key})", coefs, support_radius)
    return TestFunction(f"poly({','.join(str(c) for c in spec)})",
                        tuple(float(c) for c in spec), support_radius)


def eval_psi(psi: TestFunction, x):
    """``psi(x)``; zero outside the support."""
    return psi.derivative(x, 0)


def psi_derivatives_at_zero(psi: TestFunction) -> tuple[float, ...]:
    """Derivatives of orders 0 through 4 at the origin."""
    return tuple(psi.derivatives_at_zero(4))
