"""Reference distributions and their exact action on test functions.

A :class:`ReferenceDistribution` is a finite linear combination of atoms.
Pairings with a :class:`~colombeau.testfn.TestFunction` use the exact
derivatives of ``psi`` at the origin and, for the finite-part atoms
``x_+^(-n)``, the Hormander form

    <x_+^(-p-1), psi> = -(1/p!) int_0^inf ln x psi^(p+1)(x) dx + kappa_p psi^(p)(0) / p!

where ``kappa_p`` is the harmonic number.  ``x_-`` atoms act through the
mirrored test function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .quadrature import integrate
from .representatives import harmonic
from .testfn import TestFunction

__all__ = [
    "ATOM_KINDS",
    "MAX_PSI_ORDER",
    "ReferenceDistribution",
    "ReferenceError",
    "atom",
    "eval_reference",
    "reference",
    "x_i0",
]

MAX_PSI_ORDER = 4
REF_TOL = 1e-13

# kind -> number of parameters
ATOM_KINDS = {
    "delta": 1,        # delta^(k)
    "xplus_neg": 1,    # x_+^(-n), n >= 1
    "xminus_neg": 1,   # x_-^(-n)
    "x_neg": 1,        # x^(-n) = x_+^(-n) + (-1)^n x_-^(-n)
    "x_neg_sgn": 1,    # x^(-n) sgn x = x_+^(-n) - (-1)^n x_-^(-n)
    "lnabs": 0,
    "lnplus": 0,
    "lnminus": 0,
    "theta": 0,
    "theta_check": 0,
    "xplus_pow": 1,    # x_+^a, a > -1
    "xminus_pow": 1,   # x_-^a, a > -1
    "one": 0,
}


class ReferenceError(ValueError):
    """Invalid atom, or a pairing that needs psi derivatives past order 4."""


def atom(kind: str, *params) -> tuple:
    """Validated canonical atom tuple, e.g. ``atom("delta", 2)``."""
    if kind not in ATOM_KINDS:
        raise ReferenceError(f"unknown atom {kind!r}; use one of {sorted(ATOM_KINDS)}")
    if len(params) != ATOM_KINDS[kind]:
        raise ReferenceError(f"atom {kind!r} takes {ATOM_KINDS[kind]} parameter(s)")
    if kind == "delta":
        k = int(params[0])
        if k != params[0] or k < 0:
            raise ReferenceError("delta order must be an integer >= 0")
        params = (k,)
    elif kind in ("xplus_neg", "xminus_neg", "x_neg", "x_neg_sgn"):
        n = int(params[0])
        if n != params[0] or n < 1:
            raise ReferenceError("negative power must be an integer >= 1")
        params = (n,)
    elif kind in ("xplus_pow", "xminus_pow"):
        a = float(params[0])
        if not a > -1:
            raise ReferenceError("x_+^a needs a > -1")
        params = (a,)
    return (kind,) + tuple(params)


def _atom_str(a: tuple) -> str:
    kind = a[0]
    if kind == "delta":
        return "delta" + "'" * a[1] if a[1] <= 4 else f"delta^({a[1]})"
    names = {
        "xplus_neg": "x_+^(-{})", "xminus_neg": "x_-^(-{})",
        "x_neg": "x^(-{})", "x_neg_sgn": "x^(-{}) sgn x",
        "xplus_pow": "x_+^({:g})", "xminus_pow": "x_-^({:g})",
    }
    if kind in names:
        return names[kind].format(a[1])
    return {"lnabs": "ln|x|", "lnplus": "ln x_+", "lnminus": "ln x_-",
            "theta": "theta", "theta_check": "theta(-x)", "one": "1"}[kind]


def _coef_str(c: complex) -> str:
    if c.imag == 0:
        return f"{c.real:.12g}"
    if c.real == 0:
        return f"{c.imag:.12g}i"
    return f"({c.real:.12g}{c.imag:+.12g}i)"


@dataclass(frozen=True)
class ReferenceDistribution:
    """``sum_k coeff_k * atom_k`` with canonical, non-repeated atoms."""

    terms: tuple[tuple[complex, tuple], ...]

    def __post_init__(self):
        atoms = [a for _, a in self.terms]
        if len(set(atoms)) != len(atoms):
            raise ReferenceError("duplicate atoms; build through reference()")

    def __add__(self, other: "ReferenceDistribution") -> "ReferenceDistribution":
        return reference(list(self.terms) + list(other.terms))

    def __sub__(self, other: "ReferenceDistribution") -> "ReferenceDistribution":
        return self + (-1) * other

    def __rmul__(self, c) -> "ReferenceDistribution":
        return reference([(c * k, a) for k, a in self.terms])

    __mul__ = __rmul__

    def __neg__(self):
        return (-1) * self

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for c, a in self.terms:
            name = _atom_str(a)
            if c == 1:
                parts.append(name)
            elif c == -1:
                parts.append("-" + name)
            else:
                parts.append(f"{_coef_str(complex(c))}*{name}")
        return " + ".join(parts).replace("+ -", "- ")

    @property
    def max_psi_order(self) -> int:
        """Highest psi derivative the pairing needs."""
        order = 0
        for _, a in self.terms:
            if a[0] == "delta":
                order = max(order, a[1])
            elif a[0] in ("xplus_neg", "xminus_neg", "x_neg", "x_neg_sgn"):
                order = max(order, a[1])
        return order


def reference(terms: Iterable[tuple[complex, tuple | str]]) -> ReferenceDistribution:
    """Canonicalise ``(coeff, atom)`` pairs: merge repeats, drop zeros, sort."""
    acc: dict[tuple, complex] = {}
    for c, a in terms:
        if isinstance(a, str):
            a = atom(a)
        else:
            a = atom(*a)
        acc[a] = acc.get(a, 0) + complex(c)
    items = sorted(((c, a) for a, c in acc.items() if c != 0), key=lambda t: repr(t[1]))
    return ReferenceDistribution(tuple(items))


def x_i0(sign: str, n: int) -> ReferenceDistribution:
    """``(x + i0)^(-n)`` (sign ``"+"``) or ``(x - i0)^(-n)`` as x^(-n) and delta terms."""
    if n < 1:
        raise ReferenceError("(x +/- i0)^(-n) needs n >= 1")
    p = n - 1
    c = (-1) ** p * 1j * math.pi / math.factorial(p)
    c = -c if sign == "+" else c
    return reference([(1, ("x_neg", n)), (c, ("delta", p))])


# -- evaluation -----------------------------------------------------------------

def _half_line(f, R, tol, dtype, sing=None):
    kw = {"singularities": {0.0: sing}} if sing is not None else {}
    return integrate(f, 0.0, R, tol, breakpoints=(R / 4, R / 2), dtype=dtype, **kw).value


def _finite_part(psi: TestFunction, n: int, tol, dtype) -> float:
    """``<x_+^(-n), psi>`` from the Hormander form (p = n - 1)."""
    p = n - 1
    R = float(psi.support_radius)
    integral = _half_line(lambda x: np.log(x) * psi.derivative(x, p + 1), R, tol, dtype, "log")
    d0 = psi.derivatives_at_zero(p)[p]
    kappa = harmonic(p)
    return -integral / math.factorial(p) + float(kappa) * d0 / math.factorial(p)


def _atom_value(a: tuple, psi: TestFunction, tol, dtype) -> complex:
    kind = a[0]
    R = float(psi.support_radius)
    if kind == "delta":
        k = a[1]
        return (-1) ** k * psi.derivatives_at_zero(k)[k]
    if kind == "xplus_neg":
        return _finite_part(psi, a[1], tol, dtype)
    if kind == "xminus_neg":
        return _finite_part(psi.mirrored(), a[1], tol, dtype)
    if kind in ("x_neg", "x_neg_sgn"):
        n = a[1]
        plus = _finite_part(psi, n, tol, dtype)
        minus = _finite_part(psi.mirrored(), n, tol, dtype)
        s = (-1) ** n if kind == "x_neg" else -((-1) ** n)
        return plus + s * minus
    if kind in ("lnplus", "lnminus", "lnabs"):
        plus = _half_line(lambda x: np.log(x) * psi(x), R, tol, dtype, "log")
        if kind == "lnplus":
            return plus
        mpsi = psi.mirrored()
        minus = _half_line(lambda x: np.log(x) * mpsi(x), R, tol, dtype, "log")
        return minus if kind == "lnminus" else plus + minus
    if kind == "theta":
        return _half_line(psi, R, tol, dtype)
    if kind == "theta_check":
        return _half_line(psi.mirrored(), R, tol, dtype)
    if kind in ("xplus_pow", "xminus_pow"):
        ex = a[1]
        f = psi if kind == "xplus_pow" else psi.mirrored()
        sing = None if ex == int(ex) else ex
        return _half_line(lambda x: x ** ex * f(x), R, tol, dtype, sing)
    if kind == "one":
        return (_half_line(psi, R, tol, dtype)
                + _half_line(psi.mirrored(), R, tol, dtype))
    raise ReferenceError(f"unknown atom {kind!r}")


def eval_reference(u: ReferenceDistribution, psi: TestFunction, tol: float = REF_TOL,
                   precision: str = "double") -> complex:
    """``<u, psi>`` as a complex number.

    Raises :class:`ReferenceError` when ``u`` needs ``psi`` derivatives
    beyond order 4.
    """
    if u.max_psi_order > MAX_PSI_ORDER:
        raise ReferenceError(
            f"pairing needs psi derivative of order {u.max_psi_order} (> {MAX_PSI_ORDER})")
    dtype = np.longdouble if precision == "extended" else np.float64
    total = 0j
    for c, a in u.terms:
        total += complex(c) * complex(_atom_value(a, psi, tol, dtype))
    return total
