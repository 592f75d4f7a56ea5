"""sigma-parameterised representatives of point-singular distributions.

Each representative is a convolution ``u * K_sigma`` of a distribution ``u``
with a scaled kernel ``K_sigma(x) = K(sigma, x/sigma)/sigma``.  For the model
mollifier ``K = D``; for a moment mollifier ``phi`` the canonical
embedding uses the mirrored kernel.  Everything is evaluated in the scaled
variable ``w = x/sigma`` so the convolution integrals always live on the
kernel support ``[-l, l]``:

=================  ==================================================
``D^(p)``          ``sigma^(-p-1) K^(p)(w)``
``H``              ``int_{t<w} K(t) dt`` (exactly 0 / 1 beyond the support)
``X_+^a``          ``sigma^a int (w-t)_+^a K(t) dt``
``Ln x_+``         ``ln(sigma) H(w) + int_{t<w} ln(w-t) K(t) dt``
``X_+^(-p-1)``     ``(-1)^p/(sigma^(p+1) p!) [(ln sigma + kappa_p) K^(p)(w)
                   + int_{t<w} ln(w-t) K^(p+1)(t) dt]``
=================  ==================================================

Minus-side models are the plus-side models of the mirrored kernel at
``-w``; the derived models are fixed linear combinations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import convolution as conv
from .quadrature import complex_dtype, working_pi

__all__ = [
    "Representative",
    "RepresentativeError",
    "harmonic",
    "product",
    "rep_delta",
    "rep_derived",
    "rep_heaviside",
    "rep_ln",
    "rep_x_neg_int",
    "rep_x_power",
    "DERIVED_KINDS",
]

COSTS = ("closed-form", "single-integral", "nested-integral")
DERIVED_KINDS = ("x^-p", "x^-p sgn", "xplus_i0", "xminus_i0", "ln_abs", "ln_sgn")


class RepresentativeError(ValueError):
    pass


def harmonic(p: int) -> Fraction:
    """``kappa_p = sum_{k=1}^p 1/k`` as an exact rational; ``kappa_0 = 0``."""
    if p < 0:
        raise ValueError("p must be non-negative")
    return sum((Fraction(1, k) for k in range(1, p + 1)), Fraction(0))


# Support is tracked as a pair of flags: unbounded to the left / to the right.
# The bounded side always sits at -l*sigma or +l*sigma.
_SUPPORT_NAMES = {
    (False, False): "compact",
    (True, False): "left-halfline",
    (False, True): "right-halfline",
    (True, True): "global",
}


@dataclass(frozen=True)
class Representative:
    """A complex function of ``(sigma, x)`` known through its scaled form.

    ``fn(sigma, w)`` returns the value at ``x = sigma*w``.  ``breakpoints``
    (in ``w`` units) mark where the piecewise definition changes.
    """

    fn: Callable
    l: float
    unbounded: tuple[bool, bool] = (False, False)
    breakpoints: tuple[float, ...] = ()
    cost_hint: str = "closed-form"
    dtype: type = np.float64
    label: str = ""
    _terms: tuple = field(default=(), repr=False, compare=False)

    @property
    def support_kind(self) -> str:
        return _SUPPORT_NAMES[self.unbounded]

    def eval(self, sigma, x):
        """Value at ``x`` (array-like); complex array of the same shape."""
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        dt = self.dtype
        s = dt(sigma)
        x = np.asarray(x, dtype=dt)
        return self.fn(s, x / s)

    __call__ = eval

    def support(self, sigma) -> tuple[float, float]:
        r = self.l * float(sigma)
        lo = -math.inf if self.unbounded[0] else -r
        hi = math.inf if self.unbounded[1] else r
        return lo, hi

    def singular_points(self, sigma) -> list[float]:
        return [float(sigma) * b for b in self.breakpoints]

    def core_radius(self, sigma) -> float:
        return self.l * float(sigma)

    # -- algebra ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Representative):
            return other
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return linear_combination([(1, self), (1, other)])

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return linear_combination([(1, self), (-1, other)])

    def __neg__(self):
        return self.scaled(-1)

    def __mul__(self, other):
        if isinstance(other, Representative):
            return product([self, other])
        if np.isscalar(other):
            return self.scaled(other)
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return self.scaled(other)
        return NotImplemented

    def scaled(self, coeff) -> "Representative":
        coeff = _as_coeff(coeff, self.dtype)
        fn = self.fn

        def scaled_fn(sigma, w):
            return coeff * fn(sigma, w)
        return replace(self, fn=scaled_fn, label=f"({coeff})*{self.label}")


def _as_coeff(c, dtype):
    c = complex(c) if not isinstance(c, (np.complexfloating, np.floating)) else c
    return complex_dtype(dtype)(c)


def _widest(dtypes):
    return np.longdouble if any(np.dtype(d) == np.dtype(np.longdouble) for d in dtypes) else np.float64


def _merge_breakpoints(reps):
    return tuple(sorted({b for r in reps for b in r.breakpoints}))


def _max_cost(reps):
    return COSTS[max(COSTS.index(r.cost_hint) for r in reps)]


def linear_combination(terms: Sequence[tuple[complex, Representative]]) -> Representative:
    """``sum c_k R_k``; the support is the union of supports."""
    if not terms:
        raise RepresentativeError("empty linear combination")
    reps = [r for _, r in terms]
    dtype = _widest(r.dtype for r in reps)
    coeffs = [_as_coeff(c, dtype) for c, _ in terms]
    fns = [r.fn for r in reps]

    def fn(sigma, w):
        out = coeffs[0] * fns[0](sigma, w)
        for c, f in zip(coeffs[1:], fns[1:]):
            out = out + c * f(sigma, w)
        return out
    unb = (any(r.unbounded[0] for r in reps), any(r.unbounded[1] for r in reps))
    label = " + ".join(f"({c})*{r.label}" for c, r in zip(coeffs, reps))
    return Representative(fn=fn, l=max(r.l for r in reps), unbounded=unb,
                          breakpoints=_merge_breakpoints(reps), cost_hint=_max_cost(reps),
                          dtype=dtype, label=label)


def product(reps: Sequence[Representative], coeff=1) -> Representative:
    """Pointwise product ``coeff * prod R_k``; the support is the intersection."""
    reps = list(reps)
    if not reps:
        raise RepresentativeError("product of an empty list")
    dtype = _widest(r.dtype for r in reps)
    c = _as_coeff(coeff, dtype)
    fns = [r.fn for r in reps]

    def fn(sigma, w):
        out = fns[0](sigma, w)
        for f in fns[1:]:
            out = out * f(sigma, w)
        return c * out if c != 1 else out
    unb = (all(r.unbounded[0] for r in reps), all(r.unbounded[1] for r in reps))
    label = "*".join(r.label for r in reps)
    if c != 1:
        label = f"({c})*{label}"
    # All factors share the kernel radius; use the tightest when they differ.
    bounded_l = [r.l for r in reps]
    return Representative(fn=fn, l=max(bounded_l), unbounded=unb,
                          breakpoints=_merge_breakpoints(reps), cost_hint=_max_cost(reps),
                          dtype=dtype, label=label)


# -- atoms -------------------------------------------------------------------

def _kernel_breakpoints(kernel) -> tuple[float, ...]:
    pts = set(float(p) for p in kernel.breakpoints)
    pts.update((-float(kernel.l), float(kernel.l)))
    return tuple(sorted(pts))


def _both_sides(bps):
    return tuple(sorted(set(bps) | {-b for b in bps}))


def _check_order(kernel, order: int, what: str):
    if order < 0:
        raise RepresentativeError(f"{what}: order must be non-negative")
    if order > kernel.max_order - 1:
        raise RepresentativeError(
            f"{what}: derivative order {order} exceeds max_order-1 = {kernel.max_order - 1}")


def _kernel_derivative(kernel, sigma, w, p):
    out = np.zeros(w.shape, dtype=complex_dtype(kernel.dtype))
    for comp, wt in zip(kernel.components, kernel.weights(sigma)):
        lo, hi = comp.support
        sel = (w > lo) & (w < hi)
        if sel.any():
            out[sel] += wt * comp.derivative(w[sel], p)
    return out


def _sign(sign) -> int:
    if sign in ("+", 1, "plus"):
        return 1
    if sign in ("-", -1, "minus"):
        return -1
    raise RepresentativeError(f"sign must be '+' or '-', got {sign!r}")


def _mirror_rep(rep_plus_of_mirror: Representative, label: str) -> Representative:
    """``R(sigma, x) -> R(sigma, -x)`` with mirrored support metadata."""
    fn = rep_plus_of_mirror.fn

    def fn_m(sigma, w):
        return fn(sigma, -w)
    return replace(rep_plus_of_mirror, fn=fn_m, unbounded=rep_plus_of_mirror.unbounded[::-1],
                   breakpoints=tuple(sorted(-b for b in rep_plus_of_mirror.breakpoints)),
                   label=label)


def rep_delta(m, p: int = 0) -> Representative:
    """``D^(p)_sigma(x) = sigma^(-p-1) K^(p)(sigma, x/sigma)``."""
    _check_order(m, p, "rep_delta")
    dt = m.dtype

    def fn(sigma, w):
        return _kernel_derivative(m, sigma, w, p) / sigma ** (p + 1)
    return Representative(fn=fn, l=float(m.l), breakpoints=_kernel_breakpoints(m),
                          cost_hint="closed-form", dtype=dt, label=f"D({p})")


def _heaviside_plus(m) -> Representative:
    dt = m.dtype
    l = dt(m.l)

    def fn(sigma, w):
        out = np.zeros(w.shape, dtype=complex_dtype(dt))
        mid = (w > -l) & (w < l)
        if mid.any():
            out[mid] = conv.kernel_primitive(m, sigma, "step", 0, w[mid])
        out[w >= l] = 1
        return out
    return Representative(fn=fn, l=float(m.l), unbounded=(False, True),
                          breakpoints=_kernel_breakpoints(m), cost_hint="single-integral",
                          dtype=dt, label="H")


def rep_heaviside(m, checked: bool = False) -> Representative:
    """``H = theta * K_sigma``; ``checked`` gives ``x -> H(sigma, -x)``."""
    h = _heaviside_plus(m)
    return _mirror_rep(h, "Hc") if checked else h


def rep_x_power(m, sign, a) -> Representative:
    """``X_+^a`` (or ``X_-^a``) ``= y_(+/-)^a * K_sigma`` for ``a > -1``."""
    s = _sign(sign)
    a = float(a)
    if not a > -1:
        raise RepresentativeError(f"rep_x_power needs a > -1, got {a}")
    if a == 0:
        return rep_heaviside(m.mirror(), checked=True) if s < 0 else rep_heaviside(m)
    if s < 0:
        return _mirror_rep(rep_x_power(m.mirror(), "+", a), f"Xm^{a:g}")
    dt = m.dtype
    l = dt(m.l)

    def fn(sigma, w):
        out = np.zeros(w.shape, dtype=complex_dtype(dt))
        live = w > -l
        if live.any():
            out[live] = sigma ** dt(a) * conv.kernel_primitive(m, sigma, "power", 0, w[live], a)
        return out
    return Representative(fn=fn, l=float(m.l), unbounded=(False, True),
                          breakpoints=_kernel_breakpoints(m), cost_hint="single-integral",
                          dtype=dt, label=f"Xp^{a:g}")


def rep_ln(m, sign) -> Representative:
    """``Ln x_(+/-) = ln y_(+/-) * K_sigma``."""
    s = _sign(sign)
    if s < 0:
        return _mirror_rep(rep_ln(m.mirror(), "+"), "LnM")
    dt = m.dtype
    l = dt(m.l)

    def fn(sigma, w):
        out = np.zeros(w.shape, dtype=complex_dtype(dt))
        live = w > -l
        if live.any():
            wl = w[live]
            heav = conv.kernel_primitive(m, sigma, "step", 0, wl)
            out[live] = np.log(sigma) * heav + conv.kernel_primitive(m, sigma, "log", 0, wl)
        return out
    return Representative(fn=fn, l=float(m.l), unbounded=(False, True),
                          breakpoints=_kernel_breakpoints(m), cost_hint="single-integral",
                          dtype=dt, label="LnP")


def rep_x_neg_int(m, sign, p: int) -> Representative:
    """Model of ``x_(+/-)^(-p-1)`` with the ``kappa_p D^(p)`` correction."""
    s = _sign(sign)
    _check_order(m, p + 1, "rep_x_neg_int")
    if s < 0:
        return _mirror_rep(rep_x_neg_int(m.mirror(), "+", p), f"Xm^-{p + 1}")
    dt = m.dtype
    l = dt(m.l)
    kappa = harmonic(p)
    kap = dt(kappa.numerator) / dt(kappa.denominator)
    pref = dt((-1) ** p) / dt(math.factorial(p))

    def fn(sigma, w):
        out = np.zeros(w.shape, dtype=complex_dtype(dt))
        live = w > -l
        if live.any():
            wl = w[live]
            local = (np.log(sigma) + kap) * _kernel_derivative(m, sigma, wl, p)
            tail = conv.kernel_primitive(m, sigma, "log", p + 1, wl)
            out[live] = pref * (local + tail) / sigma ** (p + 1)
        return out
    return Representative(fn=fn, l=float(m.l), unbounded=(False, True),
                          breakpoints=_kernel_breakpoints(m), cost_hint="nested-integral",
                          dtype=dt, label=f"Xp^-{p + 1}")


def rep_derived(m, which: str, p: int = 1) -> Representative:
    """Derived models built from the plus/minus atoms.

    ``which`` is one of ``"x^-p"``, ``"x^-p sgn"`` (both with exponent
    ``-p``, ``p >= 1``), ``"xplus_i0"``, ``"xminus_i0"`` (exponent
    ``-p-1``, ``p >= 0``), ``"ln_abs"`` or ``"ln_sgn"`` (``p`` ignored).
    """
    if which in ("x^-p", "x^-p sgn"):
        if p < 1:
            raise RepresentativeError("x^-p needs p >= 1")
        plus = rep_x_neg_int(m, "+", p - 1)
        minus = rep_x_neg_int(m, "-", p - 1)
        sgn = (-1) ** p if which == "x^-p" else -((-1) ** p)
        rep = linear_combination([(1, plus), (sgn, minus)])
        label = f"X^-{p}" if which == "x^-p" else f"Xsgn^-{p}"
        return replace(rep, label=label)
    if which in ("xplus_i0", "xminus_i0"):
        base = rep_derived(m, "x^-p", p + 1)
        # (x +/- i0)^(-p-1) = x^(-p-1) -/+ ((-1)^p i pi / p!) delta^(p)
        c = (-1) ** p * 1j * working_pi(m.dtype) / math.factorial(p)
        c = -c if which == "xplus_i0" else c
        rep = linear_combination([(1, base), (c, rep_delta(m, p))])
        return replace(rep, label=("Xi0p^-" if which == "xplus_i0" else "Xi0m^-") + str(p + 1))
    if which in ("ln_abs", "ln_sgn"):
        sgn = 1 if which == "ln_abs" else -1
        rep = linear_combination([(1, rep_ln(m, "+")), (sgn, rep_ln(m, "-"))])
        return replace(rep, label="LnAbs" if which == "ln_abs" else "LnSgn")
    raise RepresentativeError(f"unknown derived kind {which!r}; use one of {DERIVED_KINDS}")
