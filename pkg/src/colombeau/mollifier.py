"""Bump kernels, the model mollifier D(sigma, u) and moment mollifiers.

The model mollifier is ``D(sigma, u) = f(u) + lambda(sigma) * g(u)`` with
``f``, ``g`` even, disjointly supported, ``int f = 1``, ``int g = 0`` and
``lambda(sigma)**2 = (sigma - int f**2) / int g**2``.  For
``sigma < int f**2`` the root is imaginary and D is complex valued.

Both mollifier classes expose the same *kernel* surface used by the
representatives: ``components`` (a tuple of :class:`BumpKernel`),
``weights(sigma)``, ``l``, ``breakpoints``, ``dtype`` and ``mirror()``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .quadrature import complex_dtype, integrate

__all__ = [
    "BumpKernel",
    "MollifierError",
    "ModelMollifier",
    "MomentMollifier",
    "build_model_mollifier",
    "default_model_mollifier",
    "eval_D",
    "g_from_pairs",
    "lam",
    "lambda_",
    "make_bump",
    "make_moment_mollifier",
    "precision_dtype",
    "unit_bump_derivative",
]

DEFAULT_MAX_ORDER = 6
# Derivative polynomials are generated this far so that every kernel can
# differentiate one order past its own max_order in consistency checks.
_POLY_ORDERS = 12


class MollifierError(ValueError):
    pass


def precision_dtype(precision: str):
    if precision == "double":
        return np.float64
    if precision == "extended":
        return np.longdouble
    raise ValueError(f"unknown precision {precision!r} (use 'double' or 'extended')")


@lru_cache(maxsize=None)
def _derivative_polys() -> tuple[tuple[int, ...], ...]:
    # B(t) = exp(-1/q), q = 1 - t^2.  B^(n) = P_n(t) q^(-2n) B with
    # P_{n+1} = P_n' q^2 + (4 n t q - 2 t) P_n.
    P = np.polynomial.Polynomial
    q = P([1, 0, -1])
    t = P([0, 1])
    polys = [P([1])]
    for n in range(_POLY_ORDERS):
        p = polys[-1]
        polys.append(p.deriv() * q * q + (4 * n * t * q - 2 * t) * p)
    return tuple(tuple(int(round(c)) for c in p.coef) for p in polys)


def unit_bump_derivative(t, n: int = 0):
    """n-th derivative of ``exp(-1/(1 - t^2))`` (zero for ``|t| >= 1``)."""
    if n > _POLY_ORDERS:
        raise MollifierError(f"derivative order {n} exceeds {_POLY_ORDERS}")
    t = np.asarray(t)
    if not np.issubdtype(t.dtype, np.floating):
        t = t.astype(np.float64)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    if not inside.any():
        return out
    ti = t[inside]
    q = (1 - ti) * (1 + ti)
    coef = _derivative_polys()[n]
    acc = np.full_like(ti, coef[-1])
    for c in coef[-2::-1]:
        acc = acc * ti + c
    if n:
        out[inside] = acc * np.exp(-1 / q - 2 * n * np.log(q))
    else:
        out[inside] = np.exp(-1 / q)
    return out


def unit_bump_derivative_at_zero(n: int) -> Fraction:
    """Rational part r of ``B^(n)(0) = r * e^-1``."""
    return Fraction(_derivative_polys()[n][0])


@lru_cache(maxsize=None)
def _unit_moments(dtype_name: str) -> tuple:
    """Mass, even moments up to 8 and L1 norms of B^(j) for the unit bump."""
    dtype = np.dtype(dtype_name).type
    tol = 1e-17 if dtype is np.longdouble else 1e-15
    mass = integrate(lambda t: unit_bump_derivative(t), -1, 1, tol, dtype=dtype).value
    mom = [mass]
    for k in range(1, 9):
        if k % 2:
            mom.append(dtype(0))
        else:
            mom.append(integrate(lambda t, k=k: t ** k * unit_bump_derivative(t),
                                 -1, 1, tol, dtype=dtype).value)
    # L1 norms only feed roundoff estimates, so a dense trapezoid is plenty.
    grid = np.linspace(-1, 1, 40001)
    l1 = [np.trapezoid(np.abs(unit_bump_derivative(grid, j)), grid)
          for j in range(_POLY_ORDERS + 1)]
    return tuple(mom), tuple(float(v) for v in l1)


@dataclass(frozen=True)
class BumpKernel:
    """``amplitude * exp(-1/(1 - t^2))`` with ``t = (x - center)/halfwidth``."""

    center: float
    halfwidth: float
    amplitude: float = 1.0
    max_order: int = DEFAULT_MAX_ORDER

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise MollifierError(f"halfwidth must be positive, got {self.halfwidth}")
        if self.max_order < 5:
            raise MollifierError("max_order must be at least 5")

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.halfwidth, self.center + self.halfwidth

    def __call__(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, n: int = 0):
        if n > self.max_order:
            raise MollifierError(f"derivative order {n} exceeds max_order {self.max_order}")
        return self._derivative(x, n)

    def _derivative(self, x, n):
        x = np.asarray(x)
        dt = x.dtype.type if np.issubdtype(x.dtype, np.floating) else np.float64
        h = dt(self.halfwidth)
        t = (x - dt(self.center)) / h
        return dt(self.amplitude) * unit_bump_derivative(t, n) / h ** n

    def mass(self, dtype=np.float64):
        dt = np.dtype(dtype).type
        return dt(self.amplitude) * dt(self.halfwidth) * _unit_moments(np.dtype(dtype).name)[0][0]

    def moment(self, k: int, dtype=np.float64):
        """k-th moment about the bump's own center."""
        dt = np.dtype(dtype).type
        return (dt(self.amplitude) * dt(self.halfwidth) ** (k + 1)
                * _unit_moments(np.dtype(dtype).name)[0][k])

    def l1_norm(self, n: int = 0) -> float:
        return abs(self.amplitude) * self.halfwidth ** (1 - n) * _unit_moments("float64")[1][n]

    def mirrored(self) -> "BumpKernel":
        return BumpKernel(-self.center, self.halfwidth, self.amplitude, self.max_order)

    def scaled(self, factor: float) -> "BumpKernel":
        return BumpKernel(self.center, self.halfwidth, self.amplitude * factor, self.max_order)


def make_bump(center: float, halfwidth: float, amplitude: float = 1.0,
              max_order: int = DEFAULT_MAX_ORDER) -> BumpKernel:
    return BumpKernel(float(center), float(halfwidth), float(amplitude), max_order)


def _check_even(bumps: Sequence[BumpKernel], what: str):
    def key(b):
        return (round(b.center, 12), round(b.halfwidth, 12), round(b.amplitude, 12))
    pool = sorted(key(b) for b in bumps)
    mirror = sorted((round(-c, 12) + 0.0, h, a) for c, h, a in pool)
    pool = [(c + 0.0, h, a) for c, h, a in pool]
    if pool != mirror:
        raise MollifierError(f"{what} is not even")


def _check_disjoint(bumps: Sequence[BumpKernel]):
    spans = sorted(b.support for b in bumps)
    for (a0, b0), (a1, b1) in zip(spans[:-1], spans[1:]):
        # Touching supports are fine: the product vanishes pointwise.
        if a1 < b0 - 1e-12:
            raise MollifierError(f"overlapping supports [{a0}, {b0}] and [{a1}, {b1}]")


def _breakpoints(bumps) -> tuple[float, ...]:
    pts = set()
    for b in bumps:
        pts.update(b.support)
        pts.add(b.center)
    return tuple(sorted(pts))


def _component_sum(components, weights, u, order, dtype):
    u = np.asarray(u, dtype=dtype)
    out = np.zeros(u.shape, dtype=complex_dtype(dtype))
    for c, wt in zip(components, weights):
        lo, hi = c.support
        sel = (u > lo) & (u < hi)
        if sel.any():
            out[sel] += wt * c.derivative(u[sel], order)
    return out


@dataclass(frozen=True)
class ModelMollifier:
    """``D(sigma, u) = f(u) + lambda(sigma) g(u)`` with cached integrals."""

    f: tuple[BumpKernel, ...]
    g: tuple[BumpKernel, ...]
    l: float
    If: float
    Ig: float
    If2: float
    Ig2: float
    dtype: type = np.float64
    max_order: int = DEFAULT_MAX_ORDER
    breakpoints: tuple[float, ...] = field(default=(), repr=False)

    @property
    def components(self) -> tuple[BumpKernel, ...]:
        return self.f + self.g

    def weights(self, sigma):
        lam_s = lam(self, sigma)
        ones = np.ones(len(self.f), dtype=complex_dtype(self.dtype))
        return np.concatenate([ones, np.full(len(self.g), lam_s)])

    def __call__(self, sigma, u, order: int = 0):
        return eval_D(self, sigma, u, order)

    def mirror(self) -> "ModelMollifier":
        return self

    def f_eval(self, u, order=0):
        return _component_sum(self.f, [1] * len(self.f), u, order, self.dtype)

    def g_eval(self, u, order=0):
        return _component_sum(self.g, [1] * len(self.g), u, order, self.dtype)


def g_from_pairs(c1: float, h1: float, c2: float, h2: float,
                 max_order: int = DEFAULT_MAX_ORDER) -> tuple[BumpKernel, ...]:
    """Even g = alpha*(pair at +-c1) - beta*(pair at +-c2) with zero integral.

    The bump mass is proportional to the halfwidth, so ``alpha*h1 = beta*h2``
    makes the integral vanish exactly; alpha is fixed to 1.
    """
    alpha = 1.0
    beta = alpha * h1 / h2
    return (
        make_bump(-c1, h1, alpha, max_order), make_bump(c1, h1, alpha, max_order),
        make_bump(-c2, h2, -beta, max_order), make_bump(c2, h2, -beta, max_order),
    )


def build_model_mollifier(f_spec: Sequence[BumpKernel], g_spec: Sequence[BumpKernel],
                          precision: str = "double") -> ModelMollifier:
    """Validate ``f``/``g``, normalise ``int f = 1`` and cache the integrals."""
    dtype = precision_dtype(precision)
    f_spec, g_spec = tuple(f_spec), tuple(g_spec)
    if not f_spec or not g_spec:
        raise MollifierError("f and g need at least one bump each")
    _check_even(f_spec, "f")
    _check_even(g_spec, "g")
    _check_disjoint(f_spec + g_spec)
    max_order = min(b.max_order for b in f_spec + g_spec)

    If_raw = sum(b.mass(dtype) for b in f_spec)
    if If_raw == 0:
        raise MollifierError("f has zero integral and cannot be normalised")
    scale = 1 / If_raw
    # Keep the normalised amplitude in the working precision.
    f = tuple(BumpKernel(b.center, b.halfwidth, b.amplitude * scale, max_order)
              for b in f_spec)
    g = tuple(BumpKernel(b.center, b.halfwidth, b.amplitude, max_order) for b in g_spec)

    If = sum(b.mass(dtype) for b in f)
    Ig = sum(b.mass(dtype) for b in g)
    g_l1 = sum(abs(b.mass(dtype)) for b in g)
    if abs(Ig) > 1e-12 * g_l1:
        raise MollifierError(f"g must integrate to zero, got {float(Ig):.3e}")

    tol = 1e-18 if dtype is np.longdouble else 1e-14
    # Supports are disjoint, so squares integrate bump by bump.
    If2 = sum(integrate(lambda x, b=b: b(x) ** 2, *b.support, tol, dtype=dtype).value for b in f)
    Ig2 = sum(integrate(lambda x, b=b: b(x) ** 2, *b.support, tol, dtype=dtype).value for b in g)
    if not Ig2 > 0:
        raise MollifierError("degenerate g: int g^2 = 0")
    l = max(max(abs(lo), abs(hi)) for lo, hi in (b.support for b in f + g))
    return ModelMollifier(f=f, g=g, l=float(l), If=If, Ig=Ig, If2=If2, Ig2=Ig2,
                          dtype=dtype, max_order=max_order, breakpoints=_breakpoints(f + g))


@lru_cache(maxsize=4)
def default_model_mollifier(precision: str = "double") -> ModelMollifier:
    """f: normalised bump on [-1, 1]; g: pairs at +-3 and +-6 (halfwidth 1); l = 7."""
    return build_model_mollifier([make_bump(0, 1)], g_from_pairs(3, 1, 6, 1), precision)


def lam(m: ModelMollifier, sigma):
    """Principal root of ``(sigma - If2)/Ig2``; imaginary for ``sigma < If2``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    dt = m.dtype
    ratio = (dt(sigma) - m.If2) / m.Ig2
    # Build the complex value with +0 imaginary part so negative ratios map to +i.
    return np.sqrt(complex_dtype(dt)(ratio))


lambda_ = lam


def eval_D(m, sigma, u, order: int = 0):
    """``D^(order)(sigma, u)`` for a model or moment mollifier (complex array)."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if order > m.max_order:
        raise MollifierError(f"derivative order {order} exceeds max_order {m.max_order}")
    return _component_sum(m.components, m.weights(sigma), u, order, m.dtype)


@dataclass(frozen=True)
class MomentMollifier:
    """A compactly supported phi with ``int x^j phi = delta_0j`` for j <= q.

    The basis holds dilated even bumps for even j and antisymmetric bump
    pairs for odd j; ``coefficients`` solve the moment system.  The object
    is also a kernel with sigma-independent unit weights.
    """

    basis: tuple[tuple[BumpKernel, ...], ...]
    q: int
    coefficients: tuple[float, ...]
    dtype: type = np.float64
    max_order: int = DEFAULT_MAX_ORDER

    @property
    def components(self) -> tuple[BumpKernel, ...]:
        return tuple(b.scaled(float(c)) for c, group in zip(self.coefficients, self.basis)
                     for b in group)

    @property
    def l(self) -> float:
        return max(max(abs(lo), abs(hi)) for lo, hi in (b.support for b in self.components))

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return _breakpoints(self.components)

    def weights(self, sigma=None):
        return np.ones(len(self.components), dtype=complex_dtype(self.dtype))

    def __call__(self, x, order: int = 0):
        return eval_D(self, 1.0, x, order).real

    def mirror(self) -> "_MirroredKernel":
        return _MirroredKernel(self)


@dataclass(frozen=True)
class _MirroredKernel:
    """phi-check(x) = phi(-x) for the canonical embedding u * phi-check."""

    base: MomentMollifier

    @property
    def components(self):
        return tuple(b.mirrored() for b in self.base.components)

    @property
    def l(self):
        return self.base.l

    @property
    def breakpoints(self):
        return tuple(sorted(-p for p in self.base.breakpoints))

    @property
    def dtype(self):
        return self.base.dtype

    @property
    def max_order(self):
        return self.base.max_order

    def weights(self, sigma=None):
        return self.base.weights(sigma)

    def mirror(self):
        return self.base


def make_moment_mollifier(q: int, dilations: Sequence[float] | None = None,
                          precision: str = "double") -> MomentMollifier:
    """Solve for phi in A_q on ``[-1, 1]`` from a dilated bump basis.

    ``dilations[j]`` is the halfwidth scale of the j-th basis function.
    Even j: ``bump(0, r_j)``.  Odd j: ``bump(r_j/2, r_j/2) - bump(-r_j/2, r_j/2)``.
    """
    if q < 0:
        raise MollifierError("q must be non-negative")
    dtype = precision_dtype(precision)
    if dilations is None:
        dilations = [1.0 / (1 + j / 2) for j in range(q + 1)]
    dilations = [float(r) for r in dilations]
    if len(dilations) != q + 1:
        raise MollifierError(f"need {q + 1} dilations, got {len(dilations)}")
    if any(not 0 < r <= 1 for r in dilations):
        raise MollifierError("dilations must lie in (0, 1]")

    basis = []
    for j, r in enumerate(dilations):
        if j % 2 == 0:
            basis.append((make_bump(0, r),))
        else:
            basis.append((make_bump(r / 2, r / 2), make_bump(-r / 2, r / 2, -1.0)))

    # Moments of a bump about the origin by the binomial expansion around its center.
    def raw_moment(b: BumpKernel, j: int):
        return sum(math.comb(j, k) * dtype(b.center) ** (j - k) * b.moment(k, dtype)
                   for k in range(j + 1))

    A = np.array([[float(sum(raw_moment(b, j) for b in group)) for group in basis]
                  for j in range(q + 1)])
    rhs = np.zeros(q + 1)
    rhs[0] = 1.0
    if np.linalg.cond(A) > 1e12:
        raise MollifierError("moment system is singular for this basis")
    coef = np.linalg.solve(A, rhs)
    return MomentMollifier(basis=tuple(basis), q=q, coefficients=tuple(float(c) for c in coef),
                           dtype=dtype)
