"""Convolution primitives of bump kernels against step, power and log kernels.

For a bump ``b(t) = A * B((t - c)/h)`` and ``z = (w - c)/h`` every forward
primitive reduces to the unit bump ``B`` on ``[-1, 1]``::

    int_{t<w} (w - t)^a b^(j)(t) dt = A h^(1+a-j) P_{a,j}(z)
    int_{t<w} ln(w - t) b^(j)(t) dt = A h^(1-j) (ln h S_j(z) + L_j(z))

with ``P_{a,j}(z) = int_{s<z} (z-s)^a B^(j)(s) ds``, ``S_j = P_{0,j}`` and
``L_j(z) = int_{s<z} ln(z-s) B^(j)(s) ds``.

Evaluation of a unit primitive splits the real line into

* ``z <= -1``: zero;
* ``-1 < z < Z_FAR``: adaptive quadrature in the bump coordinate
  ``s = tanh(u)``, with the log or algebraic endpoint removed by a change
  of variables.  By default these values are served from a piecewise
  Chebyshev table whose nodes come from the same quadrature and whose
  panels are refined until off-node checks agree to a few ulps;
* ``z >= Z_FAR``: closed-form moment sums (integer powers) or the moment
  series of ``log1p(-s/z)`` and ``(1 - s/z)^a``.

Backward primitives (``t > w``) follow from the mirrored bump.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mollifier import BumpKernel, _derivative_polys, unit_bump_derivative
from .quadrature import adaptive_panels, complex_dtype, integrate, working_pi

__all__ = [
    "backward",
    "forward",
    "inner_mode",
    "kernel_primitive",
    "set_inner_mode",
    "unit_primitive",
]

# Relative accuracy floor of inner integrals, in units of eps.
INNER_RTOL_EPS = 4.0
# From here on the moment series is used (ratio 1/Z_FAR per term).
Z_FAR = 3.0
_N_MOMENTS = 120
# Bump coordinate: s = tanh(u) turns B(s) ds into exp(-cosh(u)^2) sech(u)^2 du,
# an entire integrand with doubly exponential decay.  Below u = -U_CUT every
# primitive in use is under 1e-100.
U_CUT = 3.6
# t-range of the double-exponential log map: delta/D down to exp(-pi sinh 4) ~ 1e-37.
DE_RANGE = 4.0
# Largest u = atanh(z) tabulated: 1 - tanh(23) ~ 2e-20 is below both epsilons.
U_EDGE = 23.0
CHEB_DEGREE = 16
TABLE_TOL_EPS = 8.0
_TABLE_MAX_DEPTH = 10

_mode = {"value": "table"}
_lock = threading.Lock()


def set_inner_mode(mode: str) -> None:
    """Select ``"table"`` (default) or ``"direct"`` evaluation of unit primitives."""
    if mode not in ("table", "direct"):
        raise ValueError("inner mode must be 'table' or 'direct'")
    _mode["value"] = mode


def inner_mode() -> str:
    return _mode["value"]


def _eps(dtype) -> float:
    return float(np.finfo(dtype).eps)


@lru_cache(maxsize=None)
def _moments(dtype_name: str) -> np.ndarray:
    """``mu_k = int s^k B(s) ds`` for k < _N_MOMENTS (odd ones vanish)."""
    dtype = np.dtype(dtype_name).type
    mu = np.zeros(_N_MOMENTS, dtype=dtype)
    for k in range(0, _N_MOMENTS, 2):
        mu[k] = integrate(lambda s, k=k: s ** k * unit_bump_derivative(s), -1, 1,
                          1e-30, breakpoints=(0.0,), dtype=dtype).value
    return mu


def _derivative_moment(k: int, j: int, mu):
    """``int s^k B^(j)(s) ds`` by repeated integration by parts."""
    if k < j:
        return mu[0] * 0
    return (-1) ** j * math.perm(k, j) * mu[k - j]


def _bump_in_u(u, j: int):
    """``B^(j)(tanh u) * sech(u)^2`` without forming ``1 - s^2``."""
    c2 = np.cosh(u) ** 2
    coef = _derivative_polys()[j]
    s = np.tanh(u)
    acc = np.full_like(u, coef[-1])
    for c in coef[-2::-1]:
        acc = acc * s + c
    return acc * np.exp(-c2 + (2 * j - 1) * np.log(c2))


def _run(integrand, lo, hi, n_panels, n, dtype):
    """Batched integral over ``[lo[k], hi[k]]`` split into equal panels."""
    frac = np.linspace(0, 1, n_panels + 1).astype(dtype)
    lo_k = lo[:, None] + (hi - lo)[:, None] * frac[:-1]
    hi_k = lo[:, None] + (hi - lo)[:, None] * frac[1:]
    owner = np.repeat(np.arange(n), n_panels)
    value, *_ = adaptive_panels(integrand, lo_k.ravel(), hi_k.ravel(), owner, n, 0.0,
                                dtype=dtype, rtol=INNER_RTOL_EPS * _eps(dtype))
    return value


def _is_int_power(kind, a) -> bool:
    return kind == "power" and float(a).is_integer() and a >= 0


# -- direct quadrature ---------------------------------------------------------

def _ln_cosh(u):
    au = np.abs(u)
    return au + np.log1p(np.exp(-2 * au)) - np.log(u.dtype.type(2))


def _ln_gap(u, delta, uz):
    """``ln(tanh(uz) - tanh(u))`` with ``delta = uz - u > 0``, free of cancellation.

    ``tanh(uz) - tanh(u) = exp(-u) (1 - exp(-2 delta)) / ((1 + exp(-2 uz)) cosh(u))``.
    """
    return (-u + np.log(-np.expm1(-2 * delta)) - np.log1p(np.exp(-2 * uz)) - _ln_cosh(u))


def _kernel_in_u(kind, a, j, u, delta, uz):
    """Kernel ``k(z - s)`` times ``B^(j)(s) ds/du`` at ``u = uz - delta``."""
    lg = _ln_gap(u, delta, uz)
    if kind == "log":
        k = lg
    else:
        k = np.exp(u.dtype.type(a) * lg)
    return k * _bump_in_u(u, j)


# Width (in u) of the stretch next to the singular endpoint that gets a
# singularity-removing map; the rest uses plain panels.
_NEAR = 1.0


def _direct_inside(kind: str, a, j: int, z):
    """``int_{-1}^{z} k(z - s) B^(j)(s) ds`` for ``-1 < z < 1`` in the bump coordinate."""
    dtype = z.dtype.type
    uz = np.arctanh(z)
    out = np.zeros_like(z)
    live = uz > -U_CUT
    if not live.any():
        return out
    uz = uz[live]
    n = uz.size
    singular = not _is_int_power(kind, a)
    # Past U_CUT the bump has no mass, so the endpoint singularity is irrelevant.
    top = np.minimum(uz, dtype(U_CUT))
    near = np.where(singular & (uz < U_CUT), np.minimum(dtype(_NEAR), uz + dtype(U_CUT)), 0)
    plain_hi = top - near

    def plain(u, k):
        return _kernel_in_u(kind, a, j, u, uz[k] - u, uz[k])
    vals = np.zeros(n, dtype=dtype)
    has_plain = plain_hi > -U_CUT
    if has_plain.any():
        idx = np.nonzero(has_plain)[0]
        vals[idx] = _run(lambda u, k: plain(u, idx[k]), np.full(idx.size, -U_CUT, dtype),
                         plain_hi[idx], 4, idx.size, dtype)

    idx = np.nonzero(near > 0)[0]
    if idx.size:
        uzs, dn = uz[idx], near[idx]
        if kind == "log":
            # delta = dn / (1 + exp(-pi sinh t)): double-exponential clustering at
            # the log endpoint delta -> 0.
            pi = dtype(np.pi)

            def sing(t, k):
                e = np.exp(-pi * np.sinh(t))
                delta = dn[k] / (1 + e)
                jac = delta * pi * np.cosh(t) * e / (1 + e)
                return _kernel_in_u(kind, a, j, uzs[k] - delta, delta, uzs[k]) * jac
            vals[idx] += _run(sing, np.full(idx.size, -DE_RANGE, dtype),
                              np.full(idx.size, DE_RANGE, dtype), 4, idx.size, dtype)
        else:
            # delta = dn v^(1/(1+a)) absorbs the endpoint power exactly.
            aa = dtype(a)
            p = 1 / (1 + aa)

            def sing(v, k):
                delta = dn[k] * v ** p
                u = uzs[k] - delta
                safe = np.where(delta > 0, delta, 1)
                # (z - s)^a = delta^a * [(z - s)/delta]^a; delta^a d(delta) = dn^(1+a) p dv
                rest = np.where(delta > 0, _ln_gap(u, safe, uzs[k]) - np.log(safe), 0)
                return np.exp(aa * rest) * dn[k] ** (1 + aa) * p * _bump_in_u(u, j)
            vals[idx] += _run(sing, np.zeros(idx.size, dtype), np.ones(idx.size, dtype),
                              2, idx.size, dtype)
    out[live] = vals
    return out


def _direct_beyond(kind: str, a, j: int, z):
    """``int_{-1}^{1} k(z - s) B^(j)(s) ds`` for ``z >= 1`` by quadrature."""
    dtype = z.dtype.type
    n = z.size
    mu = _moments(np.dtype(dtype).name)
    if kind == "log":
        def f(u, k):
            return np.log1p(-np.tanh(u) / z[k]) * _bump_in_u(u, j)
        lead = np.log(z) * mu[0] if j == 0 else 0
        return lead + _run(f, np.full(n, -U_CUT, dtype), np.full(n, U_CUT, dtype), 4, n, dtype)
    aa = dtype(a)

    def f(u, k):
        return (1 - np.tanh(u) / z[k]) ** aa * _bump_in_u(u, j)
    return z ** aa * _run(f, np.full(n, -U_CUT, dtype), np.full(n, U_CUT, dtype), 4, n, dtype)


def _direct(kind, a, j, z):
    out = np.zeros_like(z)
    inside = z < 1
    if inside.any():
        out[inside] = _direct_inside(kind, a, j, z[inside])
    if (~inside).any():
        out[~inside] = _direct_beyond(kind, a, j, z[~inside])
    return out


# -- far field -----------------------------------------------------------------

def _binom_general(a, k: int, dtype=np.float64):
    out = dtype(1)
    a = dtype(a)
    for i in range(k):
        out *= (a - i) / (i + 1)
    return out


def _far(kind, a, j, z):
    """Closed form or moment series for ``z >= 1`` (series only from Z_FAR)."""
    dtype = z.dtype.type
    mu = _moments(np.dtype(dtype).name)
    if _is_int_power(kind, a):
        ai = int(a)
        acc = np.zeros_like(z)
        for k in range(ai + 1):
            m = _derivative_moment(k, j, mu)
            if m:
                acc = acc + math.comb(ai, k) * (-1) ** k * m * z ** (ai - k)
        return acc
    zinv = 1 / z
    acc = np.zeros_like(z)
    if kind == "log":
        # log1p(-s/z) = -sum_{k>=1} (s/z)^k / k; ln z carries the mass.
        term = zinv.copy()
        for k in range(1, _N_MOMENTS):
            m = _derivative_moment(k, j, mu)
            if m:
                acc = acc - m * term / k
            term = term * zinv
        return acc + (np.log(z) * mu[0] if j == 0 else 0)
    # (1 - s/z)^a = sum_k binom(a, k) (-s/z)^k
    term = np.ones_like(z)
    for k in range(_N_MOMENTS):
        m = _derivative_moment(k, j, mu)
        if m:
            acc = acc + _binom_general(a, k, dtype) * (-1) ** k * m * term
        term = term * zinv
    return z ** dtype(a) * acc


# -- Chebyshev tables ------------------------------------------------------------

@dataclass(frozen=True)
class _ChebPiece:
    """Piecewise Chebyshev interpolant on sorted panels of one coordinate."""

    edges_lo: np.ndarray
    edges_hi: np.ndarray
    coef: np.ndarray  # (n_panels, degree + 1)

    def __call__(self, x):
        idx = np.searchsorted(self.edges_lo, x, side="right") - 1
        idx = np.clip(idx, 0, self.edges_lo.size - 1)
        lo, hi = self.edges_lo[idx], self.edges_hi[idx]
        t = (2 * x - lo - hi) / (hi - lo)
        c = self.coef[idx]
        # Clenshaw recurrence
        b1 = np.zeros_like(x)
        b2 = np.zeros_like(x)
        for k in range(c.shape[1] - 1, 0, -1):
            b1, b2 = 2 * t * b1 - b2 + c[:, k], b1
        return t * b1 - b2 + c[:, 0]


def _cheb_nodes(n, dtype):
    k = np.arange(n, dtype=dtype)
    return np.cos(working_pi(dtype) * (2 * k + 1) / (2 * n))


def _cheb_coef(values, dtype):
    """Coefficients from values at first-kind nodes (rows are panels)."""
    n = values.shape[1]
    k = np.arange(n, dtype=dtype)
    theta = working_pi(dtype) * (2 * k + 1) / (2 * n)
    T = np.cos(np.outer(np.arange(n, dtype=dtype), theta))  # T_m(x_k)
    c = values @ T.T * (dtype(2) / n)
    c[:, 0] /= 2
    return c


# Off-node check points (fractions of the panel in [-1, 1]).
_CHECK = (-0.93, -0.61, -0.17, 0.29, 0.71, 0.97)


def _build_piece(func, lo, hi, n_init, dtype, tol):
    """Refine panels of [lo, hi] until the interpolant matches ``func`` at checks."""
    nodes = _cheb_nodes(CHEB_DEGREE + 1, dtype)
    checks = np.asarray(_CHECK, dtype=dtype)
    edges = np.linspace(lo, hi, n_init + 1).astype(dtype)
    todo_lo, todo_hi = edges[:-1], edges[1:]
    parent_err = np.full(todo_lo.size, np.inf)
    done_lo, done_hi, done_c = [], [], []
    depth = 0
    while todo_lo.size:
        mid = (todo_lo + todo_hi) / 2
        rad = (todo_hi - todo_lo) / 2
        xs = mid[:, None] + rad[:, None] * nodes
        xc = mid[:, None] + rad[:, None] * checks
        vals = func(np.concatenate([xs.ravel(), xc.ravel()]))
        fv = vals[:xs.size].reshape(xs.shape)
        fc = vals[xs.size:].reshape(xc.shape)
        coef = _cheb_coef(fv, dtype)
        piece = _ChebPiece(todo_lo, todo_hi, coef)
        approx = np.stack([piece(xc[:, i]) for i in range(checks.size)], axis=1)
        err = np.max(np.abs(approx - fc), axis=1).astype(np.float64)
        # A panel whose error stopped shrinking under bisection is at the
        # noise floor of ``func``; accept it if that floor is modest.
        stalled = (err > 0.25 * parent_err) & (err <= 64 * tol)
        bad = (err > tol) & ~stalled
        if depth >= _TABLE_MAX_DEPTH:
            bad[:] = False
        good = ~bad
        done_lo.append(todo_lo[good])
        done_hi.append(todo_hi[good])
        done_c.append(coef[good])
        todo_lo = np.concatenate([todo_lo[bad], mid[bad]])
        todo_hi = np.concatenate([mid[bad], todo_hi[bad]])
        parent_err = np.concatenate([err[bad], err[bad]])
        # _ChebPiece looks panels up by searchsorted, so keep them sorted.
        order = np.argsort(todo_lo)
        todo_lo, todo_hi, parent_err = todo_lo[order], todo_hi[order], parent_err[order]
        depth += 1
    lo_all = np.concatenate(done_lo)
    order = np.argsort(lo_all)
    return _ChebPiece(lo_all[order], np.concatenate(done_hi)[order],
                      np.concatenate(done_c)[order])


@dataclass(frozen=True)
class _Table:
    """Interpolants in coordinates that send the bump edge z = 1 to infinity.

    ``u = atanh(z)`` on ``(-1, 1)`` and ``v = atanh(1/z)`` on ``[1, Z_FAR)``;
    in these variables the non-analytic behaviour at ``z = 1`` becomes
    doubly exponentially small.
    """

    inner: _ChebPiece
    outer: _ChebPiece | None

    def __call__(self, z):
        out = np.empty_like(z)
        left = z < 1
        if left.any():
            u = np.clip(np.arctanh(z[left]), -U_CUT, U_EDGE)
            out[left] = self.inner(u)
        if (~left).any():
            with np.errstate(divide="ignore"):      # z == 1 maps to +inf, clipped below
                v = np.minimum(np.arctanh(1 / z[~left]), U_EDGE)
            out[~left] = self.outer(v)
        return out


@lru_cache(maxsize=None)
def _table(kind: str, a, j: int, dtype_name: str) -> _Table:
    dtype = np.dtype(dtype_name).type
    z_hi = 1.0 if _is_int_power(kind, a) else Z_FAR

    def via_u(u):
        return _direct(kind, a, j, np.tanh(u))

    def via_v(v):
        return _direct(kind, a, j, 1 / np.tanh(v))

    # Scale for the absolute check tolerance.
    probe = np.linspace(-0.95, z_hi, 41).astype(dtype)
    scale = max(1.0, float(np.max(np.abs(_direct(kind, a, j, probe)))))
    tol = TABLE_TOL_EPS * _eps(dtype) * scale
    inner = _build_piece(via_u, dtype(-U_CUT), dtype(U_EDGE), 24, dtype, tol)
    outer = None
    if z_hi > 1:
        outer = _build_piece(via_v, dtype(np.arctanh(1 / z_hi)), dtype(U_EDGE), 16, dtype, tol)
    return _Table(inner, outer)


def _get_table(kind, a, j, dtype):
    with _lock:
        return _table(kind, float(a), j, np.dtype(dtype).name)


# -- public unit primitive ----------------------------------------------------------

def unit_primitive(kind: str, a, j: int, z, mode: str | None = None):
    """Unit-bump primitive ``P_{a,j}`` (``kind="power"``) or ``L_j`` (``kind="log"``)."""
    z = np.asarray(z)
    if not np.issubdtype(z.dtype, np.floating):
        z = z.astype(np.float64)
    dtype = z.dtype.type
    mode = mode or _mode["value"]
    if kind not in ("power", "log"):
        raise ValueError(f"unknown kernel kind {kind!r}")
    if kind == "power" and not float(a) > -1:
        raise ValueError("power kernel needs a > -1")
    if _is_int_power(kind, a):
        ai = int(a)
        if ai == 0 and j >= 1:
            return unit_bump_derivative(z, j - 1)
        if ai >= 1 and j >= 1:
            # Parts: P_{a,j} = a P_{a-1,j-1}.
            return ai * unit_primitive(kind, ai - 1, j - 1, z, mode)
    out = np.zeros_like(z)
    z_hi = 1.0 if _is_int_power(kind, a) else Z_FAR
    far = z >= z_hi
    if far.any():
        out[far] = _far(kind, a, j, z[far])
    mid = (z > -1) & ~far
    if mid.any():
        zm = z[mid]
        if mode == "table":
            out[mid] = _get_table(kind, a, j, dtype)(zm)
        else:
            out[mid] = _direct(kind, a, j, zm)
    return out


def unit_step(j: int, z, mode: str | None = None):
    """``S_j(z) = int_{s<z} B^(j)(s) ds``."""
    return unit_primitive("power", 0, j, z, mode)


def unit_power(a, j: int, z, mode: str | None = None):
    """``P_{a,j}(z) = int_{s<z} (z-s)^a B^(j)(s) ds`` for ``a > -1``."""
    return unit_primitive("power", a, j, z, mode)


def unit_log(j: int, z, mode: str | None = None):
    """``L_j(z) = int_{s<z} ln(z-s) B^(j)(s) ds``."""
    return unit_primitive("log", 0, j, z, mode)


# -- bump and kernel level ------------------------------------------------------------

def forward(kind: str, comp: BumpKernel, j: int, w, a=0):
    """``int_{t<w} k(w - t) comp^(j)(t) dt``.

    ``kind`` is ``"step"`` (k = 1), ``"power"`` (k = x^a) or ``"log"``
    (k = ln x).
    """
    w = np.asarray(w)
    dt = w.dtype.type
    h = dt(comp.halfwidth)
    A = comp.amplitude if isinstance(comp.amplitude, np.floating) else dt(comp.amplitude)
    z = (w - dt(comp.center)) / h
    if kind == "step":
        return A * h ** (1 - j) * unit_step(j, z)
    if kind == "power":
        return A * h ** (1 + dt(a) - j) * unit_power(a, j, z)
    if kind == "log":
        core = unit_log(j, z)
        if comp.halfwidth != 1:
            core = core + np.log(h) * unit_step(j, z)
        return A * h ** (1 - j) * core
    raise ValueError(f"unknown kernel kind {kind!r}")


def backward(kind: str, comp: BumpKernel, j: int, w, a=0):
    """``int_{t>w} k(t - w) comp^(j)(t) dt`` through the mirrored bump."""
    w = np.asarray(w)
    return (-1) ** j * forward(kind, comp.mirrored(), j, -w, a)


def kernel_primitive(kernel, sigma, kind: str, j: int, w, a=0, direction: str = "+"):
    """Weighted sum of component primitives of a mollifier-like kernel."""
    w = np.asarray(w, dtype=kernel.dtype)
    out = np.zeros(w.shape, dtype=complex_dtype(kernel.dtype))
    prim = forward if direction == "+" else backward
    for comp, wt in zip(kernel.components, kernel.weights(sigma)):
        lo, hi = comp.support
        sel = (w > lo) if direction == "+" else (w < hi)
        if sel.any():
            out[sel] += wt * prim(kind, comp, j, w[sel], a)
    return out
