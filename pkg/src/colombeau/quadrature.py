"""Adaptive Gauss-Legendre quadrature with singular-endpoint handling.

Every integral in the package goes through :func:`adaptive_panels`, a
vectorised bisection engine that advances all active panels of all
problems in one numpy call per sweep.  Panels use the 8-point
Gauss-Legendre rule; the 4-point rule on the same panel supplies the
error estimate.

Endpoint singularities are regularised by a change of variables before
the panels are built:

* ``"log"``: ``x = p + d*exp(-r)``, ``r`` in ``[0, R]``
* algebraic ``(x - p)**e`` with ``-1 < e < 0``: ``x = p + d*v**(1/(1+e))``

Both work in double and in extended (``np.longdouble``) precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Integrand",
    "QuadResult",
    "QuadratureError",
    "adaptive_panels",
    "complex_dtype",
    "working_pi",
    "gauss_legendre",
    "integrate",
    "pair",
]

# Upper limit of the exp(-r) map; exp(-60) ~ 9e-27 is below both epsilons.
LOG_MAP_RANGE = 60.0
# Polynomial map for positive non-integer endpoint exponents.
POWER_MAP_DEGREE = 8
MAX_LEVEL = 52
MAX_ACTIVE_PANELS = 2_000_000
# Safety factor on the 8-point error model (see adaptive_panels).
ERR_SAFETY = 4.0

Singularity = Union[str, float]


class QuadratureError(RuntimeError):
    """Adaptive subdivision hit its depth or size limit.

    ``result`` carries the best estimate so callers can decide whether to
    retry with a looser tolerance.
    """

    def __init__(self, message: str, result: "QuadResult"):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class QuadResult:
    value: complex
    error_estimate: float
    panels_used: int
    l1: float = 0.0
    roundoff_limited: bool = False


@dataclass(frozen=True)
class Integrand:
    """A vectorised integrand plus its forced panel boundaries.

    ``singularities`` maps a breakpoint to ``"log"`` or to the exponent of
    an algebraic endpoint singularity ``|x - p|^e`` with ``e > -1``.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    breakpoints: Sequence[float] = ()
    singularities: Mapping[float, Singularity] = field(default_factory=dict)

    def __call__(self, x):
        return self.eval(x)


def working_pi(dtype):
    """pi rounded in ``dtype`` rather than in double."""
    return 4 * np.arctan(np.dtype(dtype).type(1))


def complex_dtype(dtype) -> type:
    return np.clongdouble if np.dtype(dtype) == np.dtype(np.longdouble) else np.complex128


@lru_cache(maxsize=None)
def _legendre_rule(n: int, dtype_name: str):
    dtype = np.dtype(dtype_name).type
    x64, _ = np.polynomial.legendre.leggauss(n)
    x = x64.astype(dtype)
    # Newton polish so longdouble rules are accurate to longdouble eps.
    for _ in range(3):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for k in range(2, n + 1):
            p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
        dp = n * (x * p1 - p0) / (x * x - 1)
        x = x - p1 / dp
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1)
    w = 2 / ((1 - x * x) * dp * dp)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_legendre(n: int, dtype=np.float64):
    """Nodes and weights of the ``n``-point rule on ``[-1, 1]`` in ``dtype``."""
    return _legendre_rule(n, np.dtype(dtype).name)


def adaptive_panels(func, lo, hi, owner, n_owner, tol, dtype=np.float64,
                    max_level=MAX_LEVEL, rtol=0.0, raw_error=None):
    """Integrate many problems at once by vectorised panel bisection.

    Parameters
    ----------
    func : callable
        ``func(x, k)`` evaluates the integrand of problem ``k[i]`` at
        ``x[i]`` for flat arrays ``x`` and ``k``.
    lo, hi, owner : array_like
        Initial panels and the problem each one belongs to.
    n_owner : int
        Number of problems.
    tol : float or array_like
        Absolute tolerance per problem, shared out in proportion to
        panel length.
    rtol : float
        Relative floor: after the first sweep each problem's tolerance is
        raised to ``rtol`` times its estimated integral of ``|f|``.
    raw_error : array_like of bool, optional
        Problems whose integrand is not analytic on its panels; these use
        ``|i8 - i4|`` itself as the error estimate.

    Returns
    -------
    value, error, l1, panels, failed, limited : ndarray
        Per-problem integral, error estimate, integral of ``|f|``, number
        of accepted panels, a flag set when the depth limit was hit and a
        flag set when acceptance relied on the roundoff criterion.
    """
    x8, w8 = gauss_legendre(8, dtype)
    x4, w4 = gauss_legendre(4, dtype)
    nodes = np.concatenate([x8, x4])
    eps = float(np.finfo(dtype).eps)

    lo = np.asarray(lo, dtype=dtype).ravel()
    hi = np.asarray(hi, dtype=dtype).ravel()
    owner = np.asarray(owner, dtype=np.intp).ravel()
    tol = np.broadcast_to(np.asarray(tol, dtype=np.float64), (n_owner,))
    if raw_error is not None:
        raw_error = np.broadcast_to(np.asarray(raw_error, dtype=bool), (n_owner,))

    keep = hi > lo
    lo, hi, owner = lo[keep], hi[keep], owner[keep]
    span = np.zeros(n_owner, dtype=dtype)
    np.add.at(span, owner, hi - lo)
    span = np.where(span > 0, span, 1)

    value = None
    err = np.zeros(n_owner)
    l1 = np.zeros(n_owner)
    panels = np.zeros(n_owner, dtype=np.int64)
    failed = np.zeros(n_owner, dtype=bool)
    limited = np.zeros(n_owner, dtype=bool)
    level = np.zeros(lo.size, dtype=np.int64)
    parent = np.full(lo.size, np.inf)
    first = True

    while lo.size:
        c = (lo + hi) / 2
        r = (hi - lo) / 2
        x = c[:, None] + r[:, None] * nodes
        fx = np.asarray(func(x.ravel(), np.repeat(owner, nodes.size)))
        fx = fx.reshape(lo.size, nodes.size)
        if not np.all(np.isfinite(fx)):
            bad = int(owner[~np.all(np.isfinite(fx), axis=1)][0])
            raise QuadratureError(
                f"integrand not finite in problem {bad}",
                QuadResult(complex("nan"), float("inf"), 0),
            )
        if value is None:
            vtype = complex_dtype(dtype) if np.iscomplexobj(fx) else dtype
            value = np.zeros(n_owner, dtype=vtype)
        i8 = r * (fx[:, :8] @ w8)
        i4 = r * (fx[:, 8:] @ w4)
        a1 = (r * (np.abs(fx[:, :8]) @ w8)).astype(np.float64)
        # |i8 - i4| measures the 4-point error; the 8-point error scales
        # roughly as its 3/2 power relative to the panel's L1 mass.
        raw = np.abs(i8 - i4).astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            e = np.where(a1 > 0, np.minimum(raw, ERR_SAFETY * a1 * (raw / a1) ** 1.5), raw)
        if raw_error is not None:
            e = np.where(raw_error[owner], raw, e)
        if first and rtol > 0:
            scale = np.zeros(n_owner)
            np.add.at(scale, owner, a1)
            tol = np.maximum(tol, rtol * scale)
        first = False

        local = tol[owner] * ((hi - lo) / span[owner]).astype(np.float64)
        noise = eps * a1
        stalled = (e <= 1e3 * noise) & (e > 0.25 * parent)
        at_noise = e <= 16 * noise
        done = (e <= local) | at_noise | stalled
        too_deep = ~done & (level >= max_level)
        accept = done | too_deep

        if accept.any():
            k = owner[accept]
            np.add.at(value, k, i8[accept])
            np.add.at(err, k, e[accept])
            np.add.at(l1, k, a1[accept])
            np.add.at(panels, k, 1)
            limited[owner[accept & (at_noise | stalled) & (e > local)]] = True
            failed[owner[too_deep]] = True

        split = ~accept
        if not split.any():
            break
        if split.sum() * 2 > MAX_ACTIVE_PANELS:
            k = owner[split]
            np.add.at(value, k, i8[split])
            np.add.at(err, k, e[split])
            failed[k] = True
            break
        lo_s, hi_s, c_s = lo[split], hi[split], c[split]
        lo = np.concatenate([lo_s, c_s])
        hi = np.concatenate([c_s, hi_s])
        owner = np.concatenate([owner[split], owner[split]])
        level = np.tile(level[split] + 1, 2)
        parent = np.tile(e[split] / 2, 2)

    if value is None:
        value = np.zeros(n_owner, dtype=dtype)
    err = err + eps * l1
    return value, err, l1, panels, failed, limited


def _pieces(a, b, breakpoints, singularities):
    pts = {float(a), float(b)}
    pts.update(float(p) for p in breakpoints if a < p < b)
    pts.update(float(p) for p in singularities if a < p < b)
    pts = sorted(pts)
    out = []
    for p, q in zip(pts[:-1], pts[1:]):
        sp = singularities.get(p) if p in singularities else None
        sq = singularities.get(q) if q in singularities else None
        if sp is not None and sq is not None:
            m = (p + q) / 2
            out.append((p, m, sp, None))
            out.append((m, q, None, sq))
        else:
            out.append((p, q, sp, sq))
    return out


def _mapped(f, p, q, left, right, dtype):
    """Return (g, s0, s1) with the integral of f over [p, q] equal to that of g."""
    d = dtype(q) - dtype(p)
    p_, q_ = dtype(p), dtype(q)
    if left is None and right is None:
        return f, p_, q_
    sing = left if left is not None else right
    sign = 1 if left is not None else -1
    base = p_ if left is not None else q_
    if sing == "log":
        def g(s):
            t = d * np.exp(-s)
            return f(base + sign * t) * t
        # Keep nodes an ulp away from a nonzero endpoint; the mass cut off is
        # of order eps*|base|*|ln(eps*|base|)|.
        top = LOG_MAP_RANGE
        if base != 0:
            gap = float(np.finfo(dtype).eps) * abs(float(base))
            top = min(top, math.log(float(d) / gap))
        return g, dtype(0), dtype(top)
    e = float(sing)
    if not e > -1.0:
        raise ValueError(f"algebraic exponent must exceed -1, got {e}")
    if e > 0:
        # Weak singularity: t = d v^K leaves the smooth factor v^(K e + K - 1).
        K = dtype(POWER_MAP_DEGREE)

        def g(v):
            t = d * v ** K
            return f(base + sign * t) * d * K * v ** (K - 1)
        return g, dtype(0), dtype(1)
    power = dtype(1) / (1 + dtype(e))

    def g(v):
        t = d * v ** power
        return f(base + sign * t) * d * power * v ** (power - 1)
    return g, dtype(0), dtype(1)


def integrate(f, a, b, tol=1e-10, *, breakpoints=(), singularities=None,
              dtype=np.float64, max_level=MAX_LEVEL) -> QuadResult:
    """Adaptive integral of a vectorised function over ``[a, b]``.

    ``f`` is a callable or an :class:`Integrand`; the latter contributes
    its own breakpoints and endpoint singularities.  Raises
    :class:`QuadratureError` when the depth limit is reached.
    """
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    sing = dict(singularities or {})
    if isinstance(f, Integrand):
        breakpoints = tuple(breakpoints) + tuple(f.breakpoints)
        sing.update(f.singularities)
        fn = f.eval
    else:
        fn = f
    sing = {float(k): v for k, v in sing.items()}
    pieces = _pieces(a, b, breakpoints, sing)
    maps = [_mapped(fn, p, q, sl, sr, np.dtype(dtype).type) for p, q, sl, sr in pieces]
    # An algebraic map leaves terms like v**(4/3) at the endpoint, outside
    # the analytic error model.
    raw = [isinstance(sl, (int, float)) or isinstance(sr, (int, float))
           for _, _, sl, sr in pieces]

    def batched(x, k):
        out = None
        for j, (g, _, _) in enumerate(maps):
            sel = k == j
            if not sel.any():
                continue
            v = np.asarray(g(x[sel]))
            if out is None:
                out = np.zeros(x.shape, dtype=np.result_type(v.dtype, x.dtype))
            elif np.iscomplexobj(v) and not np.iscomplexobj(out):
                out = out.astype(np.result_type(v.dtype, out.dtype))
            out[sel] = v
        return out

    lo = [m[1] for m in maps]
    hi = [m[2] for m in maps]
    n = len(maps)
    value, err, l1, npan, failed, limited = adaptive_panels(
        batched, lo, hi, np.arange(n), n, tol / n, dtype=dtype, max_level=max_level,
        raw_error=raw if any(raw) else None)
    total = value.sum()
    res = QuadResult(
        value=total if np.iscomplexobj(total) else total,
        error_estimate=float(err.sum()),
        panels_used=int(npan.sum()),
        l1=float(l1.sum()),
        roundoff_limited=bool(limited.any()),
    )
    if failed.any():
        raise QuadratureError(f"maximum depth exceeded integrating over [{a}, {b}]", res)
    return res


def pair(rep, psi, sigma: float, tol: float = 1e-10) -> QuadResult:
    """Integral of ``rep(sigma, x) * psi(x)`` over the common support.

    ``rep`` is duck-typed: it needs ``eval(sigma, x)``,
    ``support(sigma)`` and ``singular_points(sigma)`` (see
    :mod:`colombeau.representatives`).  The returned value may be complex.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    R = float(psi.support_radius)
    s_lo, s_hi = rep.support(sigma)
    a, b = max(-R, s_lo), min(R, s_hi)
    dtype = rep.dtype
    if not a < b:
        return QuadResult(0j, 0.0, 0)
    pts = [p for p in rep.singular_points(sigma) if a < p < b]
    pts.append(0.0)
    # Grade towards the compact transition zone of half-line representatives.
    core = rep.core_radius(sigma)
    if core > 0:
        r = 2 * core
        while r < R:
            pts.extend((r, -r))
            r *= 2
    sigma_t = np.dtype(dtype).type(sigma)

    def f(x):
        return rep.eval(sigma_t, x) * psi(x)

    return integrate(f, a, b, tol, breakpoints=sorted(set(pts)), dtype=dtype)
