"""Sweeps over sigma, asymptotic fits and association verdicts.

A pairing ``<F_sigma, psi>`` is computed on a geometric sigma grid and
fitted against a small basis of functions of sigma.  Divergent basis
elements (``1/sigma`` and logarithms) are judged for significance first;
if none is significant the constant term of a fit on the convergent
elements is the extrapolated limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import expr as E
from .mollifier import make_moment_mollifier
from .quadrature import QuadratureError, pair
from .reference import ReferenceDistribution, eval_reference
from .testfn import TestFunction

__all__ = [
    "BASIS",
    "CASES",
    "DEFAULT_BASIS",
    "DIVERGENT",
    "AssociationError",
    "AssociationReport",
    "Case",
    "SweepPlan",
    "SweepPoint",
    "embedding_counterexample",
    "evaluate_expression",
    "fit_and_judge",
    "sweep",
    "verify_case",
]

BASIS = {
    "sigma^-1 ln(sigma)": lambda s: np.log(s) / s,
    "sigma^-1": lambda s: 1 / s,
    "ln(sigma)^2": lambda s: np.log(s) ** 2,
    "ln(sigma)": np.log,
    "1": np.ones_like,
    "sigma ln(sigma)": lambda s: s * np.log(s),
    "sigma": lambda s: s,
    "sigma^2": lambda s: s * s,
}
# Ordered from the fastest growth down.
DIVERGENT = ("sigma^-1 ln(sigma)", "sigma^-1", "ln(sigma)^2", "ln(sigma)")
DEFAULT_BASIS = ("sigma^-1 ln(sigma)", "sigma^-1", "ln(sigma)", "1",
                 "sigma ln(sigma)", "sigma", "sigma^2")

SIGNIFICANCE = 100.0
DOMINANCE = 1e-3
PAIR_TOL = 1e-10
EXTENDED_PAIR_TOL = 1e-13
# Highest integer power of sigma carried by each convergent basis element.
_POWER = {"1": 0, "sigma ln(sigma)": 1, "sigma": 1, "sigma^2": 2}


class AssociationError(RuntimeError):
    """Too few surviving sigma points, or an unknown case."""


@dataclass(frozen=True)
class SweepPlan:
    """sigma grid, pairing tolerance and fit basis."""

    sigma_grid: tuple[float, ...] = tuple(2.0 ** -k for k in range(4, 13))
    pair_tol: float | None = None     # None: 1e-10 in double, 1e-13 in extended
    basis: tuple[str, ...] = DEFAULT_BASIS
    fit_tol: float = 1e-3
    significance: float = SIGNIFICANCE

    def __post_init__(self):
        g = tuple(float(s) for s in self.sigma_grid)
        object.__setattr__(self, "sigma_grid", g)
        if len(g) < 6:
            raise ValueError("sigma grid needs at least 6 points")
        if any(s <= 0 for s in g) or any(b >= a for a, b in zip(g, g[1:])):
            raise ValueError("sigma grid must be positive and strictly decreasing")
        if "1" not in self.basis:
            raise ValueError("basis must contain the constant '1'")
        unknown = [b for b in self.basis if b not in BASIS]
        if unknown:
            raise ValueError(f"unknown basis elements {unknown}; use {list(BASIS)}")
        if self.pair_tol is not None and not self.pair_tol > 0:
            raise ValueError("pair_tol must be positive")

    @classmethod
    def geometric(cls, sigma_max=2.0 ** -4, sigma_min=2.0 ** -12, ratio=0.5, **kw) -> "SweepPlan":
        if not 0 < ratio < 1:
            raise ValueError("grid ratio must lie in (0, 1)")
        if not 0 < sigma_min < sigma_max:
            raise ValueError("need 0 < sigma_min < sigma_max")
        n = int(math.floor(math.log(sigma_min / sigma_max) / math.log(ratio) + 1e-9)) + 1
        return cls(sigma_grid=tuple(sigma_max * ratio ** k for k in range(n)), **kw)


class SweepPoint(NamedTuple):
    sigma: float
    value: complex
    quad_err: float


@dataclass
class AssociationReport:
    """Sweep values, fitted coefficients and the verdict."""

    values: list[SweepPoint]
    coefficients: dict[str, complex]
    residual: float
    verdict: str                      # associated | divergent | inconclusive
    limit: complex | None = None
    limit_error: float | None = None
    leading: str | None = None
    leading_coeff: complex | None = None
    target: str | None = None
    target_value: complex | None = None
    abs_deviation: float | None = None
    rel_deviation: float | None = None
    label: str = ""
    dropped: list[tuple[float, str]] = field(default_factory=list)

    def attach_target(self, u: ReferenceDistribution, value: complex):
        self.target = str(u)
        self.target_value = complex(value)
        if self.limit is not None:
            d = self.limit - self.target_value
            self.abs_deviation = abs(d)
            self.rel_deviation = _componentwise_rel(self.limit, self.target_value)

    def passes(self, rel_tol: float) -> bool:
        return (self.verdict == "associated" and self.rel_deviation is not None
                and self.rel_deviation <= rel_tol)

    def to_dict(self) -> dict:
        def cx(z):
            return None if z is None else [float(complex(z).real), float(complex(z).imag)]
        return {
            "label": self.label,
            "verdict": self.verdict,
            "limit": cx(self.limit),
            "limit_error": self.limit_error,
            "leading": self.leading,
            "leading_coeff": cx(self.leading_coeff),
            "residual": self.residual,
            "coefficients": {k: cx(v) for k, v in self.coefficients.items()},
            "target": self.target,
            "target_value": cx(self.target_value),
            "abs_deviation": self.abs_deviation,
            "rel_deviation": self.rel_deviation,
            "values": [{"sigma": p.sigma, "re": float(p.value.real), "im": float(p.value.imag),
                        "quad_err": p.quad_err} for p in self.values],
            "dropped": [{"sigma": s, "reason": r} for s, r in self.dropped],
        }


def _componentwise_rel(value: complex, target: complex) -> float:
    """Largest relative error over the real and imaginary parts.

    A component whose target vanishes is measured against ``|target|``.
    """
    scale = abs(target)
    out = 0.0
    for v, t in ((value.real, target.real), (value.imag, target.imag)):
        den = abs(t) if abs(t) > 1e-14 * scale else scale
        if den == 0:
            den = 1.0
        out = max(out, abs(v - t) / den)
    return out


# -- sweep ---------------------------------------------------------------------------

def sweep(rep, psi: TestFunction, plan: SweepPlan) -> tuple[list[SweepPoint], list[tuple[float, str]]]:
    """Pair ``rep`` with ``psi`` at every grid point.

    Returns the surviving points and the dropped ones with reasons.
    """
    points, dropped = [], []
    tol = plan.pair_tol
    if tol is None:
        tol = EXTENDED_PAIR_TOL if np.dtype(rep.dtype) == np.dtype(np.longdouble) else PAIR_TOL
    for s in plan.sigma_grid:
        try:
            r = pair(rep, psi, s, tol)
        except QuadratureError as exc:
            dropped.append((s, str(exc)))
            continue
        points.append(SweepPoint(s, complex(r.value), float(r.error_estimate)))
    if len(points) < 6:
        raise AssociationError(f"only {len(points)} sigma points survived (need 6)")
    return points, dropped


# -- fit ----------------------------------------------------------------------------

def _design(sigmas, names):
    s = np.asarray(sigmas, dtype=float)
    return np.stack([BASIS[n](s) for n in names], axis=1)


def _wls(A, y, w):
    """Weighted least squares with column scaling; returns (coef, rank, cov_diag)."""
    Aw = A * w[:, None]
    scale = np.linalg.norm(Aw, axis=0)
    scale[scale == 0] = 1
    As = Aw / scale
    coef, _, rank, sv = np.linalg.lstsq(As, y * w, rcond=None)
    coef = coef / scale
    # Unit-weight covariance of the unscaled coefficients.
    inv = np.linalg.pinv(As.T @ As)
    cov = np.diag(inv) / scale ** 2
    return coef, rank, cov


def _noise(values, errs):
    v = np.abs(values)
    floor = 1e-15 * max(float(v.max()), 1e-300)
    return np.maximum(np.asarray(errs, dtype=float), floor)


def _weights(sig, y, errs, names):
    """Reciprocal of quadrature noise plus the first omitted power of sigma.

    The truncation term keeps the large-sigma points, where terms beyond
    the basis are largest, from steering the constant.
    """
    p = max(_POWER.get(n, 0) for n in names)
    trunc = float(np.abs(y).max()) * sig ** (p + 1)
    return 1 / (_noise(y, errs) + trunc)


def _wrms(r, w):
    return float(np.sqrt(np.sum(np.abs(r * w) ** 2) / np.sum(w * w)))


def _leading_term(sig, y, w, names, significance, floor):
    """Fastest-growing divergent element that cannot be dropped.

    Divergent elements are removed fastest first while the weighted
    residual stays within ``significance`` of the full fit's.
    """
    keep = list(names)
    A = _design(sig, keep)
    coef, _, _ = _wls(A, y, w)
    resid = max(_wrms(y - A @ coef, w), floor)
    for n in DIVERGENT:
        if n not in keep:
            continue
        trial = [k for k in keep if k != n]
        At = _design(sig, trial)
        ct, _, _ = _wls(At, y, w)
        if _wrms(y - At @ ct, w) > significance * resid:
            return n, complex(coef[keep.index(n)])
        keep, coef = trial, ct
    return None


def fit_and_judge(values: Sequence[SweepPoint] | Sequence[tuple], basis: Sequence[str] = DEFAULT_BASIS,
                  significance: float = SIGNIFICANCE, fit_tol: float = 1e-3) -> AssociationReport:
    """Fit ``values`` against ``basis`` and classify the sigma -> 0 behaviour.

    ``values`` holds ``(sigma, value)`` or ``(sigma, value, quad_err)``
    items.  Points are weighted by the reciprocal of their quadrature
    error plus the first power of sigma the basis omits.

    Divergence is a model comparison: dropping the divergent elements must
    raise the weighted residual by more than ``significance``, and some
    divergent element must contribute more than ``1e-3`` of the constant
    term at the smallest sigma.  Truncation error alone moves the residual
    ratio by a factor of ten at most, while a genuine ``1/sigma`` or
    ``ln sigma`` term moves it by many orders.  Without a divergence the
    limit is the constant of the convergent-only fit.
    """
    pts = [SweepPoint(float(v[0]), complex(v[1]), float(v[2]) if len(v) > 2 else 0.0)
           for v in values]
    pts.sort(key=lambda p: -p.sigma)
    names = list(basis)
    sig = np.array([p.sigma for p in pts])
    y = np.array([p.value for p in pts], dtype=complex)
    errs = [p.quad_err for p in pts]
    conv = [n for n in names if n not in DIVERGENT]
    w = _weights(sig, y, errs, conv)
    report = AssociationReport(values=pts, coefficients={}, residual=float("nan"),
                               verdict="inconclusive")
    if len(pts) < len(names) + 2:
        return report
    A = _design(sig, names)
    coef, rank, _ = _wls(A, y, w)
    report.coefficients = {n: complex(c) for n, c in zip(names, coef)}
    if rank < len(names):
        return report
    report.residual = _wrms(y - A @ coef, w)
    c0 = coef[names.index("1")]
    smin = sig.min()

    Ac = _design(sig, conv)
    ccoef, crank, cov = _wls(Ac, y, w)
    if crank < len(conv):
        return report
    r = y - Ac @ ccoef
    conv_resid = _wrms(r, w)
    floor = 1e-14 * float(np.abs(y).max())
    if conv_resid > significance * max(report.residual, floor):
        lead = _leading_term(sig, y, w, names, significance, floor)
        if lead is not None:
            n, c = lead
            if abs(c * BASIS[n](np.array([smin]))[0]) > DOMINANCE * abs(c0):
                report.verdict = "divergent"
                report.leading = n
                report.leading_coeff = complex(c)
                return report

    k0 = conv.index("1")
    limit = complex(ccoef[k0])
    dof = max(len(pts) - len(conv), 1)
    chi2 = float(np.sum(np.abs(r * w) ** 2)) / dof
    stderr = math.sqrt(max(chi2, 1.0) * cov[k0])
    # Stability: drop the smallest sigma and refit.
    drop = sig > smin
    c_alt, _, _ = _wls(Ac[drop], y[drop], w[drop])
    shift = abs(complex(c_alt[k0]) - limit)
    report.limit = limit
    report.limit_error = float(max(stderr, shift))
    if conv_resid <= fit_tol * max(1.0, abs(limit)):
        report.verdict = "associated"
    return report


# -- catalog --------------------------------------------------------------------------

@dataclass(frozen=True)
class Case:
    name: str
    expr: str
    target: str            # reference expression
    rel_tol: float
    rel_tol_extended: float
    note: str = ""
    basis: tuple[str, ...] | None = None   # overrides the plan's basis


_TH1M = "Xm^-2 * H - LnP * D'"
# Products of X_+^1, H and D derivatives carry no logarithm of sigma, so
# their pairings expand in integer powers only.
_POWER_BASIS = ("sigma^-1", "1", "sigma", "sigma^2")

CASES: dict[str, Case] = {c.name: c for c in (
    Case("DD", "D", "D", 1e-5, 1e-5, "D ~ delta"),
    Case("D2D", "D * D", "D", 1e-5, 1e-5, "D^2 ~ delta"),
    Case("HD", "H * D", "1/2 D", 1e-5, 1e-5, "H D ~ delta/2"),
    Case("HpH", "H * H", "H", 1e-5, 1e-5, "H^2 ~ theta"),
    Case("HD1", "H * D'", "-D + 1/2 D'", 1e-5, 1e-5, "H D' ~ -delta + delta'/2"),
    Case("TH1M", _TH1M, "-D", 1e-3, 1e-5),
    Case("TH1P", "Xp^-2 * Hc + LnM * D'", "-D", 1e-3, 1e-5),
    Case("COR1P", "Xp^-2 * H - LnM * D'", "Xp^-2 + D", 1e-3, 1e-5),
    Case("COR1H", "Xsgn^-2 * H + LnSgn * D'", "Xp^-2 + 2 D", 1e-3, 1e-5),
    Case("COR2P", "X^-2 * H - LnAbs * D'", "Xp^-2", 1e-3, 1e-5),
    Case("COR2+", "Xi0p^-2 * H - LnAbs * D'", "Xp^-2 - i pi D + 1/2 i pi D'", 1e-3, 1e-5),
    Case("COR2-", "Xi0m^-2 * H - LnAbs * D'", "Xp^-2 + i pi D - 1/2 i pi D'", 1e-3, 1e-5),
    Case("TH2P", "Xp^1 * D'''' + H * D'''", "5/2 D'' - 3/2 D'''", 1e-3, 1e-4,
         basis=_POWER_BASIS),
    # Mirror image of TH2P: D''' is odd, so the Hc term enters with a minus sign.
    Case("TH2M", "Xm^1 * D'''' - Hc * D'''", "5/2 D'' + 3/2 D'''", 1e-3, 1e-4,
         basis=_POWER_BASIS),
    Case("REMARK-EMBED", _TH1M, "-D", 1e-3, 1e-5,
         "TH1M combination under two moment mollifiers"),
)}
# "COR2" names the pair of signs.
CASE_GROUPS = {"COR2": ("COR2+", "COR2-")}
CATALOG_ORDER = ("DD", "D2D", "HD", "HpH", "HD1", "TH1M", "TH1P", "COR1P", "COR1H",
                 "COR2P", "COR2+", "COR2-", "TH2P", "TH2M", "REMARK-EMBED")


def resolve_cases(names: Sequence[str]) -> list[str]:
    """Expand ``all`` and group names; raise on unknown ids."""
    out = []
    for n in names:
        key = n.strip()
        if key.lower() == "all":
            out.extend(CATALOG_ORDER)
        elif key.upper() in CASE_GROUPS:
            out.extend(CASE_GROUPS[key.upper()])
        else:
            match = [c for c in CASES if c.upper() == key.upper()]
            if not match:
                raise AssociationError(f"unknown case {n!r}; known: {', '.join(CATALOG_ORDER)}")
            out.append(match[0])
    seen = []
    for n in out:
        if n not in seen:
            seen.append(n)
    return seen


def evaluate_expression(text: str, m, psi: TestFunction, plan: SweepPlan,
                        target: str | None = None, label: str = "",
                        basis: Sequence[str] | None = None) -> AssociationReport:
    """Sweep and judge an arbitrary expression, optionally against a target."""
    rep = E.compile(E.parse(text), m)
    points, dropped = sweep(rep, psi, plan)
    report = fit_and_judge(points, basis or plan.basis, plan.significance, plan.fit_tol)
    report.dropped = dropped
    report.label = label or text
    if target is not None:
        u = E.compile_reference(E.parse(target))
        report.attach_target(u, eval_reference(u, psi))
    return report


def verify_case(name: str, m, psi: TestFunction, plan: SweepPlan):
    """Run one catalog case.

    Returns an :class:`AssociationReport`; for ``REMARK-EMBED`` the pair
    from :func:`embedding_counterexample` (``m`` is then unused).
    """
    key = resolve_cases([name])
    if len(key) != 1:
        raise AssociationError(f"{name!r} names several cases: {key}")
    case = CASES[key[0]]
    if case.name == "REMARK-EMBED":
        return embedding_counterexample(2, psi, plan, precision=_precision_of(m))
    return evaluate_expression(case.expr, m, psi, plan, case.target, label=case.name,
                               basis=case.basis)


def _precision_of(m) -> str:
    return "extended" if np.dtype(m.dtype) == np.dtype(np.longdouble) else "double"


EMBED_DILATIONS = ((1.0, 0.5, 0.7), (0.8, 0.9, 0.4))


def embedding_counterexample(q: int, psi: TestFunction, plan: SweepPlan,
                             dilations=EMBED_DILATIONS, precision: str = "double"):
    """The TH1M combination under two moment mollifiers of class ``A_q``.

    Each mollifier ``phi`` gives representatives ``u * phi_sigma``; the
    two reports disagree (or diverge) when the balance depends on ``phi``.
    """
    if q < 2:
        raise ValueError("q must be at least 2")
    reports = []
    for k, dil in enumerate(dilations[:2]):
        dil = tuple(dil)[: q + 1]
        if len(dil) < q + 1:
            dil = dil + tuple(1.0 / (2 + j) for j in range(len(dil), q + 1))
        phi = make_moment_mollifier(q, dil, precision)
        rep = E.compile(E.parse(_TH1M), phi)
        points, dropped = sweep(rep, psi, plan)
        r = fit_and_judge(points, plan.basis, plan.significance, plan.fit_tol)
        r.dropped = dropped
        r.label = f"REMARK-EMBED[phi{k + 1}]"
        u = E.compile_reference(E.parse("-D"))
        r.attach_target(u, eval_reference(u, psi))
        reports.append(r)
    return tuple(reports)


def embedding_distinguishes(reports, rel_tol: float) -> bool:
    """True when either report diverges or the two limits differ by > 10 ``rel_tol``."""
    a, b = reports
    if a.verdict == "divergent" or b.verdict == "divergent":
        return True
    if a.limit is None or b.limit is None:
        return False
    scale = max(abs(a.limit), abs(b.limit), 1e-300)
    return abs(a.limit - b.limit) > 10 * rel_tol * scale
