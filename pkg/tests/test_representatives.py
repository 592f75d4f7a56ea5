import math
from fractions import Fraction

import numpy as np
import pytest

from colombeau.mollifier import eval_D
from colombeau.quadrature import pair
from colombeau.representatives import (RepresentativeError, harmonic, product, rep_delta,
                                       rep_derived, rep_heaviside, rep_ln, rep_x_neg_int,
                                       rep_x_power)
from colombeau.testfn import PSI_B

from conftest import cquad


def raw_conv(m, sigma, x, p=0, kernel="log", a=0.0):
    """Raw-coordinate oracle for int_0^inf k(y) sigma^(-p-1) D^(p)(sigma, (x-y)/sigma) dy.

    ``k`` is ``ln y`` or ``y**a``; the endpoint y = 0 goes through scipy's
    weighted QAWS rules, the rest through plain quad between breakpoints.
    """
    l = m.l
    lo, hi = max(0.0, x - l * sigma), x + l * sigma
    if not lo < hi:
        return 0j
    cuts = sorted({lo, hi} | {x - sigma * b for b in m.breakpoints if lo < x - sigma * b < hi})
    dfun = lambda y: eval_D(m, sigma, np.array([(x - y) / sigma]), p)[0] / sigma ** (p + 1)
    k = np.log if kernel == "log" else (lambda y: y ** a)
    total = 0j
    for y0, y1 in zip(cuts[:-1], cuts[1:]):
        if y0 == 0.0:
            w = {"weight": "alg-loga", "wvar": (0.0, 0.0)} if kernel == "log" else \
                {"weight": "alg", "wvar": (a, 0.0)}
            total += cquad(dfun, y0, y1, **w)
        else:
            total += cquad(lambda y: k(y) * dfun(y), y0, y1)
    return total


def _reps(m):
    return {
        "D0": rep_delta(m, 0), "D1": rep_delta(m, 1), "D3": rep_delta(m, 3),
        "H": rep_heaviside(m), "Hc": rep_heaviside(m, checked=True),
        "Xp^0.5": rep_x_power(m, "+", 0.5), "Xm^1": rep_x_power(m, "-", 1),
        "LnP": rep_ln(m, "+"), "LnM": rep_ln(m, "-"),
        "Xp^-1": rep_x_neg_int(m, "+", 0), "Xm^-2": rep_x_neg_int(m, "-", 1),
        "X^-2": rep_derived(m, "x^-p", 2), "LnAbs": rep_derived(m, "ln_abs"),
        "Xi0p^-2": rep_derived(m, "xplus_i0", 1),
        "Xm^-2*H": product([rep_x_neg_int(m, "-", 1), rep_heaviside(m)]),
    }


def test_harmonic():
    assert harmonic(0) == 0
    assert harmonic(1) == 1
    assert harmonic(3) == Fraction(11, 6)
    with pytest.raises(ValueError):
        harmonic(-1)


# -- delta and H ---------------------------------------------------------------------

def test_delta_mass_and_parity(m):
    s = 1e-2
    d0 = rep_delta(m, 0)
    assert abs(cquad(lambda x: d0(s, np.array([x]))[0], -m.l * s, m.l * s,
                     points=[s * b for b in m.breakpoints]) - 1) < 1e-8
    x = np.linspace(-0.05, 0.05, 31)
    d1 = rep_delta(m, 1)
    assert np.allclose(d1(s, -x), -d1(s, x), rtol=1e-13, atol=1e-9)
    with pytest.raises(ValueError):
        rep_delta(m, m.max_order)


def test_heaviside_tails_and_complement(m):
    s = 1e-3
    H, Hc = rep_heaviside(m), rep_heaviside(m, checked=True)
    assert np.all(H(s, np.array([0.0071, 0.5, 3.0])) == 1)
    x = np.linspace(-0.01, 0.01, 41)
    assert np.allclose(H(s, x) + Hc(s, x), 1, rtol=0, atol=1e-13)


def test_heaviside_running_integral(m):
    s = 1e-2
    H = rep_heaviside(m)
    for z in (-5.5, -2.9, 0.0, 0.7, 4.2):
        oracle = cquad(lambda u: eval_D(m, s, np.array([u]))[0], -m.l, z, points=m.breakpoints)
        assert abs(H(s, np.array([s * z]))[0] - oracle) < 1e-10


# -- powers and logs -------------------------------------------------------------------

def test_x_power_beyond_support_is_x(m):
    s = 1e-3
    x = np.array([0.01, 0.3, 2.0])
    assert np.allclose(rep_x_power(m, "+", 1)(s, x), x, rtol=1e-9, atol=0)


def test_x_power_zero_is_heaviside(m):
    x = np.linspace(-0.02, 0.02, 21)
    assert np.array_equal(rep_x_power(m, "+", 0)(1e-3, x), rep_heaviside(m)(1e-3, x))


def test_x_power_rejects_a_le_minus_one(m):
    with pytest.raises(RepresentativeError):
        rep_x_power(m, "+", -1)


@pytest.mark.parametrize("a", [0.5, -0.5, 1.0, 2.5])
def test_x_power_against_raw_oracle(m, a):
    s = 1e-2
    rep = rep_x_power(m, "+", a)
    for x in (-0.05, -0.012, 0.003, 0.04, 0.09):
        oracle = raw_conv(m, s, x, kernel="power", a=a)
        got = rep(s, np.array([x]))[0]
        assert abs(got - oracle) <= 1e-8 * max(abs(oracle), s ** a)


def test_ln_outside_and_beyond(m):
    s = 1e-3
    ln = rep_ln(m, "+")
    assert np.all(ln(s, np.array([-0.0071, -1.0])) == 0)
    for x in (0.01, 0.5):
        oracle = cquad(lambda u: np.log(x - s * u) * eval_D(m, s, np.array([u]))[0],
                       -m.l, m.l, points=m.breakpoints)
        assert abs(ln(s, np.array([x]))[0] - oracle) < 1e-8 * abs(oracle)


def test_ln_transition_zone_against_raw_oracle(m):
    s = 1e-2
    ln = rep_ln(m, "+")
    for x in (-0.06, -0.02, 0.0, 0.013, 0.05):
        oracle = raw_conv(m, s, x, kernel="log")
        assert abs(ln(s, np.array([x]))[0] - oracle) < 1e-9 * max(1, abs(oracle))


@pytest.mark.parametrize("p", [0, 1, 2])
def test_negative_power_against_raw_oracle(m, p):
    s = 1e-2
    rep = rep_x_neg_int(m, "+", p)
    kap = float(harmonic(p))
    for x in (-0.055, -0.01, 0.0, 0.02, 0.066):
        tail = raw_conv(m, s, x, p=p + 1, kernel="log")
        local = kap * eval_D(m, s, np.array([x / s]), p)[0] / s ** (p + 1)
        oracle = (-1) ** p / math.factorial(p) * (tail + local)
        got = rep(s, np.array([x]))[0]
        assert abs(got - oracle) <= 1e-8 * max(abs(oracle), s ** (-p - 1))


def test_negative_power_outside_and_far(m):
    s = 1e-4
    assert np.all(rep_x_neg_int(m, "+", 1)(s, np.array([-0.0008, -1.0])) == 0)
    x = np.array([1.0, 2.0, 4.0])
    assert np.allclose(rep_x_neg_int(m, "+", 0)(s, x), 1 / x, rtol=1e-6, atol=0)
    for xv in x:
        oracle = cquad(lambda u: eval_D(m, s, np.array([u]))[0] / (xv - s * u), -m.l, m.l,
                       points=m.breakpoints)
        assert abs(rep_x_neg_int(m, "+", 0)(s, np.array([xv]))[0] - oracle) < 1e-11


@pytest.mark.parametrize("p", [0, 1, 3])
def test_negative_power_mirror(m, p):
    s = 1e-2
    x = np.linspace(-0.08, 0.08, 33)
    assert np.allclose(rep_x_neg_int(m, "+", p)(s, -x), rep_x_neg_int(m, "-", p)(s, x),
                       rtol=1e-12, atol=1e-12 * s ** (-p - 1))


# -- derived ---------------------------------------------------------------------------

def test_derived_identities(m):
    s = 1e-2
    x = np.linspace(-0.09, 0.09, 37)
    lnp, lnm = rep_ln(m, "+")(s, x), rep_ln(m, "-")(s, x)
    assert np.allclose(rep_derived(m, "ln_abs")(s, x), lnp + lnm, rtol=1e-14, atol=1e-14)
    assert np.allclose(rep_derived(m, "ln_sgn")(s, x), lnp - lnm, rtol=1e-14, atol=1e-14)
    xp, xm = rep_x_neg_int(m, "+", 1)(s, x), rep_x_neg_int(m, "-", 1)(s, x)
    assert np.allclose(rep_derived(m, "x^-p", 2)(s, x), xp + xm, rtol=1e-14, atol=1e-10)
    assert np.allclose(rep_derived(m, "x^-p sgn", 2)(s, x), xp - xm, rtol=1e-14, atol=1e-10)
    x2 = xp + xm
    d1 = rep_delta(m, 1)(s, x)
    assert np.allclose(rep_derived(m, "xplus_i0", 1)(s, x), x2 + 1j * math.pi * d1,
                       rtol=1e-13, atol=1e-9)
    assert np.allclose(rep_derived(m, "xminus_i0", 1)(s, x), x2 - 1j * math.pi * d1,
                       rtol=1e-13, atol=1e-9)
    # D' vanishes at 0, so the i0 shift leaves the value there unchanged.
    at0 = rep_derived(m, "xplus_i0", 1)(s, np.array([0.0]))[0]
    assert abs(at0 - rep_derived(m, "x^-p", 2)(s, np.array([0.0]))[0]) < 1e-9
    with pytest.raises(RepresentativeError):
        rep_derived(m, "bogus")


# -- products and supports -----------------------------------------------------------------

def test_product_identity_and_support(m):
    s = 1e-2
    x = np.linspace(-0.2, 0.2, 41)
    H = rep_heaviside(m)
    assert np.array_equal(product([H])(s, x), H(s, x))
    p = product([rep_x_neg_int(m, "-", 1), H])
    lo, hi = p.support(s)
    assert (lo, hi) == (-m.l * s, m.l * s)
    outside = np.array([-0.2, -0.071, 0.071, 0.2])
    assert np.all(p(s, outside) == 0)
    with pytest.raises(ValueError):
        product([])


@pytest.mark.parametrize("sigma", [1e-2, 1e-3])
def test_zero_outside_declared_support(m, sigma):
    rng = np.random.default_rng(7)
    for name, rep in _reps(m).items():
        lo, hi = rep.support(sigma)
        pts = []
        if np.isfinite(lo):
            pts.extend(lo - rng.uniform(1e-9, 2.0, 10))
        if np.isfinite(hi):
            pts.extend(hi + rng.uniform(1e-9, 2.0, 10))
        if pts:
            assert np.all(np.abs(rep(sigma, np.array(pts))) < 1e-12), name


def test_mirror_laws(m):
    s = 1e-2
    x = np.linspace(-0.1, 0.1, 41)
    pairs = [
        (rep_heaviside(m), rep_heaviside(m, checked=True)),
        (rep_x_power(m, "+", 0.5), rep_x_power(m, "-", 0.5)),
        (rep_ln(m, "+"), rep_ln(m, "-")),
    ]
    for a, b in pairs:
        assert np.allclose(a(s, -x), b(s, x), rtol=1e-13, atol=1e-13)
    for p in range(4):
        d = rep_delta(m, p)
        assert np.allclose(d(s, -x), (-1) ** p * d(s, x), rtol=1e-13, atol=1e-13 * s ** (-p - 1))


# -- differentiation -----------------------------------------------------------------------

def _fd(rep, s, x, h):
    f = lambda t: rep(s, t)
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def test_derivative_chain(m):
    s = 1e-2
    h = 1e-4 * s
    x = np.array([-0.043, -0.011, 0.004, 0.029, 0.061])
    checks = [
        (rep_heaviside(m), rep_delta(m, 0), 1),
        (rep_delta(m, 0), rep_delta(m, 1), 1),
        (rep_delta(m, 2), rep_delta(m, 3), 1),
        (rep_x_power(m, "+", 1), rep_heaviside(m), 1),
        (rep_x_power(m, "+", 2), rep_x_power(m, "+", 1), 2),
        (rep_ln(m, "+"), rep_x_neg_int(m, "+", 0), 1),
    ]
    for f, df, c in checks:
        got = _fd(f, s, x, h)
        want = c * df(s, x)
        assert np.all(np.abs(got - want) <= 1e-5 * np.abs(want).max()), f.label


class _Derivative:
    """psi' as a pairing partner."""

    def __init__(self, psi):
        self.psi = psi
        self.support_radius = psi.support_radius

    def __call__(self, x):
        return self.psi.derivative(x, 1)


def test_weak_derivative_identity_for_negative_powers(m):
    # d/dx x_+^(-1) = -x_+^(-2) - delta'   (tested as <X_+^(-1), -psi'>)
    s = 1e-2
    lhs = -pair(rep_x_neg_int(m, "+", 0), _Derivative(PSI_B), s, 1e-12).value
    rhs_rep = rep_x_neg_int(m, "+", 1).scaled(-1) - rep_delta(m, 1)
    rhs = pair(rhs_rep, PSI_B, s, 1e-12).value
    assert abs(lhs - rhs) < 1e-8 * abs(rhs)


def test_extended_agrees_with_double(m, m_ext):
    s = 1e-2
    x = np.linspace(-0.08, 0.08, 9)
    for mk in (lambda mm: rep_x_neg_int(mm, "+", 1), lambda mm: rep_ln(mm, "-"),
               lambda mm: rep_heaviside(mm)):
        a = mk(m)(s, x)
        b = mk(m_ext)(s, x.astype(np.longdouble)).astype(complex)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(a).max())
