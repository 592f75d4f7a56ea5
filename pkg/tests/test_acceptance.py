"""Acceptance criteria 1-9.

Every numeric criterion runs over psiA, psiB and psiC with the default
mollifier and the 2^-4 .. 2^-12 grid.  Targets come from mpmath oracles
that share no code with the package.  Each test records one PASS/FAIL
line in ``conftest.ACCEPTANCE``; the terminal summary prints them.
"""

from functools import lru_cache

import mpmath as mp
import numpy as np
import pytest

import conftest
from colombeau.association import (SweepPlan, embedding_distinguishes, evaluate_expression,
                                   verify_case)
from colombeau.expr import format_expr, parse
from colombeau.mollifier import default_model_mollifier, eval_D
from colombeau.quadrature import integrate
from colombeau.reference import eval_reference, reference
from colombeau.representatives import (rep_delta, rep_heaviside, rep_ln, rep_x_neg_int,
                                       rep_x_power)
from colombeau.testfn import PSI_A, PSI_B, PSI_C

mp.mp.dps = 30
PSIS = (PSI_A, PSI_B, PSI_C)
PLAN = SweepPlan.geometric(2.0 ** -4, 2.0 ** -12, 0.5)


# -- oracles ----------------------------------------------------------------------------

def _mp_psi(psi):
    R = mp.mpf(psi.support_radius)
    coeffs = [mp.mpf(c) for c in psi.poly[::-1]]

    def f(x):
        t = x / R
        if abs(t) >= 1:
            return mp.mpf(0)
        return mp.polyval(coeffs, x) * mp.exp(-1 / (1 - t * t))
    return f


@lru_cache(maxsize=None)
def oracle(psi):
    """psi^(k)(0) for k <= 3, int_0^inf psi and <x_+^(-2), psi>."""
    f = _mp_psi(psi)
    d = [mp.diff(f, 0, k) for k in range(4)]
    R = mp.mpf(psi.support_radius)
    half = mp.quad(f, [0, R / 2, R])
    # Hadamard finite part: subtract the Taylor terms, add their finite parts.
    # Near 0 the subtracted integrand cancels catastrophically; use its Taylor
    # series d2/2 + d3 x/6 there (the next term adds ~1e-13).
    a = mp.mpf("1e-4")
    g = lambda x: (f(x) - d[0] - x * d[1]) / (x * x)
    head = d[2] / 2 * a + d[3] / 12 * a * a
    fp = head + mp.quad(g, [a, R / 2, R]) - d[0] / R + d[1] * mp.log(R)
    return {"d": [float(v) for v in d], "half": float(half), "xp2": float(fp)}


def rel_dev(value, target):
    """Largest relative error over real and imaginary parts (zero parts use |target|)."""
    value, target = complex(value), complex(target)
    out = 0.0
    for v, t in ((value.real, target.real), (value.imag, target.imag)):
        den = abs(t) if abs(t) > 1e-12 * abs(target) else abs(target)
        out = max(out, abs(v - t) / den)
    return out


@pytest.fixture(scope="module")
def m():
    return default_model_mollifier("double")


@pytest.fixture(scope="module")
def m_ext():
    return default_model_mollifier("extended")


_cache = {}


def run_case(name, mm, psi):
    key = (name, np.dtype(mm.dtype).name, psi.name)
    if key not in _cache:
        _cache[key] = verify_case(name, mm, psi, PLAN)
    return _cache[key]


def run_expr(text, mm, psi):
    key = (text, np.dtype(mm.dtype).name, psi.name)
    if key not in _cache:
        _cache[key] = evaluate_expression(text, mm, psi, PLAN)
    return _cache[key]


def judge(k, rows):
    """rows: (label, ok, detail).  Records and asserts the criterion."""
    bad = [r for r in rows if not r[1]]
    worst = "; ".join(f"{lab}: {det}" for lab, _, det in (bad or rows)[:3])
    status = "PASS" if not bad else "FAIL"
    detail = f"{len(rows) - len(bad)}/{len(rows)} checks" + (f" ({worst})" if bad else "")
    conftest.ACCEPTANCE[k] = (status, detail)
    print(f"criterion {k}: {status}  {detail}")
    assert not bad, worst


def check_limit(rep, target, tol, label):
    if rep.verdict != "associated":
        return label, False, f"verdict {rep.verdict} (leading {rep.leading})"
    dev = rel_dev(rep.limit, target)
    return label, dev <= tol, f"rel {dev:.2e} vs tol {tol:g}"


# -- criteria ---------------------------------------------------------------------------------

def test_criterion_1_base_relations(m):
    rows = []
    for psi in PSIS:
        o = oracle(psi)
        for name, target in (("DD", o["d"][0]), ("D2D", o["d"][0]), ("HD", o["d"][0] / 2),
                             ("HpH", o["half"])):
            rows.append(check_limit(run_case(name, m, psi), target, 1e-5, f"{name}/{psi.name}"))
        rows.append(check_limit(run_expr("H * H * H", m, psi), o["half"], 1e-5,
                                f"H^3/{psi.name}"))
    judge(1, rows)


def test_criterion_2_h_times_d_prime(m):
    rows = []
    for psi in PSIS:
        d = oracle(psi)["d"]
        rows.append(check_limit(run_case("HD1", m, psi), -d[0] - d[1] / 2, 1e-5,
                                f"HD1/{psi.name}"))
    judge(2, rows)


def test_criterion_3_balanced_negative_powers(m, m_ext):
    rows = []
    for psi in PSIS:
        t = -oracle(psi)["d"][0]
        for name in ("TH1M", "TH1P"):
            rows.append(check_limit(run_case(name, m, psi), t, 1e-3, f"{name}/{psi.name}"))
            rows.append(check_limit(run_case(name, m_ext, psi), t, 1e-5,
                                    f"{name}/{psi.name}/extended"))
    judge(3, rows)


def test_criterion_4_real_corollary(m):
    rows = []
    for psi in PSIS:
        o = oracle(psi)
        rows.append(check_limit(run_case("COR1P", m, psi), o["xp2"] + o["d"][0], 1e-3,
                                f"COR1P/{psi.name}"))
        rows.append(check_limit(run_case("COR1H", m, psi), o["xp2"] + 2 * o["d"][0], 1e-3,
                                f"COR1H/{psi.name}"))
    judge(4, rows)


def test_criterion_5_complex_corollary(m):
    rows = []
    for psi in PSIS:
        o = oracle(psi)
        shift = 1j * np.pi * o["d"][0] + 0.5j * np.pi * o["d"][1]
        rows.append(check_limit(run_case("COR2+", m, psi), o["xp2"] - shift, 1e-3,
                                f"COR2+/{psi.name}"))
        rows.append(check_limit(run_case("COR2-", m, psi), o["xp2"] + shift, 1e-3,
                                f"COR2-/{psi.name}"))
    judge(5, rows)


def test_criterion_6_derivative_products(m, m_ext):
    rows = []
    for psi in PSIS:
        d = oracle(psi)["d"]
        for name, sign in (("TH2P", 1), ("TH2M", -1)):
            t = 2.5 * d[2] + sign * 1.5 * d[3]
            rows.append(check_limit(run_case(name, m, psi), t, 1e-3, f"{name}/{psi.name}"))
            rows.append(check_limit(run_case(name, m_ext, psi), t, 1e-4,
                                    f"{name}/{psi.name}/extended"))
    judge(6, rows)


def test_criterion_7_divergence_detection(m):
    rows = []
    for psi in PSIS:
        for text in ("Xm^-2 * H", "LnP * D'"):
            r = run_expr(text, m, psi)
            ok = r.verdict == "divergent" and r.leading in ("sigma^-1", "sigma^-1 ln(sigma)")
            rows.append((f"{text}/{psi.name}", ok, f"{r.verdict}, leading {r.leading}"))
        rows.append(check_limit(run_case("TH1M", m, psi), -oracle(psi)["d"][0], 1e-3,
                                f"TH1M/{psi.name}"))
    judge(7, rows)


def test_criterion_8_mollifier_dependence(m):
    rows = []
    for psi in PSIS:
        a, b = run_case("REMARK-EMBED", m, psi)
        ok = embedding_distinguishes((a, b), 1e-3)
        rows.append((f"REMARK-EMBED/{psi.name}", ok,
                     f"{a.verdict}/{b.verdict}, leading {a.leading}/{b.leading}"))
    judge(8, rows)


def test_criterion_9_property_suites(m):
    rows = []

    def check(label, ok, detail=""):
        rows.append((label, bool(ok), detail))

    bp = m.breakpoints
    I = lambda fn: complex(integrate(fn, -m.l, m.l, 1e-13, breakpoints=bp).value)
    for s in (1e-2, 1e-4, 0.3):
        D = lambda u, s=s: eval_D(m, s, u)
        D1 = lambda u, s=s: eval_D(m, s, u, 1)
        check(f"mass/{s}", abs(I(D) - 1) < 1e-10)
        check(f"square mass/{s}", abs(I(lambda u: D(u) ** 2) / s - 1) < 1e-8)
        u = np.linspace(-7, 7, 101)
        check(f"parity/{s}", np.allclose(eval_D(m, s, -u, 1), -eval_D(m, s, u, 1), atol=1e-13))
        if s < 0.1:
            check(f"aux DD'/{s}", abs(I(lambda u: D(u) * D1(u))) < 1e-7)
            check(f"aux uD^2/{s}", abs(I(lambda u: u * D(u) ** 2)) < 1e-7)
            check(f"aux u^2DD'/{s}", abs(I(lambda u: u * u * D(u) * D1(u))) < 1e-7)
            check(f"aux uDD'/{s}", abs(I(lambda u: u * D(u) * D1(u)) / s + 0.5) < 1e-7)
            H = rep_heaviside(m)
            check(f"half identity/{s}",
                  abs(I(lambda u: D(u) * H.fn(np.float64(s), u)) - 0.5) < 1e-8)

    # representatives: support, mirror, differentiation
    s = 1e-2
    x = np.linspace(-0.1, 0.1, 41)
    reps = [rep_delta(m, 2), rep_heaviside(m), rep_ln(m, "+"), rep_x_neg_int(m, "-", 1)]
    for r in reps:
        lo, hi = r.support(s)
        out = [p for p in (lo - 0.3, lo - 1e-6, hi + 1e-6, hi + 0.3) if np.isfinite(p)]
        check(f"support/{r.label}", np.all(np.abs(r(s, np.array(out))) < 1e-12) if out else True)
    check("mirror H", np.allclose(rep_heaviside(m)(s, -x), rep_heaviside(m, checked=True)(s, x),
                                  atol=1e-13))
    check("mirror ln", np.allclose(rep_ln(m, "+")(s, -x), rep_ln(m, "-")(s, x), atol=1e-13))
    h = 1e-6
    xp2 = rep_x_power(m, "+", 2)
    fd = (xp2(s, x + h) - xp2(s, x - h)) / (2 * h)
    check("d/dx Xp^2 = 2 Xp^1", np.allclose(fd, 2 * rep_x_power(m, "+", 1)(s, x), atol=1e-8))
    H = rep_heaviside(m)
    fd = (H(s, x + h * s) - H(s, x - h * s)) / (2 * h * s)
    check("d/dx H = D", np.allclose(fd, rep_delta(m, 0)(s, x), rtol=1e-6, atol=1e-6))

    # reference: combined atoms against their parts
    for psi in PSIS:
        E = lambda *a, psi=psi: eval_reference(reference([(1, a)]), psi)
        for n in (1, 2, 3):
            check(f"x^-{n}/{psi.name}",
                  abs(E("x_neg", n) - E("xplus_neg", n) - (-1) ** n * E("xminus_neg", n)) < 1e-12)
            check(f"x^-{n} sgn/{psi.name}",
                  abs(E("x_neg_sgn", n) - E("xplus_neg", n) + (-1) ** n * E("xminus_neg", n))
                  < 1e-12)
        check(f"ln|x|/{psi.name}", abs(E("lnabs") - E("lnplus") - E("lnminus")) < 1e-12)

    # quadrature log exactness
    r = integrate(np.log, 0.0, 1.0, 1e-12, singularities={0.0: "log"})
    check("int ln t = -1", abs(r.value + 1) < 1e-12)
    r = integrate(lambda t: t * np.log(t), 0.0, 1.0, 1e-12, singularities={0.0: "log"})
    check("int t ln t = -1/4", abs(r.value + 0.25) < 1e-12)

    # parser roundtrip
    for text in ("H * D' - 1/2 i pi D(6)", "Xp^-1/2 * (LnAbs + 3 Xi0m^-2)", "-(H - Hc) . X^-2"):
        t = parse(text)
        check(f"roundtrip {text}", parse(format_expr(t)) == t)
    judge(9, rows)
