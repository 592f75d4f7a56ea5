import math

import mpmath as mp
import numpy as np
import pytest

from colombeau.testfn import (CATALOG, PSI_A, PSI_B, PSI_C, TestFunction, eval_psi,
                              get_test_function, psi_derivatives_at_zero)

mp.mp.dps = 40


def _mp_psi(psi):
    R = mp.mpf(psi.support_radius)

    def f(x):
        t = x / R
        if abs(t) >= 1:
            return mp.mpf(0)
        return mp.polyval([mp.mpf(c) for c in psi.poly[::-1]], x) * mp.exp(-1 / (1 - t * t))
    return f


def test_eval_examples():
    assert eval_psi(PSI_A, 0.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert eval_psi(PSI_A, 2.0) == pytest.approx(math.exp(-4 / 3), rel=1e-15)
    assert eval_psi(TestFunction("x", (0.0, 1.0)), 0.0) == 0
    assert np.all(eval_psi(PSI_C, np.array([-4.0, 4.0, 5.0])) == 0)


def test_kinds():
    assert PSI_A.kind == "pure-bump"
    assert PSI_B.kind == "polynomial-bump"


def test_derivative_examples():
    d = psi_derivatives_at_zero(PSI_A)
    assert len(d) == 5
    assert d[1] == 0 and d[3] == 0
    x_bump = TestFunction("x", (0.0, 1.0))
    assert psi_derivatives_at_zero(x_bump)[1] == pytest.approx(math.exp(-1), rel=1e-15)


@pytest.mark.parametrize("psi", [PSI_A, PSI_B, PSI_C, TestFunction("q", (1.0, 1.0, 1.0))],
                         ids=lambda p: p.name)
def test_derivatives_at_zero_against_mpmath(psi):
    f = _mp_psi(psi)
    got = psi_derivatives_at_zero(psi)
    for n in range(5):
        oracle = float(mp.diff(f, 0, n))
        assert got[n] == pytest.approx(oracle, rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("psi", list(CATALOG.values()), ids=lambda p: p.name)
def test_derivatives_at_zero_against_central_differences(psi):
    h = 1e-2
    x = h * np.arange(-4, 5)
    v = eval_psi(psi, x)
    # 9-point stencils, truncation O(h^8) for the first two orders.
    d1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5, 4 / 105, -1 / 280]) @ v / h
    d2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315,
                   -1 / 560]) @ v / h ** 2
    exact = psi_derivatives_at_zero(psi)
    assert d1 == pytest.approx(exact[1], rel=1e-6, abs=1e-10)
    assert d2 == pytest.approx(exact[2], rel=1e-6, abs=1e-10)


@pytest.mark.parametrize("psi", [PSI_B, PSI_C], ids=lambda p: p.name)
def test_pointwise_derivatives_against_mpmath(psi):
    f = _mp_psi(psi)
    for x in (-3.1, -0.7, 0.4, 2.9):
        for n in range(6):
            oracle = float(mp.diff(f, mp.mpf(x), n))
            got = float(psi.derivative(np.array(x), n))
            assert got == pytest.approx(oracle, rel=1e-9, abs=1e-14)


def test_mirrored():
    x = np.linspace(-3.9, 3.9, 27)
    assert np.allclose(PSI_C.mirrored()(x), PSI_C(-x), rtol=1e-15, atol=0)


def test_extended_precision_evaluation():
    x = np.array([0.3, -1.7], dtype=np.longdouble)
    v = PSI_B(x)
    assert v.dtype == np.longdouble
    assert np.allclose(v.astype(float), PSI_B(x.astype(float)), rtol=1e-15)


def test_lookup():
    assert get_test_function("psiB") is PSI_B
    assert get_test_function("c") is PSI_C
    t = get_test_function("1,0,2")
    assert t.poly == (1.0, 0.0, 2.0)
    assert get_test_function([0, 1]).poly == (0.0, 1.0)
    with pytest.raises(ValueError):
        get_test_function("psiZ")


def test_validation():
    with pytest.raises(ValueError):
        TestFunction("bad", ())
    with pytest.raises(ValueError):
        TestFunction("narrow", (1.0,), support_radius=0.5)
