import warnings

import numpy as np
import pytest
from scipy import integrate as si

from colombeau.mollifier import default_model_mollifier

# Filled by test_acceptance.py: criterion number -> (status, detail).
ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture(scope="session")
def m():
    return default_model_mollifier("double")


@pytest.fixture(scope="session")
def m_ext():
    return default_model_mollifier("extended")


def cquad(f, a, b, points=None, **kw):
    """Complex integral with scipy.integrate.quad (real and imaginary parts)."""
    opts = {"limit": 400, "epsabs": 1e-14, "epsrel": 1e-13}
    opts.update(kw)
    if points is not None:
        opts["points"] = [p for p in points if a < p < b]
    with warnings.catch_warnings():
        # Roundoff warnings only mean the oracle hit its own floor.
        warnings.simplefilter("ignore", si.IntegrationWarning)
        re = si.quad(lambda x: np.real(f(x)), a, b, **opts)[0]
        im = si.quad(lambda x: np.imag(f(x)), a, b, **opts)[0]
    return complex(re, im)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {status}  {detail}")
