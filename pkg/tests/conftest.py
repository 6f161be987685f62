"""Independent reference implementations shared by the test modules.

These are written directly from the closed-form definitions with dense
inverses and plain loops, so they share no code path with the package.
"""

import math

import mpmath
import numpy as np
import pytest


def dense_kernel(A, B, sv, ls):
    out = np.empty((len(A), len(B)))
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            out[i, j] = sv * math.exp(-0.5 * float(np.sum((a - b) ** 2)) / ls**2)
    return out


def dense_posterior(X, rows, y, sv, ls, sn):
    """Posterior mean/variance by explicit matrix inversion."""
    if len(rows) == 0:
        return np.zeros(len(X)), np.full(len(X), sv)
    Xt = X[list(rows)]
    Kinv = np.linalg.inv(dense_kernel(Xt, Xt, sv, ls) + sn * np.eye(len(rows)))
    Kxt = dense_kernel(X, Xt, sv, ls)
    mean = Kxt @ Kinv @ np.asarray(y)
    var = sv - np.einsum("ij,jk,ik->i", Kxt, Kinv, Kxt)
    return mean, var


def omega_ref(r, eps, delta):
    mp = mpmath.mp
    with mpmath.workdps(40):
        r, eps, delta = mpmath.mpf(r), mpmath.mpf(eps), mpmath.mpf(delta)
        return float(16 * mp.sqrt(r * mp.log(2 / delta)) / eps * mp.log(16 * r / delta))


def beta_ref(n, t, dprime):
    with mpmath.workdps(40):
        return float(2 * mpmath.log(mpmath.mpf(n) * t * t * mpmath.pi**2 / (6 * mpmath.mpf(dprime))))


def r_min_ref(n, mu, nu):
    with mpmath.workdps(40):
        return int(mpmath.ceil(8 * mpmath.log(mpmath.mpf(n) ** 2 / mpmath.mpf(mu)) / mpmath.mpf(nu) ** 2))


def constants_ref(eps_ucb, delta_ucb, L, phi, r, eps, delta, sigma_min, sy2, sn2):
    """Second transcription of mu, nu, omega, C, C', C1, C2 in mpmath."""
    with mpmath.workdps(50):
        f = mpmath.mpf
        eps_ucb, L, phi, sy2, sn2, sigma_min = map(f, (eps_ucb, L, phi, sy2, sn2, sigma_min))
        mu = f(delta_ucb) / 2
        nu = min(eps_ucb / (2 * mpmath.sqrt(3) * phi**2 * L), 2 / phi**2, f(1) / 2)
        om = 16 * mpmath.sqrt(f(r) * mpmath.log(2 / f(delta))) / f(eps) * mpmath.log(16 * f(r) / f(delta))
        if sigma_min >= om:
            C = nu * phi**2
            Cp = f(1)
        else:
            q = om**2 / sigma_min**2
            C = max(nu * phi**2, 1 - mpmath.exp(-(nu + nu * q + q) * phi**2 / 2))
            Cp = 1 + q
        sy = mpmath.sqrt(sy2)
        C1 = C * sy * mpmath.sqrt(2 * sy2 + sn2) * (mpmath.sqrt(2) * (1 + C) ** 2 * sy2 / sn2 + (2 + C) * C)
        C2 = mpmath.sqrt(2) * (1 + C) * C * sy2 / sn2 * L
        return dict(mu=float(mu), nu=float(nu), omega=float(om), C=float(C), C_prime=float(Cp), C1=float(C1), C2=float(C2))


def bound_ref(eps_ucb, C1, C2, beta_T, sn2, gamma_T, T):
    with mpmath.workdps(50):
        f = mpmath.mpf
        T = f(T)
        term1 = f(eps_ucb) ** 2
        term2 = 24 * (f(C2) + f(C1) * mpmath.sqrt(f(beta_T))) ** 2 * mpmath.log(T) / T
        term3 = 24 / mpmath.log(1 + 1 / f(sn2)) * f(beta_T) * f(gamma_T) / T
        return float(mpmath.sqrt(term1 + term2 + term3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
