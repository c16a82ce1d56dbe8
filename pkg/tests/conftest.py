import numpy as np
import pytest

from asymfsr import DiagB, MatrixFn, SystemCoeffs, Weight, build_model, extend, make_sectors, mesh
from asymfsr.verify import PicardProblem

DIRAC_B = DiagB([1j, -1j])


def dirac_system(N, q12, q21=None, rho=None, Ctail=()):
    """B = diag(i, -i) with off-diagonal potentials given as callables of x."""
    x = mesh(N)
    q21 = q12 if q21 is None else q21
    A = np.zeros((N + 1, 2, 2), dtype=complex)
    A[:, 0, 1] = q12(x)
    A[:, 1, 0] = q21(x)
    w = Weight(np.ones(N + 1) if rho is None else rho(x))
    return SystemCoeffs(DIRAC_B, w, MatrixFn(A), Ctail)


def model_for(system, kappa=1, r=5.0, lam_min=1.0):
    secs = make_sectors(system.B)
    es = extend(secs[kappa - 1], r, system.B, lam_min, secs)
    return build_model(system, es)


def const(c):
    return lambda x: np.full_like(x, c, dtype=complex)


def random_picard_problem(rng, N=64, tau_max=3.0):
    n = int(rng.integers(1, 4))
    x = mesh(N)
    T = np.zeros((N + 1, n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            c = rng.normal(size=4)
            T[:, j, k] = c[0] + c[1] * np.cos(5 * c[2] * x) + 1j * c[3] * x
    T *= rng.uniform(0.1, tau_max) / np.mean(np.max(np.sum(np.abs(T), axis=2), axis=1))
    xi = int(rng.integers(0, N + 1)) / N
    f = None
    if rng.uniform() < 0.5:
        f = rng.normal(size=(N + 1, n)) + 1j * rng.normal(size=(N + 1, n)) * np.cos(x)[:, None]
    z0 = rng.normal(size=n) + 1j * rng.normal(size=n)
    return PicardProblem(MatrixFn(T), z0, xi, f)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)
