from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
import sympy as sp

from asymfsr.exceptions import ValidationError
from asymfsr.funcspace import GridFn, mesh
from asymfsr.highorder import (HighOrderProblem, assemble_fsr, build_F, build_system, coupling_formula,
                               coupling_similarity, diagonalize, exponents_from_similarity, f_matrix,
                               leading_exponents, omegas, validate)
from asymfsr.model import build_model, gamma
from asymfsr.sectors import extend, make_sectors
from asymfsr.solver import assemble_Y, solve_Z


def problem(N, m, tau0=None, rho=None, T=None, S=None):
    x = mesh(N)
    one = GridFn(np.ones(N + 1))
    zero = GridFn(np.zeros(N + 1))
    T = [GridFn(t(x)) for t in T] if T else [zero] * m
    S = [GridFn(s(x)) for s in S] if S else [zero] * m
    return HighOrderProblem(m, GridFn(tau0(x)) if tau0 else one, GridFn(rho(x)) if rho else one, T, S)


def smooth(rng, x, positive=False):
    c = rng.normal(size=3) * 0.5
    f = c[0] + c[1] * np.sin(np.pi * x * rng.uniform(0.5, 2)) + c[2] * np.cos(2 * x)
    return np.exp(f) if positive else f


def random_problem(rng, N, m):
    x = mesh(N)
    return HighOrderProblem(m, GridFn(smooth(rng, x, True)), GridFn(smooth(rng, x, True)),
                            [GridFn(smooth(rng, x) + 0j) for _ in range(m)],
                            [GridFn(smooth(rng, x)) for _ in range(m)])


# symbolic model of the expression and of the quasi-derivative matrix

X = sp.symbols("x")


def _symbolic_f(m, Tf, Sf, t0):
    n = 2 * m
    phi = lambda k: Tf[k] + sp.I * Sf[k - 1]
    psi = lambda k: Tf[k] - sp.I * Sf[k - 1]
    f = {}
    for j in range(1, n):
        f[(j, j + 1)] = 1 / t0 if j == m else 1
    for k in range(1, m + 1):
        f[(m, k)] = (-1) ** (m - k) * phi(m + 1 - k) / t0
    for j in range(m + 1, n + 1):
        f[(j, m + 1)] = -psi(j - m) / t0
    for k in range(1, m + 1):
        for j in range(0, m):
            v = (-1) ** (j + 1) * phi(j + 1) * psi(k) / t0
            if j + k < m:
                r = j + k + 1
                v += (-1) ** j * comb(r, k) * (Tf[r] + sp.I * sp.Rational(j - k + 1, r) * Sf[j + k])
            f[(m + k, m - j)] = v
    return f


@pytest.mark.parametrize("m", [1, 2])
def test_quasi_derivative_identity_symbolic(m):
    n = 2 * m
    y = sp.Function("y")(X)
    t0 = sp.Function("t0")(X)
    Tf = [None] + [sp.Function(f"T{k}")(X) for k in range(1, m + 1)]
    Sf = [sp.Function(f"S{k}")(X) for k in range(m)]
    tau = [t0] + [sp.diff(Tf[k], X, k) for k in range(1, m + 1)]
    sig = [sp.diff(Sf[k], X, k) for k in range(m)]
    l = 0
    for k in range(m + 1):
        l += (-1) ** (m - k) * sp.diff(tau[k] * sp.diff(y, X, m - k), X, m - k)
    for k in range(m):
        l += sp.I * (-1) ** (m - k - 1) * (sp.diff(sig[k] * sp.diff(y, X, m - k - 1), X, m - k)
                                           + sp.diff(sig[k] * sp.diff(y, X, m - k), X, m - k - 1))
    f = _symbolic_f(m, Tf, Sf, t0)
    F = lambda j, k: f.get((j, k), 0)
    q = [y]
    for k in range(1, n):
        q.append(sp.expand((sp.diff(q[k - 1], X) - sum(F(k, s) * q[s - 1] for s in range(1, k + 1))) / F(k, k + 1)))
    lhs = (-1) ** m * (sp.diff(q[n - 1], X) - sum(F(n, s) * q[s - 1] for s in range(1, n + 1)))
    assert sp.simplify(sp.expand(lhs - l)) == 0


@pytest.mark.parametrize("m", [1, 2, 3])
def test_f_matrix_matches_symbolic_entries(m):
    N = 32
    x = mesh(N)
    Tf = [None] + [sp.sin((k + 1) * X) + k for k in range(1, m + 1)]
    Sf = [sp.cos(X) * (k + 1) for k in range(m)]
    t0 = 1 + X ** 2
    f = _symbolic_f(m, Tf, Sf, t0)
    prob = HighOrderProblem(m, GridFn(sp.lambdify(X, t0)(x)), GridFn(np.ones(N + 1)),
                            [GridFn(sp.lambdify(X, Tf[k])(x) + 0 * x) for k in range(1, m + 1)],
                            [GridFn(sp.lambdify(X, Sf[k])(x) + 0 * x) for k in range(m)])
    got = f_matrix(prob)
    n = 2 * m
    for j in range(1, n + 1):
        for k in range(1, n + 1):
            ref = sp.lambdify(X, f.get((j, k), 0), "numpy")(x) + 0 * x
            assert np.max(np.abs(got[:, j - 1, k - 1] - ref)) < 1e-12


def test_validate_examples():
    N = 64
    x = mesh(N)
    ok = validate(problem(N, 1, T=[lambda x: np.sin(x) + 0j]))
    assert ok.ok
    tau = np.ones(N + 1)
    tau[10] = 0
    bad = validate(HighOrderProblem(1, GridFn(tau), GridFn(np.ones(N + 1)), [GridFn(x)], [GridFn(0 * x)]))
    assert not bad.ok and "leading coefficient not positive" in bad.errors
    rho = -np.ones(N + 1)
    bad = validate(HighOrderProblem(1, GridFn(np.ones(N + 1)), GridFn(rho), [GridFn(x)], [GridFn(0 * x)]))
    assert "spectral weight not positive" in bad.errors


def test_validate_integrable_singularity():
    N = 4096
    x = mesh(N)
    t = np.empty(N + 1)
    t[1:] = x[1:] ** -0.25
    t[0] = t[1]
    rep = validate(HighOrderProblem(1, GridFn(np.ones(N + 1)), GridFn(np.ones(N + 1)), [GridFn(t)], [GridFn(0 * x)]))
    assert rep.ok
    # int_0^1 x^(-1/2) dx = 2
    assert rep.norms["T1"] == pytest.approx(np.sqrt(2), rel=0.02)


def test_omegas():
    assert omegas(1) == [1j, -1j]
    assert np.allclose(omegas(2), [1, 1j, -1, -1j], atol=1e-15)
    w3 = np.array(omegas(3))
    assert np.allclose(w3, np.exp(1j * np.pi * (2 * np.arange(6) + 1) / 6))
    for m in range(1, 6):
        w = np.array(omegas(m))
        assert np.max(np.abs(w ** (2 * m) - (-1) ** m)) < 1e-12
        assert np.max(np.abs(np.abs(w) - 1)) < 1e-15


def test_build_F_examples():
    N = 16
    x = mesh(N)
    T1 = lambda x: 0.3 + x ** 2 + 0j
    prob = problem(N, 1, T=[T1])
    f = f_matrix(prob)
    t = T1(x)
    assert np.allclose(f[:, 0, 0], t) and np.allclose(f[:, 0, 1], 1)
    assert np.allclose(f[:, 1, 0], -t ** 2) and np.allclose(f[:, 1, 1], -t)
    F1, F0, Fneg = build_F(problem(N, 1))
    assert np.allclose(F1.values, [[0, 1], [-1, 0]]) and F0.is_zero() and Fneg[0].is_zero()
    F1, F0, Fneg = build_F(problem(N, 2))
    ref = np.diag(np.ones(3), 1)
    ref[3, 0] = 1
    assert np.allclose(F1.values, ref) and F0.is_zero() and all(F.is_zero() for F in Fneg)


def test_diagonalize_examples(rng):
    N = 64
    x = mesh(N)
    tau, rho = smooth(rng, x, True), smooth(rng, x, True)
    prob = HighOrderProblem(1, GridFn(tau), GridFn(rho), [GridFn(0 * x)], [GridFn(0 * x)])
    W, Wi = diagonalize(prob)
    s = np.sqrt(rho * tau)
    assert np.allclose(W.values[:, 1, 0], 1j * s) and np.allclose(W.values[:, 1, 1], -1j * s)
    assert np.allclose(W.values[:, 0], 1)
    W, Wi = diagonalize(problem(N, 1))
    assert np.allclose(Wi.values, 0.5 * np.array([[1, -1j], [1, 1j]]))


def test_reduced_invariants(rng):
    N = 256
    for m in (1, 2, 3):
        for _ in range(3):
            prob = random_problem(rng, N, m)
            red = build_system(prob)
            W, Wi = red.W.values, red.W_inv.values
            n = 2 * m
            assert np.max(np.abs(W @ Wi - np.eye(n))) < 1e-10
            D = Wi @ red.F1.values @ W
            ref = red.rho.real_values[:, None, None] * np.diag(red.omega)[None]
            assert np.max(np.abs(D - ref)) < 1e-8
            A = red.system.A.values
            diag = np.diagonal(A, axis1=1, axis2=2)
            assert np.max(np.abs(diag - diag[:, :1])) < 1e-12
            assert red.A_crosscheck < 1e-6


def test_build_system_sturm_liouville_display():
    N = 64
    x = mesh(N)
    T1 = lambda x: np.sin(3 * x) + 0j
    red = build_system(problem(N, 1, T=[T1]))
    A = red.system.A.values
    t = T1(x)
    assert np.max(np.abs(A[:, 0, 1] - t)) < 1e-14 and np.max(np.abs(A[:, 1, 0] - t)) < 1e-14
    assert np.max(np.abs(A[:, 0, 0])) < 1e-14
    # C(x, lam) = (i T1^2 / (2 lam)) [[1, 1], [-1, -1]]
    C1 = red.system.Ctail[0].values
    ref = 0.5j * t[:, None, None] ** 2 * np.array([[1, 1], [-1, -1]])
    assert np.max(np.abs(C1 - ref)) < 1e-14


def test_build_system_constant_weight():
    N = 16
    red = build_system(problem(N, 1, rho=lambda x: 4 + 0 * x))
    assert np.allclose(red.system.rho.real_values, 2.0)
    assert red.system.A.is_zero()
    assert all(C.is_zero() for C in red.system.Ctail)


def test_gamma_laurent_decay(rng):
    N = 256
    for _ in range(5):
        red = build_system(random_problem(rng, N, int(rng.integers(1, 3))))
        for lam in (10.0, 40.0, 160.0):
            assert gamma(red.system.Ctail, 2 * lam) <= 0.6 * gamma(red.system.Ctail, lam)


def test_validation_failure_propagates():
    N = 8
    x = mesh(N)
    with pytest.raises(ValidationError):
        build_system(HighOrderProblem(1, GridFn(-np.ones(N + 1)), GridFn(np.ones(N + 1)), [GridFn(x)], [GridFn(x)]))


def test_exponent_tables():
    assert leading_exponents(2, 0) == (Fraction(-1, 4), Fraction(-1, 4))
    assert leading_exponents(2, 1) == (Fraction(1, 4), Fraction(1, 4))
    for n in (2, 4, 6, 8):
        for j in range(n):
            assert leading_exponents(n, j) == exponents_from_similarity(n, j)


def _solve_reduced(red, lam, r=5.0):
    s = red.system
    secs = make_sectors(s.B)
    theta = np.angle(lam)
    kappa = next(i for i, sec in enumerate(secs) if sec.alpha_lo < theta % (2 * np.pi) < sec.alpha_hi
                 or sec.alpha_lo < theta < sec.alpha_hi)
    ms = build_model(s, extend(secs[kappa], r, s.B, 1.0, secs))
    return assemble_Y(ms, solve_Z(ms, lam))


def test_assemble_fsr_zero_potential():
    N = 128
    red = build_system(problem(N, 1))
    lam = 40 + 10j
    Y = _solve_reduced(red, lam)
    tab = assemble_fsr(red, Y, lam)
    assert np.max(np.abs(tab.zeta)) < 1e-10
    assert np.allclose(tab.leading[:, 0], 1) and np.allclose(tab.leading[:, 1], [1j, -1j])
    x = mesh(N)
    assert np.allclose(tab.exponents, np.stack([1j * lam * x, -1j * lam * x], 1))


def test_assemble_fsr_remainder_decays(rng):
    N = 2048
    x = mesh(N)
    prob = HighOrderProblem(1, GridFn(1 + 0.3 * x), GridFn(np.exp(0.2 * np.sin(2 * x))), [GridFn(0 * x)],
                            [GridFn(0.1 * np.cos(x))])
    red = build_system(prob)
    z = []
    for r in (50.0, 200.0):
        tab = assemble_fsr(red, _solve_reduced(red, 1j * r), 1j * r)
        z.append(np.max(np.abs(tab.zeta)))
    assert z[1] <= 0.5 * z[0]


def test_assemble_fsr_dimension_check():
    N = 16
    red = build_system(problem(N, 1))
    Y = _solve_reduced(build_system(problem(2 * N, 1)), 20j)
    with pytest.raises(ValidationError):
        assemble_fsr(red, Y, 20j)


def test_n4_unit_roots_and_coupling():
    N = 512
    rng = np.random.default_rng(4)
    prob = random_problem(rng, N, 2)
    red = build_system(prob)
    assert np.allclose(np.abs(red.omega), 1)
    A2 = coupling_similarity(prob)
    assert np.max(np.abs(coupling_formula(prob) - A2)) <= 1e-5


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8))
def test_omegas_property(m):
    w = np.array(omegas(m))
    assert len(w) == 2 * m and len(set(np.round(w, 12))) == 2 * m
    assert np.max(np.abs(w ** (2 * m) - (-1) ** m)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.floats(0.1, 10), st.floats(0.1, 10))
def test_similarity_property(m, tau, rho):
    N = 4
    one = np.ones(N + 1)
    zero = GridFn(np.zeros(N + 1))
    prob = HighOrderProblem(m, GridFn(tau * one), GridFn(rho * one), [zero] * m, [zero] * m)
    W, Wi = diagonalize(prob)
    assert np.max(np.abs(W.values @ Wi.values - np.eye(2 * m))) < 1e-9
    F1 = build_F(prob)[0].values
    r = (rho / tau) ** (1 / (2 * m))
    D = Wi.values @ F1 @ W.values
    assert np.max(np.abs(D - r * np.diag(omegas(m)))) < 1e-9 * max(1, r)
