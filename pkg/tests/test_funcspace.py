import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asymfsr.exceptions import ValidationError
from asymfsr.funcspace import (GridFn, MatrixFn, Weight, antiderivative, l_norm, mesh, oscillatory_cell_integral,
                               prefix_convolution, suffix_convolution)

finite = st.floats(-10, 10, allow_nan=False)


def test_gridfn_nodes_exact():
    vals = np.array([1.0, 2 + 1j, -3.0])
    f = GridFn(vals)
    assert f.N == 2
    for i, x in enumerate(mesh(2)):
        assert f(x) == vals[i]


def test_gridfn_rejects_bad_input():
    with pytest.raises(ValidationError):
        GridFn([1.0, 2.0])
    with pytest.raises(ValidationError):
        GridFn([1.0, np.nan, 2.0])


def test_weight_rejects_nonpositive():
    with pytest.raises(ValidationError):
        Weight([1.0, 0.0, 1.0])
    with pytest.raises(ValidationError):
        Weight([1.0, -1.0, 1.0])


def test_antiderivative_examples():
    N = 1024
    x = mesh(N)
    g = antiderivative(GridFn(np.ones(N + 1)))
    assert g.values[-1] == pytest.approx(1.0, abs=1e-15)
    assert np.max(np.abs(g.values - x)) < 1e-14
    assert np.all(antiderivative(GridFn(np.zeros(N + 1))).values == 0)
    # trapezoid is exact for a piecewise-linear integrand
    assert antiderivative(GridFn(2 * x)).values[-1] == pytest.approx(1.0, abs=1e-14)


def test_antiderivative_anchor():
    N = 16
    x = mesh(N)
    g = antiderivative(GridFn(np.ones(N + 1)), anchor=0.5)
    assert np.max(np.abs(g.values - (x - 0.5))) < 1e-15
    with pytest.raises(ValidationError):
        antiderivative(GridFn(np.ones(N + 1)), anchor=1.5)


def test_oscillatory_cell_integral_examples():
    assert oscillatory_cell_integral(1, 0, 0, 0, 1) == pytest.approx(1.0, abs=1e-15)
    assert oscillatory_cell_integral(1, 0, 1j * np.pi, 0, 1) == pytest.approx(2j / np.pi, abs=1e-15)
    # value of ((i pi - 1) e^{i pi} + 1) / (i pi)^2, confirmed by a 10^4-point trapezoid
    expected = (1j * np.pi - 2) / np.pi ** 2
    assert oscillatory_cell_integral(0, 1, 1j * np.pi, 0, 1) == pytest.approx(expected, abs=1e-14)
    t = np.linspace(0, 1, 10001)
    f = t * np.exp(1j * np.pi * t)
    trap = np.sum(0.5 * (f[1:] + f[:-1])) * 1e-4
    assert abs(trap - expected) < 1e-7


unit = st.floats(-1, 1, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(unit, unit, unit, unit)
def test_taylor_branch_continuous(ar, ai, br, bi):
    a, b = complex(ar, ai), complex(br, bi)
    c = 1e-5 * np.exp(1j * 0.7)
    closed = oscillatory_cell_integral(a, b, c, 0, 1, method="closed")
    taylor = oscillatory_cell_integral(a, b, c, 0, 1, method="taylor")
    assert abs(closed - taylor) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0, 1), st.floats(0, 1))
def test_cell_integral_against_fine_trapezoid(cr, ci, t0, dt):
    c = complex(cr, ci)
    t1 = min(1.0, t0 + dt)
    t = np.linspace(t0, t1, 20001)
    f = (0.3 - 1.1j * t) * np.exp(c * t)
    ref = np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(t))
    got = oscillatory_cell_integral(0.3, -1.1j, c, t0, t1)
    scale = max(1.0, np.max(np.abs(f)))
    assert abs(got - ref) <= 1e-6 * scale


def test_l_norm_examples():
    N = 256
    x = mesh(N)
    assert l_norm(GridFn(np.ones(N + 1)), 2) == pytest.approx(1.0, abs=1e-14)
    assert l_norm(GridFn(x), 1) == pytest.approx(0.5, abs=1e-14)
    # the interpolant's norm is O(h^2) away from the smooth one
    xf = mesh(16384)
    assert l_norm(GridFn(np.sin(np.pi * xf)), 2) == pytest.approx(1 / np.sqrt(2), abs=1e-8)
    with pytest.raises(ValidationError):
        l_norm(GridFn(x), 0.5)


def test_matrix_norms():
    N = 8
    vals = np.zeros((N + 1, 2, 2), dtype=complex)
    vals[:, 0, 0] = 1.0
    vals[:, 0, 1] = 1.0
    vals[:, 1, 1] = 2.0
    M = MatrixFn(vals)
    # sum over rows of (sum_k int |t_jk|^p)^(1/p)
    assert l_norm(M, 1) == pytest.approx(4.0)
    assert l_norm(M, 2) == pytest.approx(np.sqrt(2) + 2.0)
    assert l_norm(M, np.inf) == pytest.approx(2.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=9, max_size=9), st.floats(1, 8), st.floats(0, 8))
def test_holder_monotone(vals, mu1, extra):
    f = GridFn(np.array(vals))
    mu2 = mu1 + extra
    assert l_norm(f, mu1) <= l_norm(f, mu2) * (1 + 1e-12) + 1e-15
    assert l_norm(f, mu2) <= l_norm(f, np.inf) * (1 + 1e-12) + 1e-15


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=17, max_size=17))
def test_antiderivative_matches_integral(vals):
    f = GridFn(np.array(vals))
    total = antiderivative(f).values[-1]
    ref = np.trapezoid(f.values, dx=1.0 / f.N) if hasattr(np, "trapezoid") else np.trapz(f.values, dx=1.0 / f.N)
    assert abs(total - ref) <= 1e-12 * max(1.0, np.sum(np.abs(vals)) / 16)


def _brute_prefix(g, p, w):
    """int_0^{x_i} g(t) e^{w (p_i - p(t))} dt on a 64x finer piecewise-linear mesh."""
    N = g.size - 1
    fine = 64 * N
    xf = np.linspace(0, 1, fine + 1)
    xc = mesh(N)
    gf = np.interp(xf, xc, g.real) + 1j * np.interp(xf, xc, g.imag)
    pf = np.interp(xf, xc, p)
    out = np.zeros(N + 1, dtype=complex)
    for i in range(1, N + 1):
        sl = slice(0, 64 * i + 1)
        h = gf[sl] * np.exp(w * (p[i] - pf[sl]))
        out[i] = np.sum(0.5 * (h[1:] + h[:-1])) / fine
    return out


def test_prefix_convolution_against_fine_quadrature():
    N = 32
    x = mesh(N)
    g = np.cos(3 * x) + 1j * x ** 2
    p = x + 0.2 * x ** 2
    w = 7.0 - 40.0j
    got = prefix_convolution(g, np.diff(p), 1.0 / N, w)
    ref = _brute_prefix(g, p, w)
    # the fine reference has its own O((w h)^2) relative error with h = 1/2048
    assert np.max(np.abs(got - ref) / np.maximum(1.0, np.abs(ref))) < 1e-4


def test_suffix_is_reversed_prefix():
    N = 40
    x = mesh(N)
    g = np.exp(1j * x)
    dp = np.full(N, 1.0 / N)
    w = -3.0 + 25j
    got = suffix_convolution(g, dp, 1.0 / N, w)
    # int_x^1 e^{i t} e^{w (x - t)} dt in closed form
    c = 1j - w
    ref = np.exp(w * x) * (np.exp(c * 1.0) - np.exp(c * x)) / c
    assert np.max(np.abs(got - ref)) < 1e-3 * np.max(np.abs(ref))


def test_matrixfn_entries():
    M = MatrixFn.from_entries([[None, GridFn([1.0, 2.0, 3.0])], [None, None]])
    assert M.n == 2 and M.N == 2
    assert np.all(M.entry(0, 0).values == 0)
    assert M.entry(0, 1).values[2] == 3.0
    assert MatrixFn.zeros(2, 4).is_zero()
