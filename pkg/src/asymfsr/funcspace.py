"""Piecewise-linear functions on a uniform mesh of [0, 1] and their quadratures.

Every coefficient function of a problem lives on one shared mesh x_i = i/N.
Values are stored at the N + 1 nodes and interpreted as the piecewise-linear
interpolant.  Besides plain quadrature the module provides the exact cell
integral of (a + b t) exp(c t) and a cumulative convolution with an
exponential kernel whose exponent is linear in a phase variable p(t).
"""

import numpy as np

from .exceptions import ExponentBoundError, ValidationError

# Below this |c * h| the cell integral uses its Taylor expansion.
TAYLOR_THRESHOLD = 1e-4
# Largest real exponent span handled in one block of the cumulative sum.
_BLOCK_SPAN = 200.0

# 4-point Gauss-Legendre rule on [0, 1].
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def _freeze(arr):
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


class GridFn:
    """Complex function on [0, 1], piecewise linear on a uniform mesh.

    Args:
        values: samples at the N + 1 nodes x_i = i / N.
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 1:
            raise ValidationError("GridFn values must be one-dimensional")
        if values.size < 3:
            raise ValidationError("GridFn needs at least 2 cells")
        if not np.all(np.isfinite(values)):
            raise ValidationError("GridFn samples must be finite")
        self.values = _freeze(values)

    @property
    def N(self):
        return self.values.size - 1

    @property
    def x(self):
        return mesh(self.N)

    @classmethod
    def constant(cls, value, N):
        return cls(np.full(N + 1, value, dtype=complex))

    @classmethod
    def from_function(cls, func, N):
        return cls(func(mesh(N)))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        x = self.x
        return np.interp(t, x, self.values.real) + 1j * np.interp(t, x, self.values.imag)

    def resample(self, N):
        if N == self.N:
            return self
        return GridFn(self(mesh(N)))

    def __repr__(self):
        return f"GridFn(N={self.N})"


class Weight(GridFn):
    """Real, strictly positive GridFn (spectral weights, leading coefficients)."""

    def __init__(self, values, rho_min=1e-9):
        values = np.asarray(values)
        if np.iscomplexobj(values):
            if np.any(np.abs(values.imag) > 1e-14 * np.maximum(1.0, np.abs(values.real))):
                raise ValidationError("weight must be real")
            values = values.real
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 3:
            raise ValidationError("weight needs at least 2 cells")
        if not np.all(np.isfinite(values)):
            raise ValidationError("weight samples must be finite")
        if np.any(values < rho_min):
            raise ValidationError(f"weight not positive: minimum node value {values.min()!r} < {rho_min!r}")
        super().__init__(values)
        self.real_values = _freeze(values)
        self.rho_min = rho_min

    def slope(self):
        """Nodal derivative of the sampled weight (second-order differences)."""
        return np.gradient(self.real_values, 1.0 / self.N, edge_order=2)

    def resample(self, N):
        if N == self.N:
            return self
        return Weight(np.interp(mesh(N), self.x, self.real_values), self.rho_min)


class MatrixFn:
    """n x n matrix of piecewise-linear functions sharing one mesh.

    Values are stored as an array of shape (N + 1, n, n).
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 3 or values.shape[1] != values.shape[2]:
            raise ValidationError("MatrixFn values must have shape (N+1, n, n)")
        if values.shape[0] < 3:
            raise ValidationError("MatrixFn needs at least 2 cells")
        if not np.all(np.isfinite(values)):
            raise ValidationError("MatrixFn samples must be finite")
        self.values = _freeze(values)

    @property
    def N(self):
        return self.values.shape[0] - 1

    @property
    def n(self):
        return self.values.shape[1]

    @classmethod
    def zeros(cls, n, N):
        return cls(np.zeros((N + 1, n, n), dtype=complex))

    @classmethod
    def identity(cls, n, N):
        return cls(np.broadcast_to(np.eye(n, dtype=complex), (N + 1, n, n)))

    @classmethod
    def from_entries(cls, entries):
        """Build from an n x n nested list of GridFn (None means zero)."""
        n = len(entries)
        N = next(e.N for row in entries for e in row if e is not None)
        out = np.zeros((N + 1, n, n), dtype=complex)
        for j, row in enumerate(entries):
            if len(row) != n:
                raise ValidationError("matrix entries must form a square array")
            for k, e in enumerate(row):
                if e is not None:
                    if e.N != N:
                        raise ValidationError("all matrix entries must share one mesh")
                    out[:, j, k] = e.values
        return cls(out)

    def entry(self, j, k):
        return GridFn(self.values[:, j, k])

    def is_zero(self):
        return not np.any(self.values)

    def resample(self, N):
        if N == self.N:
            return self
        x_old, x_new = mesh(self.N), mesh(N)
        flat = self.values.reshape(self.N + 1, -1)
        out = np.empty((N + 1, flat.shape[1]), dtype=complex)
        for c in range(flat.shape[1]):
            out[:, c] = np.interp(x_new, x_old, flat[:, c].real) + 1j * np.interp(x_new, x_old, flat[:, c].imag)
        return MatrixFn(out.reshape(N + 1, self.n, self.n))

    def __repr__(self):
        return f"MatrixFn(n={self.n}, N={self.N})"


def mesh(N):
    return np.arange(N + 1) / N


def antiderivative(f, anchor=0.0):
    """Primitive of the interpolant vanishing at ``anchor`` (exact at nodes).

    Accepts a GridFn or a raw nodal array whose first axis is the mesh.
    """
    if not 0.0 <= anchor <= 1.0:
        raise ValidationError(f"anchor {anchor!r} outside [0, 1]")
    values = f.values if isinstance(f, GridFn) else np.asarray(f)
    N = values.shape[0] - 1
    dx = 1.0 / N
    cells = 0.5 * dx * (values[1:] + values[:-1])
    prim = np.concatenate([np.zeros_like(values[:1]), np.cumsum(cells, axis=0)])
    prim = prim - _interp_nodes(prim, anchor)
    return GridFn(prim) if isinstance(f, GridFn) else prim


def _interp_nodes(values, t):
    N = values.shape[0] - 1
    s = t * N
    i = min(int(np.floor(s)), N - 1)
    w = s - i
    return (1.0 - w) * values[i] + w * values[i + 1]


def _phi1(z):
    """int_0^1 exp(z u) du, elementwise."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < TAYLOR_THRESHOLD
    zs = z[small]
    out[small] = 1.0 + zs * (1.0 / 2 + zs * (1.0 / 6 + zs / 24))
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb
    return out


def _psi(z):
    """int_0^1 u exp(z u) du, elementwise."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < TAYLOR_THRESHOLD
    zs = z[small]
    out[small] = 1.0 / 2 + zs * (1.0 / 3 + zs * (1.0 / 8 + zs / 30))
    zb = z[~small]
    em1 = np.expm1(zb)
    out[~small] = (zb * (em1 + 1.0) - em1) / zb**2
    return out


def oscillatory_cell_integral(a, b, c, t0, t1, method="auto"):
    """Exact value of int_{t0}^{t1} (a + b t) exp(c t) dt.

    ``method`` selects "closed", "taylor" or "auto" (Taylor below the
    threshold |c (t1 - t0)| < 1e-4).
    """
    if t1 < t0:
        raise ValidationError("need t0 <= t1")
    h = t1 - t0
    z = np.asarray(complex(c) * h)
    if method == "auto":
        phi, psi = _phi1(z), _psi(z)
    elif method == "closed":
        em1 = np.expm1(z)
        phi = em1 / z
        psi = (z * (em1 + 1.0) - em1) / z**2
    elif method == "taylor":
        phi = 1.0 + z * (1.0 / 2 + z * (1.0 / 6 + z / 24))
        psi = 1.0 / 2 + z * (1.0 / 3 + z * (1.0 / 8 + z / 30))
    else:
        raise ValidationError(f"unknown method {method!r}")
    return complex(np.exp(c * t0) * h * ((a + b * t0) * phi + b * h * psi))


def l_norm(f, mu):
    """L_mu norm of a GridFn, or the row-summed matrix norm of a MatrixFn.

    For a MatrixFn and finite mu this is sum_j (sum_k int |t_jk|^mu)^(1/mu);
    for mu = inf it is the largest sup-norm among the entries.
    """
    mu = float(mu)
    if mu < 1:
        raise ValidationError(f"norm exponent {mu!r} < 1")
    if isinstance(f, MatrixFn):
        vals = f.values
        if np.isinf(mu):
            return float(np.max(np.abs(vals))) if vals.size else 0.0
        integ = _abs_power_integral(vals, mu)
        return float(np.sum(np.sum(integ, axis=1) ** (1.0 / mu)))
    vals = f.values if isinstance(f, GridFn) else np.asarray(f)
    if np.isinf(mu):
        return float(np.max(np.abs(vals)))
    return float(_abs_power_integral(vals, mu) ** (1.0 / mu))


def _abs_power_integral(vals, mu):
    """int_0^1 |interpolant|^mu over the first axis (composite Gauss, 4 nodes/cell)."""
    N = vals.shape[0] - 1
    left, right = vals[:-1], vals[1:]
    total = 0.0
    for u, w in zip(_GL_NODES, _GL_WEIGHTS):
        total = total + w * np.sum(np.abs(left + u * (right - left)) ** mu, axis=0)
    return total / N


def matrix_l1(values):
    """Matrix L1 norm sum_{j,k} int |t_jk| of nodal values (N+1, n, n)."""
    return float(np.sum(_abs_power_integral(np.asarray(values), 1.0)))


def cell_integrals(g0, g1, e0, e1, dx):
    """int over a cell of (linear g) * exp(linear exponent), anchored stably.

    g0, g1 and e0, e1 are the amplitude and exponent at the two cell ends.
    The exponential is factored at the end with the larger real part so that
    the remaining factor never grows.
    """
    g0, g1 = np.asarray(g0, dtype=complex), np.asarray(g1, dtype=complex)
    e0, e1 = np.asarray(e0, dtype=complex), np.asarray(e1, dtype=complex)
    right = e1.real >= e0.real
    anchor = np.where(right, e1, e0)
    near = np.where(right, g1, g0)
    far = np.where(right, g0, g1)
    z = np.where(right, e0 - e1, e1 - e0)
    return np.exp(anchor) * dx * (near * _phi1(z) + (far - near) * _psi(z))


def prefix_convolution(g, dp, dx, w, bound=None):
    """F(x_i) = int_0^{x_i} g(t) exp(w (p(x_i) - p(t))) dt at every node.

    Args:
        g: nodal amplitudes, shape (N + 1,) complex.
        dp: per-cell increments of the nondecreasing phase p, shape (N,).
        dx: mesh width.
        w: complex exponent rate.
        bound: optional cap on the largest real exponent evaluated; raises
            ExponentBoundError when max(Re w, 0) * p(1) exceeds it.

    The recurrence F_{i+1} = exp(w dp_i) F_i + K_i is solved blockwise by
    rescaled cumulative sums, with blocks short enough that no intermediate
    exponential leaves the double range.
    """
    g = np.asarray(g, dtype=complex)
    dp = np.asarray(dp, dtype=float)
    N = dp.size
    w = complex(w)
    ptot = float(np.sum(dp))
    if bound is not None and max(w.real, 0.0) * ptot > bound + 1e-6:
        raise ExponentBoundError(
            f"exponent bound violated: growth rate {max(w.real, 0.0) * ptot!r} exceeds {bound!r}"
        )
    z = w * dp
    # cell integral referenced to the right end of each cell
    K = dx * (g[1:] * _phi1(z) + (g[:-1] - g[1:]) * _psi(z))
    if w == 0:
        return np.concatenate([[0.0], np.cumsum(K)])
    e = np.concatenate([[0.0], np.cumsum(z)])
    re = np.abs(e.real)
    F = np.zeros(N + 1, dtype=complex)
    s = 0
    while s < N:
        end = int(np.searchsorted(re, re[s] + _BLOCK_SPAN, side="right")) - 1
        end = min(max(end, s + 1), N)
        if end == s + 1:
            F[end] = np.exp(z[s]) * F[s] + K[s]
        else:
            rel = e[s + 1:end + 1] - e[s]
            acc = np.cumsum(np.exp(-rel) * K[s:end])
            F[s + 1:end + 1] = np.exp(rel) * (F[s] + acc)
        s = end
    return F


def suffix_convolution(g, dp, dx, w, bound=None):
    """F(x_i) = int_{x_i}^1 g(t) exp(w (p(x_i) - p(t))) dt at every node."""
    g = np.asarray(g, dtype=complex)
    dp = np.asarray(dp, dtype=float)
    return prefix_convolution(g[::-1], dp[::-1], dx, -complex(w), bound)[::-1]
