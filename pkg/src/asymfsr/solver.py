"""Successive approximations for the normalized fundamental matrix Z.

With Y = M Z E the columns z_k of Z solve the integral system

    z_jk(x) = -int_x^1 sum_l v_jl(t) e^{(b_j - b_k) lam (p(x) - p(t))} z_lk(t) dt,  j < k,
    z_jk(x) = delta_jk + int_0^x (same integrand) dt,                               j >= k,

where v = Q + R(lam) and indices follow the sector order.  Each application
of the operator is a set of prefix/suffix convolutions with exponential
kernels that decay (up to the shift constant h) inside the sector domain.

Indices in this module are 0-based and refer to sector order.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceError, ExponentBoundError, NoContractionError, OutsideDomainError, ValidationError
from .funcspace import MatrixFn, GridFn, cell_integrals, l_norm, matrix_l1, prefix_convolution, suffix_convolution
from .model import FactoredMatrix, gamma
from .sectors import contains


@dataclass(frozen=True)
class SolveOptions:
    """Truncation and sampling controls for :func:`solve_Z`."""

    max_iter: int = 40
    tol_series: float = 1e-12
    mu: float = np.inf
    contraction_cap: float = 0.9
    n_samples: int = 64

    def __post_init__(self):
        if self.max_iter < 4:
            raise ValidationError("max_iter must be at least 4")
        if not self.tol_series > 0:
            raise ValidationError("tol_series must be positive")
        if not float(self.mu) >= 1:
            raise ValidationError("mu must be >= 1 or inf")
        if self.n_samples < 2:
            raise ValidationError("n_samples must be at least 2")


@dataclass(frozen=True)
class UpsilonStats:
    """Oscillatory-integral statistics at one spectral parameter."""

    ups: float
    ups_mu: float
    ups_x: GridFn
    gamma: float
    rho_max: float
    rho_bound: float

    @property
    def rho_bound_ok(self):
        return self.rho_max <= self.rho_bound * (1 + 1e-9) + 1e-300


@dataclass(frozen=True)
class AsymptoticSolution:
    """Result of :func:`solve_Z` at one lam (arrays in sector order)."""

    lam: complex
    sector: object
    Zterms: tuple
    Z: MatrixFn
    iterations: int
    fp_residual: float
    stats: UpsilonStats
    contraction_ratio: float
    contraction_bound: float
    ratios: tuple
    constants: dict
    options: SolveOptions = field(default_factory=SolveOptions)

    @property
    def Z1(self):
        return self.Zterms[1]

    def remainder_norm(self):
        """||Z - I||_inf."""
        n = self.Z.n
        return float(np.max(np.abs(self.Z.values - np.eye(n))))

    def refined_remainder_norm(self):
        """||Z - I - Z^1||_inf."""
        n = self.Z.n
        return float(np.max(np.abs(self.Z.values - np.eye(n) - self.Zterms[1].values)))


def _check_domain(ms, lam):
    if not contains(ms.sector, lam):
        raise OutsideDomainError(f"lam = {complex(lam)!r} is outside the extended sector domain")


def coupling(ms, lam):
    """Nodal values of v = Q + R(lam)."""
    return ms.Q.values + ms.R_values(lam)


def apply_Vk(ms, lam, k, z, v=None):
    """One application of the column-k integral operator to z (shape (N+1, n))."""
    lam = complex(lam)
    v = coupling(ms, lam) if v is None else v
    z = np.asarray(z, dtype=complex)
    g = np.einsum("ijl,il->ij", v, z)
    dp, dx = ms.dp, 1.0 / ms.N
    bound = ms.sector.h * ms.ptot
    out = np.zeros_like(g)
    for j in range(ms.n):
        if not np.any(g[:, j]):
            continue
        w = (ms.b[j] - ms.b[k]) * lam
        if j >= k:
            out[:, j] = prefix_convolution(g[:, j], dp, dx, w, bound)
        else:
            out[:, j] = -suffix_convolution(g[:, j], dp, dx, w, bound)
    return out


def _series_column(ms, lam, k, v, opts):
    N, n = ms.N, ms.n
    z0 = np.zeros((N + 1, n), dtype=complex)
    z0[:, k] = 1.0
    terms = [z0]
    norms = [1.0]
    total = z0.copy()
    iterations = None
    ratios = []
    for nu in range(1, opts.max_iter + 1):
        term = apply_Vk(ms, lam, k, terms[-1], v)
        nrm = float(np.max(np.abs(term)))
        terms.append(term)
        norms.append(nrm)
        total = total + term
        if nu >= 2 and norms[nu - 2] > 1e-300:
            ratios.append(nrm / norms[nu - 2])
            if ratios[-1] >= opts.contraction_cap:
                raise NoContractionError(
                    f"no contraction at this lambda: estimated ||V^2|| >= {ratios[-1]!r} "
                    f"(cap {opts.contraction_cap!r}, column {k})",
                    estimate=ratios[-1],
                )
        if iterations is None and nrm < opts.tol_series:
            iterations = nu
        if iterations is not None and nu >= 4:
            break
        if not np.isfinite(nrm):
            raise NoContractionError("no contraction at this lambda: iterates diverge", estimate=np.inf)
    while len(terms) < 5:
        terms.append(np.zeros_like(z0))
    return total, terms[:5], iterations, ratios


def solve_Z(ms, lam, opts=None):
    """Sum the successive-approximation series for every column of Z."""
    opts = opts or SolveOptions()
    lam = complex(lam)
    _check_domain(ms, lam)
    v = coupling(ms, lam)
    N, n = ms.N, ms.n
    Z = np.zeros((N + 1, n, n), dtype=complex)
    Zt = [np.zeros((N + 1, n, n), dtype=complex) for _ in range(5)]
    its, allratios, resid = 0, [], 0.0
    unconverged = []
    for k in range(n):
        total, terms, it, ratios = _series_column(ms, lam, k, v, opts)
        Z[:, :, k] = total
        for i in range(5):
            Zt[i][:, :, k] = terms[i]
        allratios.extend(ratios)
        e_k = np.zeros(n)
        e_k[k] = 1.0
        r = float(np.max(np.abs(total - e_k - apply_Vk(ms, lam, k, total, v))))
        resid = max(resid, r)
        if it is None:
            unconverged.append(k)
            its = max(its, opts.max_iter)
        else:
            its = max(its, it)
    if unconverged and resid > opts.tol_series * 1e3:
        raise ConvergenceError(f"series not converged in {opts.max_iter} iterations (residual {resid!r})")
    stats = upsilon_stats(ms, lam, opts.mu, opts.n_samples)
    consts = proof_constants(ms, opts.mu)
    bound = consts["C0"] * (stats.ups + stats.gamma)
    return AsymptoticSolution(
        lam=lam,
        sector=ms.sector,
        Zterms=tuple(MatrixFn(t) for t in Zt),
        Z=MatrixFn(Z),
        iterations=its,
        fp_residual=resid,
        stats=stats,
        contraction_ratio=max(allratios, default=0.0),
        contraction_bound=bound,
        ratios=tuple(allratios),
        constants=consts,
        options=opts,
    )


def conjugate_exponent(mu):
    mu = float(mu)
    if np.isinf(mu):
        return 1.0
    if mu == 1.0:
        return np.inf
    return mu / (mu - 1.0)


def proof_constants(ms, mu=np.inf):
    """Explicit constants of the remainder estimates for this model."""
    n = ms.n
    a = matrix_l1(ms.A.values)
    c = ms.system.cbound(ms.sector.lam0)
    h, p = ms.sector.h, ms.ptot
    mt = l_norm(ms.AminusD, conjugate_exponent(mu))
    C0 = n * n * (a + c) * np.exp(2 * a)
    C1 = 2 * np.exp(h * p + 2 * a)
    C2 = 4 * np.exp(h * p + 4 * a) * (a + c + mt)
    C3 = 8 * np.exp(3 * h * p + 6 * a) * (a + c) * (a + c + mt)
    C4 = 2 * C2 + 2 * C3
    C5 = C4 + 2 * np.exp(h * p + 2 * a)
    return {"a": a, "c": c, "h": h, "p": p, "mtilde": mt,
            "C0": C0, "C1": C1, "C2": C2, "C3": C3, "C4": C4, "C5": C5}


def _sign(j, k):
    return -1.0 if j < k else 1.0


def _ranges(j, k, l, si, xi):
    """Node-index ranges [ia, ib] of the upsilon integrals (arrays)."""
    if j < k and l < k:
        return xi, si
    if j < k <= l:
        return np.maximum(xi, si), np.full_like(si, -1)
    if l < k <= j:
        return np.zeros_like(si), np.minimum(xi, si)
    return si, xi


class _KernelCache:
    """Stable primitives of amplitude * exp(c p(t)) used by all upsilon evaluations."""

    def __init__(self, ms, lam, amp):
        self.ms, self.lam, self.amp = ms, complex(lam), amp
        self.p = ms.p.values.real
        self._cache = {}

    def get(self, j, l):
        key = (j, l)
        if key not in self._cache:
            ms = self.ms
            q = self.amp[:, j, l]
            c = self.lam * (ms.b[l] - ms.b[j])
            if not np.any(q):
                self._cache[key] = None
            elif c.real >= 0:
                self._cache[key] = (c, True, prefix_convolution(q, ms.dp, 1.0 / ms.N, -c))
            else:
                self._cache[key] = (c, False, suffix_convolution(q, ms.dp, 1.0 / ms.N, -c))
        return self._cache[key]


def _upsilon_grid(cache, j, k, l, si, xi, guard):
    """Vectorized upsilon values for node-index arrays si, xi."""
    ms, lam, p = cache.ms, cache.lam, cache.p
    entry = cache.get(j, l)
    out = np.zeros(np.broadcast(si, xi).shape, dtype=complex)
    if entry is None:
        return out
    c, upper, H = entry
    si, xi = np.broadcast_arrays(si, xi)
    ia, ib = _ranges(j, k, l, si, xi)
    ib = np.where(ib < 0, ms.N, ib)
    ok = ia <= ib
    ia, ib, s_ok, x_ok = ia[ok], ib[ok], si[ok], xi[ok]
    const = lam * ((ms.b[j] - ms.b[k]) * p[x_ok] - (ms.b[l] - ms.b[k]) * p[s_ok])
    if upper:
        ex = c * p[ib] + const
        val = H[ib] - np.exp(c * (p[ia] - p[ib])) * H[ia]
    else:
        ex = c * p[ia] + const
        val = H[ia] - np.exp(c * (p[ib] - p[ia])) * H[ib]
    if guard is not None and ex.size and np.max(ex.real) > guard + 1e-6:
        raise ExponentBoundError(f"exponent bound violated in upsilon: {np.max(ex.real)!r} > {guard!r}")
    out[ok] = _sign(j, k) * _sign(l, k) * np.exp(ex) * val
    return out


def upsilon(ms, j, k, l, s, x, lam, amp=None):
    """Single value of the oscillatory integral upsilon_jkl(s, x, lam).

    Computed by direct cell-wise quadrature over the integration range,
    independently of the cumulative primitives used by :func:`upsilon_stats`.
    ``amp`` defaults to Q; pass R(lam) values to get the tail analogue.
    """
    lam = complex(lam)
    amp = ms.Q.values if amp is None else amp
    q = amp[:, j, l]
    if not np.any(q):
        return 0.0j
    b = ms.b
    if j < k and l < k:
        lo, hi = x, s
    elif j < k <= l:
        lo, hi = max(x, s), 1.0
    elif l < k <= j:
        lo, hi = 0.0, min(x, s)
    else:
        lo, hi = s, x
    if lo >= hi:
        return 0.0j
    N = ms.N
    nodes = np.arange(N + 1) / N
    inner = nodes[(nodes > lo) & (nodes < hi)]
    t = np.concatenate([[lo], inner, [hi]])
    pfun = ms.p
    pt, ps, px = pfun(t).real, pfun(s).real, pfun(x).real
    qt = np.interp(t, nodes, q.real) + 1j * np.interp(t, nodes, q.imag)
    E = lam * ((b[l] - b[k]) * (pt - ps) + (b[j] - b[k]) * (px - pt))
    bound = 2 * ms.sector.h * ms.ptot
    if np.max(E.real) > bound + 1e-6:
        raise ExponentBoundError(f"exponent bound violated in upsilon: {np.max(E.real)!r} > {bound!r}")
    cells = cell_integrals(qt[:-1], qt[1:], E[:-1], E[1:], np.diff(t))
    return complex(_sign(j, k) * _sign(l, k) * np.sum(cells))


def sample_indices(N, n_samples):
    return np.unique(np.round(np.linspace(0, N, n_samples)).astype(int))


def upsilon_stats(ms, lam, mu=np.inf, n_samples=64):
    """Upsilon(lam), Upsilon_mu(lam), Upsilon(x, lam) and the tail bound check."""
    lam = complex(lam)
    _check_domain(ms, lam)
    n, N = ms.n, ms.N
    mu = float(mu)
    guard = 2 * ms.sector.h * ms.ptot
    idx = sample_indices(N, n_samples)
    S, X = np.meshgrid(idx, idx, indexing="ij")
    xs = idx / N
    allx = np.arange(N + 1)
    zeros = np.zeros(N + 1, dtype=int)
    qc = _KernelCache(ms, lam, ms.Q.values)
    ups, dbl = 0.0, 0.0
    ups_x = np.zeros(N + 1)
    single = 0.0
    for j in range(n):
        for k in range(n):
            for l in range(n):
                vals = np.abs(_upsilon_grid(qc, j, k, l, S, X, guard))
                if vals.size:
                    ups = max(ups, float(vals.max()))
                if not np.isinf(mu):
                    integ = np.trapezoid(np.trapezoid(vals ** mu, xs, axis=1), xs)
                    dbl = max(dbl, float(integ) ** (1.0 / mu))
            line = np.abs(_upsilon_grid(qc, j, k, k, zeros, allx, guard))
            ups_x = np.maximum(ups_x, line)
            if not np.isinf(mu):
                single = max(single, float(np.trapezoid(line ** mu, allx / N)) ** (1.0 / mu))
    ups = max(ups, float(ups_x.max()))
    ups_mu = ups if np.isinf(mu) else dbl + single
    gam = gamma(ms.Ctail, lam)
    rho_max = 0.0
    if ms.Rtail:
        rc = _KernelCache(ms, lam, ms.R_values(lam))
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    vals = _upsilon_grid(rc, j, k, l, S, X, guard)
                    if vals.size:
                        rho_max = max(rho_max, float(np.abs(vals).max()))
    rho_bound = float(np.exp(2 * ms.sector.h * ms.ptot) * gam)
    return UpsilonStats(ups, ups_mu, GridFn(ups_x), gam, rho_max, rho_bound)


def assemble_Y(ms, sol):
    """Factored fundamental matrix in the original component order.

    Returns P = M Z, the column exponents b_k lam p(x) and the remainder
    P - M, with rows and columns mapped back from sector order.
    """
    inv = np.argsort(ms.sector.perm)
    P = ms.M.values @ sol.Z.values
    rem = P - ms.M.values
    P = P[:, inv][:, :, inv]
    rem = rem[:, inv][:, :, inv]
    ex = ms.expE(sol.lam)[:, inv]
    return FactoredMatrix(P, ex, rem)
