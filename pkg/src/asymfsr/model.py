"""The system y' = (lam rho B + A + C(lam)) y and its model equation.

The model equation keeps only the part D of A that couples equal entries of
B.  Its fundamental matrix is E(x, lam) M(x) with E = diag(exp(b_j lam p))
and M' = D M, M(0) = I.  Conjugating the rest of A and the tail C by M
gives the matrices Q and R that drive the remainder.
"""

from dataclasses import dataclass, field

import numpy as np

from ._picard import picard_solve
from .exceptions import ConvergenceError, ValidationError
from .funcspace import GridFn, MatrixFn, Weight, antiderivative, matrix_l1
from .sectors import DiagB


@dataclass(frozen=True)
class SystemCoeffs:
    """Discretized coefficients of y' = lam rho B y + A y + sum_k lam^-k C_k y.

    Attributes:
        B: diagonal of the constant leading matrix.
        rho: positive weight.
        A: lambda-independent coefficient matrix.
        Ctail: matrices C_1..C_K of the tail (empty for C = 0).
        mu_prime: declared integrability exponent of A (None if unspecified).
    """

    B: DiagB
    rho: Weight
    A: MatrixFn
    Ctail: tuple = ()
    mu_prime: float = None

    def __post_init__(self):
        B = self.B if isinstance(self.B, DiagB) else DiagB(self.B)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Ctail", tuple(self.Ctail))
        n, N = B.n, self.rho.N
        if self.A.n != n or self.A.N != N:
            raise ValidationError(f"A must be {n}x{n} on {N} cells")
        for k, C in enumerate(self.Ctail):
            if C.n != n or C.N != N:
                raise ValidationError(f"tail matrix C_{k + 1} must be {n}x{n} on {N} cells")

    @property
    def n(self):
        return self.B.n

    @property
    def N(self):
        return self.rho.N

    @property
    def a(self):
        return matrix_l1(self.A.values)

    def cbound(self, lam0):
        """Upper estimate of sup_{|lam| > lam0} ||C(., lam)||_{L1}."""
        return float(sum(matrix_l1(C.values) * lam0 ** -(k + 1) for k, C in enumerate(self.Ctail)))

    def C_values(self, lam):
        """Nodal values of C(x, lam)."""
        out = np.zeros_like(self.A.values)
        for k, C in enumerate(self.Ctail):
            out = out + C.values * complex(lam) ** -(k + 1)
        return out

    def resample(self, N):
        return SystemCoeffs(self.B, self.rho.resample(N), self.A.resample(N),
                            tuple(C.resample(N) for C in self.Ctail), self.mu_prime)


@dataclass(frozen=True)
class FactoredMatrix:
    """Matrix function P(x) exp(diag(exponents)) kept in factored form.

    ``exponents[i, k]`` multiplies column k at node i.
    """

    P: np.ndarray
    exponents: np.ndarray
    remainder: np.ndarray = None

    @property
    def N(self):
        return self.P.shape[0] - 1

    def values(self, max_real=700.0):
        if np.max(self.exponents.real, initial=-np.inf) > max_real:
            raise ValidationError("refusing to exponentiate: real exponent above the double range")
        return self.P * np.exp(self.exponents)[:, None, :]


@dataclass(frozen=True)
class ModelSolution:
    """Model-equation data in sector order (see ``sector.perm``)."""

    system: SystemCoeffs
    sector: object
    b: np.ndarray
    p: GridFn
    D: MatrixFn
    AminusD: MatrixFn
    M: MatrixFn
    M_inv: MatrixFn
    Q: MatrixFn
    Rtail: tuple
    A: MatrixFn
    Ctail: tuple
    info: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.b.size

    @property
    def N(self):
        return self.p.N

    @property
    def dp(self):
        return np.diff(self.p.values.real)

    @property
    def ptot(self):
        return float(self.p.values[-1].real)

    def expE(self, lam, j=None):
        """Exponents b_j lam p(x) at the nodes (never exponentiated here)."""
        e = np.outer(self.p.values.real, self.b * complex(lam))
        return e if j is None else e[:, j]

    def R_values(self, lam):
        out = np.zeros_like(self.Q.values)
        for k, R in enumerate(self.Rtail):
            out = out + R.values * complex(lam) ** -(k + 1)
        return out

    def C_values(self, lam):
        out = np.zeros_like(self.Q.values)
        for k, C in enumerate(self.Ctail):
            out = out + C.values * complex(lam) ** -(k + 1)
        return out


def permute(values, perm):
    perm = list(perm)
    return np.asarray(values)[:, perm][:, :, perm]


def split_D(A, sector_or_b):
    """Split A = D + (A - D), D keeping the entries where b_j = b_k.

    ``sector_or_b`` is the diagonal of B already in sector order.
    """
    b = np.asarray(sector_or_b, dtype=complex)
    mask = b[:, None] == b[None, :]
    vals = A.values
    D = np.where(mask, vals, 0.0)
    return MatrixFn(D), MatrixFn(vals - D)


def _block_slices(blocks):
    out, start = [], 0
    for size in blocks:
        out.append(slice(start, start + size))
        start += size
    return out


def solve_M(D, blocks, a=None):
    """Fundamental matrix of M' = D M, M(0) = I, and of (M^-1)' = -M^-1 D.

    Diagonal blocks use the exact exponential of the primitive; coupled
    blocks are solved by successive approximations on the mesh.
    """
    vals = D.values
    N, n = D.N, D.n
    if sum(blocks) != n:
        raise ValidationError("block sizes must add up to n")
    a = matrix_l1(vals) if a is None else a
    tol = 1e-12 * np.exp(a)
    M = np.zeros((N + 1, n, n), dtype=complex)
    Mi = np.zeros_like(M)
    for sl in _block_slices(blocks):
        blk = vals[:, sl, sl]
        size = blk.shape[1]
        off = blk * (1 - np.eye(size))
        if not np.any(off):
            prim = antiderivative(np.diagonal(blk, axis1=1, axis2=2))
            idx = np.arange(sl.start, sl.stop)
            M[:, idx, idx] = np.exp(prim)
            Mi[:, idx, idx] = np.exp(-prim)
            continue
        eye = np.eye(size, dtype=complex)
        try:
            mb, _ = picard_solve(blk, eye, 0.0, tol=min(tol, 1e-10))
            mib_t, _ = picard_solve(-np.transpose(blk, (0, 2, 1)), eye, 0.0, tol=min(tol, 1e-10))
        except ConvergenceError as exc:
            raise ConvergenceError(f"model matrix M: {exc}") from exc
        M[:, sl, sl] = mb
        Mi[:, sl, sl] = np.transpose(mib_t, (0, 2, 1))
    return MatrixFn(M), MatrixFn(Mi)


def conjugate(AminusD, Ctail, M, M_inv, b=None):
    """Q = M^-1 (A - D) M and R_k = M^-1 C_k M at the nodes."""
    Mv, Miv = M.values, M_inv.values
    Q = Miv @ AminusD.values @ Mv
    if b is not None:
        b = np.asarray(b)
        same = b[:, None] == b[None, :]
        if np.any(Q[:, same] != 0):
            raise AssertionError("conjugated coupling not zero on equal-b pairs")
    Rt = tuple(MatrixFn(Miv @ C.values @ Mv) for C in Ctail)
    return MatrixFn(Q), Rt


def gamma(Ctail, lam):
    """||C(., lam)||_{L1} for C = sum_k lam^-k C_k."""
    if not Ctail:
        return 0.0
    lam = complex(lam)
    if lam == 0:
        raise ValidationError("gamma undefined at lam = 0 for a nonempty tail")
    total = sum(C.values * lam ** -(k + 1) for k, C in enumerate(Ctail))
    return matrix_l1(total)


def build_model(system, sector):
    """Permute the system into sector order and solve the model equation."""
    perm = list(sector.perm)
    b = system.B.array()[perm]
    A = MatrixFn(permute(system.A.values, perm))
    Ct = tuple(MatrixFn(permute(C.values, perm)) for C in system.Ctail)
    p = antiderivative(GridFn(system.rho.real_values))
    p = GridFn(p.values.real)
    D, AmD = split_D(A, b)
    a = system.a
    M, Mi = solve_M(D, sector.blocks, a)
    Q, Rt = conjugate(AmD, Ct, M, Mi, b)
    return ModelSolution(system, sector, b, p, D, AmD, M, Mi, Q, Rt, A, Ct, {"a": a})


def model_Y0(ms, lam):
    """Factored model solution: prefactor M(x) and column exponents b_k lam p(x)."""
    return FactoredMatrix(np.array(ms.M.values), ms.expE(lam))
