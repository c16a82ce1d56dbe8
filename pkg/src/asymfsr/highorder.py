"""Even-order expressions with distributional coefficients as first-order systems.

The expression of order n = 2m is given through the leading coefficient
tau0 > 0, the spectral weight varrho > 0 and the primitives T_1..T_m,
S_0..S_{m-1} of its lower coefficients.  With quasi-derivatives
u_j = lam^(1-j) y^[j-1] the equation l(y) = lam^n varrho y becomes
u' = (lam F_1 + F_0 + sum_k lam^-k F_-k) u, and the constant-in-lam
similarity W diagonalizes F_1 to rho diag(omega).  The result is a system
y' = (lam rho B + A + C(lam)) y handled by the rest of the package.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from .exceptions import ValidationError
from .funcspace import GridFn, MatrixFn, Weight, antiderivative, l_norm
from .model import SystemCoeffs
from .sectors import DiagB


@dataclass(frozen=True)
class HighOrderProblem:
    """Normal-form data of an expression of order 2m.

    Attributes:
        m: half-order.
        tau0: leading coefficient samples.
        rho: spectral weight samples (varrho).
        T: primitives T_1..T_m.
        S: primitives S_0..S_{m-1}.
        mu_prime: declared integrability exponent of the lower coefficients.
    """

    m: int
    tau0: GridFn
    rho: GridFn
    T: tuple
    S: tuple
    mu_prime: float = None

    def __post_init__(self):
        object.__setattr__(self, "T", tuple(self.T))
        object.__setattr__(self, "S", tuple(self.S))

    @property
    def n(self):
        return 2 * self.m

    @property
    def N(self):
        return self.tau0.N

    def phi(self, k):
        """phi_k = T_k + i S_{k-1}, k = 1..m (nodal values)."""
        return self.T[k - 1].values + 1j * self.S[k - 1].values

    def psi(self, k):
        """psi_k = T_k - i S_{k-1}, k = 1..m (nodal values)."""
        return self.T[k - 1].values - 1j * self.S[k - 1].values


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    errors: tuple = ()
    warnings: tuple = ()
    norms: dict = field(default_factory=dict)


def validate(problem, large=1e6):
    """Check positivity, shapes and the L2 integrability conditions."""
    errors, warnings, norms = [], [], {}
    m = problem.m
    if not isinstance(m, (int, np.integer)) or m < 1:
        return ValidationReport(False, (f"half-order must be a positive integer, got {m!r}",))
    if len(problem.T) != m or len(problem.S) != m:
        errors.append(f"need {m} primitives T_1..T_m and {m} primitives S_0..S_(m-1)")
    tau = np.asarray(problem.tau0.values)
    rho = np.asarray(problem.rho.values)
    N = problem.N
    for name, f in [("rho", problem.rho)] + [(f"T{k + 1}", t) for k, t in enumerate(problem.T)] + \
            [(f"S{k}", s) for k, s in enumerate(problem.S)]:
        if f.N != N:
            errors.append(f"{name} is on {f.N} cells, expected {N}")
    if errors:
        return ValidationReport(False, tuple(errors))
    if np.any(np.abs(tau.imag) > 0) or np.any(tau.real <= 0):
        errors.append("leading coefficient not positive")
    if np.any(np.abs(rho.imag) > 0) or np.any(rho.real <= 0):
        errors.append("spectral weight not positive")
    if errors:
        return ValidationReport(False, tuple(errors))
    root = np.sqrt(tau.real)
    with np.errstate(all="ignore"):
        norms["inv_sqrt_tau0"] = l_norm(1.0 / root, 2)
        for k, t in enumerate(problem.T):
            norms[f"T{k + 1}"] = l_norm(t.values / root, 2)
        for k, s in enumerate(problem.S):
            norms[f"S{k}"] = l_norm(s.values / root, 2)
    for key, val in norms.items():
        if not np.isfinite(val):
            errors.append(f"L2 norm of {key}/sqrt(tau0) is not finite")
        elif val > large:
            warnings.append(f"L2 norm of {key}/sqrt(tau0) is large ({val!r})")
    return ValidationReport(not errors, tuple(errors), tuple(warnings), norms)


def _clean(z):
    z = complex(z)
    re = 0.0 if abs(z.real) < 1e-15 else z.real
    im = 0.0 if abs(z.imag) < 1e-15 else z.imag
    return complex(re, im)


def omegas(m):
    """The n = 2m roots of z^n = (-1)^m in the order used for B."""
    if m < 1:
        raise ValidationError("half-order must be positive")
    n = 2 * m
    if m % 2:
        return [_clean(np.exp(1j * np.pi * (2 * k + 1) / n)) for k in range(n)]
    return [_clean(np.exp(2j * np.pi * k / n)) for k in range(n)]


def f_matrix(problem):
    """Nodal values of the matrix f_jk of the quasi-derivative system, shape (N+1, n, n)."""
    m, n, N = problem.m, problem.n, problem.N
    tau = problem.tau0.values.real
    f = np.zeros((N + 1, n, n), dtype=complex)

    def put(j, k, val):  # 1-based indices
        f[:, j - 1, k - 1] = val

    for j in range(1, n):
        put(j, j + 1, 1.0 / tau if j == m else 1.0)
    for k in range(1, m + 1):
        put(m, k, (-1) ** (m - k) * problem.phi(m + 1 - k) / tau)
    for j in range(m + 1, n + 1):
        put(j, m + 1, -problem.psi(j - m) / tau)
    for k in range(1, m + 1):
        for j in range(0, m):
            val = (-1) ** (j + 1) * problem.phi(j + 1) * problem.psi(k) / tau
            if j + k < m:
                r = j + k + 1
                val = val + (-1) ** j * comb(r, k) * (
                    problem.T[r - 1].values + 1j * (j - k + 1) / r * problem.S[j + k].values)
            put(m + k, m - j, val)
    return f


def build_F(problem):
    """Split the system matrix by powers of lam: (F_1, F_0, [F_-1, ..., F_-(n-1)])."""
    m, n = problem.m, problem.n
    f = f_matrix(problem)
    j, k = np.indices((n, n))
    F1 = np.where(k - j == 1, f, 0.0)
    F1[:, n - 1, 0] += (-1) ** m * problem.rho.values.real
    F0 = np.where(j == k, f, 0.0)
    Fneg = [MatrixFn(np.where(j - k == s, f, 0.0)) for s in range(1, n)]
    return MatrixFn(F1), MatrixFn(F0), Fneg


def spectral_rho(problem):
    n = problem.n
    return problem.rho.values.real ** (1.0 / n) * problem.tau0.values.real ** (-1.0 / n)


def diagonalize(problem):
    """W with w_jk = (omega_(k-1) rho)^(j-1) [tau0 if j > m] and its closed-form inverse."""
    m, n = problem.m, problem.n
    om = np.array(omegas(m))
    rho = spectral_rho(problem)
    tau = problem.tau0.values.real
    j = np.arange(n)
    base = om[None, None, :] * rho[:, None, None]  # (N+1, 1, n)
    W = base ** j[None, :, None]
    W[:, m:, :] *= tau[:, None, None]
    inv_base = om[None, :, None] * rho[:, None, None]  # indexed by row
    Wi = inv_base ** (-j[None, None, :]) / n
    Wi[:, :, m:] /= tau[:, None, None]
    return MatrixFn(W), MatrixFn(Wi)


def coupling_formula(problem):
    """Closed-form matrix A of the reduced system at the nodes."""
    m, n, N = problem.m, problem.n, problem.N
    rho_w = problem.rho.values.real
    tau = problem.tau0.values.real
    lr = np.gradient(rho_w, 1.0 / N, edge_order=2) / rho_w
    lt = np.gradient(tau, 1.0 / N, edge_order=2) / tau
    phi1, psi1 = problem.phi(1), problem.psi(1)
    sigma0 = problem.S[0].values
    A = np.zeros((N + 1, n, n), dtype=complex)
    for j in range(1, n + 1):
        for k in range(1, n + 1):
            if j == k:
                A[:, j - 1, k - 1] = ((1 - n) / 2 * lr - 0.5 * lt + 2j * sigma0 / tau) / n
                continue
            e_kj = np.exp(1j * np.pi * (k - j) / m)
            e_jk = np.exp(1j * np.pi * (j - k) / m)
            if abs(1 - e_kj) < 1e-12:
                raise AssertionError("epsilon_(k-j) = 1 for j != k")
            e_m = (-1.0) ** (k - j)
            A[:, j - 1, k - 1] = ((lr - e_m * lt) / (1 - e_kj) + e_m / tau * (phi1 * e_jk - psi1)) / n
    return A


def W_derivative(problem):
    """x-derivative of W by the chain rule through rho and tau0."""
    m, n, N = problem.m, problem.n, problem.N
    om = np.array(omegas(m))
    rho = spectral_rho(problem)
    tau = problem.tau0.values.real
    rho_w = problem.rho.values.real
    lr = np.gradient(rho_w, 1.0 / N, edge_order=2) / rho_w
    taup = np.gradient(tau, 1.0 / N, edge_order=2)
    rhop = rho * (lr - taup / tau) / n
    j = np.arange(n)[None, :, None]
    base = om[None, None, :] * rho[:, None, None]
    dW = j * base ** np.maximum(j - 1, 0) * om[None, None, :] * rhop[:, None, None]
    dW[:, m:, :] *= tau[:, None, None]
    dW[:, m:, :] += (base ** j)[:, m:, :] * taup[:, None, None]
    return dW


def coupling_similarity(problem, W=None, dW=None):
    """A = -W^-1 W' + W^-1 F_0 W with a numerical inverse of W."""
    W = diagonalize(problem)[0].values if W is None else W
    dW = W_derivative(problem) if dW is None else dW
    F0 = build_F(problem)[1].values
    Winv = np.linalg.inv(W)
    return -Winv @ dW + Winv @ F0 @ W


@dataclass(frozen=True)
class ReducedSystem:
    system: SystemCoeffs
    W: MatrixFn
    W_inv: MatrixFn
    F1: MatrixFn
    F0: MatrixFn
    Fneg: tuple
    omega: tuple
    rho: Weight
    problem: HighOrderProblem
    A_crosscheck: float


def build_system(problem, rho_min=1e-9):
    """Reduce the expression to (B, rho, A, C tail)."""
    report = validate(problem)
    if not report.ok:
        raise ValidationError("; ".join(report.errors))
    om = omegas(problem.m)
    W, Wi = diagonalize(problem)
    F1, F0, Fneg = build_F(problem)
    A = coupling_formula(problem)
    cross = float(np.max(np.abs(A - coupling_similarity(problem, W.values))))
    Ctail = tuple(MatrixFn(Wi.values @ Fk.values @ W.values) for Fk in Fneg)
    rho = Weight(spectral_rho(problem), rho_min)
    system = SystemCoeffs(DiagB(om), rho, MatrixFn(A), Ctail, problem.mu_prime)
    return ReducedSystem(system, W, Wi, F1, F0, tuple(Fneg), tuple(om), rho, problem, cross)


def leading_exponents(n, j):
    """Powers of (varrho, tau0) in the leading term of y^[j], as exact fractions."""
    m = n // 2
    rp = Fraction(2 * j - n + 1, 2 * n)
    tp = -Fraction(1 + 2 * j, 2 * n) + (1 if j >= m else 0)
    return rp, tp


def exponents_from_similarity(n, j):
    """The same powers composed from row j+1 of W, rho and the model factor."""
    m = n // 2
    # model factor exp(int a_jj) carries varrho^((1-n)/(2n)) tau0^(-1/(2n))
    rp = Fraction(1 - n, 2 * n)
    tp = Fraction(-1, 2 * n)
    # (omega rho)^j with rho = varrho^(1/n) tau0^(-1/n)
    rp += Fraction(j, n)
    tp -= Fraction(j, n)
    if j + 1 > m:
        tp += 1
    return rp, tp


@dataclass(frozen=True)
class QuasiDerivativeTable:
    """y_k^[j](x, lam) = lam^j * (leading + zeta)[j, k] * exp(exponents[:, k]).

    ``full`` holds the computed prefactors, ``leading`` the closed-form
    leading terms and ``zeta`` their difference; all of shape (N+1, n, n)
    indexed [node, j, k].
    """

    full: np.ndarray
    leading: np.ndarray
    zeta: np.ndarray
    exponents: np.ndarray
    lambda_powers: tuple


def leading_terms(problem):
    """Closed-form leading prefactors omega_k^j varrho^a tau0^b exp((2i/n) int sigma0/tau0)."""
    n, N = problem.n, problem.N
    om = np.array(omegas(problem.m))
    rho_w = problem.rho.values.real
    tau = problem.tau0.values.real
    phase = np.exp(2j / n * antiderivative(problem.S[0].values / tau))
    out = np.empty((N + 1, n, n), dtype=complex)
    for j in range(n):
        rp, tp = leading_exponents(n, j)
        out[:, j, :] = (om[None, :] ** j) * (rho_w ** float(rp) * tau ** float(tp) * phase)[:, None]
    return out


def assemble_fsr(reduced, Y, lam):
    """Quasi-derivative table from the factored fundamental matrix of the reduced system.

    Args:
        reduced: output of :func:`build_system`.
        Y: factored matrix in original component order (see ``solver.assemble_Y``).
        lam: spectral parameter the solution was computed for.
    """
    prob = reduced.problem
    n = prob.n
    if Y.P.shape[1:] != (n, n) or Y.P.shape[0] != prob.N + 1:
        raise ValidationError("dimension mismatch between reduced system and solution")
    scale = prob.rho.values.real[0] ** ((1 - n) / (2 * n)) * prob.tau0.values.real[0] ** (-1 / (2 * n))
    full = reduced.W.values @ Y.P * scale
    lead = leading_terms(prob)
    return QuasiDerivativeTable(full, lead, full - lead, np.array(Y.exponents), tuple(range(n)))
