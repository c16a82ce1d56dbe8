"""Estimator-style wrappers around the construction pipeline.

``FundamentalSystemSolver.fit`` does the lam-independent work (sectors and
the model equation); ``predict`` evaluates the fundamental matrix at one or
more spectral parameters.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ValidationError
from .highorder import HighOrderProblem, assemble_fsr, build_system
from .model import SystemCoeffs, build_model
from .sectors import extend, make_sectors
from .solver import SolveOptions, assemble_Y, solve_Z
from .verify import decay_sweep


def check_system(system):
    if not isinstance(system, SystemCoeffs):
        raise ValidationError(f"expected SystemCoeffs, got {type(system).__name__}")
    return system


def check_lambdas(lam):
    arr = np.atleast_1d(np.asarray(lam, dtype=complex))
    if arr.ndim != 1:
        raise ValidationError("spectral parameters must be a scalar or a 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("spectral parameters must be finite")
    return arr


class FundamentalSystemSolver(BaseEstimator):
    """Asymptotic fundamental matrix of y' = (lam rho B + A + C(lam)) y in one sector.

    Parameters
    ----------
    sector : int
        1-based index of the sector (counted counterclockwise from the ray
        at or below angle 0).
    shift : float
        Distance the sector is translated outward to cover its boundary strips.
    lambda_min : float
        Floor for the modulus of admissible spectral parameters.
    max_iter, tol, mu, contraction_cap, n_samples
        Passed to :class:`SolveOptions`.
    """

    def __init__(self, sector=1, shift=5.0, lambda_min=1.0, max_iter=40, tol=1e-12, mu=np.inf,
                 contraction_cap=0.9, n_samples=64):
        self.sector = sector
        self.shift = shift
        self.lambda_min = lambda_min
        self.max_iter = max_iter
        self.tol = tol
        self.mu = mu
        self.contraction_cap = contraction_cap
        self.n_samples = n_samples

    def _options(self):
        return SolveOptions(self.max_iter, self.tol, self.mu, self.contraction_cap, self.n_samples)

    def fit(self, system, y=None):
        system = check_system(system)
        if self.shift < 0:
            raise ValidationError("shift must be non-negative")
        secs = make_sectors(system.B)
        if not 1 <= self.sector <= len(secs):
            raise ValidationError(f"sector index {self.sector} out of range 1..{len(secs)}")
        self.options_ = self._options()
        self.sectors_ = secs
        self.sector_ = extend(secs[self.sector - 1], self.shift, system.B, self.lambda_min, secs)
        self.model_ = build_model(system, self.sector_)
        self.system_ = system
        return self

    def solve(self, lam):
        """Full :class:`AsymptoticSolution` at a single lam."""
        check_is_fitted(self, "model_")
        return solve_Z(self.model_, complex(lam), self.options_)

    def predict(self, lam):
        """Factored fundamental matrices, one per spectral parameter."""
        check_is_fitted(self, "model_")
        out = []
        for l in check_lambdas(lam):
            out.append(assemble_Y(self.model_, self.solve(l)))
        return out

    def sweep(self, angle, moduli):
        check_is_fitted(self, "model_")
        return decay_sweep(self.model_, angle, moduli, self.options_)


class HighOrderReducer(TransformerMixin, BaseEstimator, auto_wrap_output_keys=None):
    """Reduce an even-order expression to a first-order system.

    ``transform`` returns the :class:`SystemCoeffs` of the reduced system
    (of the fitted problem when called without an argument);
    the full reduction (W, F blocks, cross-check) is kept in ``reduced_``.
    """

    def __init__(self, rho_min=1e-9):
        self.rho_min = rho_min

    def fit(self, problem, y=None):
        if not isinstance(problem, HighOrderProblem):
            raise ValidationError(f"expected HighOrderProblem, got {type(problem).__name__}")
        self.reduced_ = build_system(problem, self.rho_min)
        self.problem_ = problem
        return self

    def transform(self, X=None):
        check_is_fitted(self, "reduced_")
        if X is not None and X is not self.problem_:
            return build_system(X, self.rho_min).system
        return self.reduced_.system

    def quasi_derivatives(self, Y, lam):
        """Quasi-derivative table of the solutions behind a factored matrix Y."""
        check_is_fitted(self, "reduced_")
        return assemble_fsr(self.reduced_, Y, lam)
