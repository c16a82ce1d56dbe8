"""Asymptotic fundamental systems of ODE systems with a large spectral parameter."""

from .estimator import FundamentalSystemSolver, HighOrderReducer
from .exceptions import (AsymfsrError, ConvergenceError, ExponentBoundError, NoContractionError, NumericalError,
                         OracleUnavailable, OutsideDomainError, SectorGeometryError, ValidationError)
from .funcspace import GridFn, MatrixFn, Weight, mesh
from .highorder import HighOrderProblem, ReducedSystem, assemble_fsr, build_system
from .model import FactoredMatrix, ModelSolution, SystemCoeffs, build_model
from .sectors import DiagB, ExtendedSector, Sector, boundary_rays, contains, extend, make_sectors
from .solver import AsymptoticSolution, SolveOptions, assemble_Y, solve_Z, upsilon, upsilon_stats

__all__ = [
    "AsymfsrError", "AsymptoticSolution", "ConvergenceError", "DiagB", "ExponentBoundError", "ExtendedSector",
    "FactoredMatrix", "FundamentalSystemSolver", "GridFn", "HighOrderProblem", "HighOrderReducer", "MatrixFn",
    "ModelSolution", "NoContractionError", "NumericalError", "OracleUnavailable", "OutsideDomainError",
    "ReducedSystem", "Sector", "SectorGeometryError", "SolveOptions", "SystemCoeffs", "ValidationError", "Weight",
    "assemble_Y", "assemble_fsr", "boundary_rays", "build_model", "build_system", "contains", "extend",
    "make_sectors", "mesh", "solve_Z", "upsilon", "upsilon_stats",
]
