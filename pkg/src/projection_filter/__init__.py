"""Exponential-family projection filter with quadrature-based log-partition evaluation."""
__version__ = "0.1.0"

from .errors import (AssumptionError, CapabilityError, ConfigError, DegeneracyError, DomainError,
                     IntegrabilityError, NumericalInstabilityError, SingularFisherError, StepFailure,
                     StructuralError)
from .expfam import (Bijection, MomentData, PreparedManifold, density_at, gaussian_to_natural, log_partition,
                     natural_to_gaussian, prepare)
from .kernels import BACKEND
from .metrics import ComparisonTrace, hellinger, moment_trace
from .polyalg import CoefficientSet, ModelSpec, Polynomial, StatisticsBasis, assemble_coefficients
from .projfilter import FilterState, MeasurementPath, ProjectionFilter, Trajectory
from .quadrature import QuadratureGrid, clenshaw_curtis, gauss_chebyshev, gauss_patterson, halton, smolyak

__all__ = [
    "AssumptionError", "BACKEND", "Bijection", "CapabilityError", "CoefficientSet", "ComparisonTrace",
    "ConfigError", "DegeneracyError", "DomainError", "FilterState", "IntegrabilityError", "MeasurementPath",
    "ModelSpec", "MomentData", "NumericalInstabilityError", "Polynomial", "PreparedManifold", "ProjectionFilter",
    "QuadratureGrid", "SingularFisherError", "StatisticsBasis", "StepFailure", "StructuralError", "Trajectory",
    "assemble_coefficients", "clenshaw_curtis", "density_at", "gauss_chebyshev", "gauss_patterson",
    "gaussian_to_natural", "halton", "hellinger", "log_partition", "moment_trace", "natural_to_gaussian",
    "prepare", "smolyak",
]
