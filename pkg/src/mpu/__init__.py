"""Monte Carlo laboratory for local laws and universality of sample covariance matrices."""
from .ensemble import EnsembleSpec, gaussian_interpolate, moment_profile, sample_matrix
from .errors import (ConfigError, DataError, DegenerateInputError, DomainError, FitError,
                     MPUError, NumericalError, ParameterError, PreconditionError, StateError)
from .mp_model import ClassicalLocations, MPModel
from .spectral import SpectralPoint, Spectrum, covariance_spectrum

__version__ = "0.1.0"

__all__ = ["EnsembleSpec", "sample_matrix", "gaussian_interpolate", "moment_profile", "MPModel",
           "ClassicalLocations", "Spectrum", "SpectralPoint", "covariance_spectrum", "MPUError",
           "ConfigError", "ParameterError", "DataError", "DomainError", "DegenerateInputError",
           "StateError", "NumericalError", "FitError", "PreconditionError", "__version__"]
