"""Non-Hermitian superradiance in random-coupled open quantum systems."""
from nhsr.ensemble import DecayingSubspace, sample_subspace
from nhsr.errors import ConfigError, EpCountError, NhsrError, SolverError
from nhsr.open_system import ComplexSpectrum, assemble, eig
from nhsr.quasispin import InitialSpectrum, Model, initial_spectrum

__version__ = "0.1.0"

__all__ = [
    "ComplexSpectrum", "ConfigError", "DecayingSubspace", "EpCountError", "InitialSpectrum", "Model", "NhsrError",
    "SolverError", "assemble", "eig", "initial_spectrum", "sample_subspace", "__version__",
]
