"""Anisotropic scaling limits of stationary random fields on the square lattice.

Modules:
    spectral_models    spectral density families and their validation
    quadrature         singular and oscillatory integration engine
    scaling_theory     Hurst pairs, normalizations, limit constants and covariances
    covariance_oracle  exact finite-scale covariances
    field_synth        moving-average synthesis of lattice fields
    scaling_lab        scaling experiments, exponent fits and kink detection
    cli                command-line front end
"""
from .spectral_models import FlatSpectrum, ModelError, SpectralModel
from .scaling_theory import ExcludedParameterError, predict

__all__ = ["SpectralModel", "FlatSpectrum", "ModelError", "ExcludedParameterError", "predict"]
__version__ = "0.1.0"
