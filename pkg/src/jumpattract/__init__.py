"""Jump dynamics with attraction: kernels, Monte Carlo, correlation hierarchy, bounds."""
from .kernels import (
    KernelModel,
    RadialProfile,
    StabilityReport,
    TorusDomain,
    compute_phi,
    eval_a,
    eval_b,
    exponential,
    gaussian,
    stability_check,
    tabulated,
    tophat,
    zero_profile,
)
from .configurations import FiniteConfiguration, big_phi, psi, psi_omega

__version__ = "0.1.0"

__all__ = ["KernelModel", "RadialProfile", "StabilityReport", "TorusDomain", "compute_phi", "eval_a", "eval_b",
           "exponential", "gaussian", "stability_check", "tabulated", "tophat", "zero_profile",
           "FiniteConfiguration", "big_phi", "psi", "psi_omega"]
