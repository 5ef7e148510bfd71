"""Spectral 1/f^alpha noise, form factors and phase-space return
probabilities for a driven double well and random-matrix references."""

from .model import ModelParams, HarmonicParams, potential, force, static_hamiltonian

__version__ = "0.1.0"

__all__ = ["ModelParams", "HarmonicParams", "potential", "force", "static_hamiltonian",
           "__version__"]
