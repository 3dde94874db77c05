"""Embedded eigenvalue of a planar bilaplacian with a compactly supported radial potential."""

from .config import RunConfig, load_config
from .estimators import EmbeddedEigenvalueSolver, PersistenceTransformer
from .model import Perturbation, PolynomialBump, RadialGrid, default_potential, r_norm
from .persistence import decompose, gprime, persistence_report
from .spectral import SpectralResult, find_eigenvalue, simplicity_scan

__all__ = ["RunConfig", "load_config", "EmbeddedEigenvalueSolver", "PersistenceTransformer",
           "Perturbation", "PolynomialBump", "RadialGrid", "default_potential", "r_norm",
           "decompose", "gprime", "persistence_report", "SpectralResult", "find_eigenvalue",
           "simplicity_scan"]
